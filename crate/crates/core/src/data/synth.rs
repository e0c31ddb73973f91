//! Synthetic well blocks with a known production mechanism.
//!
//! Each well has a latent reservoir-quality profile `q(z)`: a few Gaussian
//! bumps inside its formations plus low-amplitude smooth noise. The seven
//! log curves are noisy transforms of `q` mixed with slowly varying nuisance
//! signals. A formation's production is
//! `scale · ∫ max(q − threshold, 0) dz · count^exponent + base + noise`,
//! integrated over its perforated interval. The integral depends on where
//! `q` crosses the threshold, which formation-averaged curves do not reveal.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    write_attributes, write_curves, AttributeRow, Depth, RawWellData, WellCurves, ATTRIBUTES_FILE,
    CURVES_FILE, CURVE_CHANNELS,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub wells: usize,
    pub min_formations: usize,
    pub max_formations: usize,
    pub seed: u64,
    /// Curve sample spacing in metres.
    pub spacing: f64,
    /// Scale of white measurement noise on the curves (1 = default levels).
    pub curve_noise: f64,
    /// Standard deviation of the label noise as a fraction of the label.
    pub label_noise: f64,
    pub production: ProductionFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProductionFunction {
    /// t/d per metre of quality exceedance.
    pub scale: f64,
    pub threshold: f64,
    pub count_exponent: f64,
    /// Production floor in t/d.
    pub base: f64,
}

impl Default for ProductionFunction {
    fn default() -> Self {
        Self {
            scale: 20.0,
            threshold: 0.8,
            count_exponent: 0.3,
            base: 2.0,
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            wells: 180,
            min_formations: 2,
            max_formations: 4,
            seed: 7,
            spacing: 0.5,
            curve_noise: 1.0,
            label_noise: 0.1,
            production: ProductionFunction::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        if self.min_formations == 0 || self.min_formations > self.max_formations {
            return Err(Error::InvalidArgument(format!(
                "formations per well range {}..={} is empty",
                self.min_formations, self.max_formations
            )));
        }
        if self.curve_noise < 0.0 || self.label_noise < 0.0 {
            return Err(Error::InvalidArgument(
                "noise levels must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

struct Bump {
    center: f64,
    width: f64,
    amplitude: f64,
}

struct Wave {
    amplitude: f64,
    wavelength: f64,
    phase: f64,
}

impl Wave {
    fn random(rng: &mut RngStream, amplitude: f64, wavelengths: (f64, f64)) -> Self {
        Wave {
            amplitude,
            wavelength: rng.uniform_range(wavelengths.0, wavelengths.1),
            phase: rng.uniform_range(0.0, TAU),
        }
    }

    fn at(&self, z: f64) -> f64 {
        self.amplitude * (TAU * z / self.wavelength + self.phase).sin()
    }
}

/// A slowly varying unit-scale signal: random offset plus long waves.
struct Nuisance {
    offset: f64,
    waves: [Wave; 2],
}

impl Nuisance {
    fn random(rng: &mut RngStream) -> Self {
        Nuisance {
            offset: rng.standard_normal(),
            waves: [
                Wave::random(rng, 0.7, (30.0, 120.0)),
                Wave::random(rng, 0.7, (30.0, 120.0)),
            ],
        }
    }

    fn at(&self, z: f64) -> f64 {
        self.offset + self.waves.iter().map(|w| w.at(z)).sum::<f64>()
    }
}

struct Quality {
    bumps: Vec<Bump>,
    ripple: [Wave; 3],
}

impl Quality {
    fn at(&self, z: f64) -> f64 {
        let bumps: f64 = self
            .bumps
            .iter()
            .map(|b| b.amplitude * (-0.5 * ((z - b.center) / b.width).powi(2)).exp())
            .sum();
        bumps + self.ripple.iter().map(|w| w.at(z)).sum::<f64>()
    }

    /// Trapezoidal `∫ max(q − threshold, 0) dz` over `[from, to]`.
    fn exceedance(&self, from: f64, to: f64, threshold: f64) -> f64 {
        const STEP: f64 = 0.02;
        let n = ((to - from) / STEP).ceil().max(1.0) as usize;
        let h = (to - from) / n as f64;
        let f = |i: usize| (self.at(from + h * i as f64) - threshold).max(0.0);
        let inner: f64 = (1..n).map(f).sum();
        h * (inner + 0.5 * (f(0) + f(n)))
    }
}

fn decimetres(rng: &mut RngStream, low: f64, high: f64) -> Depth {
    Depth::from_micrometres((rng.uniform_range(low, high) * 10.0).round() as i64 * 100_000)
}

fn generate_well(config: &SynthConfig, index: usize) -> (Vec<AttributeRow>, WellCurves) {
    let mut rng = RngStream::new(config.seed).fork(index as u64);
    let well_id = format!("W{:03}", index + 1);
    let count =
        config.min_formations + rng.below(config.max_formations - config.min_formations + 1);

    let mut formations = Vec::with_capacity(count);
    let mut cursor = decimetres(&mut rng, 1500.0, 2500.0);
    for _ in 0..count {
        let top = cursor;
        let base = top + decimetres(&mut rng, 10.0, 40.0);
        formations.push((top, base));
        cursor = base + decimetres(&mut rng, 5.0, 30.0);
    }

    let bump_count = 3 + rng.below(4);
    let bumps = (0..bump_count)
        .map(|k| {
            let f = if k < count { k } else { rng.below(count) };
            let (top, base) = (formations[f].0.metres(), formations[f].1.metres());
            Bump {
                center: top + (base - top) * rng.uniform_range(0.25, 0.75),
                width: (base - top) * rng.uniform_range(0.04, 0.12),
                amplitude: rng.uniform_range(0.5, 2.0),
            }
        })
        .collect();
    let quality = Quality {
        bumps,
        ripple: [
            Wave::random(&mut rng, 0.05, (3.0, 15.0)),
            Wave::random(&mut rng, 0.05, (3.0, 15.0)),
            Wave::random(&mut rng, 0.05, (3.0, 15.0)),
        ],
    };
    let nuisance: Vec<Nuisance> = (0..CURVE_CHANNELS)
        .map(|_| Nuisance::random(&mut rng))
        .collect();

    let p = &config.production;
    let rows = formations
        .iter()
        .enumerate()
        .map(|(f, &(top, base))| {
            let thickness = (base - top).metres();
            let fraction = rng.uniform_range(0.6, 0.95);
            let window = Depth::from_micrometres(
                ((thickness * fraction * 10.0).round() as i64).max(1) * 100_000,
            );
            let slack = (base - top - window).micrometres();
            let jitter = rng.uniform_range(-0.1, 0.1) * thickness * 1e6;
            let offset = ((slack as f64 / 2.0 + jitter).clamp(0.0, slack as f64) / 1e5).round()
                as i64
                * 100_000;
            let perf_top = top + Depth::from_micrometres(offset);
            let perf_thickness = window.metres();
            let density = rng.uniform_range(0.1f64.ln(), 3.0f64.ln()).exp();
            let perforations = ((perf_thickness * density).round() as u32).max(1);

            let exceedance =
                quality.exceedance(perf_top.metres(), (perf_top + window).metres(), p.threshold);
            let signal =
                p.scale * exceedance * f64::from(perforations).powf(p.count_exponent) + p.base;
            let production = (signal * (1.0 + config.label_noise * rng.standard_normal())).max(0.0);
            AttributeRow {
                well_id: well_id.clone(),
                formation_id: format!("F{}", f + 1),
                top,
                base,
                perforation_thickness: perf_thickness,
                perforation_count: perforations,
                categorical: Vec::new(),
                production: Some(round_to(production, 1e-3)),
            }
        })
        .collect();

    let first = (formations[0].0.metres() - 5.0).floor();
    let last = formations[count - 1].1.metres() + 5.0;
    let samples = ((last - first) / config.spacing).ceil() as usize + 1;
    let noise = config.curve_noise;
    let mut curves = WellCurves {
        well_id,
        depths: Vec::with_capacity(samples),
        samples: Vec::with_capacity(samples),
    };
    for i in 0..samples {
        let z = first + config.spacing * i as f64;
        let q = quality.at(z);
        let nu = |c: usize| nuisance[c].at(z);
        let mut e = || noise * rng.standard_normal();
        let sample = [
            8.5 + 0.4 * nu(0) + 0.05 * q + 0.05 * e(),
            230.0 + 25.0 * q + 15.0 * nu(1) + e(),
            90.0 - 30.0 * q + 20.0 * nu(2) + 1.5 * e(),
            (2.0 + 0.6 * q + 0.8 * nu(3) + 0.02 * e()).exp(),
            (1.8 + 0.5 * q + 0.8 * nu(4) + 0.02 * e()).exp(),
            -30.0 - 12.0 * q + 15.0 * nu(5) + e(),
            (0.35 - 0.12 * q + 0.15 * nu(6) + 0.01 * e()).clamp(0.0, 1.0),
        ];
        curves.depths.push(z);
        curves.samples.push(sample.map(|v| round_to(v, 1e-4)));
    }
    (rows, curves)
}

fn round_to(v: f64, step: f64) -> f64 {
    let r = (v / step).round() * step;
    // strip the representation error so files print short decimals
    format!("{r:.6}").parse().expect("formatted float parses")
}

/// Generates the synthetic well block in memory.
pub fn synth_wells(config: &SynthConfig) -> Result<RawWellData> {
    config.validate()?;
    let mut data = RawWellData::default();
    for index in 0..config.wells {
        let (rows, curves) = generate_well(config, index);
        data.attributes.extend(rows);
        data.curves.push(curves);
    }
    Ok(data)
}

/// Writes `attributes.csv` and `curves.csv` into `dir`, creating it if needed.
pub fn synth_generate(config: &SynthConfig, dir: impl AsRef<Path>) -> Result<RawWellData> {
    let dir = dir.as_ref();
    let data = synth_wells(config)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_attributes(dir.join(ATTRIBUTES_FILE), &data)?;
    write_curves(dir.join(CURVES_FILE), &data.curves)?;
    Ok(data)
}
