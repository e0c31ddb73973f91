use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

use super::{Depth, CURVE_CHANNELS, CURVE_NAMES};
use crate::error::{Error, Result};

pub const ATTRIBUTES_FILE: &str = "attributes.csv";
pub const CURVES_FILE: &str = "curves.csv";

const ATTRIBUTE_COLUMNS: [&str; 6] = [
    "well_id",
    "formation_id",
    "formation_top_m",
    "formation_base_m",
    "perforation_thickness_m",
    "perforation_count",
];
const PRODUCTION_COLUMN: &str = "production_t_per_d";
const CATEGORICAL_PREFIX: &str = "cat:";

/// One formation of one well.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeRow {
    pub well_id: String,
    pub formation_id: String,
    pub top: Depth,
    pub base: Depth,
    pub perforation_thickness: f64,
    pub perforation_count: u32,
    /// Tokens aligned with [`RawWellData::categorical_columns`].
    pub categorical: Vec<String>,
    /// Initial production in t/d; absent for prediction sets.
    pub production: Option<f64>,
}

impl AttributeRow {
    pub fn formation_thickness(&self) -> f64 {
        (self.base - self.top).metres()
    }

    pub fn median_depth(&self) -> f64 {
        self.top.midpoint(self.base)
    }
}

/// Log curves of one well, depth ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WellCurves {
    pub well_id: String,
    pub depths: Vec<f64>,
    /// One row per depth, channels in [`CURVE_NAMES`] order.
    pub samples: Vec<[f64; CURVE_CHANNELS]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawWellData {
    /// Names of the `cat:<name>` columns, without the prefix.
    pub categorical_columns: Vec<String>,
    pub attributes: Vec<AttributeRow>,
    pub curves: Vec<WellCurves>,
}

impl RawWellData {
    pub fn well_curves(&self, well_id: &str) -> Option<&WellCurves> {
        self.curves.iter().find(|c| c.well_id == well_id)
    }
}

struct RecordContext<'a> {
    file: &'a str,
    line: u64,
    record: &'a StringRecord,
}

impl RecordContext<'_> {
    fn error(&self, column: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.to_string(),
            line: self.line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn text(&self, index: usize, column: &str) -> Result<&str> {
        match self.record.get(index) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(self.error(column, "missing value")),
        }
    }

    fn float(&self, index: usize, column: &str) -> Result<f64> {
        let raw = self.text(index, column)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(column, format!("`{raw}` is not a finite number"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, index: usize, column: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.text(index, column)?;
        raw.parse()
            .map_err(|e: T::Err| self.error(column, format!("`{raw}`: {e}")))
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(ReaderBuilder::new().trim(Trim::All).from_reader(file))
}

fn record_error(file: &str, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::Parse {
        file: file.to_string(),
        line,
        column: String::new(),
        message: err.to_string(),
    }
}

fn header_error(file: &str, message: String) -> Error {
    Error::Parse {
        file: file.to_string(),
        line: 1,
        column: String::new(),
        message,
    }
}

/// Reads `attributes.csv` and `curves.csv` from `dir`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<RawWellData> {
    let dir = dir.as_ref();
    let (categorical_columns, attributes) = read_attributes(&dir.join(ATTRIBUTES_FILE))?;
    let curves = read_curves(&dir.join(CURVES_FILE))?;
    Ok(RawWellData {
        categorical_columns,
        attributes,
        curves,
    })
}

fn read_attributes(path: &Path) -> Result<(Vec<String>, Vec<AttributeRow>)> {
    let file = path.display().to_string();
    let mut reader = open(path)?;
    let headers = reader
        .headers()
        .map_err(|e| record_error(&file, e))?
        .clone();
    if headers.len() < ATTRIBUTE_COLUMNS.len()
        || headers.iter().zip(ATTRIBUTE_COLUMNS).any(|(h, e)| h != e)
    {
        return Err(header_error(
            &file,
            format!("header must start with {}", ATTRIBUTE_COLUMNS.join(",")),
        ));
    }
    let mut categorical = Vec::new();
    let mut production_index = None;
    for (i, h) in headers.iter().enumerate().skip(ATTRIBUTE_COLUMNS.len()) {
        if h == PRODUCTION_COLUMN && production_index.is_none() {
            production_index = Some(i);
        } else if let Some(name) = h.strip_prefix(CATEGORICAL_PREFIX).filter(|n| !n.is_empty()) {
            if categorical.iter().any(|(_, n): &(usize, String)| n == name) {
                return Err(header_error(&file, format!("duplicate column `{h}`")));
            }
            categorical.push((i, name.to_string()));
        } else {
            return Err(header_error(&file, format!("unexpected column `{h}`")));
        }
    }

    let mut rows = Vec::new();
    let mut keys = HashSet::new();
    for result in reader.records() {
        let record = result.map_err(|e| record_error(&file, e))?;
        let ctx = RecordContext {
            file: &file,
            line: record.position().map_or(0, |p| p.line()),
            record: &record,
        };
        let top: Depth = ctx.parse(2, ATTRIBUTE_COLUMNS[2])?;
        let base: Depth = ctx.parse(3, ATTRIBUTE_COLUMNS[3])?;
        if base <= top {
            return Err(ctx.error(
                ATTRIBUTE_COLUMNS[3],
                format!("base {base} is not below top {top}"),
            ));
        }
        let perforation_thickness = ctx.float(4, ATTRIBUTE_COLUMNS[4])?;
        if perforation_thickness < 0.0 {
            return Err(ctx.error(ATTRIBUTE_COLUMNS[4], "negative thickness"));
        }
        let row = AttributeRow {
            well_id: ctx.text(0, ATTRIBUTE_COLUMNS[0])?.to_string(),
            formation_id: ctx.text(1, ATTRIBUTE_COLUMNS[1])?.to_string(),
            top,
            base,
            perforation_thickness,
            perforation_count: ctx.parse(5, ATTRIBUTE_COLUMNS[5])?,
            categorical: categorical
                .iter()
                .map(|(i, name)| {
                    ctx.text(*i, &format!("{CATEGORICAL_PREFIX}{name}"))
                        .map(str::to_string)
                })
                .collect::<Result<_>>()?,
            production: match production_index {
                Some(i) if !record.get(i).unwrap_or("").is_empty() => {
                    Some(ctx.float(i, PRODUCTION_COLUMN)?)
                }
                _ => None,
            },
        };
        if !keys.insert((row.well_id.clone(), row.formation_id.clone())) {
            return Err(ctx.error(
                ATTRIBUTE_COLUMNS[1],
                format!("duplicate formation {}/{}", row.well_id, row.formation_id),
            ));
        }
        rows.push(row);
    }
    Ok((categorical.into_iter().map(|(_, n)| n).collect(), rows))
}

fn read_curves(path: &Path) -> Result<Vec<WellCurves>> {
    let file = path.display().to_string();
    let mut reader = open(path)?;
    let headers = reader
        .headers()
        .map_err(|e| record_error(&file, e))?
        .clone();
    let expected: Vec<&str> = ["well_id", "depth_m"]
        .into_iter()
        .chain(CURVE_NAMES)
        .collect();
    if headers.iter().ne(expected.iter().copied()) {
        return Err(header_error(
            &file,
            format!("header must be {}", expected.join(",")),
        ));
    }

    let mut wells: Vec<WellCurves> = Vec::new();
    let mut finished = HashSet::new();
    for result in reader.records() {
        let record = result.map_err(|e| record_error(&file, e))?;
        let ctx = RecordContext {
            file: &file,
            line: record.position().map_or(0, |p| p.line()),
            record: &record,
        };
        let well_id = ctx.text(0, "well_id")?;
        let depth = ctx.float(1, "depth_m")?;
        let mut sample = [0.0; CURVE_CHANNELS];
        for (c, name) in CURVE_NAMES.iter().enumerate() {
            sample[c] = ctx.float(c + 2, name)?;
        }
        let start_new = wells.last().map_or(true, |w| w.well_id != well_id);
        if start_new {
            if let Some(prev) = wells.last() {
                finished.insert(prev.well_id.clone());
            }
            if finished.contains(well_id) {
                return Err(ctx.error(
                    "well_id",
                    format!("rows of well {well_id} are not contiguous"),
                ));
            }
            wells.push(WellCurves {
                well_id: well_id.to_string(),
                ..WellCurves::default()
            });
        }
        let well = wells.last_mut().expect("pushed above");
        if well.depths.last().is_some_and(|&last| depth <= last) {
            return Err(ctx.error(
                "depth_m",
                format!("depth {depth} is not above the previous sample"),
            ));
        }
        well.depths.push(depth);
        well.samples.push(sample);
    }
    Ok(wells)
}

/// Writes `attributes.csv`. The production column is included when any row
/// carries a value.
pub fn write_attributes(path: impl AsRef<Path>, data: &RawWellData) -> Result<()> {
    let path = path.as_ref();
    let with_production = data.attributes.iter().any(|r| r.production.is_some());
    let mut header: Vec<String> = ATTRIBUTE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(
        data.categorical_columns
            .iter()
            .map(|c| format!("{CATEGORICAL_PREFIX}{c}")),
    );
    if with_production {
        header.push(PRODUCTION_COLUMN.into());
    }
    write_csv(
        path,
        header,
        data.attributes.iter().map(|r| {
            let mut row = vec![
                r.well_id.clone(),
                r.formation_id.clone(),
                r.top.to_string(),
                r.base.to_string(),
                r.perforation_thickness.to_string(),
                r.perforation_count.to_string(),
            ];
            row.extend(r.categorical.iter().cloned());
            if with_production {
                row.push(r.production.map(|p| p.to_string()).unwrap_or_default());
            }
            row
        }),
    )
}

/// Writes `curves.csv`.
pub fn write_curves(path: impl AsRef<Path>, curves: &[WellCurves]) -> Result<()> {
    let header = ["well_id", "depth_m"]
        .into_iter()
        .chain(CURVE_NAMES)
        .map(String::from)
        .collect();
    let rows = curves.iter().flat_map(|w| {
        w.depths.iter().zip(&w.samples).map(|(d, s)| {
            let mut row = vec![w.well_id.clone(), d.to_string()];
            row.extend(s.iter().map(|v| v.to_string()));
            row
        })
    });
    write_csv(path.as_ref(), header, rows)
}

fn write_csv(
    path: &Path,
    header: Vec<String>,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    let file = File::create(path).map_err(io)?;
    let mut w = WriterBuilder::new().from_writer(std::io::BufWriter::new(file));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let mut inner = w.into_inner().map_err(|e| io(e.into_error()))?;
    inner.flush().map_err(io)
}
