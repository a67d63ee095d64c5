//! Cohort I/O, fold construction and simulation.

mod folds;
mod simulate;

pub use folds::{holdout_split, stratified_kfold, Fold};
pub use simulate::{preset, simulate, GroundTruth, SimSpec, PRESETS};

use std::io::{Read, Write};
use std::path::Path;

use crate::encoding::Sample;
use crate::{Error, Result};

/// A cohort: samples plus the names of their feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, feature_names: Vec<String>) -> Result<Self> {
        let d = feature_names.len();
        if let Some(i) = samples.iter().position(|s| s.features.len() != d) {
            return Err(Error::shape(format!(
                "sample {i} has {} features, expected {d}",
                samples[i].features.len()
            )));
        }
        Ok(Dataset {
            samples,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.event).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    /// Parses CSV with a header row containing `time` and `event`; every
    /// other column is a numeric feature, kept in header order.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut time_col = None;
        let mut event_col = None;
        let mut feature_cols = Vec::new();
        let mut feature_names = Vec::new();
        for (i, name) in headers.iter().enumerate() {
            let seen = |slot: &Option<usize>| slot.is_some();
            match name {
                "time" if seen(&time_col) => {
                    return Err(Error::Schema("duplicate `time` column".into()))
                }
                "event" if seen(&event_col) => {
                    return Err(Error::Schema("duplicate `event` column".into()))
                }
                "time" => time_col = Some(i),
                "event" => event_col = Some(i),
                _ => {
                    if name.is_empty() {
                        return Err(Error::Schema(format!("column {} has an empty name", i + 1)));
                    }
                    if feature_names.iter().any(|n| n == name) {
                        return Err(Error::Schema(format!("duplicate column `{name}`")));
                    }
                    feature_cols.push(i);
                    feature_names.push(name.to_string());
                }
            }
        }
        let time_col =
            time_col.ok_or_else(|| Error::Schema("missing required column `time`".into()))?;
        let event_col =
            event_col.ok_or_else(|| Error::Schema("missing required column `event`".into()))?;

        let mut samples = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |col: usize| -> Result<f64> {
                let raw = record.get(col).unwrap_or("");
                if raw.is_empty() {
                    return Err(Error::Row {
                        line,
                        msg: format!("missing value in column `{}`", &headers[col]),
                    });
                }
                let v: f64 = raw.parse().map_err(|_| Error::Row {
                    line,
                    msg: format!("non-numeric value `{raw}` in column `{}`", &headers[col]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Row {
                        line,
                        msg: format!("non-finite value in column `{}`", &headers[col]),
                    });
                }
                Ok(v)
            };
            let time = field(time_col)?;
            if time < 0.0 {
                return Err(Error::Row {
                    line,
                    msg: format!("negative time {time}"),
                });
            }
            let event = match field(event_col)? {
                0.0 => false,
                1.0 => true,
                v => {
                    return Err(Error::Row {
                        line,
                        msg: format!("event must be 0 or 1, got {v}"),
                    })
                }
            };
            let features = feature_cols
                .iter()
                .map(|&c| field(c))
                .collect::<Result<Vec<_>>>()?;
            samples.push(Sample {
                features,
                time,
                event,
            });
        }
        Ok(Dataset {
            samples,
            feature_names,
        })
    }

    /// Writes `time,event,<features...>`; floats use the shortest
    /// representation that parses back to the same value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "event".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec = vec![s.time.to_string(), (s.event as u8).to_string()];
            rec.extend(s.features.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
