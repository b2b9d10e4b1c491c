use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Label, TelemetrySample, CHANNEL_NAMES, N_CHANNELS};
use crate::error::{Error, Result};

const LABEL_COLUMN: &str = "label";

fn check_header(header: &csv::StringRecord, has_labels: bool) -> Result<()> {
    let mut expected: Vec<&str> = CHANNEL_NAMES.to_vec();
    if has_labels {
        expected.push(LABEL_COLUMN);
    }
    let got: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    for (i, name) in expected.iter().enumerate() {
        match got.get(i) {
            Some(g) if g == name => {}
            Some(g) if !expected.contains(&g.as_str()) => {
                return Err(Error::Schema {
                    column: g.clone(),
                    reason: format!("unexpected column at position {}", i + 1),
                })
            }
            _ => {
                return Err(Error::Schema {
                    column: (*name).to_string(),
                    reason: format!("expected at position {}", i + 1),
                })
            }
        }
    }
    if let Some(extra) = got.get(expected.len()) {
        return Err(Error::Schema {
            column: extra.clone(),
            reason: "unexpected extra column".into(),
        });
    }
    Ok(())
}

/// Reads telemetry from any reader. Rows are numbered from 1, header
/// excluded.
pub(crate) fn read_dataset<R: Read>(reader: R, has_labels: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(rdr.headers()?, has_labels)?;

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let mut features = [0.0; N_CHANNELS];
        for (j, slot) in features.iter_mut().enumerate() {
            let cell = record.get(j).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: CHANNEL_NAMES[j].into(),
                reason: format!("`{cell}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: CHANNEL_NAMES[j].into(),
                    reason: format!("`{cell}` is not finite"),
                });
            }
            *slot = value;
        }
        let label = if has_labels {
            let cell = record.get(N_CHANNELS).unwrap_or("");
            Some(cell.parse::<Label>().map_err(|reason| Error::Parse {
                row,
                column: LABEL_COLUMN.into(),
                reason,
            })?)
        } else {
            None
        };
        samples.push(TelemetrySample::new(features, label));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("CSV file has no data rows".into()));
    }
    Ok(Dataset::new(samples))
}

/// Loads `oat,mgt,pa,ias,np,cs,ot[,label]` telemetry, preserving row order.
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, has_labels)
}

pub(crate) fn write_dataset<W: Write>(writer: W, data: &Dataset, with_labels: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = CHANNEL_NAMES.to_vec();
    if with_labels {
        header.push(LABEL_COLUMN);
    }
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(N_CHANNELS + 1);
    for s in data.samples() {
        record.clear();
        // `Display` for f64 is the shortest representation that parses back
        // to the same bits.
        record.extend(s.features.iter().map(|v| v.to_string()));
        if with_labels {
            let label = s.label.ok_or(Error::MissingLabels)?;
            record.push(label.as_int().to_string());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Writes a dataset in the same schema [`load_csv`] reads. Labels are
/// encoded as `0`/`1`.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset, with_labels: bool) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(file, data, with_labels)
}

/// Writes only the labels, one per row under a `label` header.
pub fn write_labels_csv(path: impl AsRef<Path>, labels: &[Label]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record([LABEL_COLUMN])?;
    for l in labels {
        wtr.write_record([l.as_int().to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_labels_csv(path: impl AsRef<Path>) -> Result<Vec<Label>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers()?.clone();
    if header.len() != 1 || !header[0].eq_ignore_ascii_case(LABEL_COLUMN) {
        return Err(Error::Schema {
            column: LABEL_COLUMN.into(),
            reason: "labels file must have a single `label` column".into(),
        });
    }
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        labels.push(record[0].parse::<Label>().map_err(|reason| Error::Parse {
            row: i + 1,
            column: LABEL_COLUMN.into(),
            reason,
        })?);
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData("labels file has no rows".into()));
    }
    Ok(labels)
}
