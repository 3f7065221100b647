//! Reading and writing vector corpora.
//!
//! CSV rows are `id,v1,...,vd` with no header. JSONL lines are objects with
//! `id` and `vector` fields. Vectors are normalized to unit length on load.

use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::{l2_norm, UnitVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guess from a file extension; anything not `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json" => Ok(Format::Jsonl),
            other => Err(Error::InvalidParams(format!("unknown format {other:?}"))),
        }
    }
}

/// Vectors before normalization. All share dimension `d`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawCorpus {
    pub d: usize,
    pub records: Vec<(String, Vec<f64>)>,
}

/// Unit-norm vectors keyed by external id, in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub d: usize,
    pub records: Vec<(String, UnitVector)>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&UnitVector> {
        self.records.iter().find(|(i, _)| i == id).map(|(_, v)| v)
    }
}

impl RawCorpus {
    fn push(&mut self, record: usize, id: String, values: Vec<f64>) -> Result<()> {
        if values.is_empty() {
            return Err(Error::Parse {
                record,
                message: format!("record {id:?} has no values"),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                record,
                message: format!("non-finite value {v}"),
            });
        }
        if self.records.is_empty() {
            self.d = values.len();
        } else if values.len() != self.d {
            return Err(Error::RaggedDimensions {
                record,
                expected: self.d,
                got: values.len(),
            });
        }
        self.records.push((id, values));
        Ok(())
    }

    /// Scale every vector to unit length.
    pub fn normalize(self) -> Result<Corpus> {
        let records = self
            .records
            .into_iter()
            .map(|(id, v)| {
                if l2_norm(&v) == 0.0 {
                    return Err(Error::ZeroVector(id));
                }
                Ok((id, UnitVector::normalized(v)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus { d: self.d, records })
    }
}

/// Parse without normalizing. Records are numbered from 1.
pub fn read_raw<R: Read>(source: R, format: Format) -> Result<RawCorpus> {
    let mut raw = RawCorpus::default();
    match format {
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(source);
            for (i, row) in reader.records().enumerate() {
                let record = i + 1;
                let row = row.map_err(|e| Error::Parse {
                    record,
                    message: e.to_string(),
                })?;
                let mut fields = row.iter();
                let id = fields.next().unwrap_or_default().to_string();
                let values = fields
                    .map(|f| {
                        f.parse::<f64>().map_err(|_| Error::Parse {
                            record,
                            message: format!("not a number: {f:?}"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                raw.push(record, id, values)?;
            }
        }
        Format::Jsonl => {
            #[derive(Deserialize)]
            struct Line {
                id: serde_json::Value,
                vector: Vec<f64>,
            }
            let reader = std::io::BufReader::new(source);
            for (i, line) in reader.lines().enumerate() {
                let record = i + 1;
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    record,
                    message: e.to_string(),
                })?;
                let id = match parsed.id {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) => n.to_string(),
                    other => {
                        return Err(Error::Parse {
                            record,
                            message: format!("id must be a string or number, got {other}"),
                        })
                    }
                };
                raw.push(record, id, parsed.vector)?;
            }
        }
    }
    Ok(raw)
}

/// Parse and normalize.
pub fn load_vectors<R: Read>(source: R, format: Format) -> Result<Corpus> {
    read_raw(source, format)?.normalize()
}

/// Write vectors with shortest round-trip float formatting.
pub fn save_vectors<W: Write>(corpus: &Corpus, format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().flexible(true).from_writer(&mut out);
            for (id, v) in &corpus.records {
                let mut row = Vec::with_capacity(v.dim() + 1);
                row.push(id.clone());
                row.extend(v.coords().iter().map(|x| x.to_string()));
                w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            for (id, v) in &corpus.records {
                let line = serde_json::json!({ "id": id, "vector": v.coords() });
                writeln!(out, "{line}")?;
            }
        }
    }
    Ok(())
}

/// Read `date,close` rows. A first row whose close does not parse is taken as
/// a header and skipped.
pub fn read_series<R: Read>(source: R) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let record = i + 1;
        let row = row.map_err(|e| Error::Parse {
            record,
            message: e.to_string(),
        })?;
        if row.len() < 2 {
            return Err(Error::Parse {
                record,
                message: "expected date,close".into(),
            });
        }
        match row[1].parse::<f64>() {
            Ok(close) => out.push((row[0].to_string(), close)),
            Err(_) if record == 1 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    record,
                    message: format!("not a number: {:?}", &row[1]),
                })
            }
        }
    }
    Ok(out)
}

/// One vector per interior day `t`: the `half_window` relative differences
/// `(c[s+1] - c[s]) / c[s]` ending at `t`, then the `half_window` starting at
/// `t`. The id is the date of day `t`.
pub fn window_series(series: &[(String, f64)], half_window: usize) -> Result<RawCorpus> {
    if half_window == 0 {
        return Err(Error::InvalidParams("half_window must be >= 1".into()));
    }
    let need = 2 * half_window + 1;
    if series.len() < need {
        return Err(Error::SeriesTooShort {
            need,
            got: series.len(),
        });
    }
    if let Some((date, price)) = series.iter().find(|(_, p)| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::NonPositivePrice {
            date: date.clone(),
            price: *price,
        });
    }
    let diffs: Vec<f64> = series
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / w[0].1)
        .collect();
    let records = (half_window..series.len() - half_window)
        .map(|t| {
            (
                series[t].0.clone(),
                diffs[t - half_window..t + half_window].to_vec(),
            )
        })
        .collect();
    Ok(RawCorpus {
        d: 2 * half_window,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<f64>,
    /// Values outside `[edges[0], edges[last]]`, or NaN.
    pub dropped: usize,
}

/// Count values per bin `[e_i, e_{i+1})`; the last bin also takes its right edge.
pub fn histogram_bin(values: &[f64], edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 {
        return Err(Error::BadEdges(format!("need at least 2 edges, got {}", edges.len())));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadEdges("edges must be finite and strictly ascending".into()));
    }
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0.0; bins];
    let mut dropped = 0;
    for &v in values {
        if !(v >= lo && v <= hi) {
            dropped += 1;
            continue;
        }
        let bin = (edges.partition_point(|&e| e <= v) - 1).min(bins - 1);
        counts[bin] += 1.0;
    }
    Ok(Histogram { counts, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_three_four_five() {
        let c = load_vectors("img1, 3, 4\n".as_bytes(), Format::Csv).unwrap();
        assert_eq!(c.records[0].0, "img1");
        assert_eq!(c.records[0].1.coords(), &[0.6, 0.8]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            load_vectors("a,0,0\n".as_bytes(), Format::Csv),
            Err(Error::ZeroVector(id)) if id == "a"
        ));
        assert!(matches!(
            load_vectors("a,1,2\nb,1,2,3\n".as_bytes(), Format::Csv),
            Err(Error::RaggedDimensions { record: 2, expected: 2, got: 3 })
        ));
        assert!(matches!(
            load_vectors("a,1,x\n".as_bytes(), Format::Csv),
            Err(Error::Parse { record: 1, .. })
        ));
        assert!(matches!(
            load_vectors("a,1,NaN\n".as_bytes(), Format::Csv),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn jsonl() {
        let text = "{\"id\":\"a\",\"vector\":[0,2]}\n\n{\"id\":7,\"vector\":[1,0]}\n";
        let c = load_vectors(text.as_bytes(), Format::Jsonl).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.records[1].0, "7");
        assert_eq!(c.get("a").unwrap().coords(), &[0.0, 1.0]);
        assert!(matches!(
            load_vectors("{\"id\":\"a\"}".as_bytes(), Format::Jsonl),
            Err(Error::Parse { record: 1, .. })
        ));
    }

    #[test]
    fn save_load_identity() {
        let c = load_vectors("a,1,2,3\nb,-0.5,1e-7,2\n".as_bytes(), Format::Csv).unwrap();
        for f in [Format::Csv, Format::Jsonl] {
            let mut buf = Vec::new();
            save_vectors(&c, f, &mut buf).unwrap();
            let back = load_vectors(buf.as_slice(), f).unwrap();
            for ((ia, va), (ib, vb)) in c.records.iter().zip(&back.records) {
                assert_eq!(ia, ib);
                for (x, y) in va.coords().iter().zip(vb.coords()) {
                    assert!((x - y).abs() <= 1e-9);
                }
            }
        }
    }

    fn series(closes: &[f64]) -> Vec<(String, f64)> {
        closes
            .iter()
            .enumerate()
            .map(|(i, &c)| (format!("day{i}"), c))
            .collect()
    }

    #[test]
    fn windows() {
        let w = window_series(&series(&[100.0, 110.0, 99.0]), 1).unwrap();
        assert_eq!(w.records.len(), 1);
        assert_eq!(w.records[0].0, "day1");
        let v = &w.records[0].1;
        assert!((v[0] - 0.1).abs() < 1e-15 && (v[1] + 0.1).abs() < 1e-15);

        let long: Vec<f64> = (0..30).map(|i| 100.0 + (i as f64).sin()).collect();
        let w = window_series(&series(&long), 5).unwrap();
        assert_eq!(w.d, 10);
        assert_eq!(w.records.len(), 30 - 10);
    }

    #[test]
    fn window_errors() {
        assert!(matches!(
            window_series(&series(&[1.0, 2.0]), 1),
            Err(Error::SeriesTooShort { need: 3, got: 2 })
        ));
        assert!(matches!(
            window_series(&series(&[1.0, 0.0, 2.0]), 1),
            Err(Error::NonPositivePrice { .. })
        ));
        let flat = window_series(&series(&[5.0; 6]), 2).unwrap();
        assert!(matches!(flat.normalize(), Err(Error::ZeroVector(_))));
    }

    #[test]
    fn series_header_skipped() {
        let s = read_series("date,close\n2020-01-01,10\n2020-01-02,11\n".as_bytes()).unwrap();
        assert_eq!(s, vec![("2020-01-01".into(), 10.0), ("2020-01-02".into(), 11.0)]);
    }

    #[test]
    fn histogram() {
        let h = histogram_bin(&[0.1, 0.2, 0.9], &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(h.counts, vec![2.0, 1.0]);
        let h = histogram_bin(&[1.0, 0.5, -0.1, 2.0], &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(h.counts, vec![0.0, 2.0]);
        assert_eq!(h.dropped, 2);
        let empty = histogram_bin(&[], &[0.0, 1.0]).unwrap();
        assert_eq!(empty.counts, vec![0.0]);
        assert!(histogram_bin(&[], &[1.0]).is_err());
        assert!(histogram_bin(&[], &[0.0, 0.0]).is_err());
    }
}
