use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of the campaign log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub iteration: usize,
    pub hv: f64,
    pub relative_hvi: Option<f64>,
    pub fraction_recovered: Option<f64>,
    pub batch_ids: Vec<String>,
}

pub const METRICS_HEADER: [&str; 5] = [
    "iteration",
    "hv",
    "relative_hvi",
    "fraction_recovered",
    "batch_ids",
];

/// `|found ∩ truth| / |truth|`.
pub fn fraction_recovered<S>(found: &HashSet<S>, truth: &HashSet<S>) -> Result<f64>
where
    S: AsRef<str> + Eq + std::hash::Hash,
{
    if truth.is_empty() {
        return Err(Error::invalid("true Pareto set is empty"));
    }
    let hit = truth.iter().filter(|t| found.contains(*t)).count();
    Ok(hit as f64 / truth.len() as f64)
}

/// `(hv_t - hv_0) / hv_0`.
pub fn relative_hvi(hv_t: f64, hv_0: f64) -> Result<f64> {
    if !(hv_0 > 0.0) {
        return Err(Error::invalid(format!("baseline hypervolume must be positive, got {hv_0}")));
    }
    Ok((hv_t - hv_0) / hv_0)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(out: W, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.iteration.to_string(),
            r.hv.to_string(),
            opt(r.relative_hvi),
            opt(r.fraction_recovered),
            r.batch_ids.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != METRICS_HEADER {
        return Err(Error::invalid(format!("unexpected metrics header {header:?}")));
    }
    let num = |s: &str, line: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| Error::Parse {
            path: "<metrics>".into(),
            line,
            message: format!("bad number {s:?}"),
        })
    };
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        out.push(MetricRecord {
            iteration: rec[0].parse().map_err(|_| Error::Parse {
                path: "<metrics>".into(),
                line,
                message: "bad iteration".into(),
            })?,
            hv: num(&rec[1], line)?.unwrap_or(0.0),
            relative_hvi: num(&rec[2], line)?,
            fraction_recovered: num(&rec[3], line)?,
            batch_ids: if rec[4].is_empty() {
                Vec::new()
            } else {
                rec[4].split(';').map(str::to_owned).collect()
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[&'static str]) -> HashSet<&'static str> {
        v.iter().copied().collect()
    }

    #[test]
    fn fraction_recovered_examples() {
        assert_eq!(fraction_recovered(&set(&["a", "b"]), &set(&["a", "b", "c", "d"])).unwrap(), 0.5);
        assert_eq!(fraction_recovered(&set(&[]), &set(&["a"])).unwrap(), 0.0);
        assert_eq!(fraction_recovered(&set(&["a", "b"]), &set(&["a", "b"])).unwrap(), 1.0);
        assert!(fraction_recovered(&set(&["a"]), &set(&[])).is_err());
    }

    #[test]
    fn relative_hvi_examples() {
        // Table-2 style consistency check: 18.15 vs 16.73 is an 8.49% gain.
        assert!((relative_hvi(18.15, 16.73).unwrap() - 0.0849).abs() < 5e-5);
        assert_eq!(relative_hvi(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(relative_hvi(6.0, 3.0).unwrap(), 1.0);
        assert!(relative_hvi(1.0, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![
            MetricRecord {
                iteration: 1,
                hv: 0.1 + 0.2,
                relative_hvi: Some(0.5),
                fraction_recovered: None,
                batch_ids: vec!["a".into(), "b,c".into()],
            },
            MetricRecord {
                iteration: 2,
                hv: 4.0,
                relative_hvi: None,
                fraction_recovered: Some(1.0),
                batch_ids: vec![],
            },
        ];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iteration,hv,relative_hvi,fraction_recovered,batch_ids\n"));
        assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), recs);
    }
}
