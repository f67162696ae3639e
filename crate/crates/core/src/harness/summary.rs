use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::{
    bootstrap_ci, mean, MetricsRow, DEFAULT_LEVEL, DEFAULT_RESAMPLES, METRIC_COLUMNS,
};

/// Mean and bootstrap interval of one metric over the runs that report it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// Cross-seed aggregate for one sampler at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sampler: String,
    pub step: u64,
    /// One entry per name in [`METRIC_COLUMNS`].
    pub metrics: Vec<Option<Estimate>>,
}

pub fn summary_header() -> Vec<String> {
    let mut h = vec!["sampler".to_string(), "step".to_string()];
    for m in METRIC_COLUMNS {
        h.extend([
            m.to_string(),
            format!("{m}_lo"),
            format!("{m}_hi"),
            format!("{m}_n"),
        ]);
    }
    h
}

/// Aggregates runs grouped by label. Groups keep their given order and rows
/// are sorted by step; the rng is consumed in that fixed order.
pub fn summarize<R: Rng + ?Sized>(
    groups: &[(String, Vec<Vec<MetricsRow>>)],
    rng: &mut R,
) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for (label, runs) in groups {
        let mut by_step: BTreeMap<u64, Vec<&MetricsRow>> = BTreeMap::new();
        for row in runs.iter().flatten() {
            by_step.entry(row.step).or_default().push(row);
        }
        for (step, rows) in by_step {
            let mut metrics = Vec::with_capacity(METRIC_COLUMNS.len());
            for col in METRIC_COLUMNS {
                let xs: Vec<f64> = rows.iter().filter_map(|r| r.get(col)).collect();
                if xs.is_empty() {
                    metrics.push(None);
                    continue;
                }
                let (lo, hi) = bootstrap_ci(&xs, DEFAULT_LEVEL, DEFAULT_RESAMPLES, rng)?;
                metrics.push(Some(Estimate {
                    mean: mean(&xs),
                    lo,
                    hi,
                    n: xs.len(),
                }));
            }
            out.push(SummaryRow {
                sampler: label.clone(),
                step,
                metrics,
            });
        }
    }
    Ok(out)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(summary_header())?;
    for row in rows {
        let mut rec = vec![row.sampler.clone(), row.step.to_string()];
        for m in &row.metrics {
            match m {
                Some(e) => rec.extend([
                    e.mean.to_string(),
                    e.lo.to_string(),
                    e.hi.to_string(),
                    e.n.to_string(),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let header = summary_header();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 {
            if rec.iter().ne(header.iter().map(String::as_str)) {
                return Err(Error::parse(path, line, "unexpected header"));
            }
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, got {}", header.len(), rec.len()),
            ));
        }
        let bad = |k: usize| Error::parse(path, line, format!("bad {} {:?}", header[k], &rec[k]));
        let step = rec[1].parse().map_err(|_| bad(1))?;
        let mut metrics = Vec::new();
        for m in 0..METRIC_COLUMNS.len() {
            let k = 2 + 4 * m;
            if rec[k].is_empty() {
                metrics.push(None);
                continue;
            }
            let f = |j: usize| rec[k + j].parse::<f64>().map_err(|_| bad(k + j));
            metrics.push(Some(Estimate {
                mean: f(0)?,
                lo: f(1)?,
                hi: f(2)?,
                n: rec[k + 3].parse().map_err(|_| bad(k + 3))?,
            }));
        }
        rows.push(SummaryRow {
            sampler: rec[0].to_string(),
            step,
            metrics,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn row(step: u64, seed: u64, tv: f64) -> MetricsRow {
        let mut r = MetricsRow::new(step, seed);
        r.tv_joint = Some(tv);
        r
    }

    #[test]
    fn aggregates_by_label_and_step() {
        let groups = vec![
            (
                "b".to_string(),
                vec![
                    vec![row(10, 0, 0.5), row(20, 0, 0.1)],
                    vec![row(10, 1, 0.3), row(20, 1, 0.3)],
                ],
            ),
            ("a".to_string(), vec![vec![row(10, 0, 1.0)]]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows = summarize(&groups, &mut rng).unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.sampler.as_str(), r.step)).collect();
        assert_eq!(keys, vec![("b", 10), ("b", 20), ("a", 10)]);
        let tv = rows[0].metrics[1].unwrap();
        assert!((tv.mean - 0.4).abs() < 1e-12);
        assert_eq!(tv.n, 2);
        assert!(tv.lo <= tv.mean && tv.mean <= tv.hi);
        assert!(rows[0].metrics[0].is_none());
        let single = rows[2].metrics[1].unwrap();
        assert_eq!((single.lo, single.hi), (1.0, 1.0));
    }

    #[test]
    fn summary_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("summary.csv");
        let groups = vec![(
            "ma-props".to_string(),
            vec![vec![row(64, 0, 0.2)], vec![row(64, 1, 0.25)]],
        )];
        let rows = summarize(&groups, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        write_summary(&p, &rows).unwrap();
        assert_eq!(read_summary(&p).unwrap(), rows);
    }
}
