use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::RunRecord;
use crate::error::{Error, Result};
use crate::metrics::MetricsRow;

pub const CONFIG_FILE: &str = "config";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SHADOW_METRICS_FILE: &str = "shadow_metrics.csv";
pub const PARAMS_FILE: &str = "final_params";

pub const METRICS_HEADER: [&str; 7] = [
    "step",
    "seed",
    "success_rate",
    "tv_joint",
    "kl_joint",
    "kl_agent_1",
    "kl_agent_2",
];

const PARAMS_MAGIC: &[u8; 8] = b"JSPARAMS";
const PARAMS_VERSION: u32 = 1;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn row_fields(row: &MetricsRow) -> Vec<String> {
    let mut f = vec![
        row.step.to_string(),
        row.seed.to_string(),
        opt(row.success_rate),
        opt(row.tv_joint),
        opt(row.kl_joint),
    ];
    f.extend((0..2).map(|i| opt(row.kl_agent.get(i).copied().flatten())));
    f
}

/// Appends rows to a metrics CSV as they are produced.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(METRICS_HEADER)?;
        inner.flush()?;
        Ok(MetricsWriter { inner })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.write_record(row_fields(row))?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Files of one run directory, written incrementally.
pub struct RunWriter {
    dir: PathBuf,
    metrics: MetricsWriter,
    shadow: Option<MetricsWriter>,
}

impl RunWriter {
    pub fn create(dir: &Path, cfg: &ExperimentConfig, with_shadow: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(CONFIG_FILE), cfg.to_text())?;
        let shadow = if with_shadow {
            Some(MetricsWriter::create(&dir.join(SHADOW_METRICS_FILE))?)
        } else {
            None
        };
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            metrics: MetricsWriter::create(&dir.join(METRICS_FILE))?,
            shadow,
        })
    }

    pub fn row(&mut self, row: &MetricsRow) -> Result<()> {
        self.metrics.write(row)
    }

    pub fn shadow_row(&mut self, row: &MetricsRow) -> Result<()> {
        match &mut self.shadow {
            Some(w) => w.write(row),
            None => Ok(()),
        }
    }

    pub fn finish(self, duration_secs: f64, params: &[Vec<f64>]) -> Result<()> {
        write_params(&self.dir.join(PARAMS_FILE), duration_secs, params)
    }
}

/// Binary layout: magic, version (u32), duration (f64), vector count (u64),
/// then per vector a length (u64) and its values. Little endian throughout.
pub fn write_params(path: &Path, duration_secs: f64, params: &[Vec<f64>]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(PARAMS_MAGIC);
    buf.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
    buf.extend_from_slice(&duration_secs.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params {
        buf.extend_from_slice(&(v.len() as u64).to_le_bytes());
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    File::create(path)?.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(
                self.path,
                1,
                format!("truncated at byte {}", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_params(path: &Path) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let mut c = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if c.take(8)? != PARAMS_MAGIC {
        return Err(Error::parse(path, 1, "not a parameter file"));
    }
    let version = u32::from_le_bytes(c.take(4)?.try_into().unwrap());
    if version != PARAMS_VERSION {
        return Err(Error::parse(
            path,
            1,
            format!("unsupported version {version}"),
        ));
    }
    let duration = c.f64()?;
    let count = c.u64()?;
    let mut params = Vec::new();
    for _ in 0..count {
        let len = c.u64()? as usize;
        if len > (bytes.len() - c.pos) / 8 {
            return Err(Error::parse(path, 1, "vector length exceeds file size"));
        }
        params.push((0..len).map(|_| c.f64()).collect::<Result<Vec<_>>>()?);
    }
    if c.pos != bytes.len() {
        return Err(Error::parse(path, 1, "trailing bytes"));
    }
    Ok((duration, params))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(i + 1, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 {
            if rec.iter().ne(METRICS_HEADER) {
                return Err(Error::parse(path, line, "unexpected header"));
            }
            continue;
        }
        if rec.len() != METRICS_HEADER.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected 7 fields, got {}", rec.len()),
            ));
        }
        let int = |k: usize| -> Result<u64> {
            rec[k].parse().map_err(|_| {
                Error::parse(
                    path,
                    line,
                    format!("bad {} {:?}", METRICS_HEADER[k], &rec[k]),
                )
            })
        };
        let float = |k: usize| -> Result<Option<f64>> {
            if rec[k].is_empty() {
                return Ok(None);
            }
            rec[k].parse().map(Some).map_err(|_| {
                Error::parse(
                    path,
                    line,
                    format!("bad {} {:?}", METRICS_HEADER[k], &rec[k]),
                )
            })
        };
        rows.push(MetricsRow {
            step: int(0)?,
            seed: int(1)?,
            success_rate: float(2)?,
            tv_joint: float(3)?,
            kl_joint: float(4)?,
            kl_agent: vec![float(5)?, float(6)?],
        });
    }
    Ok(rows)
}

/// Writes a complete record to `dir` in one go.
pub fn persist(record: &RunRecord, dir: &Path) -> Result<()> {
    let mut w = RunWriter::create(dir, &record.config, record.shadow_rows.is_some())?;
    for r in &record.rows {
        w.row(r)?;
    }
    for r in record.shadow_rows.iter().flatten() {
        w.shadow_row(r)?;
    }
    w.finish(record.duration_secs, &record.params)
}

pub fn load_run(dir: &Path) -> Result<RunRecord> {
    let cfg_path = dir.join(CONFIG_FILE);
    let config = ExperimentConfig::from_text(&fs::read_to_string(&cfg_path)?, &cfg_path)?;
    let rows = read_metrics(&dir.join(METRICS_FILE))?;
    let shadow_path = dir.join(SHADOW_METRICS_FILE);
    let shadow_rows = if shadow_path.exists() {
        Some(read_metrics(&shadow_path)?)
    } else {
        None
    };
    let (duration_secs, params) = read_params(&dir.join(PARAMS_FILE))?;
    Ok(RunRecord {
        seed: config.seed,
        config,
        rows,
        shadow_rows,
        duration_secs,
        params,
    })
}
