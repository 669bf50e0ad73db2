//! Metrics, SICR, residual CDFs and CSV/JSON output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fdsic::sic::SicCoefficients;
use fdsic::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{Canceller, ScenarioSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellerMetrics {
    pub name: Canceller,
    /// Mean `|Y - Y_hat|^2` per UL subcarrier, receiver noise included.
    pub residual_dbm: Vec<f64>,
    /// Mean residual with the noise taken out, per UL subcarrier.
    pub residual_si_dbm: Vec<f64>,
    #[serde(with = "db_value")]
    pub sicr_db: f64,
    /// Sorted per-symbol residual powers (mean over UL), dBm.
    pub cdf_dbm: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterRow {
    pub stage: String,
    pub counter: String,
    pub value: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    /// `[re, im]` of `a_1, a_3, ...`.
    pub a_hat: Vec<[f64; 2]>,
    pub b_hat: [f64; 2],
    /// `(p, |K_p|)` over the UL band.
    pub basis_sizes: Vec<(usize, usize)>,
}

impl EstimateSummary {
    pub fn from_coefficients(c: &SicCoefficients) -> Self {
        EstimateSummary {
            a_hat: c.a_hat.iter().map(|a| [a.re, a.im]).collect(),
            b_hat: [c.b_hat.re, c.b_hat.im],
            basis_sizes: c.ul.iter().map(|p| (p, c.basis_sets[p].len())).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub n_seeds: usize,
    pub n_symbols: usize,
    pub dl: [usize; 2],
    pub ul: [usize; 2],
    pub noise_dbm: f64,
    pub tx_power_dbm: f64,
    /// Received power before cancellation, per UL subcarrier.
    pub received_dbm: Vec<f64>,
    /// Noise-free SI power, per UL subcarrier.
    pub raw_si_dbm: Vec<f64>,
    pub cancellers: Vec<CancellerMetrics>,
    /// Counts from the first seed: one estimation plus its running steps.
    pub counters: Vec<CounterRow>,
    pub estimates: Option<EstimateSummary>,
    pub config: ScenarioSpec,
}

impl MetricsReport {
    pub fn canceller(&self, c: Canceller) -> Option<&CancellerMetrics> {
        self.cancellers.iter().find(|m| m.name == c)
    }

    /// Counter value for `stage` (for example `proposed:pa`) and `counter`
    /// (`mul` or `add`).
    pub fn counter(&self, stage: &str, counter: &str) -> Option<u64> {
        self.counters.iter().find(|r| r.stage == stage && r.counter == counter).map(|r| r.value)
    }
}

// JSON has no infinities; write them as "inf" / "-inf" strings
mod db_value {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::fmt_db(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
            },
        }
    }
}

/// `10 log10(raw / residual)`; `+inf` when nothing is left.
pub fn sicr(raw_si: f64, residual: f64) -> f64 {
    if residual == 0.0 {
        return f64::INFINITY;
    }
    fdsic::lin_to_db(raw_si / residual)
}

/// Empirical CDF points `(value, P[X <= value])`, sorted by value.
pub fn residual_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Usage("residual CDF of an empty sample set".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Usage(format!("unknown format {s:?}, expected csv or json"))),
        }
    }
}

fn fmt_db(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes the report into `dir` and returns the files written.
///
/// CSV output is `psd.csv` (`canceller,p,residual_dbm`), `cdf.csv`
/// (`canceller,sample,residual_dbm`), `complexity.csv`
/// (`stage,counter,value`), `summary.csv` (`canceller,sicr_db,mean_residual_dbm`)
/// and the echoed `config.toml`. JSON output is a single `report.json`.
pub fn emit_report(report: &MetricsReport, format: Format, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut file = |name: &str, body: &dyn Fn(&mut dyn Write) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        body(&mut f)?;
        f.flush()?;
        written.push(path);
        Ok(())
    };
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(report).map_err(|e| Error::Usage(e.to_string()))?;
            file("report.json", &|w| writeln!(w, "{text}"))?;
        }
        Format::Csv => {
            file("psd.csv", &|w| {
                writeln!(w, "canceller,p,residual_dbm")?;
                for c in &report.cancellers {
                    for (i, v) in c.residual_dbm.iter().enumerate() {
                        writeln!(w, "{},{},{}", c.name, report.ul[0] + i, fmt_db(*v))?;
                    }
                }
                Ok(())
            })?;
            file("cdf.csv", &|w| {
                writeln!(w, "canceller,sample,residual_dbm")?;
                for c in &report.cancellers {
                    for (i, v) in c.cdf_dbm.iter().enumerate() {
                        writeln!(w, "{},{},{}", c.name, i, fmt_db(*v))?;
                    }
                }
                Ok(())
            })?;
            file("complexity.csv", &|w| {
                writeln!(w, "stage,counter,value")?;
                for r in &report.counters {
                    writeln!(w, "{},{},{}", r.stage, r.counter, r.value)?;
                }
                Ok(())
            })?;
            file("summary.csv", &|w| {
                writeln!(w, "canceller,sicr_db,mean_residual_dbm")?;
                for c in &report.cancellers {
                    let mean = c.residual_dbm.iter().map(|v| fdsic::db_to_lin(*v)).sum::<f64>()
                        / c.residual_dbm.len() as f64;
                    writeln!(w, "{},{},{}", c.name, fmt_db(c.sicr_db), fmt_db(fdsic::lin_to_db(mean)))?;
                }
                Ok(())
            })?;
            let cfg = report.config.to_toml();
            file("config.toml", &|w| write!(w, "{cfg}"))?;
        }
    }
    Ok(written)
}
