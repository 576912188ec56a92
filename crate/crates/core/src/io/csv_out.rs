//! CSV emitters for results, each with a matching loader.
//!
//! Times are written as week labels (`first_week + t`); loaders take the
//! same `first_week` and area ids to map them back.

use std::collections::HashMap;
use std::path::Path;

use crate::diagnostics::ParamDiagnostic;
use crate::inference::{ForecastSummary, StateProbSeries, WaicReport};
use crate::model::Regime;
use crate::sim::BenchmarkTruth;
use crate::{Error, Result};

use super::atomic_write;
use super::panel::finish;

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    atomic_write(path, &finish(w)?)
}

/// Records of a CSV file with the expected header, plus their line numbers.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let got: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if got != header {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("expected header '{}'", header.join(",")),
        });
    }
    rdr.records()
        .map(|r| {
            let r = r?;
            let line = r.position().map_or(0, |p| p.line() as usize);
            if r.len() != header.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line,
                    msg: "wrong number of fields".into(),
                });
            }
            Ok((line, r))
        })
        .collect()
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, k: usize) -> Result<T> {
    rec[k].parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        line,
        msg: format!("invalid value '{}'", &rec[k]),
    })
}

struct Lookup<'a> {
    path: &'a Path,
    index: HashMap<&'a str, usize>,
    first_week: i64,
}

impl<'a> Lookup<'a> {
    fn new(path: &'a Path, ids: &'a [String], first_week: i64) -> Self {
        Self {
            path,
            index: ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect(),
            first_week,
        }
    }

    fn cell(&self, line: usize, rec: &csv::StringRecord) -> Result<(usize, usize)> {
        let bad = |msg: String| Error::Parse {
            path: self.path.display().to_string(),
            line,
            msg,
        };
        let i = *self.index.get(&rec[0]).ok_or_else(|| bad(format!("unknown area id '{}'", &rec[0])))?;
        let week: i64 = field(self.path, line, rec, 1)?;
        if week < self.first_week {
            return Err(bad(format!("week {week} precedes the first week")));
        }
        Ok((i, (week - self.first_week) as usize))
    }
}

/// `area_id,week,p_absence,p_endemic,p_outbreak`.
pub fn write_state_probabilities(path: &Path, s: &StateProbSeries, ids: &[String], first_week: i64) -> Result<()> {
    let rows = (0..s.n_areas).flat_map(|i| {
        s.times().map(move |t| {
            let p = s.get(i, t);
            vec![
                ids[i].clone(),
                (first_week + t as i64).to_string(),
                p[0].to_string(),
                p[1].to_string(),
                p[2].to_string(),
            ]
        })
    });
    write_rows(path, &["area_id", "week", "p_absence", "p_endemic", "p_outbreak"], rows)
}

pub fn read_state_probabilities(path: &Path, ids: &[String], first_week: i64) -> Result<StateProbSeries> {
    let recs = read_rows(path, &["area_id", "week", "p_absence", "p_endemic", "p_outbreak"])?;
    let lk = Lookup::new(path, ids, first_week);
    let mut cells = Vec::with_capacity(recs.len());
    for (line, r) in &recs {
        let (i, t) = lk.cell(*line, r)?;
        let p = [field(path, *line, r, 2)?, field(path, *line, r, 3)?, field(path, *line, r, 4)?];
        cells.push((i, t, p));
    }
    let t0 = cells.iter().map(|c| c.1).min().unwrap_or(0);
    let t1 = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    let nt = t1 - t0;
    let n = ids.len();
    let mut probs = vec![[f64::NAN; 3]; n * nt];
    for (i, t, p) in cells {
        probs[i * nt + t - t0] = p;
    }
    if probs.iter().any(|p| p[0].is_nan()) {
        return Err(Error::Data(format!("{}: state probabilities do not cover every cell", path.display())));
    }
    StateProbSeries::new(n, t0, nt, probs)
}

/// `area_id,week,mean,lower,upper,p_outbreak`; `t_last` is the last observed time.
pub fn write_forecast(path: &Path, rows: &[ForecastSummary], ids: &[String], first_week: i64, t_last: usize) -> Result<()> {
    let out = rows.iter().map(|r| {
        vec![
            ids[r.area].clone(),
            (first_week + (t_last + r.step) as i64).to_string(),
            r.mean.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.p_outbreak.to_string(),
        ]
    });
    write_rows(path, &["area_id", "week", "mean", "lower", "upper", "p_outbreak"], out)
}

pub fn read_forecast(path: &Path, ids: &[String], first_week: i64, t_last: usize) -> Result<Vec<ForecastSummary>> {
    let lk = Lookup::new(path, ids, first_week);
    read_rows(path, &["area_id", "week", "mean", "lower", "upper", "p_outbreak"])?
        .iter()
        .map(|(line, r)| {
            let (area, t) = lk.cell(*line, r)?;
            if t <= t_last {
                return Err(Error::Data(format!("{}:{line}: forecast week inside the observed range", path.display())));
            }
            Ok(ForecastSummary {
                area,
                step: t - t_last,
                mean: field(path, *line, r, 2)?,
                lower: field(path, *line, r, 3)?,
                upper: field(path, *line, r, 4)?,
                p_outbreak: field(path, *line, r, 5)?,
            })
        })
        .collect()
}

/// `model,lpdd,pwaic,waic`, one row per fitted model.
pub fn write_waic(path: &Path, rows: &[(String, WaicReport)]) -> Result<()> {
    let out = rows.iter().map(|(m, w)| vec![m.clone(), w.lpdd.to_string(), w.pwaic.to_string(), w.waic.to_string()]);
    write_rows(path, &["model", "lpdd", "pwaic", "waic"], out)
}

pub fn read_waic(path: &Path) -> Result<Vec<(String, WaicReport)>> {
    read_rows(path, &["model", "lpdd", "pwaic", "waic"])?
        .iter()
        .map(|(line, r)| {
            Ok((
                r[0].to_string(),
                WaicReport {
                    lpdd: field(path, *line, r, 1)?,
                    pwaic: field(path, *line, r, 2)?,
                    waic: field(path, *line, r, 3)?,
                },
            ))
        })
        .collect()
}

/// `week,score` for one-step-ahead scores at 0-based times.
pub fn write_scores(path: &Path, scores: &[(usize, f64)], first_week: i64) -> Result<()> {
    let out = scores.iter().map(|&(t, s)| vec![(first_week + t as i64).to_string(), s.to_string()]);
    write_rows(path, &["week", "score"], out)
}

pub fn read_scores(path: &Path, first_week: i64) -> Result<Vec<(usize, f64)>> {
    read_rows(path, &["week", "score"])?
        .iter()
        .map(|(line, r)| {
            let w: i64 = field(path, *line, r, 0)?;
            if w < first_week {
                return Err(Error::Data(format!("{}:{line}: week precedes the first week", path.display())));
            }
            Ok(((w - first_week) as usize, field(path, *line, r, 1)?))
        })
        .collect()
}

/// `parameter,ess,rhat,degenerate`.
pub fn write_diagnostics(path: &Path, diags: &[ParamDiagnostic]) -> Result<()> {
    let out = diags
        .iter()
        .map(|d| vec![d.name.clone(), d.ess.to_string(), d.rhat.to_string(), d.degenerate.to_string()]);
    write_rows(path, &["parameter", "ess", "rhat", "degenerate"], out)
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<ParamDiagnostic>> {
    read_rows(path, &["parameter", "ess", "rhat", "degenerate"])?
        .iter()
        .map(|(line, r)| {
            Ok(ParamDiagnostic {
                name: r[0].to_string(),
                ess: field(path, *line, r, 1)?,
                rhat: field(path, *line, r, 2)?,
                degenerate: field(path, *line, r, 3)?,
            })
        })
        .collect()
}

/// `area_id,week,regime` with regime labels 1 = absence, 2 = endemic, 3 = outbreak.
pub fn write_truth(path: &Path, truth: &BenchmarkTruth, ids: &[String], first_week: i64) -> Result<()> {
    let out = (0..truth.n_areas).flat_map(|i| {
        (0..truth.n_times).map(move |t| {
            vec![
                ids[i].clone(),
                (first_week + t as i64).to_string(),
                truth.regime(i, t).label().to_string(),
            ]
        })
    });
    write_rows(path, &["area_id", "week", "regime"], out)
}

pub fn read_truth(path: &Path, ids: &[String], first_week: i64) -> Result<BenchmarkTruth> {
    let recs = read_rows(path, &["area_id", "week", "regime"])?;
    let lk = Lookup::new(path, ids, first_week);
    let nt = recs
        .iter()
        .map(|(line, r)| lk.cell(*line, r).map(|c| c.1 + 1))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let n = ids.len();
    let mut regimes: Vec<Option<Regime>> = vec![None; n * nt];
    for (line, r) in &recs {
        let (i, t) = lk.cell(*line, r)?;
        let label: u8 = field(path, *line, r, 2)?;
        regimes[i * nt + t] = Some(match label {
            1 => Regime::Absence,
            2 => Regime::Endemic,
            3 => Regime::Outbreak,
            _ => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: *line,
                    msg: format!("regime label {label} is not 1, 2 or 3"),
                })
            }
        });
    }
    let regimes: Option<Vec<Regime>> = regimes.into_iter().collect();
    let regimes = regimes.ok_or_else(|| Error::Data(format!("{}: truth does not cover every cell", path.display())))?;
    BenchmarkTruth::from_regimes(n, nt, regimes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_cluster_benchmark_seeded, BenchmarkConfig};

    #[test]
    fn emitters_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<String> = vec!["x".into(), "y".into()];

        let s = StateProbSeries::new(2, 3, 2, vec![[0.1, 0.2, 0.7], [0.0, 1.0, 0.0], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], [0.5, 0.25, 0.25]]).unwrap();
        let p = dir.path().join("states.csv");
        write_state_probabilities(&p, &s, &ids, 10).unwrap();
        assert_eq!(read_state_probabilities(&p, &ids, 10).unwrap(), s);

        let f = vec![ForecastSummary { area: 1, step: 2, mean: 3.5, lower: 1.0, upper: 7.0, p_outbreak: 0.125 }];
        let p = dir.path().join("forecast.csv");
        write_forecast(&p, &f, &ids, 1, 9).unwrap();
        assert_eq!(read_forecast(&p, &ids, 1, 9).unwrap(), f);

        let w = vec![("coupled".to_string(), WaicReport { lpdd: -10.5, pwaic: 2.25, waic: 25.5 })];
        let p = dir.path().join("waic.csv");
        write_waic(&p, &w).unwrap();
        assert_eq!(read_waic(&p).unwrap(), w);

        let sc = vec![(4, 3.2), (5, 0.1 + 0.2)];
        let p = dir.path().join("scores.csv");
        write_scores(&p, &sc, 1).unwrap();
        assert_eq!(read_scores(&p, 1).unwrap(), sc);

        let d = vec![ParamDiagnostic { name: "a".into(), ess: 1234.5, rhat: 1.001, degenerate: false }];
        let p = dir.path().join("diag.csv");
        write_diagnostics(&p, &d).unwrap();
        assert_eq!(read_diagnostics(&p).unwrap(), d);
    }

    #[test]
    fn truth_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let (data, truth) = simulate_cluster_benchmark_seeded(&BenchmarkConfig::default(), 1, 2).unwrap();
        let p = dir.path().join("truth.csv");
        write_truth(&p, &truth, data.area_ids(), 1).unwrap();
        assert_eq!(read_truth(&p, data.area_ids(), 1).unwrap(), truth);
    }
}
