//! Panel CSV files.
//!
//! * counts: `area_id,week,count`, one row per observed `(area, week)`;
//! * covariates (long form): `area_id,week,name,value`, which may run past
//!   the last count week so forecasts see known future values;
//! * neighbours: `from_area,to_area,weight`, an edge `from -> to` meaning
//!   `from` is a neighbour of `to`. Weights must be symmetric unless the
//!   file starts with the line `# asymmetric`.
//!
//! Weeks are integers; the smallest count week becomes time 0 and every
//! week up to the largest must be present for every area.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::model::{Covariates, Neighbor, PanelData};
use crate::{Error, Result};

use super::atomic_write;

/// A loaded panel and the week label of time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPanel {
    pub data: PanelData<f64>,
    pub first_week: i64,
}

impl LoadedPanel {
    pub fn week(&self, t: usize) -> i64 {
        self.first_week + t as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Divide centred covariates by their standard deviation.
    pub scale_covariates: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { scale_covariates: true }
    }
}

struct Rows {
    path: String,
    records: Vec<(usize, csv::StringRecord)>,
}

impl Rows {
    fn read(path: &Path, fields: &[&str]) -> Result<Self> {
        let text = super::read_text(path)?;
        Self::parse(&path.display().to_string(), &text, fields)
    }

    fn parse(path: &str, text: &str, fields: &[&str]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        let got: Vec<&str> = header.iter().collect();
        if got != fields {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: format!("expected header '{}', found '{}'", fields.join(","), got.join(",")),
            });
        }
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != fields.len() {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("expected {} fields, found {}", fields.len(), rec.len()),
                });
            }
            records.push((line, rec));
        }
        Ok(Self { path: path.into(), records })
    }

    fn err(&self, line: usize, msg: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg,
        }
    }

    fn parse_field<T: std::str::FromStr>(&self, line: usize, rec: &csv::StringRecord, k: usize, what: &str) -> Result<T> {
        rec[k]
            .parse()
            .map_err(|_| self.err(line, format!("invalid {what} '{}'", &rec[k])))
    }
}

/// Reads and validates a panel; covariates are centred (and scaled) over
/// the observed weeks, with the transforms recorded on the panel.
pub fn load_panel(
    counts_path: &Path,
    covariates_path: Option<&Path>,
    neighbors_path: Option<&Path>,
    opts: LoadOptions,
) -> Result<LoadedPanel> {
    let counts = Rows::read(counts_path, &["area_id", "week", "count"])?;
    let covs = covariates_path
        .map(|p| Rows::read(p, &["area_id", "week", "name", "value"]))
        .transpose()?;
    let neighbors = match neighbors_path {
        Some(p) => Some((Rows::read(p, &["from_area", "to_area", "weight"])?, declares_asymmetric(&super::read_text(p)?))),
        None => None,
    };
    assemble(counts, covs, neighbors, opts)
}

fn declares_asymmetric(text: &str) -> bool {
    text.lines().next().is_some_and(|l| l.trim() == "# asymmetric")
}

fn assemble(
    counts: Rows,
    covs: Option<Rows>,
    neighbors: Option<(Rows, bool)>,
    opts: LoadOptions,
) -> Result<LoadedPanel> {
    // counts
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut cells: BTreeMap<(usize, i64), u32> = BTreeMap::new();
    for (line, rec) in &counts.records {
        let week: i64 = counts.parse_field(*line, rec, 1, "week")?;
        let raw: i64 = counts.parse_field(*line, rec, 2, "count")?;
        if raw < 0 {
            return Err(counts.err(*line, format!("negative count {raw}")));
        }
        let y = u32::try_from(raw).map_err(|_| counts.err(*line, format!("count {raw} too large")))?;
        let id = rec[0].to_string();
        let i = *index.entry(id.clone()).or_insert_with(|| {
            ids.push(id);
            ids.len() - 1
        });
        if cells.insert((i, week), y).is_some() {
            return Err(counts.err(*line, format!("duplicate count for area '{}' week {week}", &rec[0])));
        }
    }
    if ids.is_empty() {
        return Err(counts.err(1, "no count rows".into()));
    }
    let first_week = cells.keys().map(|k| k.1).min().expect("non-empty");
    let last_week = cells.keys().map(|k| k.1).max().expect("non-empty");
    let nt = (last_week - first_week + 1) as usize;
    let n = ids.len();
    let mut y = vec![0u32; n * nt];
    for (i, id) in ids.iter().enumerate() {
        for t in 0..nt {
            let w = first_week + t as i64;
            y[i * nt + t] = *cells
                .get(&(i, w))
                .ok_or_else(|| Error::Data(format!("{}: no count for area '{id}' week {w}", counts.path)))?;
        }
    }

    // covariates
    let covariates = match covs {
        None => Covariates::empty(n, nt),
        Some(rows) => long_covariates(&rows, &index, &ids, first_week, nt)?,
    };
    let mut covariates = covariates;
    let transforms = if covariates.is_empty() {
        Vec::new()
    } else {
        covariates.standardize(0..nt, opts.scale_covariates)?
    };

    // neighbours
    let ne = match neighbors {
        None => vec![Vec::new(); n],
        Some((rows, asymmetric)) => neighbor_lists(&rows, asymmetric, &index)?,
    };
    let data = PanelData::new(ids, nt, y, covariates, ne)?.with_transforms(transforms);
    Ok(LoadedPanel { data, first_week })
}

fn long_covariates(
    rows: &Rows,
    index: &HashMap<String, usize>,
    ids: &[String],
    first_week: i64,
    n_counts: usize,
) -> Result<Covariates<f64>> {
    let mut names: Vec<String> = Vec::new();
    let mut values: BTreeMap<(usize, usize, i64), f64> = BTreeMap::new();
    let mut last_week = first_week + n_counts as i64 - 1;
    for (line, rec) in &rows.records {
        let i = *index
            .get(&rec[0])
            .ok_or_else(|| rows.err(*line, format!("unknown area id '{}'", &rec[0])))?;
        let week: i64 = rows.parse_field(*line, rec, 1, "week")?;
        if week < first_week {
            continue;
        }
        let v: f64 = rows.parse_field(*line, rec, 3, "value")?;
        if !v.is_finite() {
            return Err(rows.err(*line, format!("non-finite covariate value '{}'", &rec[3])));
        }
        let q = match names.iter().position(|n| n == &rec[2]) {
            Some(q) => q,
            None => {
                names.push(rec[2].to_string());
                names.len() - 1
            }
        };
        if values.insert((q, i, week), v).is_some() {
            return Err(rows.err(*line, format!("duplicate value of '{}' for area '{}' week {week}", &rec[2], &rec[0])));
        }
        last_week = last_week.max(week);
    }
    let nt = (last_week - first_week + 1) as usize;
    let n = ids.len();
    let mut columns = Vec::with_capacity(names.len());
    for (q, name) in names.iter().enumerate() {
        let mut col = vec![0.0; n * nt];
        for (i, id) in ids.iter().enumerate() {
            for t in 0..nt {
                let w = first_week + t as i64;
                col[i * nt + t] = *values.get(&(q, i, w)).ok_or_else(|| {
                    Error::Data(format!("{}: covariate '{name}' missing for area '{id}' week {w}", rows.path))
                })?;
            }
        }
        columns.push((name.clone(), col));
    }
    Covariates::from_columns(n, nt, columns)
}

fn neighbor_lists(rows: &Rows, asymmetric: bool, index: &HashMap<String, usize>) -> Result<Vec<Vec<Neighbor<f64>>>> {
    let mut edges: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for (line, rec) in &rows.records {
        let lookup = |k: usize| {
            index
                .get(&rec[k])
                .copied()
                .ok_or_else(|| rows.err(*line, format!("unknown area id '{}'", &rec[k])))
        };
        let (from, to) = (lookup(0)?, lookup(1)?);
        if from == to {
            return Err(rows.err(*line, format!("area '{}' lists itself", &rec[0])));
        }
        let w: f64 = rows.parse_field(*line, rec, 2, "weight")?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(rows.err(*line, format!("weight must be positive and finite, found '{}'", &rec[2])));
        }
        if edges.insert((from, to), (w, *line)).is_some() {
            return Err(rows.err(*line, format!("duplicate edge {} -> {}", &rec[0], &rec[1])));
        }
    }
    if !asymmetric {
        for (&(from, to), &(w, line)) in &edges {
            match edges.get(&(to, from)) {
                None => {
                    return Err(rows.err(
                        line,
                        "edge has no reverse edge; start the file with '# asymmetric' to allow this".into(),
                    ))
                }
                Some(&(w2, _)) if w2 != w => {
                    return Err(rows.err(
                        line,
                        format!("weight {w} differs from reverse weight {w2}; start the file with '# asymmetric' to allow this"),
                    ))
                }
                _ => {}
            }
        }
    }
    let mut ne = vec![Vec::new(); index.len()];
    for (&(from, to), &(w, _)) in &edges {
        ne[to].push(Neighbor { area: from, weight: w });
    }
    Ok(ne)
}

/// Raw (untransformed) value of covariate `q` at `(i, t)`.
pub fn raw_covariate(data: &PanelData<f64>, i: usize, t: usize, q: usize) -> f64 {
    let v = data.covariates().get(i, t, q);
    match data.transforms().get(q) {
        Some(tr) => v * tr.scale + tr.mean,
        None => v,
    }
}

/// Writes the three panel files into `dir` (`counts.csv`, `covariates.csv`,
/// `neighbors.csv`), covariates on their original scale. Reloading
/// reproduces the panel; rescaled covariates match to rounding.
pub fn write_panel(data: &PanelData<f64>, first_week: i64, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let ids = data.area_ids();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["area_id", "week", "count"])?;
    for (i, id) in ids.iter().enumerate() {
        for t in 0..data.n_times() {
            w.write_record([id.clone(), (first_week + t as i64).to_string(), data.count(i, t).to_string()])?;
        }
    }
    atomic_write(&dir.join("counts.csv"), &finish(w)?)?;

    let cov = data.covariates();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["area_id", "week", "name", "value"])?;
    for (q, name) in cov.names().iter().enumerate() {
        for (i, id) in ids.iter().enumerate() {
            for t in 0..cov.n_times() {
                w.write_record([
                    id.clone(),
                    (first_week + t as i64).to_string(),
                    name.clone(),
                    raw_covariate(data, i, t, q).to_string(),
                ])?;
            }
        }
    }
    atomic_write(&dir.join("covariates.csv"), &finish(w)?)?;

    let mut symmetric = true;
    for i in 0..data.n_areas() {
        for nb in data.neighbors(i) {
            let back = data.neighbors(nb.area).iter().find(|b| b.area == i);
            if back.is_none_or(|b| b.weight != nb.weight) {
                symmetric = false;
            }
        }
    }
    let mut out = Vec::new();
    if !symmetric {
        out.extend_from_slice(b"# asymmetric\n");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["from_area", "to_area", "weight"])?;
    for i in 0..data.n_areas() {
        for nb in data.neighbors(i) {
            w.write_record([ids[nb.area].clone(), ids[i].clone(), nb.weight.to_string()])?;
        }
    }
    out.extend_from_slice(&finish(w)?);
    atomic_write(&dir.join("neighbors.csv"), &out)?;
    Ok(())
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
