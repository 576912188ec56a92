//! Observed panel: counts, covariates and the neighbour graph.

use crate::num::{lit, Scalar};
use crate::{Error, Result};

/// Named covariate table over `(area, time)`.
///
/// Values are stored area-major: `values[(i * n_times + t) * n_cov + q]`.
/// The table may extend past the observed count horizon so forecasts can use
/// known future covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates<F> {
    names: Vec<String>,
    n_areas: usize,
    n_times: usize,
    values: Vec<F>,
}

impl<F: Scalar> Covariates<F> {
    pub fn empty(n_areas: usize, n_times: usize) -> Self {
        Self {
            names: Vec::new(),
            n_areas,
            n_times,
            values: Vec::new(),
        }
    }

    /// Builds a table from one `n_areas × n_times` matrix per named column.
    pub fn from_columns(
        n_areas: usize,
        n_times: usize,
        columns: Vec<(String, Vec<F>)>,
    ) -> Result<Self> {
        let n_cov = columns.len();
        let mut values = vec![F::zero(); n_areas * n_times * n_cov];
        let mut names = Vec::with_capacity(n_cov);
        for (q, (name, col)) in columns.into_iter().enumerate() {
            if col.len() != n_areas * n_times {
                return Err(Error::Data(format!(
                    "covariate '{name}' has {} values, expected {}",
                    col.len(),
                    n_areas * n_times
                )));
            }
            if names.contains(&name) {
                return Err(Error::Data(format!("duplicate covariate '{name}'")));
            }
            for (cell, v) in col.into_iter().enumerate() {
                values[cell * n_cov + q] = v;
            }
            names.push(name);
        }
        Ok(Self {
            names,
            n_areas,
            n_times,
            values,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize, q: usize) -> F {
        self.values[(i * self.n_times + t) * self.names.len() + q]
    }

    /// All covariate values of one `(area, time)` cell.
    #[inline]
    pub fn row(&self, i: usize, t: usize) -> &[F] {
        let n = self.names.len();
        let start = (i * self.n_times + t) * n;
        &self.values[start..start + n]
    }

    /// Column `q` over the given time range, area-major.
    pub fn column(&self, q: usize, times: std::ops::Range<usize>) -> Vec<F> {
        let mut out = Vec::with_capacity(self.n_areas * times.len());
        for i in 0..self.n_areas {
            for t in times.clone() {
                out.push(self.get(i, t, q));
            }
        }
        out
    }

    /// Sample standard deviation of column `q` over `times`.
    pub fn column_sd(&self, q: usize, times: std::ops::Range<usize>) -> F {
        let col = self.column(q, times);
        sample_sd(&col)
    }

    /// Centres (and optionally scales) every column in place using the
    /// statistics over `times`; returns the transform per column.
    pub fn standardize(
        &mut self,
        times: std::ops::Range<usize>,
        scale: bool,
    ) -> Result<Vec<CovariateTransform<F>>> {
        let n = self.names.len();
        let mut transforms = Vec::with_capacity(n);
        for q in 0..n {
            let col = self.column(q, times.clone());
            let mean = col.iter().copied().sum::<F>() / lit::<F>(col.len() as f64);
            let sd = sample_sd(&col);
            if !(sd > F::zero()) {
                return Err(Error::Data(format!(
                    "covariate '{}' is constant (zero standard deviation)",
                    self.names[q]
                )));
            }
            let divisor = if scale { sd } else { F::one() };
            for cell in 0..self.n_areas * self.n_times {
                let v = &mut self.values[cell * n + q];
                *v = (*v - mean) / divisor;
            }
            transforms.push(CovariateTransform {
                name: self.names[q].clone(),
                mean,
                scale: divisor,
            });
        }
        Ok(transforms)
    }
}

fn sample_sd<F: Scalar>(col: &[F]) -> F {
    if col.len() < 2 {
        return F::zero();
    }
    let n = lit::<F>(col.len() as f64);
    let mean = col.iter().copied().sum::<F>() / n;
    let ss: F = col.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (ss / (n - F::one())).sqrt()
}

/// Affine transform applied at ingestion: `stored = (raw - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTransform<F> {
    pub name: String,
    pub mean: F,
    pub scale: F,
}

/// An incoming edge `j -> i` with weight `ω_ji`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<F> {
    pub area: usize,
    pub weight: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelData<F> {
    area_ids: Vec<String>,
    n_times: usize,
    counts: Vec<u32>,
    covariates: Covariates<F>,
    neighbors: Vec<Vec<Neighbor<F>>>,
    influences: Vec<Vec<Neighbor<F>>>,
    transforms: Vec<CovariateTransform<F>>,
}

impl<F: Scalar> PanelData<F> {
    /// Builds a validated panel.
    ///
    /// `counts` is area-major (`counts[i * n_times + t]`); `neighbors[i]`
    /// lists `NE(i)` as `(j, ω_ji)`.
    pub fn new(
        area_ids: Vec<String>,
        n_times: usize,
        counts: Vec<u32>,
        covariates: Covariates<F>,
        neighbors: Vec<Vec<Neighbor<F>>>,
    ) -> Result<Self> {
        let n = area_ids.len();
        if n == 0 || n_times == 0 {
            return Err(Error::Data("panel needs at least one area and one time".into()));
        }
        if counts.len() != n * n_times {
            return Err(Error::Data(format!(
                "expected {} counts, got {}",
                n * n_times,
                counts.len()
            )));
        }
        if covariates.n_areas != n || covariates.n_times < n_times {
            return Err(Error::Data(
                "covariate table does not cover every (area, time)".into(),
            ));
        }
        if neighbors.len() != n {
            return Err(Error::Data("neighbour list length differs from area count".into()));
        }
        let mut influences = vec![Vec::new(); n];
        for (i, ne) in neighbors.iter().enumerate() {
            for nb in ne {
                if nb.area >= n {
                    return Err(Error::Data(format!("neighbour index {} out of range", nb.area)));
                }
                if nb.area == i {
                    return Err(Error::Data(format!("area {} lists itself as a neighbour", area_ids[i])));
                }
                if !(nb.weight > F::zero()) || !nb.weight.is_finite() {
                    return Err(Error::Data(format!(
                        "weight {} -> {} must be positive",
                        area_ids[nb.area], area_ids[i]
                    )));
                }
                if ne.iter().filter(|o| o.area == nb.area).count() > 1 {
                    return Err(Error::Data(format!(
                        "duplicate neighbour {} of {}",
                        area_ids[nb.area], area_ids[i]
                    )));
                }
                influences[nb.area].push(Neighbor {
                    area: i,
                    weight: nb.weight,
                });
            }
        }
        Ok(Self {
            area_ids,
            n_times,
            counts,
            covariates,
            neighbors,
            influences,
            transforms: Vec::new(),
        })
    }

    pub fn with_transforms(mut self, transforms: Vec<CovariateTransform<F>>) -> Self {
        self.transforms = transforms;
        self
    }

    pub fn n_areas(&self) -> usize {
        self.area_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn area_ids(&self) -> &[String] {
        &self.area_ids
    }

    #[inline]
    pub fn count(&self, i: usize, t: usize) -> u32 {
        self.counts[i * self.n_times + t]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn area_counts(&self, i: usize) -> &[u32] {
        &self.counts[i * self.n_times..(i + 1) * self.n_times]
    }

    pub fn covariates(&self) -> &Covariates<F> {
        &self.covariates
    }

    pub fn transforms(&self) -> &[CovariateTransform<F>] {
        &self.transforms
    }

    /// `NE(i)` with weights `ω_ji`.
    pub fn neighbors(&self, i: usize) -> &[Neighbor<F>] {
        &self.neighbors[i]
    }

    /// Areas `j` with `i ∈ NE(j)`, carrying `ω_ij`.
    pub fn influenced_by(&self, i: usize) -> &[Neighbor<F>] {
        &self.influences[i]
    }

    /// Largest off-diagonal weight; `None` without edges.
    pub fn max_weight(&self) -> Option<F> {
        self.neighbors
            .iter()
            .flatten()
            .map(|n| n.weight)
            .fold(None, |acc, w| match acc {
                Some(a) if a >= w => Some(a),
                _ => Some(w),
            })
    }

    /// Same panel restricted to the first `n_times` counts; covariates are
    /// kept in full so forecasts can read future values.
    pub fn truncated(&self, n_times: usize) -> Result<Self> {
        if n_times == 0 || n_times > self.n_times {
            return Err(Error::Contract(format!(
                "cannot truncate {} times to {n_times}",
                self.n_times
            )));
        }
        let mut counts = Vec::with_capacity(self.n_areas() * n_times);
        for i in 0..self.n_areas() {
            counts.extend_from_slice(&self.area_counts(i)[..n_times]);
        }
        Ok(Self {
            counts,
            n_times,
            ..self.clone()
        })
    }

    /// Replaces the counts (used by simulators that fill a skeleton).
    pub fn with_counts(&self, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != self.counts.len() {
            return Err(Error::Data("count vector length mismatch".into()));
        }
        Ok(Self {
            counts,
            ..self.clone()
        })
    }
}
