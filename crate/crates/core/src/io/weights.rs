//! Spatial weights from catchment overlap.

use std::collections::BTreeMap;
use std::path::Path;

use crate::model::Neighbor;
use crate::{Error, Result};

/// Overlap `Σ_l √(p_l q_l)` of two probability vectors.
pub fn bhattacharyya_weight(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!(
            "distributions have different lengths ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    for v in [p, q] {
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > 1e-9 || v.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Domain(format!("not a probability vector (sum {total})")));
        }
    }
    let w: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(w.min(1.0))
}

/// Each area's `k` largest-weight partners among the other areas.
///
/// `dists[i]` is area `i`'s distribution over a shared set of cells. Ties at
/// the cut-off go to the lower area index. Zero-overlap partners are never
/// neighbours. Returns, for each area `i`, `(j, ω_ji)` pairs sorted by area.
pub fn nearest_neighbors(dists: &[Vec<f64>], k: usize) -> Result<Vec<Vec<Neighbor<f64>>>> {
    let n = dists.len();
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = bhattacharyya_weight(&dists[i], &dists[j])?;
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    Ok((0..n)
        .map(|i| {
            let mut cand: Vec<usize> = (0..n).filter(|&j| j != i && w[i][j] > 0.0).collect();
            // stable sort keeps ascending area order among equal weights
            cand.sort_by(|&a, &b| w[i][b].total_cmp(&w[i][a]));
            cand.truncate(k);
            cand.sort_unstable();
            cand.into_iter()
                .map(|j| Neighbor { area: j, weight: w[j][i] })
                .collect()
        })
        .collect())
}

/// Patient-sample counts `(area_id, neighborhood_id, n)` turned into
/// per-area distributions over the union of neighbourhoods.
///
/// Areas are returned in first-appearance order.
pub fn distributions_from_samples(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut areas: Vec<String> = Vec::new();
    let mut area_idx: BTreeMap<String, usize> = BTreeMap::new();
    let mut hoods: BTreeMap<String, usize> = BTreeMap::new();
    let mut entries: Vec<(usize, String, f64)> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        let parse_err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        if rec.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", rec.len())));
        }
        let n: f64 = rec[2]
            .parse()
            .map_err(|_| parse_err(format!("invalid patient count '{}'", &rec[2])))?;
        if !(n >= 0.0) {
            return Err(parse_err(format!("negative patient count {n}")));
        }
        let a = rec[0].to_string();
        let ai = *area_idx.entry(a.clone()).or_insert_with(|| {
            areas.push(a);
            areas.len() - 1
        });
        let next = hoods.len();
        hoods.entry(rec[1].to_string()).or_insert(next);
        entries.push((ai, rec[1].to_string(), n));
    }
    let mut dists = vec![vec![0.0; hoods.len()]; areas.len()];
    for (ai, h, n) in entries {
        dists[ai][hoods[&h]] += n;
    }
    for (a, d) in areas.iter().zip(dists.iter_mut()) {
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            return Err(Error::Data(format!("area '{a}' has no patients")));
        }
        d.iter_mut().for_each(|v| *v /= total);
    }
    Ok((areas, dists))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((bhattacharyya_weight(&[0.2, 0.8], &[0.2, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(bhattacharyya_weight(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let w = bhattacharyya_weight(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((w - 0.965_925_826_289_068_2).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        assert!(bhattacharyya_weight(&[0.5, 0.5], &[1.0]).is_err());
        assert!(bhattacharyya_weight(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn ties_go_to_lower_index() {
        // area 0 overlaps equally with 1, 2 and 3
        let d = vec![
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.5, 0.0, 0.5, 0.0],
            vec![0.5, 0.0, 0.0, 0.5],
            vec![0.5, 0.0, 0.25, 0.25],
        ];
        let ne = nearest_neighbors(&d, 2).unwrap();
        let ids: Vec<usize> = ne[0].iter().map(|n| n.area).collect();
        assert_eq!(ids, vec![1, 2]);
        assert!(ne.iter().enumerate().all(|(i, v)| v.iter().all(|n| n.area != i)));
    }
}
