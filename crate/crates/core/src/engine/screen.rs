//! Candidate interaction pairs from first-layer weights.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSource {
    WeightScreen,
    Exhaustive,
}

/// Ordered partner lists `P_j`, indexed by column (entry 0 is unused).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePairs {
    pub lists: Vec<Vec<usize>>,
    pub source: CandidateSource,
    pub l: usize,
}

impl CandidatePairs {
    /// Every other feature, in column order.
    pub fn exhaustive(p: usize) -> Self {
        let lists = (0..=p)
            .map(|j| if j == 0 { Vec::new() } else { (1..=p).filter(|&k| k != j).collect() })
            .collect();
        CandidatePairs { lists, source: CandidateSource::Exhaustive, l: p.saturating_sub(1) }
    }

    pub fn partners(&self, j: usize) -> &[usize] {
        self.lists.get(j).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn feature_count(&self) -> usize {
        self.lists.len().saturating_sub(1)
    }
}

/// `G = |W|ᵀ|W|` for an `h × (p+1)` weight matrix.
pub fn interaction_matrix(weights: ArrayView2<f64>) -> Array2<f64> {
    let abs = weights.mapv(f64::abs);
    abs.t().dot(&abs)
}

/// For each feature, the `l` partners with the largest off-diagonal entries
/// of `|W|ᵀ|W|` (intercept excluded, ties to the lower index).
pub fn screen_interactions(weights: ArrayView2<f64>, l: usize) -> Result<CandidatePairs> {
    if l == 0 {
        return Err(invalid("candidate list length must be at least 1"));
    }
    let width = weights.ncols();
    if width < 3 {
        return Err(invalid("screening needs at least two features"));
    }
    let p = width - 1;
    let l = if l > p - 1 {
        log::warn!("candidate list length {l} exceeds {} other features; clamping", p - 1);
        p - 1
    } else {
        l
    };
    let g = interaction_matrix(weights);
    let lists = (0..=p)
        .map(|j| {
            if j == 0 {
                return Vec::new();
            }
            let mut others: Vec<usize> = (1..=p).filter(|&k| k != j).collect();
            others.sort_by(|&a, &b| g[[j, b]].total_cmp(&g[[j, a]]).then(a.cmp(&b)));
            others.truncate(l);
            others
        })
        .collect();
    Ok(CandidatePairs { lists, source: CandidateSource::WeightScreen, l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hand_product() {
        let g = interaction_matrix(array![[1.0, 2.0], [3.0, 0.0]].view());
        assert_eq!(g, array![[10.0, 2.0], [2.0, 4.0]]);
        let g = interaction_matrix(array![[-1.0, 2.0], [3.0, -0.0]].view());
        assert_eq!(g, array![[10.0, 2.0], [2.0, 4.0]]);
    }

    #[test]
    fn ranks_partners() {
        // features 1..4; 1 and 3 share a unit, 2 and 4 share another
        let w = array![[0.1, 5.0, 0.0, 4.0, 0.0], [0.1, 0.0, 2.0, 0.1, 3.0], [9.0, 0.0, 0.0, 0.0, 0.0]];
        let c = screen_interactions(w.view(), 1).unwrap();
        assert_eq!(c.partners(1), &[3]);
        assert_eq!(c.partners(2), &[4]);
        assert_eq!(c.partners(4), &[2]);
        assert!(c.lists.iter().all(|ps| !ps.contains(&0)));
        let full = screen_interactions(w.view(), 10).unwrap();
        assert_eq!(full.l, 3);
        assert_eq!(full.partners(1), &[3, 2, 4]);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let w = array![[1.0, 1.0, 1.0, 1.0]];
        let c = screen_interactions(w.view(), 2).unwrap();
        assert_eq!(c.partners(2), &[1, 3]);
    }

    #[test]
    fn exhaustive_lists() {
        let c = CandidatePairs::exhaustive(3);
        assert_eq!(c.partners(2), &[1, 3]);
        assert!(screen_interactions(array![[1.0, 1.0, 1.0]].view(), 0).is_err());
    }
}
