//! Structure recovery against a known DAG.
//!
//! Adjacency matrices are `d × d` with `[i][j] == true` meaning `j → i`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};

/// When an edge counts as present.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Median `η` above `α_m(1 − ν̄)`.
    #[default]
    RejectionBound,
    /// Median `η` above 0.5.
    Half,
}

/// Posterior edge statistics of one fitted DAG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeEstimate {
    pub eta_median: Vec<Vec<f64>>,
    /// Ranking score for the AUC.
    pub eta_mean: Vec<Vec<f64>>,
    /// Mean column rate `ν̄` seen by each entry.
    pub nu_mean: Vec<Vec<f64>>,
    pub alpha_m: f64,
}

impl EdgeEstimate {
    pub fn d(&self) -> usize {
        self.eta_median.len()
    }

    pub fn adjacency(&self, policy: ThresholdPolicy) -> Vec<Vec<bool>> {
        let d = self.d();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let cut = match policy {
                            ThresholdPolicy::RejectionBound => {
                                self.alpha_m * (1.0 - self.nu_mean[i][j])
                            }
                            ThresholdPolicy::Half => 0.5,
                        };
                        i != j && self.eta_median[i][j] > cut
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureMetrics {
    pub true_edges: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub tpr: f64,
    /// False positives over the absent ordered pairs.
    pub fpr: f64,
    /// True edges estimated with the opposite direction only.
    pub reversed: usize,
    /// Unordered pairs whose relation differs; a reversal counts once.
    pub structural_errors: usize,
    pub auc: Option<f64>,
}

fn check(a: &[Vec<bool>], d: usize, what: &str) -> Result<()> {
    if a.len() != d || a.iter().any(|r| r.len() != d) {
        return Err(SlimError::Dimension(format!("{what} is not {d} × {d}")));
    }
    Ok(())
}

/// Compare an estimated adjacency with the truth; `scores` (same layout)
/// give the AUC when supplied.
pub fn compare_adjacency(
    est: &[Vec<bool>],
    truth: &[Vec<bool>],
    scores: Option<&[Vec<f64>]>,
) -> Result<StructureMetrics> {
    let d = truth.len();
    check(est, d, "estimate")?;
    if let Some(s) = scores {
        if s.len() != d || s.iter().any(|r| r.len() != d) {
            return Err(SlimError::Dimension(format!("scores are not {d} × {d}")));
        }
    }
    let (mut te, mut tp, mut fp, mut rev, mut errs) = (0, 0, 0, 0, 0);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            if truth[i][j] {
                te += 1;
                if est[i][j] {
                    tp += 1;
                } else if est[j][i] {
                    rev += 1;
                }
            } else if est[i][j] {
                fp += 1;
            }
            if j < i && (truth[i][j], truth[j][i]) != (est[i][j], est[j][i]) {
                errs += 1;
            }
        }
    }
    let absent = d * (d - 1) - te;
    let auc = scores.and_then(|s| auc(s, truth));
    Ok(StructureMetrics {
        true_edges: te,
        true_positives: tp,
        false_positives: fp,
        tpr: if te == 0 { 1.0 } else { tp as f64 / te as f64 },
        fpr: if absent == 0 {
            0.0
        } else {
            fp as f64 / absent as f64
        },
        reversed: rev,
        structural_errors: errs,
        auc,
    })
}

pub fn structure_metrics(
    est: &EdgeEstimate,
    truth: &[Vec<bool>],
    policy: ThresholdPolicy,
) -> Result<StructureMetrics> {
    check(truth, est.d(), "truth")?;
    compare_adjacency(&est.adjacency(policy), truth, Some(&est.eta_mean))
}

/// Area under the ROC curve of `scores` over ordered off-diagonal pairs, as
/// the Mann-Whitney concordance with ties counted half. `None` without both
/// classes.
pub fn auc(scores: &[Vec<f64>], truth: &[Vec<bool>]) -> Option<f64> {
    let d = truth.len();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                if truth[i][j] {
                    pos.push(scores[i][j]);
                } else {
                    neg.push(scores[i][j]);
                }
            }
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    // rank-sum form
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&v| (v, true))
        .chain(neg.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < all.len() {
        let mut e = k;
        while e + 1 < all.len() && all[e + 1].0 == all[k].0 {
            e += 1;
        }
        let avg = (k + e) as f64 / 2.0 + 1.0;
        rank_sum += all[k..=e].iter().filter(|x| x.1).count() as f64 * avg;
        k = e + 1;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain4() -> Vec<Vec<bool>> {
        // 0 → 1 → 2 → 3, 0 → 3
        let mut t = vec![vec![false; 4]; 4];
        t[1][0] = true;
        t[2][1] = true;
        t[3][2] = true;
        t[3][0] = true;
        t
    }

    fn transpose(a: &[Vec<bool>]) -> Vec<Vec<bool>> {
        (0..a.len())
            .map(|i| (0..a.len()).map(|j| a[j][i]).collect())
            .collect()
    }

    #[test]
    fn perfect_estimate() {
        let t = chain4();
        let m = compare_adjacency(&t, &t, None).unwrap();
        assert_eq!(
            (m.tpr, m.fpr, m.reversed, m.structural_errors),
            (1.0, 0.0, 0, 0)
        );
    }

    #[test]
    fn every_edge_flipped() {
        let t = chain4();
        let m = compare_adjacency(&transpose(&t), &t, None).unwrap();
        assert_eq!(m.reversed, 4);
        assert_eq!(m.structural_errors, 4);
        assert_eq!(m.tpr, 0.0);
        assert_eq!(m.false_positives, 4);
        assert!((m.fpr - 4.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn rejection_bound_depends_on_column_rate() {
        let e = EdgeEstimate {
            eta_median: vec![vec![0.0, 0.0], vec![0.5, 0.0]],
            eta_mean: vec![vec![0.0; 2]; 2],
            nu_mean: vec![vec![0.9; 2], vec![0.1, 0.9]],
            alpha_m: 0.95,
        };
        // bound 0.855 with ν̄ = 0.1
        assert!(!e.adjacency(ThresholdPolicy::RejectionBound)[1][0]);
        assert!(!e.adjacency(ThresholdPolicy::Half)[1][0]);
        let mut e2 = e.clone();
        e2.nu_mean[1][0] = 0.9;
        assert!(e2.adjacency(ThresholdPolicy::RejectionBound)[1][0]);
    }

    /// Brute-force concordance over every positive/negative pair.
    fn concordance(scores: &[Vec<f64>], truth: &[Vec<bool>]) -> f64 {
        let d = truth.len();
        let mut pos = vec![];
        let mut neg = vec![];
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    if truth[i][j] {
                        pos.push(scores[i][j])
                    } else {
                        neg.push(scores[i][j])
                    }
                }
            }
        }
        let mut c = 0.0;
        for p in &pos {
            for n in &neg {
                c += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        c / (pos.len() * neg.len()) as f64
    }

    proptest! {
        #[test]
        fn auc_equals_concordance(raw in prop::collection::vec(0u8..5, 16)) {
            let t = chain4();
            let s: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| raw[i * 4 + j] as f64 / 4.0).collect()).collect();
            let a = auc(&s, &t).unwrap();
            prop_assert!((a - concordance(&s, &t)).abs() < 1e-12);
        }

        #[test]
        fn relabeling_leaves_metrics_unchanged(
            est_bits in prop::collection::vec(any::<bool>(), 16),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
            raw in prop::collection::vec(0u8..5, 16),
        ) {
            let t = chain4();
            let est: Vec<Vec<bool>> = (0..4).map(|i| (0..4).map(|j| i != j && est_bits[i * 4 + j]).collect()).collect();
            let s: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| raw[i * 4 + j] as f64).collect()).collect();
            let relabel_b = |a: &Vec<Vec<bool>>| -> Vec<Vec<bool>> {
                let mut o = vec![vec![false; 4]; 4];
                for i in 0..4 { for j in 0..4 { o[perm[i]][perm[j]] = a[i][j]; } }
                o
            };
            let mut s2 = vec![vec![0.0; 4]; 4];
            for i in 0..4 { for j in 0..4 { s2[perm[i]][perm[j]] = s[i][j]; } }
            let m1 = compare_adjacency(&est, &t, Some(&s)).unwrap();
            let m2 = compare_adjacency(&relabel_b(&est), &relabel_b(&t), Some(&s2)).unwrap();
            prop_assert_eq!(m1, m2);
        }
    }

    #[test]
    fn shape_errors() {
        let t = chain4();
        assert!(compare_adjacency(&t[..3], &t, None).is_err());
    }
}
