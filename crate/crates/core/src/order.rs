//! Metropolis-Hastings search over row and column permutations of the
//! factor-model mixing matrix.
//!
//! The target for `(P, P_f)` is the Gaussian likelihood of `X` under the
//! masked mixing matrix `Pᵀ (M ⊙ P D P_fᵀ) P_f`, where `M` zeroes everything
//! strictly above the diagonal of the first `d` columns.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};
use crate::gibbs::LinearState;
use crate::permutation::{random_pair, Permutation};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub ordering: Permutation,
    pub count: u64,
    /// Global index of the acceptance that first recorded this ordering.
    pub first_seen: u64,
}

/// Accepted orderings with their acceptance counts, in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PermutationCandidateSet {
    entries: Vec<Candidate>,
    #[serde(skip)]
    index: HashMap<Permutation, usize>,
    total: u64,
}

impl PermutationCandidateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, p: &Permutation) {
        let stamp = self.total;
        self.total += 1;
        match self.index.get(p) {
            Some(&k) => self.entries[k].count += 1,
            None => {
                self.index.insert(p.clone(), self.entries.len());
                self.entries.push(Candidate {
                    ordering: p.clone(),
                    count: 1,
                    first_seen: stamp,
                });
            }
        }
    }

    /// Add counts from another chain. First-seen stamps of new entries are
    /// shifted past this set's so ties keep favouring earlier chains.
    pub fn merge(&mut self, other: &PermutationCandidateSet) {
        let offset = self.total;
        for c in &other.entries {
            match self.index.get(&c.ordering) {
                Some(&k) => self.entries[k].count += c.count,
                None => {
                    self.index.insert(c.ordering.clone(), self.entries.len());
                    self.entries.push(Candidate {
                        first_seen: c.first_seen + offset,
                        ..c.clone()
                    });
                }
            }
        }
        self.total += other.total;
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    /// Number of accepted moves recorded.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, p: &Permutation) -> u64 {
        self.index.get(p).map_or(0, |&k| self.entries[k].count)
    }

    /// Rebuild the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, c)| (c.ordering.clone(), k))
            .collect();
    }

    /// Candidates sorted by descending count, ties broken by earliest first
    /// acceptance; at most `m_top` of them.
    pub fn top_candidates(&self, m_top: usize) -> Result<Vec<Permutation>> {
        if self.entries.is_empty() {
            return Err(SlimError::Empty("candidate set"));
        }
        let mut sorted: Vec<&Candidate> = self.entries.iter().collect();
        sorted.sort_by(|a, b| b.count.cmp(&a.count).then(a.first_seen.cmp(&b.first_seen)));
        Ok(sorted
            .into_iter()
            .take(m_top)
            .map(|c| c.ordering.clone())
            .collect())
    }
}

pub fn top_candidates(set: &PermutationCandidateSet, m_top: usize) -> Result<Vec<Permutation>> {
    set.top_candidates(m_top)
}

/// Whether `D[i][k]` survives the mask under `(P, P_f)`, given
/// `pinv = P.positions()` and `pfinv = P_f.positions()`.
#[inline]
pub fn mask_keeps(i: usize, k: usize, d: usize, pinv: &[usize], pfinv: &[usize]) -> bool {
    pfinv[k] >= d || pfinv[k] <= pinv[i]
}

/// Gaussian log-likelihood of `x` (d × n) under the masked mean
/// `Pᵀ(M ⊙ P D P_fᵀ)P_f Z` and diagonal noise `psi`.
pub fn masked_log_likelihood(
    x: &[Vec<f64>],
    dmat: &[Vec<f64>],
    p: &Permutation,
    pf: &Permutation,
    z: &[Vec<f64>],
    psi: &[f64],
) -> Result<f64> {
    let d = x.len();
    let k = z.len();
    if dmat.len() != d
        || dmat.iter().any(|r| r.len() != k)
        || p.len() != d
        || pf.len() != k
        || psi.len() != d
    {
        return Err(SlimError::Dimension("masked likelihood operands".into()));
    }
    if k < d {
        return Err(SlimError::Dimension(format!(
            "need at least {d} factor columns, got {k}"
        )));
    }
    let n = x[0].len();
    let pinv = p.positions();
    let pfinv = pf.positions();
    let mut ll = 0.0;
    for i in 0..d {
        let mut rss = 0.0;
        for t in 0..n {
            let mut mean = 0.0;
            for c in 0..k {
                if mask_keeps(i, c, d, &pinv, &pfinv) {
                    mean += dmat[i][c] * z[c][t];
                }
            }
            let r = x[i][t] - mean;
            rss += r * r;
        }
        ll += -0.5 * n as f64 * (LN_2PI + psi[i].ln()) - 0.5 * rss / psi[i];
    }
    Ok(ll)
}

/// Current `(P, P_f)` plus per-sweep sufficient statistics that make each
/// proposal cost `O(k²)` per affected row.
#[derive(Clone, Debug)]
pub struct OrderSearch {
    p: Permutation,
    pf: Permutation,
    d: usize,
    k: usize,
    w: Vec<Vec<f64>>,
    psi: Vec<f64>,
    /// `‖E_i‖²` over observed entries.
    ee: Vec<f64>,
    /// `⟨E_i, z_k⟩`.
    h: Vec<Vec<f64>>,
    /// Per-row Gram matrices of `Z` (shared when nothing is missing).
    g: Vec<Vec<f64>>,
    shared_gram: bool,
    rss: Vec<f64>,
}

impl OrderSearch {
    pub fn new(p: Permutation, pf: Permutation) -> Result<Self> {
        if pf.len() < p.len() {
            return Err(SlimError::Dimension(
                "column permutation shorter than row permutation".into(),
            ));
        }
        let (d, k) = (p.len(), pf.len());
        Ok(Self {
            p,
            pf,
            d,
            k,
            w: Vec::new(),
            psi: Vec::new(),
            ee: Vec::new(),
            h: Vec::new(),
            g: Vec::new(),
            shared_gram: true,
            rss: Vec::new(),
        })
    }

    pub fn row_order(&self) -> &Permutation {
        &self.p
    }

    pub fn col_order(&self) -> &Permutation {
        &self.pf
    }

    /// Snapshot the statistics of the current Gibbs state.
    pub fn prepare(&mut self, state: &LinearState) {
        let (d, k) = (self.d, self.k);
        let f = state.regressors();
        let e = state.residuals();
        let obs = state.obs.as_ref();
        self.w = state.weights().to_vec();
        self.psi = state.psi().to_vec();
        self.shared_gram = obs.is_none();
        let gram = |m: Option<&[f64]>| {
            let mut g = vec![0.0; k * k];
            for a in 0..k {
                for b in 0..=a {
                    let v: f64 = match m {
                        None => f[a].iter().zip(&f[b]).map(|(x, y)| x * y).sum(),
                        Some(m) => f[a]
                            .iter()
                            .zip(&f[b])
                            .zip(m)
                            .map(|((x, y), w)| x * y * w)
                            .sum(),
                    };
                    g[a * k + b] = v;
                    g[b * k + a] = v;
                }
            }
            g
        };
        self.g = match obs {
            None => vec![gram(None)],
            Some(o) => (0..d).map(|i| gram(Some(&o[i]))).collect(),
        };
        self.ee = (0..d).map(|i| state.rss(i)).collect();
        self.h = (0..d)
            .map(|i| {
                (0..k)
                    .map(|c| match obs {
                        None => e[i].iter().zip(&f[c]).map(|(x, y)| x * y).sum(),
                        Some(o) => e[i]
                            .iter()
                            .zip(&f[c])
                            .zip(&o[i])
                            .map(|((x, y), w)| x * y * w)
                            .sum(),
                    })
                    .collect()
            })
            .collect();
        let pinv = self.p.positions();
        let pfinv = self.pf.positions();
        self.rss = (0..d).map(|i| self.row_rss(i, &pinv, &pfinv)).collect();
    }

    /// Masked residual sum of squares of row `i`: the full residual plus the
    /// contribution of every masked-out column.
    fn row_rss(&self, i: usize, pinv: &[usize], pfinv: &[usize]) -> f64 {
        let g = if self.shared_gram {
            &self.g[0]
        } else {
            &self.g[i]
        };
        let k = self.k;
        let out: Vec<usize> = (0..k)
            .filter(|&c| !mask_keeps(i, c, self.d, pinv, pfinv) && self.w[i][c] != 0.0)
            .collect();
        let mut v = self.ee[i];
        for &a in &out {
            let wa = self.w[i][a];
            v += 2.0 * wa * self.h[i][a];
            for &b in &out {
                v += wa * self.w[i][b] * g[a * k + b];
            }
        }
        v.max(0.0)
    }

    /// Masked log-likelihood up to the constant shared by every `(P, P_f)`.
    pub fn relative_log_likelihood(&self) -> f64 {
        self.rss
            .iter()
            .zip(&self.psi)
            .map(|(r, p)| -0.5 * r / p)
            .sum()
    }

    /// Log acceptance ratio of moving to `(p_new, pf_new)`.
    pub fn log_ratio(&self, p_new: &Permutation, pf_new: &Permutation) -> (f64, Vec<f64>) {
        let pinv = p_new.positions();
        let pfinv = pf_new.positions();
        let rss: Vec<f64> = (0..self.d)
            .map(|i| self.row_rss(i, &pinv, &pfinv))
            .collect();
        let delta = (0..self.d)
            .map(|i| -0.5 * (rss[i] - self.rss[i]) / self.psi[i])
            .sum();
        (delta, rss)
    }

    fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
        log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
    }

    /// Accept `(p_new, pf_new)` with probability `min(1, ξ)`.
    pub fn try_move<R: Rng + ?Sized>(
        &mut self,
        p_new: Permutation,
        pf_new: Permutation,
        rng: &mut R,
    ) -> bool {
        let (lr, rss) = self.log_ratio(&p_new, &pf_new);
        if Self::accept(lr, rng) {
            self.p = p_new;
            self.pf = pf_new;
            self.rss = rss;
            true
        } else {
            false
        }
    }

    /// One round of updates: a joint proposal (a transposition of `P` and,
    /// independently, one of `P_f`, accepted together), then a transposition
    /// of `P` or of `P_f` alone. Joint moves preserve the product of the
    /// parities of `P` and `P_f`, so without the single move half of the
    /// space would be unreachable. Every accepted move records `P` in
    /// `tally`. Returns the number of accepted moves.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        mut tally: Option<&mut PermutationCandidateSet>,
        rng: &mut R,
    ) -> usize {
        let mut accepted = 0;
        for single in [false, true] {
            let (mut p_new, mut pf_new) = (self.p.clone(), self.pf.clone());
            let (row, col) = if single {
                let r = rng.random::<bool>();
                (r, !r)
            } else {
                (true, true)
            };
            if row {
                let (a, b) = random_pair(self.d, rng);
                p_new = p_new.swapped(a, b);
            }
            if col {
                let (a, b) = random_pair(self.k, rng);
                pf_new = pf_new.swapped(a, b);
            }
            if self.try_move(p_new, pf_new, rng) {
                accepted += 1;
                if let Some(t) = tally.as_deref_mut() {
                    t.record(&self.p);
                }
            }
        }
        accepted
    }
}
