//! Linear and GP-based DAGs under a fixed ordering, with optional latents.
//!
//! Column layout of the underlying state: parent regressors first (observed
//! `X` rows, or GP rows for the non-linear model), then one driving signal
//! per variable, then the `m` shared latents.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comparison::{predictive_log_density, PredictiveModel};
use crate::data::Dataset;
use crate::error::{Result, SlimError};
use crate::gibbs::{EntryKind, LinearState, Signal, SweepPlan};
use crate::gp::GpRow;
use crate::hyper::Hyperparameters;
use crate::metrics::EdgeEstimate;
use crate::permutation::Permutation;
use crate::summary::{mean_matrix, median, summarize_matrices, MatrixSummary, Quantiles};

/// How parents enter a child's regression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentKind {
    #[default]
    Linear,
    /// One GP transform per parent, shared by all its children.
    GpPerParent,
    /// One GP transform per (parent, child) slot; slots of the same parent
    /// share a sparsity rate.
    GpPerEdge,
}

#[derive(Clone, Debug)]
pub struct DagConfig {
    pub latents: usize,
    pub latent_signal: Signal,
    /// Defaults to Laplace with the hyperparameter rate.
    pub driving_signal: Option<Signal>,
    /// Learn the Laplace rate of the driving signals; defaults to on for a
    /// pure DAG and off with latents.
    pub learn_driving_rate: Option<bool>,
    /// Hold the driving weights at these values instead of sampling them.
    pub fixed_driving: Option<Vec<f64>>,
    pub parents: ParentKind,
    pub store: bool,
    /// Sweeps between test evaluations; 0 picks about 200 evaluations.
    pub test_every: usize,
}

impl Default for DagConfig {
    fn default() -> Self {
        Self {
            latents: 0,
            latent_signal: Signal::CAUCHY,
            driving_signal: None,
            learn_driving_rate: None,
            fixed_driving: None,
            parents: ParentKind::Linear,
            store: true,
            test_every: 0,
        }
    }
}

impl DagConfig {
    pub fn with_latents(m: usize) -> Self {
        Self {
            latents: m,
            ..Self::default()
        }
    }
}

/// Where every block lives in the state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DagLayout {
    pub d: usize,
    pub m: usize,
    pub ordering: Permutation,
    pub parents: ParentKind,
    /// `(child, parent, column)` for every modelable edge.
    pub slots: Vec<(usize, usize, usize)>,
    pub driving_offset: usize,
    pub latent_offset: usize,
    /// Input variable of each GP row, in GP row order.
    pub gp_inputs: Vec<usize>,
}

impl DagLayout {
    pub fn new(d: usize, m: usize, ordering: Permutation, parents: ParentKind) -> Result<Self> {
        if ordering.len() != d {
            return Err(SlimError::Dimension(format!(
                "ordering over {} variables, data has {d}",
                ordering.len()
            )));
        }
        let pos = ordering.positions();
        let mut slots = Vec::new();
        let mut gp_inputs = Vec::new();
        let n_parent_cols = match parents {
            ParentKind::Linear | ParentKind::GpPerParent => {
                for i in 0..d {
                    for j in 0..d {
                        if pos[j] < pos[i] {
                            slots.push((i, j, j));
                        }
                    }
                }
                if parents == ParentKind::GpPerParent {
                    gp_inputs = (0..d).collect();
                }
                d
            }
            ParentKind::GpPerEdge => {
                let mut col = 0;
                for i in 0..d {
                    for j in 0..d {
                        if pos[j] < pos[i] {
                            slots.push((i, j, col));
                            gp_inputs.push(j);
                            col += 1;
                        }
                    }
                }
                col
            }
        };
        Ok(Self {
            d,
            m,
            ordering,
            parents,
            slots,
            driving_offset: n_parent_cols,
            latent_offset: n_parent_cols + d,
            gp_inputs,
        })
    }

    pub fn columns(&self) -> usize {
        self.latent_offset + self.m
    }

    /// `B[i][j]` from the state weights.
    pub fn b(&self, state: &LinearState) -> Vec<Vec<f64>> {
        self.gather(state.weights())
    }

    pub fn eta_b(&self, state: &LinearState) -> Vec<Vec<f64>> {
        self.gather(state.eta())
    }

    fn gather(&self, w: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut b = vec![vec![0.0; self.d]; self.d];
        for &(i, j, c) in &self.slots {
            b[i][j] = w[i][c];
        }
        b
    }

    pub fn c_driving(&self, state: &LinearState) -> Vec<f64> {
        (0..self.d)
            .map(|i| state.weights()[i][self.driving_offset + i])
            .collect()
    }

    pub fn c_latent(&self, state: &LinearState) -> Vec<Vec<f64>> {
        state
            .weights()
            .iter()
            .map(|r| r[self.latent_offset..].to_vec())
            .collect()
    }

    pub fn eta_latent(&self, state: &LinearState) -> Vec<Vec<f64>> {
        state
            .eta()
            .iter()
            .map(|r| r[self.latent_offset..].to_vec())
            .collect()
    }

    /// Every non-zero parent weight sits on a slot allowed by the ordering.
    pub fn is_acyclic(&self, state: &LinearState) -> bool {
        let w = state.weights();
        let mut allowed = vec![vec![false; self.driving_offset]; self.d];
        for &(i, _, c) in &self.slots {
            allowed[i][c] = true;
        }
        (0..self.d).all(|i| (0..self.driving_offset).all(|c| allowed[i][c] || w[i][c] == 0.0))
    }
}

#[derive(Clone, Debug)]
pub struct DagState {
    pub state: LinearState,
    pub layout: DagLayout,
}

impl DagState {
    pub fn b(&self) -> Vec<Vec<f64>> {
        self.layout.b(&self.state)
    }
}

/// Build the state for ordering `p`: spike-and-slab support exactly where
/// `p` puts the parent first, an identity driving pattern with slab (or
/// fixed) weights, and empty latent columns.
pub fn init_from_ordering<R: Rng + ?Sized>(
    data: &Dataset,
    p: &Permutation,
    hp: &Hyperparameters,
    cfg: &DagConfig,
    rng: &mut R,
) -> Result<DagState> {
    let d = data.d();
    let layout = DagLayout::new(d, cfg.latents, p.clone(), cfg.parents)?;
    let k = layout.columns();
    let mut s = LinearState::new(data.values().to_vec(), data.mask(), k)?;
    if data.mask().is_some() {
        return Err(SlimError::InvalidArgument(
            "DAG parents must be fully observed".into(),
        ));
    }
    match cfg.parents {
        ParentKind::Linear => {
            for j in 0..d {
                s.set_observed_row(j, data.row(j).to_vec())?;
            }
        }
        ParentKind::GpPerParent | ParentKind::GpPerEdge => {
            // GP row g sits in column g
            for (g, &j) in layout.gp_inputs.iter().enumerate() {
                s.set_gp_row(g, GpRow::new(data.row(j).to_vec(), 1.0)?)?;
            }
            s.set_gp_after_loadings(true);
        }
    }
    for &(i, _, c) in &layout.slots {
        s.set_kind(i, c, EntryKind::SpikeSlab);
    }
    let driving = cfg.driving_signal.unwrap_or(Signal::laplace(hp.lambda));
    let learn = cfg.learn_driving_rate.unwrap_or(cfg.latents == 0);
    if let Some(f) = &cfg.fixed_driving {
        if f.len() != d {
            return Err(SlimError::Dimension(
                "one fixed driving weight per variable".into(),
            ));
        }
    }
    for i in 0..d {
        let c = layout.driving_offset + i;
        s.set_latent_row(c, driving, learn);
        match &cfg.fixed_driving {
            Some(f) => {
                s.set_kind(i, c, EntryKind::Fixed);
                s.set_weight(i, c, f[i]);
            }
            None => s.set_kind(i, c, EntryKind::Slab),
        }
    }
    for l in 0..cfg.latents {
        let c = layout.latent_offset + l;
        s.set_latent_row(c, cfg.latent_signal, false);
        for i in 0..d {
            s.set_kind(i, c, EntryKind::SpikeSlab);
        }
    }
    if cfg.parents == ParentKind::GpPerEdge {
        // slots of one parent share a rate; other columns keep their own
        let mut groups: Vec<usize> = layout.gp_inputs.clone();
        groups.extend((0..d + cfg.latents).map(|c| d + c));
        s.set_nu_groups(groups)?;
    }
    s.initialize(hp, rng)?;
    for l in 0..cfg.latents {
        for i in 0..d {
            s.set_weight(i, layout.latent_offset + l, 0.0);
        }
    }
    s.refresh_residuals();
    Ok(DagState { state: s, layout })
}

/// Post burn-in output of one DAG chain.
#[derive(Clone, Debug)]
pub struct DagChain {
    pub layout: DagLayout,
    pub b: Vec<Vec<Vec<f64>>>,
    pub eta_b: Vec<Vec<Vec<f64>>>,
    pub c_driving: Vec<Vec<f64>>,
    pub c_latent: Vec<Vec<Vec<f64>>>,
    pub eta_latent: Vec<Vec<Vec<f64>>>,
    /// Running mean of the column rate seen by each `B` entry.
    pub nu_b_mean: Vec<Vec<f64>>,
    pub train_loglik: Vec<f64>,
    pub test_loglik: Vec<f64>,
    pub state: LinearState,
}

/// Quantile summaries and point estimates of one chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DagSummary {
    pub ordering: Permutation,
    pub b: MatrixSummary,
    pub eta_b: MatrixSummary,
    pub eta_b_mean: Vec<Vec<f64>>,
    /// Fraction of retained sweeps with `b_ij ≠ 0`.
    pub inclusion: Vec<Vec<f64>>,
    pub nu_b_mean: Vec<Vec<f64>>,
    pub c_latent: Option<MatrixSummary>,
    pub eta_latent: Option<MatrixSummary>,
    pub train_loglik: Quantiles,
    pub test_loglik: Option<Quantiles>,
}

/// One exported edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub from: usize,
    pub to: usize,
    pub weight: Quantiles,
    pub eta_median: f64,
    pub present: bool,
}

impl DagSummary {
    pub fn edge_estimate(&self, alpha_m: f64) -> EdgeEstimate {
        EdgeEstimate {
            eta_median: self.eta_b.median.clone(),
            eta_mean: self.eta_b_mean.clone(),
            nu_mean: self.nu_b_mean.clone(),
            alpha_m,
        }
    }

    /// Every slot allowed by the ordering, with its decision.
    pub fn edges(&self, alpha_m: f64, policy: crate::metrics::ThresholdPolicy) -> Vec<EdgeReport> {
        let adj = self.edge_estimate(alpha_m).adjacency(policy);
        let pos = self.ordering.positions();
        let d = pos.len();
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if pos[j] < pos[i] {
                    out.push(EdgeReport {
                        from: j,
                        to: i,
                        weight: Quantiles {
                            q025: self.b.q025[i][j],
                            median: self.b.median[i][j],
                            q975: self.b.q975[i][j],
                        },
                        eta_median: self.eta_b.median[i][j],
                        present: adj[i][j],
                    });
                }
            }
        }
        out
    }
}

impl DagChain {
    pub fn ordering(&self) -> &Permutation {
        &self.layout.ordering
    }

    pub fn summary(&self) -> Result<DagSummary> {
        if self.b.is_empty() {
            return Err(SlimError::Empty("chain stored no samples"));
        }
        let inclusion = mean_matrix(
            &self
                .b
                .iter()
                .map(|m| {
                    m.iter()
                        .map(|r| r.iter().map(|&v| (v != 0.0) as u8 as f64).collect())
                        .collect()
                })
                .collect::<Vec<Vec<Vec<f64>>>>(),
        )?;
        let (c_latent, eta_latent) = if self.layout.m > 0 {
            (
                Some(summarize_matrices(&self.c_latent)?),
                Some(summarize_matrices(&self.eta_latent)?),
            )
        } else {
            (None, None)
        };
        Ok(DagSummary {
            ordering: self.layout.ordering.clone(),
            b: summarize_matrices(&self.b)?,
            eta_b: summarize_matrices(&self.eta_b)?,
            eta_b_mean: mean_matrix(&self.eta_b)?,
            inclusion,
            nu_b_mean: self.nu_b_mean.clone(),
            c_latent,
            eta_latent,
            train_loglik: Quantiles::of(&self.train_loglik)?,
            test_loglik: if self.test_loglik.is_empty() {
                None
            } else {
                Some(Quantiles::of(&self.test_loglik)?)
            },
        })
    }
}

/// Run with `m` Cauchy latents and otherwise default settings.
pub fn run_dag_chain<R: Rng + ?Sized>(
    data: &Dataset,
    p: &Permutation,
    m: usize,
    hp: &Hyperparameters,
    rng: &mut R,
) -> Result<DagChain> {
    run_dag_chain_with(data, None, p, hp, &DagConfig::with_latents(m), rng)
}

pub fn run_dag_chain_with<R: Rng + ?Sized>(
    data: &Dataset,
    test: Option<&Dataset>,
    p: &Permutation,
    hp: &Hyperparameters,
    cfg: &DagConfig,
    rng: &mut R,
) -> Result<DagChain> {
    let hp = hp.validate()?;
    if let Some(t) = test {
        if t.d() != data.d() {
            return Err(SlimError::Dimension(
                "test and training variables differ".into(),
            ));
        }
    }
    let DagState { mut state, layout } = init_from_ordering(data, p, &hp, cfg, rng)?;
    let d = layout.d;
    let plan = SweepPlan::default();
    let every = if cfg.test_every > 0 {
        cfg.test_every
    } else {
        (hp.n_samples / 200).max(1)
    };
    let mut out = DagChain {
        layout: layout.clone(),
        b: Vec::new(),
        eta_b: Vec::new(),
        c_driving: Vec::new(),
        c_latent: Vec::new(),
        eta_latent: Vec::new(),
        nu_b_mean: vec![vec![0.0; d]; d],
        train_loglik: Vec::with_capacity(hp.n_samples),
        test_loglik: Vec::new(),
        state: state.clone(),
    };
    for sweep in 0..hp.n_burnin + hp.n_samples {
        state.sweep(&hp, &plan, rng)?;
        debug_assert!(layout.is_acyclic(&state), "edge outside the ordering");
        if sweep < hp.n_burnin {
            continue;
        }
        let idx = sweep - hp.n_burnin;
        out.train_loglik.push(state.log_likelihood());
        for &(i, j, c) in &layout.slots {
            out.nu_b_mean[i][j] += state.nu_of_column(c);
        }
        if cfg.store {
            out.b.push(layout.b(&state));
            out.eta_b.push(layout.eta_b(&state));
            out.c_driving.push(layout.c_driving(&state));
            if layout.m > 0 {
                out.c_latent.push(layout.c_latent(&state));
                out.eta_latent.push(layout.eta_latent(&state));
            }
        }
        if idx % every == 0 {
            if let Some(t) = test {
                let model = PredictiveModel::from_state(&state, t, &layout.gp_inputs)?;
                out.test_loglik
                    .push(predictive_log_density(t, &model, hp.n_rep, rng)?);
            }
        }
    }
    let n = hp.n_samples.max(1) as f64;
    out.nu_b_mean.iter_mut().flatten().for_each(|v| *v /= n);
    out.state = state;
    Ok(out)
}

/// Index of the chain with the highest median training log-likelihood; ties
/// go to the lowest index.
pub fn select_best_candidate(chains: &[DagChain]) -> Result<(usize, f64)> {
    select_by_median(chains.iter().map(|c| c.train_loglik.as_slice()))
}

pub(crate) fn select_by_median<'a>(
    series: impl Iterator<Item = &'a [f64]>,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in series.enumerate() {
        let m = median(s)?;
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((k, m));
        }
    }
    best.ok_or(SlimError::Empty("no candidate chains"))
}

/// Mixing matrix `D = (I − B)⁻¹ C` of the equivalent factor model.
pub fn implied_mixing(b: &[Vec<f64>], c: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = b.len();
    if b.iter().any(|r| r.len() != d) || c.len() != d {
        return Err(SlimError::Dimension(
            "B must be d × d and C must have d rows".into(),
        ));
    }
    let k = c.first().map_or(0, |r| r.len());
    let mut a = DMatrix::<f64>::identity(d, d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] -= b[i][j];
        }
    }
    let inv = a
        .try_inverse()
        .ok_or_else(|| SlimError::InvalidArgument("I − B is singular".into()))?;
    let cm = DMatrix::from_fn(d, k, |i, j| c[i][j]);
    let dm = inv * cm;
    Ok((0..d)
        .map(|i| (0..k).map(|j| dm[(i, j)]).collect())
        .collect())
}
