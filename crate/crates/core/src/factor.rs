//! Sparse factor model `X = C Z + ε` and its chain driver, optionally with
//! the ordering search or a held-out missing-value mask.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comparison::{missing_value_log_density, predictive_log_density, PredictiveModel};
use crate::data::Dataset;
use crate::error::{Result, SlimError};
use crate::gibbs::{EntryKind, LinearState, Signal, SweepPlan};
use crate::hyper::Hyperparameters;
use crate::order::{OrderSearch, PermutationCandidateSet};
use crate::permutation::Permutation;
use crate::summary::{summarize_matrices, MatrixSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMode {
    Plain,
    OrderSearch,
    /// Score the entries hidden by the dataset mask every evaluation sweep.
    MissingValues,
}

#[derive(Clone, Debug)]
pub struct FactorConfig {
    /// Number of factor columns; defaults to `d`.
    pub factors: Option<usize>,
    /// Factor distribution; defaults to Laplace with the hyperparameter rate.
    pub signal: Option<Signal>,
    /// Keep every post burn-in `W`, `η` and `ν`.
    pub store: bool,
    /// Sweeps between test evaluations; 0 picks about 200 evaluations.
    pub test_every: usize,
    pub plan: SweepPlan,
}

impl Default for FactorConfig {
    fn default() -> Self {
        Self {
            factors: None,
            signal: None,
            store: true,
            test_every: 0,
            plan: SweepPlan::default(),
        }
    }
}

impl FactorConfig {
    pub(crate) fn eval_period(&self, n_samples: usize) -> usize {
        if self.test_every > 0 {
            self.test_every
        } else {
            (n_samples / 200).max(1)
        }
    }
}

/// Post burn-in output of one chain.
#[derive(Clone, Debug)]
pub struct FactorChain {
    pub loadings: Vec<Vec<Vec<f64>>>,
    pub eta: Vec<Vec<Vec<f64>>>,
    pub nu: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub candidates: PermutationCandidateSet,
    /// Row order held by the search at the end of the chain.
    pub final_order: Option<Permutation>,
    /// Fraction of accepted permutation proposals.
    pub acceptance: f64,
    /// `ln p(X | C, Z, Ψ)` per retained sweep.
    pub train_loglik: Vec<f64>,
    pub test_loglik: Vec<f64>,
    pub missing_loglik: Vec<f64>,
    pub state: LinearState,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorSummary {
    pub loadings: MatrixSummary,
    pub eta: MatrixSummary,
    pub psi: MatrixSummary,
}

impl FactorChain {
    pub fn summary(&self) -> Result<FactorSummary> {
        let psi: Vec<Vec<Vec<f64>>> = self.psi.iter().map(|p| vec![p.clone()]).collect();
        Ok(FactorSummary {
            loadings: summarize_matrices(&self.loadings)?,
            eta: summarize_matrices(&self.eta)?,
            psi: summarize_matrices(&psi)?,
        })
    }
}

/// A factor state with every loading spike-and-slab and heavy-tailed rows.
pub fn build_factor_state(data: &Dataset, factors: usize, signal: Signal) -> Result<LinearState> {
    if factors == 0 {
        return Err(SlimError::InvalidArgument(
            "need at least one factor".into(),
        ));
    }
    let mut s = LinearState::new(data.values().to_vec(), data.mask(), factors)?;
    for j in 0..factors {
        s.set_latent_row(j, signal, false);
        for i in 0..data.d() {
            s.set_kind(i, j, EntryKind::SpikeSlab);
        }
    }
    Ok(s)
}

/// Run with default settings and no test set.
pub fn run_factor_chain<R: Rng + ?Sized>(
    data: &Dataset,
    hp: &Hyperparameters,
    mode: FactorMode,
    rng: &mut R,
) -> Result<FactorChain> {
    run_factor_chain_with(data, None, hp, mode, &FactorConfig::default(), rng)
}

pub fn run_factor_chain_with<R: Rng + ?Sized>(
    data: &Dataset,
    test: Option<&Dataset>,
    hp: &Hyperparameters,
    mode: FactorMode,
    cfg: &FactorConfig,
    rng: &mut R,
) -> Result<FactorChain> {
    let hp = hp.validate()?;
    if let Some(t) = test {
        if t.d() != data.d() {
            return Err(SlimError::Dimension(
                "test and training variables differ".into(),
            ));
        }
    }
    let k = cfg.factors.unwrap_or(data.d());
    let signal = cfg.signal.unwrap_or(Signal::laplace(hp.lambda));
    let mut state = build_factor_state(data, k, signal)?;
    state.initialize(&hp, rng)?;
    drive(state, data, test, &[], &hp, mode, cfg, rng)
}

/// Shared chain loop for the factor model and its GP variant.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<R: Rng + ?Sized>(
    mut state: LinearState,
    data: &Dataset,
    test: Option<&Dataset>,
    gp_inputs: &[usize],
    hp: &Hyperparameters,
    mode: FactorMode,
    cfg: &FactorConfig,
    rng: &mut R,
) -> Result<FactorChain> {
    let d = state.d();
    let k = state.k();
    if mode == FactorMode::MissingValues && data.mask().is_none() {
        return Err(SlimError::InvalidArgument(
            "missing-value mode needs a masked dataset".into(),
        ));
    }
    let mut search = if mode == FactorMode::OrderSearch {
        if k < d {
            return Err(SlimError::Dimension(format!(
                "order search needs at least {d} factors, got {k}"
            )));
        }
        Some(OrderSearch::new(
            Permutation::random(d, rng),
            Permutation::random(k, rng),
        )?)
    } else {
        None
    };
    let mut candidates = PermutationCandidateSet::new();
    let mut out = FactorChain {
        loadings: Vec::new(),
        eta: Vec::new(),
        nu: Vec::new(),
        psi: Vec::new(),
        candidates: PermutationCandidateSet::new(),
        final_order: None,
        acceptance: 0.0,
        train_loglik: Vec::with_capacity(hp.n_samples),
        test_loglik: Vec::new(),
        missing_loglik: Vec::new(),
        state: state.clone(),
    };
    let every = cfg.eval_period(hp.n_samples);
    let (mut accepted, mut moves) = (0usize, 0usize);
    for sweep in 0..hp.n_burnin + hp.n_samples {
        state.sweep(hp, &cfg.plan, rng)?;
        let kept = sweep >= hp.n_burnin;
        if let Some(s) = search.as_mut() {
            s.prepare(&state);
            for _ in 0..hp.mh_perm_reps {
                accepted += s.step(if kept { Some(&mut candidates) } else { None }, rng);
                moves += 2;
            }
        }
        if !kept {
            continue;
        }
        let idx = sweep - hp.n_burnin;
        out.train_loglik.push(state.log_likelihood());
        if cfg.store {
            out.loadings.push(state.weights().to_vec());
            out.eta.push(state.eta().to_vec());
            out.nu.push(state.nu().to_vec());
        }
        out.psi.push(state.psi().to_vec());
        if idx % every == 0 {
            if let Some(t) = test {
                let model = PredictiveModel::from_state(&state, t, gp_inputs)?;
                out.test_loglik
                    .push(predictive_log_density(t, &model, hp.n_rep, rng)?);
            }
            if mode == FactorMode::MissingValues {
                out.missing_loglik.push(missing_value_log_density(
                    data,
                    state.weights(),
                    state.regressors(),
                    state.psi(),
                )?);
            }
        }
    }
    if let Some(s) = search {
        // a chain that never moved after burn-in still proposes its incumbent
        if candidates.is_empty() {
            candidates.record(s.row_order());
        }
        out.final_order = Some(s.row_order().clone());
        if moves > 0 {
            out.acceptance = accepted as f64 / moves as f64;
        }
    }
    out.candidates = candidates;
    out.state = state;
    Ok(out)
}

/// Greedy column matching: for each true column, the best `|cos|` over the
/// estimated columns not yet taken.
pub fn matched_cosines(truth: &[Vec<f64>], est: &[Vec<f64>]) -> Vec<f64> {
    let d = truth.len();
    let kt = truth.first().map_or(0, |r| r.len());
    let ke = est.first().map_or(0, |r| r.len());
    let col = |m: &[Vec<f64>], j: usize| -> Vec<f64> { (0..d).map(|i| m[i][j]).collect() };
    let mut taken = vec![false; ke];
    let mut out = Vec::with_capacity(kt);
    for a in 0..kt {
        let u = col(truth, a);
        let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut best = (0.0, None);
        for (b, t) in taken.iter().enumerate() {
            if *t {
                continue;
            }
            let v = col(est, b);
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv == 0.0 || nu == 0.0 {
                continue;
            }
            let c = (u.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() / (nu * nv)).abs();
            if c > best.0 {
                best = (c, Some(b));
            }
        }
        if let Some(b) = best.1 {
            taken[b] = true;
        }
        out.push(best.0);
    }
    out
}
