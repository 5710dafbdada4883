//! Gaussian-process rows for temporally correlated factors and for
//! non-linear parent functions.
//!
//! CSLIM replaces the i.i.d. factor rows of the factor model with GP rows
//! over the observation index. SNIM replaces each parent regressor of a DAG
//! with a GP transform of the parent's observed values.

mod kernel;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use kernel::{build_covariance, is_ill_conditioned, posterior_covariance, GpRow, GP_NUGGET};

use crate::dag::{run_dag_chain_with, DagChain, DagConfig, ParentKind};
use crate::data::Dataset;
use crate::error::{Result, SlimError};
use crate::factor::{drive, FactorChain, FactorConfig, FactorMode};
use crate::gibbs::{EntryKind, LinearState};
use crate::hyper::Hyperparameters;
use crate::permutation::Permutation;

/// Largest `d` whose orderings SNIM enumerates by default.
pub const SNIM_MAX_ENUMERATION: usize = 6;

/// Length-scale state of every GP row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyperState {
    pub upsilon: Vec<f64>,
    pub kappa: f64,
    pub proposed: Vec<usize>,
    pub accepted: Vec<usize>,
}

impl GpHyperState {
    pub fn of(state: &LinearState) -> Self {
        let rows = state.gp_rows();
        Self {
            upsilon: rows.iter().map(|r| r.ups).collect(),
            kappa: state.kappa(),
            proposed: rows.iter().map(|r| r.proposed).collect(),
            accepted: rows.iter().map(|r| r.accepted).collect(),
        }
    }

    /// Pooled M-H acceptance rate of the length scales.
    pub fn acceptance_rate(&self) -> Option<f64> {
        let p: usize = self.proposed.iter().sum();
        (p > 0).then(|| self.accepted.iter().sum::<usize>() as f64 / p as f64)
    }
}

/// Shape and rate of `κ | υ`.
pub fn kappa_posterior(hp: &Hyperparameters, upsilon: &[f64]) -> (f64, f64) {
    (
        hp.k_s + upsilon.len() as f64 * hp.u_s,
        hp.k_r + upsilon.iter().sum::<f64>(),
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GpMode {
    Cslim,
    Snim(Permutation),
}

#[derive(Clone, Debug)]
pub enum GpChain {
    Cslim(FactorChain),
    Snim(DagChain),
}

/// Factor state whose `k` rows are GPs over the observation index.
pub fn build_cslim_state(data: &Dataset, k: usize) -> Result<LinearState> {
    if k == 0 {
        return Err(SlimError::InvalidArgument(
            "need at least one factor".into(),
        ));
    }
    let times: Vec<f64> = (0..data.n()).map(|t| t as f64).collect();
    let mut s = LinearState::new(data.values().to_vec(), data.mask(), k)?;
    for j in 0..k {
        s.set_gp_row(j, GpRow::new(times.clone(), 1.0)?)?;
        for i in 0..data.d() {
            s.set_kind(i, j, EntryKind::SpikeSlab);
        }
    }
    Ok(s)
}

/// CSLIM chain. A masked dataset is scored on its hidden entries.
pub fn run_cslim_chain<R: Rng + ?Sized>(
    data: &Dataset,
    hp: &Hyperparameters,
    cfg: &FactorConfig,
    rng: &mut R,
) -> Result<FactorChain> {
    let hp = hp.validate()?;
    let k = cfg.factors.unwrap_or(data.d());
    let mut state = build_cslim_state(data, k)?;
    state.initialize(&hp, rng)?;
    let mode = if data.mask().is_some() {
        FactorMode::MissingValues
    } else {
        FactorMode::Plain
    };
    drive(state, data, None, &[], &hp, mode, cfg, rng)
}

/// SNIM chain under ordering `p`; `cfg.parents` must be a GP kind.
pub fn run_snim_chain<R: Rng + ?Sized>(
    data: &Dataset,
    test: Option<&Dataset>,
    p: &Permutation,
    hp: &Hyperparameters,
    cfg: &DagConfig,
    rng: &mut R,
) -> Result<DagChain> {
    if cfg.parents == ParentKind::Linear {
        return Err(SlimError::InvalidArgument("SNIM needs GP parents".into()));
    }
    run_dag_chain_with(data, test, p, hp, cfg, rng)
}

/// Every ordering of `d` variables, refused above `cap`.
pub fn snim_orderings(d: usize, cap: usize) -> Result<Vec<Permutation>> {
    if d > cap {
        return Err(SlimError::InvalidArgument(format!(
            "{d} variables exceed the ordering enumeration bound {cap}; pass an ordering"
        )));
    }
    Ok(Permutation::all(d))
}

/// Run one GP chain with `m` latents (SNIM only) and default settings.
pub fn run_gp_chain<R: Rng + ?Sized>(
    data: &Dataset,
    mode: GpMode,
    m: usize,
    hp: &Hyperparameters,
    rng: &mut R,
) -> Result<GpChain> {
    match mode {
        GpMode::Cslim => {
            run_cslim_chain(data, hp, &FactorConfig::default(), rng).map(GpChain::Cslim)
        }
        GpMode::Snim(p) => {
            let cfg = DagConfig {
                parents: ParentKind::GpPerParent,
                ..DagConfig::with_latents(m)
            };
            run_snim_chain(data, None, &p, hp, &cfg, rng).map(GpChain::Snim)
        }
    }
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    if den == 0.0 {
        return 0.0;
    }
    x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / den
}
