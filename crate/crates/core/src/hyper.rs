//! Hyperparameters and their defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};

/// Which model family the defaults are filled for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorMode {
    Factor,
    Dag { dense: bool, latents: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Noise precision gamma shape and rate.
    pub s_s: f64,
    pub s_r: f64,
    /// Element-level beta precision and mean.
    pub alpha_p: f64,
    pub alpha_m: f64,
    /// Column-level beta precision and mean.
    pub beta_p: f64,
    pub beta_m: f64,
    /// Slab precision gamma shape and rate.
    pub t_s: f64,
    pub t_r: f64,
    /// GP inverse length-scale hyperpriors.
    pub u_s: f64,
    pub k_s: f64,
    pub k_r: f64,
    /// Laplace rate; the density is `λ/2·exp(−λ|z|)`, variance `2/λ²`.
    pub lambda: f64,
    /// Student-t degrees of freedom.
    pub theta: f64,
    pub n_rep: usize,
    pub n_samples: usize,
    pub n_burnin: usize,
    pub m_top: usize,
    pub mh_perm_reps: usize,
}

/// Partial hyperparameters; `None` means "use the default for the mode".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperparameterOverrides {
    pub s_s: Option<f64>,
    pub s_r: Option<f64>,
    pub alpha_p: Option<f64>,
    pub alpha_m: Option<f64>,
    pub beta_p: Option<f64>,
    pub beta_m: Option<f64>,
    pub t_s: Option<f64>,
    pub t_r: Option<f64>,
    pub u_s: Option<f64>,
    pub k_s: Option<f64>,
    pub k_r: Option<f64>,
    pub lambda: Option<f64>,
    pub theta: Option<f64>,
    pub n_rep: Option<usize>,
    pub n_samples: Option<usize>,
    pub n_burnin: Option<usize>,
    pub m_top: Option<usize>,
    pub mh_perm_reps: Option<usize>,
}

impl Hyperparameters {
    pub fn defaults(mode: PriorMode) -> Self {
        let (beta_m, n_samples, n_burnin) = match mode {
            PriorMode::Factor => (0.9, 10_000, 5_000),
            PriorMode::Dag { dense, latents } => {
                let beta_m = if dense { 0.99 } else { 0.1 };
                if latents {
                    (beta_m, 6_000, 2_000)
                } else {
                    (beta_m, 3_000, 1_000)
                }
            }
        };
        Self {
            s_s: 20.0,
            s_r: 1.0,
            alpha_p: 10.0,
            alpha_m: 0.95,
            beta_p: 100.0,
            beta_m,
            t_s: 2.0,
            t_r: 1.0,
            u_s: 2.0,
            k_s: 2.0,
            k_r: 0.02,
            lambda: std::f64::consts::SQRT_2,
            theta: 1.0,
            n_rep: 500,
            n_samples,
            n_burnin,
            m_top: 10,
            mh_perm_reps: 10,
        }
    }

    /// Check every invariant; returns the value unchanged on success.
    pub fn validate(self) -> Result<Self> {
        let positive = [
            ("s_s", self.s_s),
            ("s_r", self.s_r),
            ("alpha_p", self.alpha_p),
            ("beta_p", self.beta_p),
            ("t_s", self.t_s),
            ("t_r", self.t_r),
            ("u_s", self.u_s),
            ("k_s", self.k_s),
            ("k_r", self.k_r),
            ("lambda", self.lambda),
            ("theta", self.theta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SlimError::hyper(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        for (name, v) in [("alpha_m", self.alpha_m), ("beta_m", self.beta_m)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(SlimError::hyper(
                    name,
                    format!("must lie in (0, 1), got {v}"),
                ));
            }
        }
        if self.m_top < 1 {
            return Err(SlimError::hyper("m_top", "must be at least 1"));
        }
        if self.n_rep < 1 {
            return Err(SlimError::hyper("n_rep", "must be at least 1"));
        }
        if self.n_samples < 1 {
            return Err(SlimError::hyper(
                "n_samples",
                "burn-in must be shorter than the total number of draws",
            ));
        }
        Ok(self)
    }

    /// Prior inclusion probability of a spike-and-slab entry, `α_m·β_m`.
    pub fn prior_inclusion(&self) -> f64 {
        self.alpha_m * self.beta_m
    }
}

impl HyperparameterOverrides {
    /// Fill absent fields with the defaults for `mode` and validate.
    pub fn resolve(&self, mode: PriorMode) -> Result<Hyperparameters> {
        let d = Hyperparameters::defaults(mode);
        Hyperparameters {
            s_s: self.s_s.unwrap_or(d.s_s),
            s_r: self.s_r.unwrap_or(d.s_r),
            alpha_p: self.alpha_p.unwrap_or(d.alpha_p),
            alpha_m: self.alpha_m.unwrap_or(d.alpha_m),
            beta_p: self.beta_p.unwrap_or(d.beta_p),
            beta_m: self.beta_m.unwrap_or(d.beta_m),
            t_s: self.t_s.unwrap_or(d.t_s),
            t_r: self.t_r.unwrap_or(d.t_r),
            u_s: self.u_s.unwrap_or(d.u_s),
            k_s: self.k_s.unwrap_or(d.k_s),
            k_r: self.k_r.unwrap_or(d.k_r),
            lambda: self.lambda.unwrap_or(d.lambda),
            theta: self.theta.unwrap_or(d.theta),
            n_rep: self.n_rep.unwrap_or(d.n_rep),
            n_samples: self.n_samples.unwrap_or(d.n_samples),
            n_burnin: self.n_burnin.unwrap_or(d.n_burnin),
            m_top: self.m_top.unwrap_or(d.m_top),
            mh_perm_reps: self.mh_perm_reps.unwrap_or(d.mh_perm_reps),
        }
        .validate()
    }
}

/// Resolve overrides against the defaults of `mode`.
pub fn validate_hyperparameters(
    raw: &HyperparameterOverrides,
    mode: PriorMode,
) -> Result<Hyperparameters> {
    raw.resolve(mode)
}
