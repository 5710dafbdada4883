//! Blocked Gibbs engine for `X = W F + ε`.
//!
//! `W` is `d × k`; each entry has an [`EntryKind`]. `F` is `k × n`; each row
//! is either observed (DAG parents), a heavy-tailed latent signal with
//! per-element mixing variances, or a GP row. The factor model and the DAG
//! are both thin layouts over this state.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{bernoulli, beta, gamma, inverse_gaussian, normal, HeavyTailed};
use crate::error::{Result, SlimError};
use crate::gp::GpRow;
use crate::hyper::Hyperparameters;
use crate::linalg::cholesky_jittered;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MIN_ABS_Z: f64 = 1e-12;
const RESIDUAL_REFRESH: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryKind {
    /// Structurally zero.
    Absent,
    /// Held at its current value.
    Fixed,
    /// Always active, slab prior only.
    Slab,
    /// Two-level spike-and-slab.
    SpikeSlab,
}

/// Marginal distribution of a latent row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Gaussian,
    Heavy(HeavyTailed),
}

impl Signal {
    pub const CAUCHY: Signal = Signal::Heavy(HeavyTailed::CAUCHY);

    pub fn laplace(lambda: f64) -> Signal {
        Signal::Heavy(HeavyTailed::Laplace { lambda })
    }

    /// Conditional variance of one element drawn from the mixing prior.
    #[inline]
    pub fn sample_variance<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Signal::Gaussian => 1.0,
            Signal::Heavy(h) => h.sample_variance(rng),
        }
    }
}

#[derive(Clone, Debug)]
pub enum RowSource {
    /// Fixed regressor values (the data itself for DAG parents).
    Observed,
    /// Heavy-tailed latent row. With `learn_rate`, a Laplace row also samples
    /// `λ²` under a Gamma(1, 1) prior.
    Latent { signal: Signal, learn_rate: bool },
    /// Index into the GP row table.
    Gp(usize),
}

/// Which blocks a sweep updates. Everything is on by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepPlan {
    pub noise: bool,
    pub signals: bool,
    pub loadings: bool,
    pub sparsity: bool,
    pub gp_hyper: bool,
    pub rates: bool,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            noise: true,
            signals: true,
            loadings: true,
            sparsity: true,
            gp_hyper: true,
            rates: true,
        }
    }
}

/// Full sampler state.
#[derive(Clone, Debug)]
pub struct LinearState {
    pub(crate) d: usize,
    pub(crate) k: usize,
    pub(crate) n: usize,
    pub(crate) x: Vec<Vec<f64>>,
    /// 1.0 observed / 0.0 missing.
    pub(crate) obs: Option<Vec<Vec<f64>>>,
    pub(crate) n_obs: Vec<usize>,
    pub(crate) w: Vec<Vec<f64>>,
    pub(crate) kind: Vec<Vec<EntryKind>>,
    pub(crate) q: Vec<Vec<bool>>,
    pub(crate) tau: Vec<Vec<f64>>,
    pub(crate) eta: Vec<Vec<f64>>,
    pub(crate) u: Vec<Vec<bool>>,
    pub(crate) nu: Vec<f64>,
    pub(crate) nu_group: Vec<usize>,
    pub(crate) psi: Vec<f64>,
    pub(crate) f: Vec<Vec<f64>>,
    pub(crate) source: Vec<RowSource>,
    /// Prior variance of each latent element (`υ`, or `υσ²` for Student-t).
    pub(crate) var: Vec<Vec<f64>>,
    pub(crate) gp: Vec<GpRow>,
    pub(crate) gp_rows: Vec<usize>,
    pub(crate) kappa: f64,
    /// Update GP rows after the loadings instead of with the latent signals.
    pub(crate) gp_after_loadings: bool,
    pub(crate) resid: Vec<Vec<f64>>,
    pub(crate) sweeps: usize,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn dot3(a: &[f64], b: &[f64], m: &[f64]) -> f64 {
    a.iter().zip(b).zip(m).map(|((x, y), z)| x * y * z).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl LinearState {
    /// Empty layout: every entry absent, every row observed with zeros.
    /// `mask[i][n] == false` marks a missing target value.
    pub fn new(x: Vec<Vec<f64>>, mask: Option<&[Vec<bool>]>, k: usize) -> Result<Self> {
        let d = x.len();
        if d == 0 {
            return Err(SlimError::Empty("no target rows"));
        }
        let n = x[0].len();
        if x.iter().any(|r| r.len() != n) {
            return Err(SlimError::Dimension("target rows of unequal length".into()));
        }
        let obs: Option<Vec<Vec<f64>>> = mask.map(|m| {
            m.iter()
                .map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
                .collect()
        });
        if let Some(o) = &obs {
            if o.len() != d || o.iter().any(|r| r.len() != n) {
                return Err(SlimError::Dimension("mask shape".into()));
            }
        }
        let mut x = x;
        if let Some(o) = &obs {
            for (row, m) in x.iter_mut().zip(o) {
                for (v, &mm) in row.iter_mut().zip(m) {
                    if mm == 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
        let n_obs = match &obs {
            Some(o) => o
                .iter()
                .map(|r| r.iter().filter(|&&v| v > 0.0).count())
                .collect(),
            None => vec![n; d],
        };
        Ok(Self {
            d,
            k,
            n,
            resid: x.clone(),
            x,
            obs,
            n_obs,
            w: vec![vec![0.0; k]; d],
            kind: vec![vec![EntryKind::Absent; k]; d],
            q: vec![vec![false; k]; d],
            tau: vec![vec![1.0; k]; d],
            eta: vec![vec![0.0; k]; d],
            u: vec![vec![false; k]; d],
            nu: vec![0.5; k],
            nu_group: (0..k).collect(),
            psi: vec![1.0; d],
            f: vec![vec![0.0; n]; k],
            source: vec![RowSource::Observed; k],
            var: vec![Vec::new(); k],
            gp: Vec::new(),
            gp_rows: Vec::new(),
            kappa: 1.0,
            gp_after_loadings: false,
            sweeps: 0,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn kinds(&self) -> &[Vec<EntryKind>] {
        &self.kind
    }

    pub fn mask_q(&self) -> &[Vec<bool>] {
        &self.q
    }

    pub fn eta(&self) -> &[Vec<f64>] {
        &self.eta
    }

    pub fn tau(&self) -> &[Vec<f64>] {
        &self.tau
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn nu_of_column(&self, j: usize) -> f64 {
        self.nu[self.nu_group[j]]
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn regressors(&self) -> &[Vec<f64>] {
        &self.f
    }

    pub fn sources(&self) -> &[RowSource] {
        &self.source
    }

    pub fn scales(&self) -> &[Vec<f64>] {
        &self.var
    }

    pub fn gp_rows(&self) -> &[GpRow] {
        &self.gp
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn residuals(&self) -> &[Vec<f64>] {
        &self.resid
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    pub fn set_kind(&mut self, i: usize, j: usize, kind: EntryKind) {
        self.kind[i][j] = kind;
        match kind {
            EntryKind::Absent => {
                self.w[i][j] = 0.0;
                self.q[i][j] = false;
                self.eta[i][j] = 0.0;
                self.u[i][j] = false;
            }
            EntryKind::Fixed | EntryKind::Slab => {
                self.q[i][j] = true;
                self.eta[i][j] = 1.0;
                self.u[i][j] = true;
            }
            EntryKind::SpikeSlab => {}
        }
    }

    /// Set the value of an entry (used for fixed entries and tests).
    pub fn set_weight(&mut self, i: usize, j: usize, v: f64) {
        self.w[i][j] = v;
        if self.kind[i][j] == EntryKind::SpikeSlab {
            self.q[i][j] = v != 0.0;
        }
    }

    pub fn set_observed_row(&mut self, j: usize, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n {
            return Err(SlimError::Dimension("observed regressor length".into()));
        }
        self.f[j] = values;
        self.source[j] = RowSource::Observed;
        self.var[j].clear();
        Ok(())
    }

    pub fn set_latent_row(&mut self, j: usize, signal: Signal, learn_rate: bool) {
        self.source[j] = RowSource::Latent { signal, learn_rate };
        self.var[j] = vec![1.0; self.n];
    }

    pub fn set_gp_row(&mut self, j: usize, row: GpRow) -> Result<()> {
        if row.len() != self.n {
            return Err(SlimError::Dimension("gp row length".into()));
        }
        self.source[j] = RowSource::Gp(self.gp.len());
        self.gp.push(row);
        self.gp_rows.push(j);
        self.var[j].clear();
        Ok(())
    }

    pub fn set_gp_after_loadings(&mut self, after: bool) {
        self.gp_after_loadings = after;
    }

    /// Columns sharing a group share one `ν`.
    pub fn set_nu_groups(&mut self, groups: Vec<usize>) -> Result<()> {
        if groups.len() != self.k {
            return Err(SlimError::Dimension("one group per column".into()));
        }
        let g = groups.iter().copied().max().map_or(0, |m| m + 1);
        self.nu = vec![0.5; g];
        self.nu_group = groups;
        Ok(())
    }

    pub fn set_row_values(&mut self, j: usize, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n {
            return Err(SlimError::Dimension("row length".into()));
        }
        self.f[j] = values;
        Ok(())
    }

    /// Replace the targets (missing entries are zeroed) and rebuild residuals.
    pub fn set_targets(&mut self, x: Vec<Vec<f64>>) -> Result<()> {
        if x.len() != self.d || x.iter().any(|r| r.len() != self.n) {
            return Err(SlimError::Dimension("target shape".into()));
        }
        self.x = x;
        if let Some(o) = &self.obs {
            for (row, m) in self.x.iter_mut().zip(o) {
                for (v, &mm) in row.iter_mut().zip(m) {
                    if mm == 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
        self.refresh_residuals();
        Ok(())
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn set_psi(&mut self, psi: Vec<f64>) {
        self.psi = psi;
    }

    pub fn set_tau(&mut self, i: usize, j: usize, tau: f64) {
        self.tau[i][j] = tau;
    }

    pub fn set_nu(&mut self, g: usize, v: f64) {
        self.nu[g] = v;
    }

    pub fn set_scales(&mut self, j: usize, var: Vec<f64>) {
        self.var[j] = var;
    }

    pub fn set_kappa(&mut self, kappa: f64) {
        self.kappa = kappa;
    }

    /// Draw everything that is not fixed from the prior.
    pub fn initialize<R: Rng + ?Sized>(&mut self, hp: &Hyperparameters, rng: &mut R) -> Result<()> {
        for psi in self.psi.iter_mut() {
            *psi = 1.0 / gamma(rng, hp.s_s, hp.s_r);
        }
        for nu in self.nu.iter_mut() {
            *nu = beta(rng, hp.beta_p * hp.beta_m, hp.beta_p * (1.0 - hp.beta_m));
        }
        for i in 0..self.d {
            for j in 0..self.k {
                match self.kind[i][j] {
                    EntryKind::Absent | EntryKind::Fixed => {}
                    EntryKind::Slab => {
                        self.tau[i][j] = 1.0 / gamma(rng, hp.t_s, hp.t_r);
                        self.w[i][j] = (self.psi[i] * self.tau[i][j]).sqrt() * normal(rng);
                    }
                    EntryKind::SpikeSlab => {
                        let nu = self.nu[self.nu_group[j]];
                        self.tau[i][j] = 1.0 / gamma(rng, hp.t_s, hp.t_r);
                        self.u[i][j] = bernoulli(rng, nu);
                        self.eta[i][j] = if self.u[i][j] {
                            beta(
                                rng,
                                hp.alpha_p * hp.alpha_m,
                                hp.alpha_p * (1.0 - hp.alpha_m),
                            )
                        } else {
                            0.0
                        };
                        self.q[i][j] = bernoulli(rng, self.eta[i][j]);
                        if self.q[i][j] {
                            self.u[i][j] = true;
                            self.w[i][j] = (self.psi[i] * self.tau[i][j]).sqrt() * normal(rng);
                        } else {
                            self.w[i][j] = 0.0;
                        }
                    }
                }
            }
        }
        if !self.gp.is_empty() {
            self.kappa = gamma(rng, hp.k_s, hp.k_r);
            for g in 0..self.gp.len() {
                let ups = gamma(rng, hp.u_s, self.kappa);
                let inputs = self.gp[g].inputs.clone();
                self.gp[g] = GpRow::new(inputs, ups)?;
                let j = self.gp_rows[g];
                self.f[j] = self.gp[g].sample_prior(rng);
            }
        }
        for j in 0..self.k {
            if let RowSource::Latent { signal, .. } = self.source[j] {
                for t in 0..self.n {
                    let v = signal.sample_variance(rng).min(1e12);
                    self.var[j][t] = v;
                    self.f[j][t] = v.sqrt() * normal(rng);
                }
            }
        }
        self.refresh_residuals();
        Ok(())
    }

    /// Recompute `E = X − W F` from scratch.
    pub fn refresh_residuals(&mut self) {
        for i in 0..self.d {
            let e = &mut self.resid[i];
            e.copy_from_slice(&self.x[i]);
            for j in 0..self.k {
                let wij = self.w[i][j];
                if wij != 0.0 {
                    axpy(e, -wij, &self.f[j]);
                }
            }
        }
    }

    /// Residual sum of squares of row `i` over observed entries.
    pub fn rss(&self, i: usize) -> f64 {
        match &self.obs {
            None => dot(&self.resid[i], &self.resid[i]),
            Some(o) => dot3(&self.resid[i], &self.resid[i], &o[i]),
        }
    }

    /// Gaussian log-likelihood of the observed targets given everything else.
    pub fn log_likelihood(&self) -> f64 {
        (0..self.d)
            .map(|i| {
                -0.5 * self.n_obs[i] as f64 * (LN_2PI + self.psi[i].ln())
                    - 0.5 * self.rss(i) / self.psi[i]
            })
            .sum()
    }

    fn is_active(&self, i: usize, j: usize) -> bool {
        match self.kind[i][j] {
            EntryKind::Slab => true,
            EntryKind::SpikeSlab => self.q[i][j],
            EntryKind::Absent | EntryKind::Fixed => false,
        }
    }

    /// One full sweep in the fixed scan order: noise, signals, loadings and
    /// slab variances, sparsity, then GP hyperparameters and signal rates.
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        hp: &Hyperparameters,
        plan: &SweepPlan,
        rng: &mut R,
    ) -> Result<()> {
        if plan.noise {
            self.update_noise(hp, rng);
        }
        if plan.signals {
            self.update_latent_rows(rng);
            if !self.gp_after_loadings {
                self.update_gp_rows(rng)?;
            }
        }
        if plan.loadings {
            self.update_loadings(hp, rng);
        }
        if plan.sparsity {
            self.update_sparsity(hp, rng);
        }
        if plan.signals && self.gp_after_loadings {
            self.update_gp_rows(rng)?;
        }
        if plan.gp_hyper {
            self.update_gp_hyper(hp, rng)?;
        }
        if plan.rates {
            self.update_rates(rng);
        }
        self.sweeps += 1;
        if self.sweeps % RESIDUAL_REFRESH == 0 {
            self.refresh_residuals();
        }
        self.check_finite()?;
        debug_assert!(self.spike_consistent(), "mask/weight coupling broken");
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let sweep = self.sweeps;
        if self.psi.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SlimError::NonFinite {
                sweep,
                component: "psi",
            });
        }
        if self.w.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SlimError::NonFinite {
                sweep,
                component: "weights",
            });
        }
        if self
            .tau
            .iter()
            .flatten()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(SlimError::NonFinite {
                sweep,
                component: "tau",
            });
        }
        if self.f.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SlimError::NonFinite {
                sweep,
                component: "signals",
            });
        }
        if self.resid.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SlimError::NonFinite {
                sweep,
                component: "residuals",
            });
        }
        Ok(())
    }

    /// `W = 0` exactly where the mask is off, and `η = 0` implies `q = 0`.
    pub fn spike_consistent(&self) -> bool {
        for i in 0..self.d {
            for j in 0..self.k {
                match self.kind[i][j] {
                    EntryKind::SpikeSlab => {
                        if (self.w[i][j] == 0.0) != !self.q[i][j] {
                            return false;
                        }
                        if self.eta[i][j] == 0.0 && self.q[i][j] {
                            return false;
                        }
                    }
                    EntryKind::Absent => {
                        if self.w[i][j] != 0.0 {
                            return false;
                        }
                    }
                    _ => {}
                }
            }
        }
        true
    }

    /// Gamma shape and rate of `1/ψ_i`. The shape counts observed entries
    /// plus active loadings; inactive entries carry no `ψ` dependence.
    pub fn noise_posterior(&self, i: usize, hp: &Hyperparameters) -> (f64, f64) {
        let mut active = 0usize;
        let mut pen = 0.0;
        for j in 0..self.k {
            if self.is_active(i, j) {
                active += 1;
                pen += self.w[i][j] * self.w[i][j] / self.tau[i][j];
            }
        }
        let shape = hp.s_s + 0.5 * (self.n_obs[i] + active) as f64;
        let rate = hp.s_r + 0.5 * self.rss(i) + 0.5 * pen;
        (shape, rate)
    }

    pub fn update_noise<R: Rng + ?Sized>(&mut self, hp: &Hyperparameters, rng: &mut R) {
        for i in 0..self.d {
            let (shape, rate) = self.noise_posterior(i, hp);
            self.psi[i] = 1.0 / gamma(rng, shape, rate);
        }
    }

    /// Element-wise signal draws followed by their mixing variances.
    pub fn update_latent_rows<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.n;
        let mut prec = vec![0.0; n];
        let mut num = vec![0.0; n];
        for j in 0..self.k {
            let RowSource::Latent { signal, .. } = self.source[j] else {
                continue;
            };
            let rows: Vec<usize> = (0..self.d).filter(|&i| self.w[i][j] != 0.0).collect();
            prec.iter_mut().for_each(|v| *v = 0.0);
            num.iter_mut().for_each(|v| *v = 0.0);
            for &i in &rows {
                let wij = self.w[i][j];
                let a = wij / self.psi[i];
                let fj = &self.f[j];
                let e = &self.resid[i];
                match &self.obs {
                    None => {
                        let p = a * wij;
                        for t in 0..n {
                            prec[t] += p;
                            num[t] += a * (e[t] + wij * fj[t]);
                        }
                    }
                    Some(o) => {
                        let m = &o[i];
                        for t in 0..n {
                            prec[t] += a * wij * m[t];
                            num[t] += a * m[t] * (e[t] + wij * fj[t]);
                        }
                    }
                }
            }
            let mut delta = vec![0.0; n];
            {
                let fj = &mut self.f[j];
                let vj = &self.var[j];
                for t in 0..n {
                    let u = 1.0 / (prec[t] + 1.0 / vj[t]);
                    let z = u * num[t] + u.sqrt() * normal(rng);
                    delta[t] = z - fj[t];
                    fj[t] = z;
                }
            }
            for &i in &rows {
                let wij = self.w[i][j];
                axpy(&mut self.resid[i], -wij, &delta);
            }
            self.update_mixing_row(j, signal, rng);
        }
    }

    fn update_mixing_row<R: Rng + ?Sized>(&mut self, j: usize, signal: Signal, rng: &mut R) {
        let fj = &self.f[j];
        let vj = &mut self.var[j];
        match signal {
            Signal::Gaussian => {}
            Signal::Heavy(HeavyTailed::Laplace { lambda }) => {
                let shape = lambda * lambda;
                for t in 0..fj.len() {
                    let az = fj[t].abs().max(MIN_ABS_Z);
                    let inv = inverse_gaussian(lambda / az, shape, rng);
                    vj[t] = (1.0 / inv).min(1e12);
                }
            }
            Signal::Heavy(HeavyTailed::StudentT { theta, sigma2 }) => {
                let shape = 0.5 * (theta + 1.0);
                for t in 0..fj.len() {
                    let rate = 0.5 * theta + fj[t] * fj[t] / (2.0 * sigma2);
                    let inv = gamma(rng, shape, rate);
                    // the stored variance includes σ²
                    vj[t] = (sigma2 / inv).min(1e12);
                }
            }
        }
    }

    /// Likelihood precision and precision-weighted data for every element of
    /// row `j`, with the row's own contribution added back.
    fn row_likelihood_terms(&self, j: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut prec = vec![0.0; n];
        let mut num = vec![0.0; n];
        for i in 0..self.d {
            let wij = self.w[i][j];
            if wij == 0.0 {
                continue;
            }
            let a = wij / self.psi[i];
            for t in 0..n {
                let m = self.obs.as_ref().map_or(1.0, |o| o[i][t]);
                prec[t] += a * wij * m;
                num[t] += a * m * (self.resid[i][t] + wij * self.f[j][t]);
            }
        }
        (prec, num)
    }

    pub fn update_gp_rows<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for g in 0..self.gp.len() {
            let j = self.gp_rows[g];
            let (prec, num) = self.row_likelihood_terms(j);
            let new = self.gp[g].sample_posterior(&prec, &num, rng)?;
            let delta: Vec<f64> = new.iter().zip(&self.f[j]).map(|(a, b)| a - b).collect();
            for i in 0..self.d {
                let wij = self.w[i][j];
                if wij != 0.0 {
                    axpy(&mut self.resid[i], -wij, &delta);
                }
            }
            self.f[j] = new;
        }
        Ok(())
    }

    /// `Σ_t m_it f_jt²` and `Σ_t m_it E_it f_jt + w_ij Σ_t m_it f_jt²`.
    #[inline]
    fn entry_terms(&self, i: usize, j: usize, zz_shared: Option<f64>) -> (f64, f64) {
        let fj = &self.f[j];
        let (zz, ef) = match &self.obs {
            None => (
                zz_shared.unwrap_or_else(|| dot(fj, fj)),
                dot(&self.resid[i], fj),
            ),
            Some(o) => (dot3(fj, fj, &o[i]), dot3(&self.resid[i], fj, &o[i])),
        };
        (zz, ef + self.w[i][j] * zz)
    }

    fn column_norms(&self) -> Vec<f64> {
        self.f.iter().map(|r| dot(r, r)).collect()
    }

    /// Joint slab draw of the active entries of each row, then slab
    /// variances. Inactive entries stay exactly zero and take their slab
    /// variance from the prior.
    ///
    /// Drawing a row's active weights together matters when regressors are
    /// nearly collinear (a parent and a latent it shares with the child):
    /// one-at-a-time updates crawl along the resulting ridge.
    pub fn update_loadings<R: Rng + ?Sized>(&mut self, hp: &Hyperparameters, rng: &mut R) {
        let zz = self.column_norms();
        for i in 0..self.d {
            let active: Vec<usize> = (0..self.k).filter(|&j| self.is_active(i, j)).collect();
            if active.len() == 1 {
                let j = active[0];
                let (zzij, b) = self.entry_terms(i, j, Some(zz[j]));
                let a = zzij + 1.0 / self.tau[i][j];
                let new = b / a + (self.psi[i] / a).sqrt() * normal(rng);
                self.set_active_weights(i, &active, &[new]);
            } else if active.len() > 1 {
                match self.joint_row_draw(i, &active, rng) {
                    Ok(new) => self.set_active_weights(i, &active, &new),
                    // numerically singular block: fall back to single-site draws
                    Err(_) => {
                        for &j in &active {
                            let (zzij, b) = self.entry_terms(i, j, Some(zz[j]));
                            let a = zzij + 1.0 / self.tau[i][j];
                            let new = b / a + (self.psi[i] / a).sqrt() * normal(rng);
                            self.set_active_weights(i, &[j], &[new]);
                        }
                    }
                }
            }
            for j in 0..self.k {
                match self.kind[i][j] {
                    EntryKind::Absent | EntryKind::Fixed => {}
                    _ if self.is_active(i, j) => {
                        let c = self.w[i][j];
                        let rate = hp.t_r + c * c / (2.0 * self.psi[i]);
                        self.tau[i][j] = 1.0 / gamma(rng, hp.t_s + 0.5, rate);
                    }
                    _ => self.tau[i][j] = 1.0 / gamma(rng, hp.t_s, hp.t_r),
                }
            }
        }
    }

    /// Draw `w_iA ~ N(G⁻¹h, ψ_i G⁻¹)` with `G = F_A M F_Aᵀ + diag(1/τ)` and
    /// `h = F_A M r`, `r` the residual with the active terms added back.
    fn joint_row_draw<R: Rng + ?Sized>(
        &self,
        i: usize,
        active: &[usize],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let a = active.len();
        let mut r = self.resid[i].clone();
        for &j in active {
            axpy(&mut r, self.w[i][j], &self.f[j]);
        }
        let mut g = DMatrix::<f64>::zeros(a, a);
        let mut h = DVector::<f64>::zeros(a);
        let ones;
        let m: &[f64] = match &self.obs {
            Some(o) => &o[i],
            None => {
                ones = vec![1.0; self.n];
                &ones
            }
        };
        for (p, &jp) in active.iter().enumerate() {
            let fp = &self.f[jp];
            h[p] = dot3(fp, &r, m);
            for (q, &jq) in active.iter().enumerate().take(p + 1) {
                let v = dot3(fp, &self.f[jq], m);
                g[(p, q)] = v;
                g[(q, p)] = v;
            }
            g[(p, p)] += 1.0 / self.tau[i][jp];
        }
        let chol = cholesky_jittered(g, "row loadings")?;
        let mean = chol.solve(&h);
        let xi = DVector::from_fn(a, |_, _| normal(rng));
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&xi)
            .expect("non-singular triangular factor");
        let sd = self.psi[i].sqrt();
        Ok((0..a).map(|p| mean[p] + sd * noise[p]).collect())
    }

    fn set_active_weights(&mut self, i: usize, active: &[usize], new: &[f64]) {
        for (&j, &v) in active.iter().zip(new) {
            let delta = v - self.w[i][j];
            self.w[i][j] = v;
            if delta != 0.0 {
                axpy(&mut self.resid[i], -delta, &self.f[j]);
            }
        }
    }

    /// Log odds of `q_ij = 1` with `η` and `c_ij` integrated out:
    /// `ln[α_mν/(1−α_mν)] − ½ln(τA) + b²/(2ψA)`, `A = ZZᵀ + 1/τ`.
    #[inline]
    pub fn inclusion_log_odds(alpha_m: f64, nu: f64, psi: f64, tau: f64, zz: f64, b: f64) -> f64 {
        let a = zz + 1.0 / tau;
        let prior = alpha_m * nu;
        (prior / (1.0 - prior)).ln() - 0.5 * (tau * a).ln() + b * b / (2.0 * psi * a)
    }

    /// Joint `(q, c)` draw per spike-and-slab entry, then `(u, η)` and `ν`.
    pub fn update_sparsity<R: Rng + ?Sized>(&mut self, hp: &Hyperparameters, rng: &mut R) {
        let zz = self.column_norms();
        let shrink = |nu: f64| nu * (1.0 - hp.alpha_m) / (1.0 - nu * hp.alpha_m);
        for i in 0..self.d {
            for j in 0..self.k {
                if self.kind[i][j] != EntryKind::SpikeSlab {
                    continue;
                }
                let nu = self.nu[self.nu_group[j]];
                let (zzij, b) = self.entry_terms(i, j, Some(zz[j]));
                let tau = self.tau[i][j];
                let psi = self.psi[i];
                let lo = Self::inclusion_log_odds(hp.alpha_m, nu, psi, tau, zzij, b);
                let p = 1.0 / (1.0 + (-lo).exp());
                let q = bernoulli(rng, p);
                let new = if q {
                    let a = zzij + 1.0 / tau;
                    b / a + (psi / a).sqrt() * normal(rng)
                } else {
                    0.0
                };
                let delta = new - self.w[i][j];
                self.w[i][j] = new;
                self.q[i][j] = q;
                if delta != 0.0 {
                    let fj = &self.f[j];
                    axpy(&mut self.resid[i], -delta, fj);
                }
                let u = q || bernoulli(rng, shrink(nu));
                self.u[i][j] = u;
                self.eta[i][j] = if u {
                    let qf = if q { 1.0 } else { 0.0 };
                    beta(
                        rng,
                        hp.alpha_p * hp.alpha_m + qf,
                        hp.alpha_p * (1.0 - hp.alpha_m) + 1.0 - qf,
                    )
                } else {
                    0.0
                };
            }
        }
        self.update_column_rates(hp, rng);
    }

    pub fn update_column_rates<R: Rng + ?Sized>(&mut self, hp: &Hyperparameters, rng: &mut R) {
        let g = self.nu.len();
        let mut on = vec![0.0; g];
        let mut off = vec![0.0; g];
        let mut any = vec![false; g];
        for i in 0..self.d {
            for j in 0..self.k {
                if self.kind[i][j] == EntryKind::SpikeSlab {
                    let grp = self.nu_group[j];
                    any[grp] = true;
                    if self.u[i][j] {
                        on[grp] += 1.0;
                    } else {
                        off[grp] += 1.0;
                    }
                }
            }
        }
        for grp in 0..g {
            if any[grp] {
                self.nu[grp] = beta(
                    rng,
                    hp.beta_p * hp.beta_m + on[grp],
                    hp.beta_p * (1.0 - hp.beta_m) + off[grp],
                );
            }
        }
    }

    /// GP inverse length scales (independence M-H from the prior) and their
    /// shared rate `κ`.
    pub fn update_gp_hyper<R: Rng + ?Sized>(
        &mut self,
        hp: &Hyperparameters,
        rng: &mut R,
    ) -> Result<()> {
        if self.gp.is_empty() {
            return Ok(());
        }
        for g in 0..self.gp.len() {
            let proposal = gamma(rng, hp.u_s, self.kappa);
            let j = self.gp_rows[g];
            let f = self.f[j].clone();
            self.gp[g].propose_ups(proposal, &f, rng)?;
        }
        let ups: Vec<f64> = self.gp.iter().map(|r| r.ups).collect();
        let (shape, rate) = crate::gp::kappa_posterior(hp, &ups);
        self.kappa = gamma(rng, shape, rate);
        Ok(())
    }

    /// Learned Laplace rates: `υ ~ Exponential(λ²/2)` with `λ² ~ Gamma(1, 1)`
    /// gives `λ² | υ ~ Gamma(1 + n, 1 + Συ/2)`.
    pub fn update_rates<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for j in 0..self.k {
            if let RowSource::Latent {
                signal: Signal::Heavy(HeavyTailed::Laplace { .. }),
                learn_rate: true,
            } = self.source[j]
            {
                let s: f64 = self.var[j].iter().sum();
                let rho = gamma(rng, 1.0 + self.n as f64, 1.0 + 0.5 * s);
                self.source[j] = RowSource::Latent {
                    signal: Signal::laplace(rho.sqrt()),
                    learn_rate: true,
                };
            }
        }
    }

    /// Current signal distribution of a latent row.
    pub fn signal(&self, j: usize) -> Option<Signal> {
        match self.source[j] {
            RowSource::Latent { signal, .. } => Some(signal),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests;
