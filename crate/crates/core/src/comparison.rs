//! Held-out predictive densities and model selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distributions::{log_gaussian_in_place, log_sum_exp};
use crate::error::{Result, SlimError};
use crate::gibbs::{LinearState, RowSource, Signal};
use crate::summary::{quantile, Quantiles};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MAX_SCALE: f64 = 1e12;

/// Everything a posterior draw needs to score test columns: weights, noise,
/// regressor values at the test columns (DAG parents or their GP
/// transforms) and the distributions of the latent columns.
#[derive(Clone, Debug)]
pub struct PredictiveModel {
    pub weights: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
    /// `(column, values at the test columns)`.
    pub mean_rows: Vec<(usize, Vec<f64>)>,
    /// `(column, signal)`.
    pub latent: Vec<(usize, Signal)>,
}

impl PredictiveModel {
    /// Build from a sampler state. Observed column `j < d` maps to test
    /// variable `j`; GP columns use the predictive mean at the test inputs
    /// of the variable listed in `gp_inputs`.
    pub fn from_state(state: &LinearState, test: &Dataset, gp_inputs: &[usize]) -> Result<Self> {
        if test.d() != state.d() {
            return Err(SlimError::Dimension(format!(
                "test data has {} variables, model {}",
                test.d(),
                state.d()
            )));
        }
        let mut mean_rows = Vec::new();
        let mut latent = Vec::new();
        for (j, src) in state.sources().iter().enumerate() {
            let used = state.weights().iter().any(|r| r[j] != 0.0);
            match src {
                RowSource::Observed => {
                    if used {
                        if j >= test.d() {
                            return Err(SlimError::Dimension(
                                "observed column beyond test variables".into(),
                            ));
                        }
                        mean_rows.push((j, test.row(j).to_vec()));
                    }
                }
                RowSource::Gp(g) => {
                    if used {
                        let var = *gp_inputs.get(*g).ok_or_else(|| {
                            SlimError::Dimension("missing GP input variable".into())
                        })?;
                        let row = &state.gp_rows()[*g];
                        mean_rows
                            .push((j, row.predict_mean(&state.regressors()[j], test.row(var))));
                    }
                }
                RowSource::Latent { signal, .. } => {
                    if used {
                        latent.push((j, *signal));
                    }
                }
            }
        }
        Ok(Self {
            weights: state.weights().to_vec(),
            psi: state.psi().to_vec(),
            mean_rows,
            latent,
        })
    }

    fn diagonal_only(&self) -> bool {
        self.latent
            .iter()
            .all(|&(j, _)| self.weights.iter().filter(|r| r[j] != 0.0).count() <= 1)
    }
}

/// `Σ_n ln[(1/N_rep) Σ_r N(x*_n | m_n, Σ_n^(r))]` with
/// `Σ_n = Σ_j w_j w_jᵀ υ_jn + Ψ` and `υ_jn` drawn from the mixing prior.
pub fn predictive_log_density<R: Rng + ?Sized>(
    test: &Dataset,
    model: &PredictiveModel,
    n_rep: usize,
    rng: &mut R,
) -> Result<f64> {
    let d = test.d();
    if model.weights.len() != d || model.psi.len() != d {
        return Err(SlimError::Dimension(
            "model and test variables differ".into(),
        ));
    }
    if n_rep == 0 {
        return Err(SlimError::InvalidArgument("n_rep must be positive".into()));
    }
    let nt = test.n();
    let diag = model.diagonal_only();
    let ln_rep = (n_rep as f64).ln();
    let mut logs = vec![0.0; n_rep];
    let mut r = vec![0.0; d];
    let mut cov = vec![0.0; d * d];
    let mut total = 0.0;
    // for the diagonal path: which row each latent column touches
    let touch: Vec<(usize, f64, Signal)> = model
        .latent
        .iter()
        .filter_map(|&(j, s)| {
            (0..d)
                .find(|&i| model.weights[i][j] != 0.0)
                .map(|i| (i, model.weights[i][j], s))
        })
        .collect();
    let mut var = vec![0.0; d];
    for t in 0..nt {
        let mut resid = vec![0.0; d];
        for i in 0..d {
            let mut m = 0.0;
            for (j, vals) in &model.mean_rows {
                m += model.weights[i][*j] * vals[t];
            }
            resid[i] = test.row(i)[t] - m;
        }
        for lr in logs.iter_mut() {
            if diag {
                var.copy_from_slice(&model.psi);
                for &(i, w, s) in &touch {
                    var[i] += w * w * s.sample_variance(rng).min(MAX_SCALE);
                }
                let mut acc = -0.5 * d as f64 * LN_2PI;
                for i in 0..d {
                    acc -= 0.5 * (var[i].ln() + resid[i] * resid[i] / var[i]);
                }
                *lr = acc;
            } else {
                cov.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    cov[i * d + i] = model.psi[i];
                }
                for &(j, s) in &model.latent {
                    let v = s.sample_variance(rng).min(MAX_SCALE);
                    for a in 0..d {
                        let wa = model.weights[a][j];
                        if wa == 0.0 {
                            continue;
                        }
                        for b in 0..=a {
                            cov[a * d + b] += wa * model.weights[b][j] * v;
                        }
                    }
                }
                // the in-place factorization reads the lower triangle only
                r.copy_from_slice(&resid);
                *lr = log_gaussian_in_place(&mut r, &mut cov).ok_or(
                    SlimError::NotPositiveDefinite {
                        context: "predictive covariance",
                    },
                )?;
            }
        }
        total += log_sum_exp(&logs) - ln_rep;
    }
    Ok(total)
}

/// Gaussian log-likelihood of the held-out entries (`mask == false`) of
/// `data` under mean `W F` and noise `psi`. Zero when nothing is held out.
pub fn missing_value_log_density(
    data: &Dataset,
    weights: &[Vec<f64>],
    f: &[Vec<f64>],
    psi: &[f64],
) -> Result<f64> {
    let Some(mask) = data.mask() else {
        return Err(SlimError::InvalidArgument(
            "missing-value density needs a mask".into(),
        ));
    };
    let (d, n) = (data.d(), data.n());
    if weights.len() != d || psi.len() != d || f.iter().any(|r| r.len() != n) {
        return Err(SlimError::Dimension(
            "missing-value density operands".into(),
        ));
    }
    let mut ll = 0.0;
    for i in 0..d {
        for t in 0..n {
            if mask[i][t] {
                continue;
            }
            let mean: f64 = weights[i].iter().zip(f).map(|(w, row)| w * row[t]).sum();
            let r = data.row(i)[t] - mean;
            ll += -0.5 * (LN_2PI + psi[i].ln()) - 0.5 * r * r / psi[i];
        }
    }
    Ok(ll)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub label: String,
    pub samples: Vec<f64>,
    pub summary: Quantiles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub models: Vec<ModelEntry>,
    /// Index of the selected model.
    pub selected: usize,
    pub selected_label: String,
    /// Whether the top medians tie.
    pub tie: bool,
    /// Best DAG minus factor model, per paired sample when both exist.
    pub log_ratio: Option<Vec<f64>>,
    pub median_log_ratio: Option<f64>,
}

impl ComparisonReport {
    pub fn entry(&self, label: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.label == label)
    }
}

/// Labels starting with `fm` are factor models, everything else is a DAG.
fn is_factor_label(label: &str) -> bool {
    label.to_ascii_lowercase().starts_with("fm")
}

/// Select the model with the highest median test log-likelihood; ties go to
/// the earliest label. When a factor model and at least one DAG are present
/// the ratio `L_DAG − L_FM` is reported for the best DAG: per sample when the
/// sample counts match, otherwise as the difference of medians.
pub fn compare_models(reports: &[(String, Vec<f64>)]) -> Result<ComparisonReport> {
    if reports.len() < 2 {
        return Err(SlimError::InvalidArgument(
            "need at least two models to compare".into(),
        ));
    }
    let mut models = Vec::with_capacity(reports.len());
    for (label, samples) in reports {
        if samples.is_empty() {
            return Err(SlimError::Empty("model has no test log-likelihood samples"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(SlimError::InvalidArgument(format!(
                "NaN test log-likelihood in {label}"
            )));
        }
        models.push(ModelEntry {
            label: label.clone(),
            samples: samples.clone(),
            summary: Quantiles::of(samples)?,
        });
    }
    let mut selected = 0;
    for (k, m) in models.iter().enumerate().skip(1) {
        if m.summary.median > models[selected].summary.median {
            selected = k;
        }
    }
    let best = models[selected].summary.median;
    let tie = models
        .iter()
        .enumerate()
        .any(|(k, m)| k != selected && m.summary.median == best);

    let fm = models.iter().position(|m| is_factor_label(&m.label));
    let best_dag = models
        .iter()
        .enumerate()
        .filter(|(_, m)| !is_factor_label(&m.label))
        .fold(None::<usize>, |acc, (k, m)| match acc {
            Some(a) if models[a].summary.median >= m.summary.median => Some(a),
            _ => Some(k),
        });
    let (log_ratio, median_log_ratio) = match (fm, best_dag) {
        (Some(f), Some(g)) => {
            let (a, b) = (&models[g].samples, &models[f].samples);
            if a.len() == b.len() {
                let r: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let med = quantile(&r, 0.5)?;
                (Some(r), Some(med))
            } else {
                (
                    None,
                    Some(models[g].summary.median - models[f].summary.median),
                )
            }
        }
        _ => (None, None),
    };
    Ok(ComparisonReport {
        selected_label: models[selected].label.clone(),
        models,
        selected,
        tie,
        log_ratio,
        median_log_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_pick_first() {
        let r = compare_models(&[
            ("fm".into(), vec![1.0, 2.0]),
            ("dag-1".into(), vec![1.0, 2.0]),
        ])
        .unwrap();
        assert_eq!(r.selected, 0);
        assert!(r.tie);
        assert_eq!(r.median_log_ratio, Some(0.0));
    }

    #[test]
    fn larger_median_wins() {
        let r = compare_models(&[
            ("fm".into(), vec![-3.46e3]),
            ("dag-latent".into(), vec![-3.4e3]),
        ])
        .unwrap();
        assert_eq!(r.selected_label, "dag-latent");
        assert!(r.median_log_ratio.unwrap() > 0.0);
        assert!(!r.tie);
    }

    #[test]
    fn errors() {
        assert!(compare_models(&[("fm".into(), vec![1.0])]).is_err());
        assert!(compare_models(&[("fm".into(), vec![]), ("dag".into(), vec![1.0])]).is_err());
        assert!(
            compare_models(&[("fm".into(), vec![f64::NAN]), ("dag".into(), vec![1.0])]).is_err()
        );
    }

    #[test]
    fn unequal_lengths_use_median_difference() {
        let r = compare_models(&[
            ("fm".into(), vec![1.0, 2.0, 3.0]),
            ("dag".into(), vec![5.0]),
        ])
        .unwrap();
        assert!(r.log_ratio.is_none());
        assert_eq!(r.median_log_ratio, Some(3.0));
    }
}
