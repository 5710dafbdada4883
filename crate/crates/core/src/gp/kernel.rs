//! Squared-exponential GP rows: covariance construction, the stable
//! posterior covariance and joint row sampling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::distributions::normal;
use crate::error::{Result, SlimError};
use crate::linalg::cholesky_jittered;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Diagonal nugget on every GP row prior; keeps `K⁻¹f` stable at long
/// length scales.
pub const GP_NUGGET: f64 = 1e-6;

/// `K[a][b] = exp(−ups·(x_a − x_b)²)`.
pub fn build_covariance(inputs: &[f64], ups: f64) -> Result<DMatrix<f64>> {
    if !(ups > 0.0 && ups.is_finite()) {
        return Err(SlimError::InvalidArgument(format!(
            "inverse length scale {ups} must be positive"
        )));
    }
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(SlimError::InvalidArgument("non-finite GP input".into()));
    }
    let n = inputs.len();
    let mut k = DMatrix::from_element(n, n, 1.0);
    for a in 0..n {
        for b in 0..a {
            let dx = inputs[a] - inputs[b];
            let v = (-ups * dx * dx).exp();
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    Ok(k)
}

/// Reciprocal condition estimate from the Cholesky diagonal; tiny values flag
/// the near-constant kernels produced by very long length scales.
pub fn is_ill_conditioned(k: &DMatrix<f64>) -> bool {
    match Cholesky::new(k.clone()) {
        None => true,
        Some(c) => {
            let d = c.l().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            (lo / hi).powi(2) < 1e-12
        }
    }
}

/// `V = K − K (U⁻¹ + K)⁻¹ K` for diagonal `U > 0`, through one Cholesky
/// factor `L Lᵀ = U⁻¹ + K` and a triangular solve `L⁻¹ K`.
pub fn posterior_covariance(k: &DMatrix<f64>, u: &[f64]) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    if u.len() != n || k.ncols() != n {
        return Err(SlimError::Dimension("posterior covariance shapes".into()));
    }
    if u.iter().any(|&v| !(v > 0.0)) {
        return Err(SlimError::InvalidArgument(
            "U must be strictly positive".into(),
        ));
    }
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += 1.0 / u[i];
    }
    let chol = cholesky_jittered(a, "gp posterior")?;
    let w = chol
        .l()
        .solve_lower_triangular(k)
        .ok_or(SlimError::NotPositiveDefinite {
            context: "gp posterior",
        })?;
    let mut v = k - w.transpose() * w;
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (v[(i, j)] + v[(j, i)]);
            v[(i, j)] = s;
            v[(j, i)] = s;
        }
    }
    Ok(v)
}

/// One GP-distributed row: its inputs, inverse length scale and cached
/// covariance factor.
#[derive(Clone, Debug)]
pub struct GpRow {
    pub inputs: Vec<f64>,
    pub ups: f64,
    pub(crate) k: DMatrix<f64>,
    pub(crate) chol: Cholesky<f64, Dyn>,
    pub proposed: usize,
    pub accepted: usize,
}

impl GpRow {
    pub fn new(inputs: Vec<f64>, ups: f64) -> Result<Self> {
        let k = with_nugget(build_covariance(&inputs, ups)?);
        let chol = cholesky_jittered(k.clone(), "gp prior")?;
        Ok(Self {
            inputs,
            ups,
            k,
            chol,
            proposed: 0,
            accepted: 0,
        })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// `ln N(f | 0, K)`.
    pub fn log_density(&self, f: &[f64]) -> f64 {
        log_density_with(&self.chol, f)
    }

    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let xi = DVector::from_fn(self.len(), |_, _| normal(rng));
        (self.chol.l() * xi).iter().copied().collect()
    }

    /// Draw the row from `N(V b, V)`, `V = (U + K⁻¹)⁻¹`, with `u ≥ 0` the
    /// per-element likelihood precision and `b` the precision-weighted data.
    ///
    /// Uses the pathwise form `f₀ + K s S⁻¹ (b/s − s f₀ − e)` with `s = √U`,
    /// `S = I + sKs`, `f₀ ~ N(0, K)`, `e ~ N(0, I)`; algebraically the same
    /// V as [`posterior_covariance`] but well defined where `U` vanishes.
    pub fn sample_posterior<R: Rng + ?Sized>(
        &self,
        u: &[f64],
        b: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let n = self.len();
        if u.len() != n || b.len() != n {
            return Err(SlimError::Dimension("gp row likelihood terms".into()));
        }
        let f0 = self.sample_prior(rng);
        if u.iter().all(|&v| v <= 0.0) {
            return Ok(f0);
        }
        let s: Vec<f64> = u.iter().map(|&v| v.max(0.0).sqrt()).collect();
        let mut sm = DMatrix::zeros(n, n);
        for a in 0..n {
            for c in 0..n {
                sm[(a, c)] = s[a] * self.k[(a, c)] * s[c];
            }
            sm[(a, a)] += 1.0;
        }
        let chol = cholesky_jittered(sm, "gp row update")?;
        let v = DVector::from_fn(n, |a, _| {
            let y = if s[a] > 0.0 { b[a] / s[a] } else { 0.0 };
            y - s[a] * f0[a] - normal(rng)
        });
        let a = chol.solve(&v);
        let sa = DVector::from_fn(n, |i, _| s[i] * a[i]);
        let kf = &self.k * sa;
        Ok(f0.iter().zip(kf.iter()).map(|(x, y)| x + y).collect())
    }

    /// Independence Metropolis-Hastings step with a prior proposal: the
    /// acceptance ratio is `N(f | 0, K*) / N(f | 0, K)`.
    pub fn propose_ups<R: Rng + ?Sized>(
        &mut self,
        proposal: f64,
        f: &[f64],
        rng: &mut R,
    ) -> Result<bool> {
        self.proposed += 1;
        let k_star = with_nugget(build_covariance(&self.inputs, proposal)?);
        let chol_star = match cholesky_jittered(k_star.clone(), "gp proposal") {
            Ok(c) => c,
            // a proposal whose kernel cannot be factored has zero density
            Err(SlimError::NotPositiveDefinite { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        let log_ratio = log_density_with(&chol_star, f) - self.log_density(f);
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        if accept {
            self.ups = proposal;
            self.k = k_star;
            self.chol = chol_star;
            self.accepted += 1;
        }
        Ok(accept)
    }

    /// Predictive mean `k*ᵀ K⁻¹ f` at new inputs.
    pub fn predict_mean(&self, f: &[f64], new_inputs: &[f64]) -> Vec<f64> {
        let alpha = self.chol.solve(&DVector::from_column_slice(f));
        new_inputs
            .iter()
            .map(|&x| {
                self.inputs
                    .iter()
                    .zip(alpha.iter())
                    .map(|(&xi, &a)| {
                        let dx = x - xi;
                        (-self.ups * dx * dx).exp() * a
                    })
                    .sum()
            })
            .collect()
    }
}

fn with_nugget(mut k: DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..k.nrows() {
        k[(i, i)] += GP_NUGGET;
    }
    k
}

pub(crate) fn log_density_with(chol: &Cholesky<f64, Dyn>, f: &[f64]) -> f64 {
    let n = f.len();
    let l = chol.l_dirty();
    // forward substitution on the lower factor
    let mut w = f.to_vec();
    let mut logdet = 0.0;
    for i in 0..n {
        let mut t = w[i];
        for k in 0..i {
            t -= l[(i, k)] * w[k];
        }
        let lii = l[(i, i)];
        w[i] = t / lii;
        logdet += lii.ln();
    }
    let quad: f64 = w.iter().map(|v| v * v).sum();
    -0.5 * (n as f64 * LN_2PI + quad) - logdet
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn unit_diagonal_and_symmetry() {
        let x: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let k = build_covariance(&x, 0.5).unwrap();
        for i in 0..10 {
            assert_eq!(k[(i, i)], 1.0);
            for j in 0..10 {
                assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
        assert!(build_covariance(&x, 0.0).is_err());
        assert!(build_covariance(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn tiny_scale_approaches_ones() {
        let x: Vec<f64> = (0..6).map(|t| t as f64).collect();
        let k = build_covariance(&x, 1e-14).unwrap();
        assert!(k.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(is_ill_conditioned(&k));
        assert!(!is_ill_conditioned(&build_covariance(&x, 2.0).unwrap()));
    }

    #[test]
    fn zero_data_posterior_mean_is_zero() {
        let x: Vec<f64> = (0..5).map(|t| t as f64).collect();
        let row = GpRow::new(x, 0.3).unwrap();
        let u = vec![2.0; 5];
        let b = vec![0.0; 5];
        let mut rng = RngStream::new(1, 0);
        let mut mean = vec![0.0; 5];
        let reps = 20_000;
        for _ in 0..reps {
            let f = row.sample_posterior(&u, &b, &mut rng).unwrap();
            for (m, v) in mean.iter_mut().zip(&f) {
                *m += v / reps as f64;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 0.02), "{mean:?}");
    }

    #[test]
    fn proposal_equal_to_incumbent_is_accepted() {
        let x: Vec<f64> = (0..8).map(|t| t as f64 * 0.3).collect();
        let mut row = GpRow::new(x, 0.7).unwrap();
        let mut rng = RngStream::new(4, 0);
        let f = row.sample_prior(&mut rng);
        for _ in 0..20 {
            assert!(row.propose_ups(0.7, &f, &mut rng).unwrap());
        }
        assert_eq!(row.accepted, 20);
    }

    #[test]
    fn predictive_mean_interpolates_training_points() {
        let x: Vec<f64> = (0..6).map(|t| t as f64).collect();
        let row = GpRow::new(x.clone(), 1.0).unwrap();
        let f = vec![0.5, -1.0, 0.2, 0.9, -0.3, 0.0];
        let m = row.predict_mean(&f, &x);
        // exact up to the nugget
        for (a, b) in m.iter().zip(&f) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    fn dense_v(k: &DMatrix<f64>, u: &[f64]) -> DMatrix<f64> {
        let mut a = k.clone().try_inverse().unwrap();
        for i in 0..u.len() {
            a[(i, i)] += u[i];
        }
        a.try_inverse().unwrap()
    }

    #[test]
    fn stable_form_matches_dense_inverse() {
        let x = [0.0, 0.7, 1.5, 2.1, 3.4];
        let k = build_covariance(&x, 0.8).unwrap();
        let u = [0.5, 2.0, 1.0, 3.0, 0.25];
        let v = posterior_covariance(&k, &u).unwrap();
        let dense = dense_v(&k, &u);
        assert!((v - dense).abs().max() < 1e-8);
    }

    #[test]
    fn kernel_is_psd_before_jitter() {
        let x: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let k = build_covariance(&x, 0.5).unwrap();
        let min = k.symmetric_eigenvalues().min();
        assert!(min >= -1e-9, "{min}");
    }

    #[test]
    fn identity_kernel_reduces_to_independent_update() {
        // K = I gives V = diag(1/(1+u)) and mean b/(1+u)
        let k = DMatrix::<f64>::identity(4, 4);
        let u = [0.5, 1.0, 2.0, 4.0];
        let b = [1.0, -2.0, 0.3, 0.0];
        let v = posterior_covariance(&k, &u).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 / (1.0 + u[i]) } else { 0.0 };
                assert!((v[(i, j)] - want).abs() < 1e-10);
            }
            let mean: f64 = (0..4).map(|j| v[(i, j)] * b[j]).sum();
            assert!((mean - b[i] / (1.0 + u[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn unloaded_row_keeps_prior_covariance() {
        let x = [0.0, 0.5, 1.2];
        let row = GpRow::new(x.to_vec(), 1.0).unwrap();
        let mut rng = RngStream::new(8, 0);
        let reps = 5000;
        let mut c = DMatrix::<f64>::zeros(3, 3);
        for _ in 0..reps {
            let f = row
                .sample_posterior(&[0.0; 3], &[0.0; 3], &mut rng)
                .unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    c[(a, b)] += f[a] * f[b] / reps as f64;
                }
            }
        }
        // sd of a covariance estimate is about √(2/5000)
        assert!((c - row.covariance()).abs().max() < 0.06);
    }

    #[test]
    fn posterior_draws_match_stable_moments() {
        let x = [0.0, 0.4, 1.1];
        let row = GpRow::new(x.to_vec(), 0.6).unwrap();
        let u = [1.5, 0.5, 3.0];
        let b = [1.0, 0.0, -2.0];
        let v = posterior_covariance(row.covariance(), &u).unwrap();
        let want: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| v[(i, j)] * b[j]).sum())
            .collect();
        let mut rng = RngStream::new(2, 0);
        let reps = 40_000;
        let mut m = [0.0; 3];
        let mut s2 = [0.0; 3];
        for _ in 0..reps {
            let f = row.sample_posterior(&u, &b, &mut rng).unwrap();
            for i in 0..3 {
                m[i] += f[i] / reps as f64;
                s2[i] += f[i] * f[i] / reps as f64;
            }
        }
        for i in 0..3 {
            let var = s2[i] - m[i] * m[i];
            assert!(
                (m[i] - want[i]).abs() < 0.02,
                "{i}: {} vs {}",
                m[i],
                want[i]
            );
            assert!(
                (var - v[(i, i)]).abs() < 0.03,
                "{i}: {var} vs {}",
                v[(i, i)]
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn stable_v_is_symmetric_psd(
            x in proptest::collection::vec(-3.0f64..3.0, 2..8),
            ups in 0.05f64..5.0,
            u0 in 0.01f64..10.0,
        ) {
            let n = x.len();
            let k = with_nugget(build_covariance(&x, ups).unwrap());
            let u: Vec<f64> = (0..n).map(|i| u0 * (1.0 + i as f64 * 0.3)).collect();
            let v = posterior_covariance(&k, &u).unwrap();
            proptest::prop_assert!((&v - v.transpose()).abs().max() < 1e-8);
            proptest::prop_assert!(v.clone().symmetric_eigenvalues().min() > -1e-8);
        }
    }
}
