//! Posterior summaries by empirical quantiles.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};

/// `(0.025, 0.5, 0.975)` quantiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

impl Quantiles {
    pub fn of(samples: &[f64]) -> Result<Self> {
        let mut v = samples.to_vec();
        sort(&mut v)?;
        Ok(Self {
            q025: sorted_quantile(&v, 0.025),
            median: sorted_quantile(&v, 0.5),
            q975: sorted_quantile(&v, 0.975),
        })
    }
}

fn sort(v: &mut [f64]) -> Result<()> {
    if v.is_empty() {
        return Err(SlimError::Empty("no samples to summarize"));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(SlimError::InvalidArgument("NaN sample".into()));
    }
    v.sort_by(f64::total_cmp);
    Ok(())
}

/// Linear interpolation between order statistics (`(n−1)p` rule).
fn sorted_quantile(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SlimError::InvalidArgument(format!(
            "quantile level {p} outside [0, 1]"
        )));
    }
    let mut v = samples.to_vec();
    sort(&mut v)?;
    Ok(sorted_quantile(&v, p))
}

pub fn median(samples: &[f64]) -> Result<f64> {
    quantile(samples, 0.5)
}

/// Scalar summary.
pub fn summarize_samples(samples: &[f64]) -> Result<Quantiles> {
    Quantiles::of(samples)
}

/// Element-wise summary of a sequence of equally shaped matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub q025: Vec<Vec<f64>>,
    pub median: Vec<Vec<f64>>,
    pub q975: Vec<Vec<f64>>,
}

pub fn summarize_matrices(samples: &[Vec<Vec<f64>>]) -> Result<MatrixSummary> {
    let Some(first) = samples.first() else {
        return Err(SlimError::Empty("no samples to summarize"));
    };
    let rows = first.len();
    let cols = first.first().map_or(0, |r| r.len());
    if samples
        .iter()
        .any(|m| m.len() != rows || m.iter().any(|r| r.len() != cols))
    {
        return Err(SlimError::Dimension(
            "matrix samples of different shapes".into(),
        ));
    }
    let mut out = MatrixSummary {
        q025: vec![vec![0.0; cols]; rows],
        median: vec![vec![0.0; cols]; rows],
        q975: vec![vec![0.0; cols]; rows],
    };
    let mut buf = Vec::with_capacity(samples.len());
    for i in 0..rows {
        for j in 0..cols {
            buf.clear();
            buf.extend(samples.iter().map(|m| m[i][j]));
            let q = Quantiles::of(&buf)?;
            out.q025[i][j] = q.q025;
            out.median[i][j] = q.median;
            out.q975[i][j] = q.q975;
        }
    }
    Ok(out)
}

/// Element-wise mean.
pub fn mean_matrix(samples: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = samples.first() else {
        return Err(SlimError::Empty("no samples to average"));
    };
    let mut acc = vec![vec![0.0; first.first().map_or(0, |r| r.len())]; first.len()];
    for m in samples {
        for (a, r) in acc.iter_mut().zip(m) {
            for (x, y) in a.iter_mut().zip(r) {
                *x += y;
            }
        }
    }
    let n = samples.len() as f64;
    acc.iter_mut().flatten().for_each(|x| *x /= n);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::gamma;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Gamma};

    #[test]
    fn symmetric_and_constant() {
        assert_eq!(median(&[-1.0, 0.0, 1.0]).unwrap(), 0.0);
        let q = summarize_samples(&[2.5; 7]).unwrap();
        assert_eq!((q.q025, q.median, q.q975), (2.5, 2.5, 2.5));
        assert!(summarize_samples(&[]).is_err());
        assert!(quantile(&[1.0], 1.5).is_err());
    }

    #[test]
    fn gamma_quantiles_match_inverse_cdf() {
        let mut rng = RngStream::new(21, 0);
        let (shape, rate) = (100.0, 100.0);
        let draws: Vec<f64> = (0..10_000).map(|_| gamma(&mut rng, shape, rate)).collect();
        let q = summarize_samples(&draws).unwrap();
        let g = Gamma::new(shape, rate).unwrap();
        assert!((q.q025 - g.inverse_cdf(0.025)).abs() < 0.01);
        assert!((q.median - g.inverse_cdf(0.5)).abs() < 0.01);
        assert!((q.q975 - g.inverse_cdf(0.975)).abs() < 0.01);
    }

    #[test]
    fn matrix_summary_elementwise() {
        let s = vec![
            vec![vec![1.0, 2.0]],
            vec![vec![3.0, 2.0]],
            vec![vec![2.0, 2.0]],
        ];
        let m = summarize_matrices(&s).unwrap();
        assert_eq!(m.median, vec![vec![2.0, 2.0]]);
        assert_eq!(mean_matrix(&s).unwrap(), vec![vec![2.0, 2.0]]);
        assert!(summarize_matrices(&[vec![vec![1.0]], vec![vec![1.0, 2.0]]]).is_err());
    }

    proptest! {
        #[test]
        fn quantiles_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let q = summarize_samples(&v).unwrap();
            prop_assert!(q.q025 <= q.median && q.median <= q.q975);
        }
    }
}
