use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Result, SlimError};

/// Cholesky factorization with a single jitter retry: on failure add
/// `1e-10·trace/n` to the diagonal once, then give up.
pub fn cholesky_jittered(m: DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(SlimError::Dimension(format!(
            "{context}: matrix must be square and non-empty"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SlimError::NotPositiveDefinite { context });
    }
    let jitter = 1e-10 * m.trace().abs() / n as f64;
    match Cholesky::new(m.clone()) {
        Some(c) => Ok(c),
        None => {
            let mut m = m;
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            Cholesky::new(m).ok_or(SlimError::NotPositiveDefinite { context })
        }
    }
}
