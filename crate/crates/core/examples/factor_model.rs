//! Sparse factor model on data mixed by a known sparse matrix.
use slim::datagen::generate_factor_truth;
use slim::factor::{matched_cosines, run_factor_chain, FactorMode};
use slim::{Hyperparameters, PriorMode, RngStream};

fn main() -> slim::Result<()> {
    let g = generate_factor_truth(4, 600, 3)?;
    let (data, stats) = g.data.standardize_with_stats()?;
    let mut hp = Hyperparameters::defaults(PriorMode::Factor);
    hp.n_samples = 2000;
    hp.n_burnin = 1000;
    let chain = run_factor_chain(&data, &hp, FactorMode::Plain, &mut RngStream::new(1, 0))?;
    let s = chain.summary()?;

    // true mixing in standardized units, columns as vectors
    let d = g.truth.mixing.as_ref().expect("factor truth");
    let cols = |m: &[Vec<f64>], scale: &[f64]| -> Vec<Vec<f64>> {
        (0..m[0].len())
            .map(|j| (0..m.len()).map(|i| m[i][j] / scale[i]).collect())
            .collect()
    };
    let ones = vec![1.0; data.d()];
    let cos = matched_cosines(&cols(d, &stats.sds), &cols(&s.loadings.median, &ones));
    println!("matched |cos| per true column: {cos:.3?}");
    println!("median noise variances: {:.3?}", s.psi.median[0]);
    Ok(())
}
