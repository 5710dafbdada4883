//! Two observed variables plus one Cauchy latent driving both.
//! With a heavy-tailed latent the direct edge x1 → x2 is identified.
use slim::dag::{run_dag_chain_with, DagConfig};
use slim::datagen::{generate_toy_latent_pair, ToyVariant};
use slim::gibbs::Signal;
use slim::{Hyperparameters, Permutation, PriorMode, RngStream};

fn main() -> slim::Result<()> {
    let (data, truth) = generate_toy_latent_pair(ToyVariant::I, 500, 7)?;
    let hp = Hyperparameters::defaults(PriorMode::Dag {
        dense: true,
        latents: true,
    });
    let cfg = DagConfig {
        latents: 1,
        latent_signal: Signal::CAUCHY,
        fixed_driving: Some(vec![1.0, 1.0]),
        learn_driving_rate: Some(false),
        ..DagConfig::default()
    };
    let chain = run_dag_chain_with(
        &data,
        None,
        &Permutation::identity(2),
        &hp,
        &cfg,
        &mut RngStream::new(0, 5),
    )?;
    let s = chain.summary()?;
    println!(
        "true b21 {:.2}, posterior median {:.2}",
        truth.b[1][0], s.b.median[1][0]
    );
    if let Some(c) = s.c_latent {
        println!(
            "latent loadings: true {:.2?}, median {:.2?}",
            truth.c_latent, c.median
        );
    }
    Ok(())
}
