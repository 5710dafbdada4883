//! Candidate orderings from the factor model's permutation search.
use slim::datagen::generate_lingam_suite;
use slim::factor::{run_factor_chain, FactorMode};
use slim::{Hyperparameters, PriorMode, RngStream};

fn main() -> slim::Result<()> {
    let (data, truth) = generate_lingam_suite(5, 1000, 2)?;
    let data = data.standardize()?;
    let hp = Hyperparameters::defaults(PriorMode::Factor);
    let chain = run_factor_chain(
        &data,
        &hp,
        FactorMode::OrderSearch,
        &mut RngStream::new(2, 0),
    )?;
    println!("permutation acceptance {:.3}", chain.acceptance);
    for (k, p) in chain
        .candidates
        .top_candidates(hp.m_top)?
        .iter()
        .enumerate()
    {
        let hit = if truth.is_consistent_ordering(p) {
            "  consistent with the truth"
        } else {
            ""
        };
        println!("{k:>2}  {p}  count {}{hit}", chain.candidates.count(p));
    }
    Ok(())
}
