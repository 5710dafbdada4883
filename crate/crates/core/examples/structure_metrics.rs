//! TPR, FPR, structural errors and AUC of an estimate against a truth.
use slim::metrics::{auc, compare_adjacency};

fn main() -> slim::Result<()> {
    // truth: 0 → 1 → 2, 0 → 2
    let truth = vec![
        vec![false; 3],
        vec![true, false, false],
        vec![true, true, false],
    ];
    // estimate: 0 → 1 kept, 1 → 2 reversed, 0 → 2 missed
    let est = vec![
        vec![false; 3],
        vec![true, false, true],
        vec![false, false, false],
    ];
    let scores = vec![
        vec![0.0, 0.1, 0.2],
        vec![0.9, 0.0, 0.6],
        vec![0.4, 0.3, 0.0],
    ];
    let m = compare_adjacency(&est, &truth, Some(&scores))?;
    println!("{}", serde_json::to_string_pretty(&m)?);
    println!("auc alone: {:?}", auc(&scores, &truth));
    Ok(())
}
