use slim::distributions::{sample_heavy_tailed, HeavyTailed};
use slim::factor::{run_factor_chain, FactorMode};
use slim::gibbs::LinearState;
use slim::order::{masked_log_likelihood, OrderSearch, PermutationCandidateSet};
use slim::{Dataset, Hyperparameters, Permutation, PriorMode, RngStream};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn perm(v: &[usize]) -> Permutation {
    Permutation::new(v.to_vec()).unwrap()
}

fn gaussian_ll(x: &[Vec<f64>], mean: &[Vec<f64>], psi: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(psi)
        .map(|((xi, mi), p)| {
            xi.iter()
                .zip(mi)
                .map(|(a, b)| -0.5 * (LN_2PI + p.ln()) - 0.5 * (a - b).powi(2) / p)
                .sum::<f64>()
        })
        .sum()
}

fn product(dmat: &[Vec<f64>], z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = z[0].len();
    dmat.iter()
        .map(|row| {
            (0..n)
                .map(|t| row.iter().zip(z).map(|(w, zc)| w * zc[t]).sum())
                .collect()
        })
        .collect()
}

fn laplace_rows(rows: usize, n: usize, r: &mut RngStream) -> Vec<Vec<f64>> {
    let l = HeavyTailed::Laplace {
        lambda: std::f64::consts::SQRT_2,
    };
    (0..rows)
        .map(|_| (0..n).map(|_| sample_heavy_tailed(l, r).unwrap()).collect())
        .collect()
}

struct Case {
    x: Vec<Vec<f64>>,
    dmat: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    psi: Vec<f64>,
}

fn case(dmat: Vec<Vec<f64>>, n: usize, seed: u64) -> Case {
    let mut r = RngStream::new(seed, 0);
    let z = laplace_rows(dmat[0].len(), n, &mut r);
    let noise = laplace_rows(dmat.len(), n, &mut r);
    let mut x = product(&dmat, &z);
    for (xi, e) in x.iter_mut().zip(&noise) {
        for (a, b) in xi.iter_mut().zip(e) {
            *a += 0.3 * b;
        }
    }
    let psi = (0..dmat.len()).map(|i| 0.1 + 0.05 * i as f64).collect();
    Case { x, dmat, z, psi }
}

#[test]
fn identity_on_triangular_loadings_is_unmasked() {
    let c = case(
        vec![
            vec![1.0, 0.0, 0.0, 0.4],
            vec![0.5, -1.2, 0.0, 0.0],
            vec![0.0, 0.7, 0.9, -0.3],
        ],
        50,
        1,
    );
    let id = Permutation::identity(3);
    let idf = Permutation::identity(4);
    let masked = masked_log_likelihood(&c.x, &c.dmat, &id, &idf, &c.z, &c.psi).unwrap();
    let full = gaussian_ll(&c.x, &product(&c.dmat, &c.z), &c.psi);
    assert!(
        (masked - full).abs() < 1e-9 * full.abs(),
        "{masked} vs {full}"
    );
}

#[test]
fn relabeling_rows_and_columns_reproduces_identity_value() {
    let c = case(
        vec![
            vec![1.0, 0.8, -0.6, 0.4],
            vec![0.5, -1.2, 0.3, 0.0],
            vec![-0.2, 0.7, 0.9, -0.3],
        ],
        40,
        2,
    );
    let base = masked_log_likelihood(
        &c.x,
        &c.dmat,
        &Permutation::identity(3),
        &Permutation::identity(4),
        &c.z,
        &c.psi,
    )
    .unwrap();
    for (pv, pfv) in [
        ([2, 0, 1], [3, 1, 0, 2]),
        ([1, 2, 0], [0, 2, 1, 3]),
        ([2, 1, 0], [2, 3, 0, 1]),
    ] {
        let (p, pf) = (perm(&pv), perm(&pfv));
        // variable at position a is p[a]; factor at position b is pf[b]
        let mut x = vec![Vec::new(); 3];
        let mut psi = vec![0.0; 3];
        let mut dmat = vec![vec![0.0; 4]; 3];
        let mut z = vec![Vec::new(); 4];
        for a in 0..3 {
            x[pv[a]] = c.x[a].clone();
            psi[pv[a]] = c.psi[a];
            for b in 0..4 {
                dmat[pv[a]][pfv[b]] = c.dmat[a][b];
            }
        }
        for b in 0..4 {
            z[pfv[b]] = c.z[b].clone();
        }
        let v = masked_log_likelihood(&x, &dmat, &p, &pf, &z, &psi).unwrap();
        assert!(
            (v - base).abs() < 1e-9 * base.abs(),
            "{pv:?} {pfv:?}: {v} vs {base}"
        );
    }
}

#[test]
fn two_variable_mask_drops_the_upper_entry() {
    let c = case(vec![vec![1.0, 0.6], vec![-0.4, 0.9]], 30, 3);
    let masked = masked_log_likelihood(
        &c.x,
        &c.dmat,
        &Permutation::identity(2),
        &Permutation::identity(2),
        &c.z,
        &c.psi,
    )
    .unwrap();
    let dense = gaussian_ll(&c.x, &product(&c.dmat, &c.z), &c.psi);
    // by hand: only row 1's mean changes, losing 0.6·z2
    let (x1, z1, z2) = (&c.x[0], &c.z[0], &c.z[1]);
    let p = c.psi[0];
    let change: f64 = (0..x1.len())
        .map(|t| {
            let kept = x1[t] - z1[t];
            let full = kept - 0.6 * z2[t];
            -0.5 * (kept * kept - full * full) / p
        })
        .sum();
    assert!((masked - dense - change).abs() < 1e-9 * dense.abs());
}

#[test]
fn staying_put_has_ratio_one() {
    let mut r = RngStream::new(4, 0);
    let x = laplace_rows(3, 60, &mut r);
    let hp = Hyperparameters::defaults(PriorMode::Factor);
    let mut s = LinearState::new(x, None, 3).unwrap();
    s.initialize(&hp, &mut r).unwrap();
    let p = perm(&[2, 0, 1]);
    let pf = perm(&[1, 2, 0]);
    let mut o = OrderSearch::new(p.clone(), pf.clone()).unwrap();
    o.prepare(&s);
    assert_eq!(o.log_ratio(&p, &pf).0, 0.0);
    assert!(o.try_move(p.clone(), pf.clone(), &mut r));
    assert_eq!(o.row_order(), &p);
}

#[test]
fn flat_likelihood_tally_is_uniform() {
    let mut r = RngStream::new(5, 0);
    let x = laplace_rows(3, 20, &mut r);
    let hp = Hyperparameters::defaults(PriorMode::Factor);
    let mut s = LinearState::new(x, None, 3).unwrap();
    s.initialize(&hp, &mut r).unwrap();
    s.set_psi(vec![1e300; 3]);
    let mut o = OrderSearch::new(Permutation::identity(3), Permutation::identity(3)).unwrap();
    o.prepare(&s);
    let mut tally = PermutationCandidateSet::new();
    let mut accepted = 0;
    let rounds = 60_000;
    for t in 0..rounds {
        // thin so tallied states are close to independent
        let rec = (t % 10 == 0).then_some(&mut tally);
        accepted += o.step(rec, &mut r);
    }
    assert_eq!(accepted, 2 * rounds);
    let all = Permutation::all(3);
    let total = tally.total() as f64;
    let expected = total / all.len() as f64;
    let chi2: f64 = all
        .iter()
        .map(|p| (tally.count(p) as f64 - expected).powi(2) / expected)
        .sum();
    // 5 degrees of freedom, upper 0.1% point
    assert!(chi2 < 20.52, "chi2 = {chi2}");
}

#[test]
fn two_variable_correct_order_dominates_tally() {
    let n = 1000;
    let mut r = RngStream::new(6, 0);
    let e = laplace_rows(2, n, &mut r);
    let x1 = e[0].clone();
    let x2: Vec<f64> = x1
        .iter()
        .zip(&e[1])
        .map(|(a, b)| 0.9 * a + 0.5 * b)
        .collect();
    let data = Dataset::new(vec![x1, x2], None)
        .unwrap()
        .standardize()
        .unwrap();
    let mut hp = Hyperparameters::defaults(PriorMode::Factor);
    hp.n_samples = 2000;
    hp.n_burnin = 500;
    let chain = run_factor_chain(
        &data,
        &hp,
        FactorMode::OrderSearch,
        &mut RngStream::new(6, 1),
    )
    .unwrap();
    let t = &chain.candidates;
    let mass = t.count(&perm(&[0, 1])) as f64 / t.total() as f64;
    assert!(
        mass > 0.8,
        "correct ordering holds {mass:.3} of {}",
        t.total()
    );
}

/// Triangular model over a random relabeling, every weight at least 0.5 in
/// magnitude, Laplace sources. Returns data and the parent sets.
fn strong_triangular(d: usize, n: usize, seed: u64) -> (Dataset, Vec<Vec<usize>>) {
    use rand::Rng;
    let mut r = RngStream::new(seed, 7);
    let order = Permutation::random(d, &mut r);
    let o = order.as_slice();
    let src = laplace_rows(d, n, &mut r);
    let mut x = vec![vec![0.0; n]; d];
    let mut parents = vec![Vec::new(); d];
    for a in 0..d {
        let i = o[a];
        x[i] = src[a].clone();
        for &j in &o[..a] {
            if r.random::<bool>() {
                let s = if r.random::<bool>() { 1.0 } else { -1.0 };
                let w = s * r.random_range(0.5..1.0);
                for t in 0..n {
                    x[i][t] += w * x[j][t];
                }
                parents[i].push(j);
            }
        }
    }
    (
        Dataset::new(x, None).unwrap().standardize().unwrap(),
        parents,
    )
}

#[test]
fn strong_triangular_orderings_reach_the_top_ten() {
    let mut hp = Hyperparameters::defaults(PriorMode::Factor);
    hp.n_samples = 3000;
    hp.n_burnin = 1500;
    let mut hits = 0;
    for seed in 0..50 {
        let (data, parents) = strong_triangular(5, 1000, seed);
        let mut r = RngStream::new(seed, 0x51);
        let chain = run_factor_chain(&data, &hp, FactorMode::OrderSearch, &mut r).unwrap();
        let top = chain.candidates.top_candidates(10).unwrap();
        let ok = top.iter().any(|p| {
            let pos = p.positions();
            (0..5).all(|i| parents[i].iter().all(|&j| pos[j] < pos[i]))
        });
        hits += ok as usize;
    }
    assert!(
        hits >= 45,
        "{hits}/50 seeds with the true ordering in the top 10"
    );
}
