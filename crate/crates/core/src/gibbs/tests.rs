use super::*;
use crate::hyper::PriorMode;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fm() -> Hyperparameters {
    Hyperparameters::defaults(PriorMode::Factor)
}

fn only(f: impl FnOnce(&mut SweepPlan)) -> SweepPlan {
    let mut p = SweepPlan {
        noise: false,
        signals: false,
        loadings: false,
        sparsity: false,
        gp_hyper: false,
        rates: false,
    };
    f(&mut p);
    p
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, s)
}

/// `∫ g(c) h(c) dc / ∫ h(c) dc` on a fine uniform grid.
fn quad_mean(h: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 200_000;
    let dx = (hi - lo) / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=n {
        let c = lo + k as f64 * dx;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let v = h(c);
        num += w * g(c) * v;
        den += w * v;
    }
    num / den
}

/// One observed regressor, one target row.
fn one_by_one(x: Vec<f64>, z: Vec<f64>, kind: EntryKind) -> LinearState {
    let mut s = LinearState::new(vec![x], None, 1).unwrap();
    s.set_observed_row(0, z).unwrap();
    s.set_kind(0, 0, kind);
    s.refresh_residuals();
    s
}

#[test]
fn noise_shape_counts_observations_and_active_loadings() {
    let mut s = LinearState::new(vec![vec![0.0; 100]], None, 5).unwrap();
    for j in 0..5 {
        s.set_kind(0, j, EntryKind::Slab);
        s.set_weight(0, j, 0.0);
    }
    let (shape, rate) = s.noise_posterior(0, &fm());
    assert_eq!(shape, 72.5);
    // zero residual and zero loadings leave the prior rate
    assert_eq!(rate, 1.0);
}

#[test]
fn noise_posterior_matches_quadrature() {
    // one variable, no loadings: ψ | x ∝ IG(ψ; s_s, s_r) N(x | 0, ψ)
    let x = vec![0.4, -0.2, 0.1, 0.3];
    let hp = fm();
    let mut s = LinearState::new(vec![x.clone()], None, 0).unwrap();
    let mut r = rng(1);
    let draws: Vec<f64> = (0..60_000)
        .map(|_| {
            s.update_noise(&hp, &mut r);
            s.psi()[0]
        })
        .collect();
    let ss: f64 = x.iter().map(|v| v * v).sum();
    let n = x.len() as f64;
    let logh = |p: f64| -(hp.s_s + 1.0) * p.ln() - hp.s_r / p - 0.5 * n * p.ln() - 0.5 * ss / p;
    let peak = logh(0.05);
    let exact = quad_mean(|p| (logh(p) - peak).exp(), |p| p, 1e-4, 1.0);
    let (m, _) = mean_var(&draws);
    assert!((m / exact - 1.0).abs() < 0.01, "{m} vs {exact}");
}

#[test]
fn unloaded_signal_draws_from_its_prior() {
    let mut s = LinearState::new(vec![vec![0.0; 1]], None, 1).unwrap();
    s.set_latent_row(0, Signal::Gaussian, false);
    let mut r = rng(2);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| {
            s.update_latent_rows(&mut r);
            s.regressors()[0][0]
        })
        .collect();
    let (m, v) = mean_var(&draws);
    assert!(m.abs() < 0.04, "{m}");
    assert!((v - 1.0).abs() < 0.05, "{v}");
}

#[test]
fn laplace_mixing_at_unit_signal_is_inverse_gaussian_one_one() {
    let mut s = LinearState::new(vec![vec![0.0; 1]], None, 1).unwrap();
    s.set_latent_row(0, Signal::laplace(1.0), false);
    let mut r = rng(3);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| {
            s.f[0][0] = 1.0;
            s.update_mixing_row(0, Signal::laplace(1.0), &mut r);
            1.0 / s.scales()[0][0]
        })
        .collect();
    // IG(μ=1, λ=1): mean 1, variance μ³/λ = 1
    let (m, v) = mean_var(&draws);
    assert!((m - 1.0).abs() < 0.015, "{m}");
    assert!((v - 1.0).abs() < 0.08, "{v}");
}

#[test]
fn signal_posterior_is_conjugate_normal() {
    let mut s = LinearState::new(vec![vec![1.0]], None, 1).unwrap();
    s.set_latent_row(0, Signal::Gaussian, false);
    s.set_kind(0, 0, EntryKind::Fixed);
    s.set_weight(0, 0, 2.0);
    s.set_psi(vec![0.5]);
    s.refresh_residuals();
    let mut r = rng(4);
    let draws: Vec<f64> = (0..50_000)
        .map(|_| {
            s.update_latent_rows(&mut r);
            s.regressors()[0][0]
        })
        .collect();
    // precision 2²/0.5 + 1 = 9, mean (2/0.5)/9
    let (m, v) = mean_var(&draws);
    assert!((m / (4.0 / 9.0) - 1.0).abs() < 0.01, "{m}");
    assert!((v * 9.0 - 1.0).abs() < 0.02, "{v}");
}

#[test]
fn masked_entries_stay_exactly_zero() {
    let mut s = one_by_one(
        vec![1.0, 2.0, -1.0],
        vec![1.0, 2.0, -1.0],
        EntryKind::SpikeSlab,
    );
    let mut r = rng(5);
    let plan = only(|p| {
        p.loadings = true;
        p.noise = true;
    });
    for _ in 0..100 {
        s.sweep(&fm(), &plan, &mut r).unwrap();
        assert_eq!(s.weights()[0][0], 0.0);
    }
    let mut a = one_by_one(vec![1.0, 2.0], vec![1.0, 2.0], EntryKind::Absent);
    for _ in 0..100 {
        a.sweep(&fm(), &SweepPlan::default(), &mut r).unwrap();
        assert_eq!(a.weights()[0][0], 0.0);
    }
}

#[test]
fn slab_variance_shape_is_t_s_plus_half() {
    let hp = fm();
    let mut s = one_by_one(vec![0.0; 3], vec![0.0; 3], EntryKind::Slab);
    let mut r = rng(6);
    let mut engine = Vec::new();
    for _ in 0..50_000 {
        s.f[0] = vec![0.0; 3];
        s.update_loadings(&hp, &mut r);
        let c = s.weights()[0][0];
        engine.push((c, 1.0 / s.tau()[0][0]));
    }
    // E[1/τ | c] = (t_s + ½) / (t_r + c²/2), averaged over the drawn c
    let expected: f64 = engine
        .iter()
        .map(|(c, _)| 2.5 / (1.0 + c * c / 2.0))
        .sum::<f64>()
        / engine.len() as f64;
    let got: f64 = engine.iter().map(|(_, t)| t).sum::<f64>() / engine.len() as f64;
    assert!((got / expected - 1.0).abs() < 0.02, "{got} vs {expected}");
}

#[test]
fn slab_posterior_mean_matches_quadrature() {
    let hp = fm();
    let z = vec![1.0, 0.5, -1.0];
    let x = vec![0.8, 0.1, -0.5];
    let mut s = one_by_one(x.clone(), z.clone(), EntryKind::Slab);
    s.set_psi(vec![1.0]);
    let mut r = rng(7);
    let plan = only(|p| p.loadings = true);
    let mut draws = Vec::with_capacity(200_000);
    for _ in 0..200_000 {
        s.sweep(&hp, &plan, &mut r).unwrap();
        draws.push(s.weights()[0][0]);
    }
    // marginal slab prior is ∝ (t_r + c²/2ψ)^-(t_s+½)
    let h = |c: f64| {
        let ll: f64 = x
            .iter()
            .zip(&z)
            .map(|(xi, zi)| -0.5 * (xi - c * zi).powi(2))
            .sum();
        ll.exp() * (hp.t_r + c * c / 2.0).powf(-(hp.t_s + 0.5))
    };
    let exact = quad_mean(h, |c| c, -15.0, 15.0);
    let (m, _) = mean_var(&draws);
    assert!((m / exact - 1.0).abs() < 0.01, "{m} vs {exact}");
}

#[test]
fn inclusion_odds_without_data_are_prior_odds() {
    let (am, nu) = (0.95, 0.3);
    let lo = LinearState::inclusion_log_odds(am, nu, 1.0, 1.0, 0.0, 0.0);
    let p = 1.0 / (1.0 + (-lo).exp());
    assert!((p - am * nu).abs() < 1e-12);
}

#[test]
fn active_entry_eta_is_beta_plus_one() {
    let hp = fm();
    let z: Vec<f64> = (0..50).map(|t| (t as f64 * 0.37).sin()).collect();
    let x: Vec<f64> = z.iter().map(|v| 3.0 * v).collect();
    let mut s = one_by_one(x, z, EntryKind::SpikeSlab);
    s.set_psi(vec![0.01]);
    let mut r = rng(8);
    let plan = only(|p| {
        p.loadings = true;
        p.sparsity = true;
    });
    let mut eta = Vec::new();
    for _ in 0..30_000 {
        s.sweep(&hp, &plan, &mut r).unwrap();
        assert!(s.mask_q()[0][0]);
        eta.push(s.eta()[0][0]);
    }
    let (a, b) = (
        hp.alpha_p * hp.alpha_m + 1.0,
        hp.alpha_p * (1.0 - hp.alpha_m),
    );
    let (m, v) = mean_var(&eta);
    assert!((m - a / (a + b)).abs() < 0.003, "{m}");
    let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
    assert!((v / var - 1.0).abs() < 0.05, "{v} vs {var}");
}

#[test]
fn inclusion_frequency_matches_two_state_oracle() {
    let hp = fm();
    let z = vec![1.0, 0.5, -1.0, 0.2];
    let x = vec![0.5, 0.4, -0.6, -0.1];
    let mut s = one_by_one(x.clone(), z.clone(), EntryKind::SpikeSlab);
    s.set_psi(vec![1.0]);
    let mut r = rng(9);
    s.initialize(&hp, &mut r).unwrap();
    s.set_psi(vec![1.0]);
    let plan = only(|p| {
        p.loadings = true;
        p.sparsity = true;
    });
    let sweeps = 300_000;
    let mut on = 0usize;
    for _ in 0..sweeps {
        s.sweep(&hp, &plan, &mut r).unwrap();
        on += s.mask_q()[0][0] as usize;
    }
    let freq = on as f64 / sweeps as f64;
    // with one entry per column, ν integrates out to a prior of α_m β_m
    let prior = hp.alpha_m * hp.beta_m;
    let ll = |c: f64| -> f64 {
        x.iter()
            .zip(&z)
            .map(|(a, b)| -0.5 * (a - c * b).powi(2))
            .sum()
    };
    // normalized marginal slab density: Student-t with 2t_s dof, scale² t_r/t_s
    let nu_t = 2.0 * hp.t_s;
    let sc = (hp.t_r / hp.t_s).sqrt();
    let tdens = |c: f64| {
        let u = c / sc;
        let lg = statrs::function::gamma::ln_gamma;
        (lg((nu_t + 1.0) / 2.0)
            - lg(nu_t / 2.0)
            - 0.5 * (nu_t * std::f64::consts::PI).ln()
            - sc.ln()
            - (nu_t + 1.0) / 2.0 * (1.0 + u * u / nu_t).ln())
        .exp()
    };
    let (lo, hi, n) = (-20.0, 20.0, 400_000);
    let dx = (hi - lo) / n as f64;
    let l1: f64 = (0..=n)
        .map(|k| lo + k as f64 * dx)
        .map(|c| ll(c).exp() * tdens(c))
        .sum::<f64>()
        * dx;
    let l0 = ll(0.0).exp();
    let p = prior * l1 / (prior * l1 + (1.0 - prior) * l0);
    assert!(p > 0.2 && p < 0.9, "oracle not informative: {p}");
    assert!((freq - p).abs() < 0.02, "{freq} vs {p}");
}

#[test]
fn joint_row_draw_matches_bivariate_posterior() {
    // two nearly collinear regressors; fixed τ and ψ give a Gaussian oracle
    let z1 = vec![1.0, -0.5, 2.0, 0.3, -1.2];
    let z2: Vec<f64> = z1
        .iter()
        .enumerate()
        .map(|(t, v)| 0.9 * v + 0.1 * t as f64)
        .collect();
    let x = vec![0.8, -0.1, 1.9, 0.6, -0.7];
    let mut s = LinearState::new(vec![x.clone()], None, 2).unwrap();
    s.set_observed_row(0, z1.clone()).unwrap();
    s.set_observed_row(1, z2.clone()).unwrap();
    s.set_kind(0, 0, EntryKind::Slab);
    s.set_kind(0, 1, EntryKind::Slab);
    s.set_psi(vec![0.3]);
    s.refresh_residuals();
    let (t1, t2) = (2.0, 0.5);
    let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let g = [
        [dotp(&z1, &z1) + 1.0 / t1, dotp(&z1, &z2)],
        [dotp(&z1, &z2), dotp(&z2, &z2) + 1.0 / t2],
    ];
    let h = [dotp(&z1, &x), dotp(&z2, &x)];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let inv = [
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ];
    let mean = [
        inv[0][0] * h[0] + inv[0][1] * h[1],
        inv[1][0] * h[0] + inv[1][1] * h[1],
    ];
    let hp = fm();
    let mut r = rng(12);
    let reps = 100_000;
    let mut w = vec![[0.0; 2]; reps];
    for draw in w.iter_mut() {
        s.set_tau(0, 0, t1);
        s.set_tau(0, 1, t2);
        s.update_loadings(&hp, &mut r);
        *draw = [s.weights()[0][0], s.weights()[0][1]];
    }
    for a in 0..2 {
        let (m, _) = mean_var(&w.iter().map(|v| v[a]).collect::<Vec<_>>());
        assert!((m - mean[a]).abs() < 0.01, "{a}: {m} vs {}", mean[a]);
        for b in 0..2 {
            let c = w
                .iter()
                .map(|v| (v[a] - mean[a]) * (v[b] - mean[b]))
                .sum::<f64>()
                / reps as f64;
            let want = 0.3 * inv[a][b];
            assert!(
                (c - want).abs() < 0.02 * want.abs().max(0.05),
                "{a}{b}: {c} vs {want}"
            );
        }
    }
}

#[test]
fn spike_exactness_over_long_runs() {
    let hp = fm();
    let mut r = rng(10);
    let (d, k, n) = (4, 3, 30);
    let x: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..n).map(|_| normal(&mut r)).collect())
        .collect();
    let mut s = LinearState::new(x, None, k).unwrap();
    for j in 0..k {
        s.set_latent_row(j, Signal::laplace(hp.lambda), false);
        for i in 0..d {
            s.set_kind(i, j, EntryKind::SpikeSlab);
        }
    }
    s.initialize(&hp, &mut r).unwrap();
    for _ in 0..300 {
        s.sweep(&hp, &SweepPlan::default(), &mut r).unwrap();
        assert!(s.spike_consistent());
        for i in 0..d {
            for j in 0..k {
                assert_eq!(s.weights()[i][j] == 0.0, !s.mask_q()[i][j]);
            }
        }
    }
}

#[test]
fn noise_never_collapses_on_exact_data() {
    let mut hp = fm();
    hp.s_s = 20.0;
    hp.s_r = 1.0;
    let mut s = LinearState::new(vec![vec![0.0; 500]; 2], None, 1).unwrap();
    s.set_latent_row(0, Signal::laplace(hp.lambda), false);
    s.set_kind(0, 0, EntryKind::SpikeSlab);
    s.set_kind(1, 0, EntryKind::SpikeSlab);
    let mut r = rng(11);
    s.initialize(&hp, &mut r).unwrap();
    for _ in 0..200 {
        s.sweep(&hp, &SweepPlan::default(), &mut r).unwrap();
        assert!(s.psi().iter().all(|&p| p > 1e-6));
    }
}

#[test]
fn missing_targets_do_not_move_the_fit() {
    // a wild value behind the mask must not leak into the residuals
    let mask = vec![vec![true, true, false]];
    let s = LinearState::new(vec![vec![1.0, 2.0, 1e9]], Some(&mask), 1).unwrap();
    assert_eq!(s.rss(0), 5.0);
    assert_eq!(s.n_obs[0], 2);
}

#[test]
fn same_seed_same_chain() {
    let hp = fm();
    let run = || {
        let mut r = rng(12);
        let x: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..20).map(|_| normal(&mut r)).collect())
            .collect();
        let mut s = LinearState::new(x, None, 2).unwrap();
        for j in 0..2 {
            s.set_latent_row(j, Signal::laplace(hp.lambda), false);
            for i in 0..3 {
                s.set_kind(i, j, EntryKind::SpikeSlab);
            }
        }
        s.initialize(&hp, &mut r).unwrap();
        for _ in 0..50 {
            s.sweep(&hp, &SweepPlan::default(), &mut r).unwrap();
        }
        (s.weights().to_vec(), s.psi().to_vec())
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn log_odds_match_direct_ratio(
        am in 0.05f64..0.95,
        nu in 0.05f64..0.95,
        psi in 0.1f64..3.0,
        tau in 0.1f64..3.0,
        zz in 0.0f64..20.0,
        b in -3.0f64..3.0,
    ) {
        let lo = LinearState::inclusion_log_odds(am, nu, psi, tau, zz, b);
        let a = zz + 1.0 / tau;
        let prior = am * nu;
        let direct = prior / (1.0 - prior) * (1.0 / (tau * a)).sqrt() * (b * b / (2.0 * psi * a)).exp();
        prop_assert!((lo.exp() - direct).abs() <= 1e-10 * direct.max(1.0));
    }
}
