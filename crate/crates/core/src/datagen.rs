//! Synthetic ground-truth generators.
//!
//! Every generator is a pure function of its parameters and seed. DAG
//! adjacency uses `r[i][j] == true` for `j → i`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distributions::{
    normal, random_gg_shape, sample_generalized_gaussian, sample_heavy_tailed, HeavyTailed,
};
use crate::error::{Result, SlimError};
use crate::permutation::Permutation;
use crate::rng::RngStream;

const STREAM_SUITE: u64 = 0x5375_6974;
const STREAM_WEIGHTS: u64 = 0x5765_6967;
const STREAM_TOY: u64 = 0x546f_7921;
const STREAM_NONLINEAR: u64 = 0x4e6f_6e6c;
const STREAM_LATENT: u64 = 0x4c61_7465;
const STREAM_FACTOR: u64 = 0x4661_6374;

/// Observation noise of factor truths as a fraction of each variable's
/// signal variance; the prior mean `s_r/s_s` at the defaults.
pub const FACTOR_NOISE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    GeneralizedGaussian { shape: f64 },
    Laplace,
    Cauchy,
}

impl SourceKind {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SourceKind::GeneralizedGaussian { shape } => {
                sample_generalized_gaussian(shape, rng).expect("shape drawn in range")
            }
            SourceKind::Laplace => sample_heavy_tailed(
                HeavyTailed::Laplace {
                    lambda: 2f64.sqrt(),
                },
                rng,
            )
            .expect("valid Laplace"),
            SourceKind::Cauchy => {
                sample_heavy_tailed(HeavyTailed::CAUCHY, rng).expect("valid Cauchy")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    Dag,
    Factor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub kind: TruthKind,
    pub d: usize,
    pub m: usize,
    pub r: Vec<Vec<bool>>,
    pub b: Vec<Vec<f64>>,
    pub c_driving: Vec<f64>,
    /// `d × m`.
    pub c_latent: Vec<Vec<f64>>,
    /// Square mixing matrix of a factor-model truth.
    pub mixing: Option<Vec<Vec<f64>>>,
    /// A generating order, roots first.
    pub ordering: Permutation,
    /// Driving sources first, then latents.
    pub source_kinds: Vec<SourceKind>,
    pub nonlinear: bool,
    /// Variance of the Gaussian observation noise per variable; empty when
    /// the data are noiseless.
    #[serde(default)]
    pub noise_var: Vec<f64>,
}

impl GroundTruthModel {
    pub fn edge_count(&self) -> usize {
        self.r.iter().flatten().filter(|&&e| e).count()
    }

    /// Whether `p` puts every parent before its children.
    pub fn is_consistent_ordering(&self, p: &Permutation) -> bool {
        if p.len() != self.d {
            return false;
        }
        let pos = p.positions();
        (0..self.d).all(|i| (0..self.d).all(|j| !self.r[i][j] || pos[j] < pos[i]))
    }

    /// Every ordering consistent with the graph (small `d` only).
    pub fn valid_orderings(&self) -> Vec<Permutation> {
        Permutation::all(self.d)
            .into_iter()
            .filter(|p| self.is_consistent_ordering(p))
            .collect()
    }

    /// Rebuild `X` from the sources in generating order (linear truths).
    pub fn regenerate(&self, sources: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if self.nonlinear {
            return Err(SlimError::InvalidArgument(
                "non-linear truths do not regenerate linearly".into(),
            ));
        }
        let n = sources.first().map_or(0, |r| r.len());
        if let Some(mix) = &self.mixing {
            return Ok((0..self.d)
                .map(|i| {
                    (0..n)
                        .map(|t| (0..mix[i].len()).map(|k| mix[i][k] * sources[k][t]).sum())
                        .collect()
                })
                .collect());
        }
        if sources.len() != self.d + self.m {
            return Err(SlimError::Dimension(
                "one source row per driving signal and latent".into(),
            ));
        }
        let mut x = vec![vec![0.0; n]; self.d];
        for &i in self.ordering.as_slice() {
            for t in 0..n {
                let mut v = self.c_driving[i] * sources[i][t];
                for l in 0..self.m {
                    v += self.c_latent[i][l] * sources[self.d + l][t];
                }
                for j in 0..self.d {
                    if self.r[i][j] {
                        v += self.b[i][j] * x[j][t];
                    }
                }
                x[i][t] = v;
            }
        }
        Ok(x)
    }
}

/// A dataset, its truth and the sources that produced it.
#[derive(Clone, Debug)]
pub struct Generated {
    pub data: Dataset,
    pub truth: GroundTruthModel,
    pub sources: Vec<Vec<f64>>,
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if normal(rng) >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `sign(N(0,1)) + N(0, 0.2)`, the second argument a variance.
fn signed_weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    sign(rng) + 0.2f64.sqrt() * normal(rng)
}

/// Topological order of `r`, or `None` when it has a cycle.
pub fn topological_order(r: &[Vec<bool>]) -> Option<Vec<usize>> {
    let d = r.len();
    let mut indeg: Vec<usize> = (0..d)
        .map(|i| (0..d).filter(|&j| r[i][j]).count())
        .collect();
    let mut ready: Vec<usize> = (0..d).filter(|&i| indeg[i] == 0).collect();
    ready.reverse();
    let mut out = Vec::with_capacity(d);
    while let Some(j) = ready.pop() {
        out.push(j);
        for i in 0..d {
            if r[i][j] {
                indeg[i] -= 1;
                if indeg[i] == 0 {
                    ready.insert(0, i);
                }
            }
        }
    }
    (out.len() == d).then_some(out)
}

/// Weights `sign(N(0,1)) + N(0, 0.2)` on the support of `r`.
pub fn weights_from_structure(r: &[Vec<bool>], seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = r.len();
    if r.iter().any(|row| row.len() != d) {
        return Err(SlimError::Dimension("adjacency must be square".into()));
    }
    if (0..d).any(|i| r[i][i]) || topological_order(r).is_none() {
        return Err(SlimError::InvalidArgument("adjacency has a cycle".into()));
    }
    let mut rng = RngStream::new(seed, STREAM_WEIGHTS);
    Ok(r.iter()
        .map(|row| {
            row.iter()
                .map(|&e| if e { signed_weight(&mut rng) } else { 0.0 })
                .collect()
        })
        .collect())
}

/// Lower-triangular support in causal index order: all pairs, or a
/// sparsity level from `{10%, …, 80%}` of them removed.
fn random_support<R: Rng + ?Sized>(d: usize, dense: bool, rng: &mut R) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; d]; d];
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    for &(i, j) in &pairs {
        r[i][j] = true;
    }
    if !dense {
        let level = rng.random_range(1..=8) as f64 / 10.0;
        let drop = (level * pairs.len() as f64).round() as usize;
        for k in sample(rng, pairs.len(), drop) {
            let (i, j) = pairs[k];
            r[i][j] = false;
        }
    }
    r
}

/// Relabel variables: causal index `c` becomes variable `perm[c]`.
fn relabel(
    perm: &[usize],
    x: Vec<Vec<f64>>,
    r: Vec<Vec<bool>>,
    b: Vec<Vec<f64>>,
    c_latent: Vec<Vec<f64>>,
) -> (Vec<Vec<f64>>, Vec<Vec<bool>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = perm.len();
    let mut x2 = vec![Vec::new(); d];
    let mut r2 = vec![vec![false; d]; d];
    let mut b2 = vec![vec![0.0; d]; d];
    let mut c2 = vec![Vec::new(); d];
    for (c, row) in x.into_iter().enumerate() {
        x2[perm[c]] = row;
    }
    for i in 0..d {
        for j in 0..d {
            r2[perm[i]][perm[j]] = r[i][j];
            b2[perm[i]][perm[j]] = b[i][j];
        }
    }
    for (c, row) in c_latent.into_iter().enumerate() {
        c2[perm[c]] = row;
    }
    (x2, r2, b2, c2)
}

fn names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x{i}")).collect()
}

/// LiNGAM-style suite: half fully connected, half at a decile sparsity
/// level; unit-variance generalized Gaussian sources with random shapes;
/// variables relabeled at random to hide the order.
pub fn generate_lingam_suite(d: usize, n: usize, seed: u64) -> Result<(Dataset, GroundTruthModel)> {
    let g = generate_lingam_suite_full(d, n, seed)?;
    Ok((g.data, g.truth))
}

pub fn generate_lingam_suite_full(d: usize, n: usize, seed: u64) -> Result<Generated> {
    if d < 2 || n < 2 {
        return Err(SlimError::InvalidArgument("need d ≥ 2 and N ≥ 2".into()));
    }
    let mut rng = RngStream::new(seed, STREAM_SUITE);
    let dense = rng.random_bool(0.5);
    let r = random_support(d, dense, &mut rng);
    // weights ±U[0.5, 1.5], each node's parent term scaled to unit variance
    let mut b = vec![vec![0.0; d]; d];
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..i {
            if r[i][j] {
                b[i][j] = sign(&mut rng) * rng.random_range(0.5..1.5);
            }
        }
        let v: f64 = (0..i)
            .map(|a| (0..i).map(|c| b[i][a] * cov[a][c] * b[i][c]).sum::<f64>())
            .sum();
        if v > 0.0 {
            let s = v.sqrt();
            b[i][..i].iter_mut().for_each(|w| *w /= s);
        }
        for j in 0..i {
            cov[i][j] = (0..i).map(|a| b[i][a] * cov[a][j]).sum();
            cov[j][i] = cov[i][j];
        }
        cov[i][i] = 1.0
            + (0..i)
                .map(|a| (0..i).map(|c| b[i][a] * cov[a][c] * b[i][c]).sum::<f64>())
                .sum::<f64>();
    }
    let kinds: Vec<SourceKind> = (0..d)
        .map(|_| SourceKind::GeneralizedGaussian {
            shape: random_gg_shape(&mut rng),
        })
        .collect();
    let z: Vec<Vec<f64>> = kinds
        .iter()
        .map(|k| (0..n).map(|_| k.draw(&mut rng)).collect())
        .collect();
    let mut x = vec![vec![0.0; n]; d];
    for i in 0..d {
        for t in 0..n {
            x[i][t] = z[i][t] + (0..i).map(|j| b[i][j] * x[j][t]).sum::<f64>();
        }
    }
    let perm = Permutation::random(d, &mut rng);
    let p = perm.as_slice().to_vec();
    let (x, r, b, _) = relabel(&p, x, r, b, vec![Vec::new(); d]);
    let mut sources = vec![Vec::new(); d];
    let mut kinds2 = kinds.clone();
    for c in 0..d {
        sources[p[c]] = z[c].clone();
        kinds2[p[c]] = kinds[c];
    }
    let truth = GroundTruthModel {
        kind: TruthKind::Dag,
        d,
        m: 0,
        r,
        b,
        c_driving: vec![1.0; d],
        c_latent: vec![Vec::new(); d],
        mixing: None,
        ordering: perm,
        source_kinds: kinds2,
        nonlinear: false,
        noise_var: Vec::new(),
    };
    Ok(Generated {
        data: Dataset::new(x, Some(names(d)))?,
        truth,
        sources,
    })
}

/// The two-variable latent toy: `x1 = z1 + zL`, `x2 = x1 + z2 − zL`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyVariant {
    /// Every signal Laplace.
    U,
    /// Driving Laplace, latent Cauchy.
    I,
}

pub fn generate_toy_latent_pair(
    variant: ToyVariant,
    n: usize,
    seed: u64,
) -> Result<(Dataset, GroundTruthModel)> {
    if n < 2 {
        return Err(SlimError::InvalidArgument("need N ≥ 2".into()));
    }
    let mut rng = RngStream::new(seed, STREAM_TOY);
    let latent = match variant {
        ToyVariant::U => SourceKind::Laplace,
        ToyVariant::I => SourceKind::Cauchy,
    };
    let kinds = vec![SourceKind::Laplace, SourceKind::Laplace, latent];
    let z: Vec<Vec<f64>> = kinds
        .iter()
        .map(|k| (0..n).map(|_| k.draw(&mut rng)).collect())
        .collect();
    let x1: Vec<f64> = (0..n).map(|t| z[0][t] + z[2][t]).collect();
    let x2: Vec<f64> = (0..n).map(|t| x1[t] + z[1][t] - z[2][t]).collect();
    let truth = GroundTruthModel {
        kind: TruthKind::Dag,
        d: 2,
        m: 1,
        r: vec![vec![false, false], vec![true, false]],
        b: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        c_driving: vec![1.0, 1.0],
        c_latent: vec![vec![1.0], vec![-1.0]],
        mixing: None,
        ordering: Permutation::identity(2),
        source_kinds: kinds,
        nonlinear: false,
        noise_var: Vec::new(),
    };
    Ok((Dataset::new(vec![x1, x2], Some(names(2)))?, truth))
}

/// `x2 = x1² + z2`, `x3 = 4√|x1| + z3`, `x4 = 2 sin x2 + 2 sin x3 + z4`,
/// with generalized Gaussian sources of one random heavy-tailed shape.
pub fn generate_nonlinear_toy(n: usize, seed: u64) -> Result<(Dataset, GroundTruthModel)> {
    let mut rng = RngStream::new(seed, STREAM_NONLINEAR);
    let shape = rng.random_range(0.8..1.6);
    let z: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            (0..n)
                .map(|_| sample_generalized_gaussian(shape, &mut rng))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    Ok((nonlinear_toy_from_sources(&z)?, nonlinear_toy_truth(shape)))
}

pub fn nonlinear_toy_from_sources(z: &[Vec<f64>]) -> Result<Dataset> {
    if z.len() != 4 {
        return Err(SlimError::Dimension(
            "the non-linear toy has four sources".into(),
        ));
    }
    let n = z[0].len();
    let x1 = z[0].clone();
    let x2: Vec<f64> = (0..n).map(|t| x1[t] * x1[t] + z[1][t]).collect();
    let x3: Vec<f64> = (0..n).map(|t| 4.0 * x1[t].abs().sqrt() + z[2][t]).collect();
    let x4: Vec<f64> = (0..n)
        .map(|t| 2.0 * x2[t].sin() + 2.0 * x3[t].sin() + z[3][t])
        .collect();
    Dataset::new(vec![x1, x2, x3, x4], Some(names(4)))
}

fn nonlinear_toy_truth(shape: f64) -> GroundTruthModel {
    let mut r = vec![vec![false; 4]; 4];
    r[1][0] = true;
    r[2][0] = true;
    r[3][1] = true;
    r[3][2] = true;
    let b = r
        .iter()
        .map(|row| row.iter().map(|&e| e as u8 as f64).collect())
        .collect();
    GroundTruthModel {
        kind: TruthKind::Dag,
        d: 4,
        m: 0,
        r,
        b,
        c_driving: vec![1.0; 4],
        c_latent: vec![Vec::new(); 4],
        mixing: None,
        ordering: Permutation::identity(4),
        source_kinds: vec![SourceKind::GeneralizedGaussian { shape }; 4],
        nonlinear: true,
        noise_var: Vec::new(),
    }
}

/// Sparse DAG with `m` latents, each touching at least two variables;
/// identity driving weights; generalized Gaussian sources throughout.
pub fn generate_latent_dag(d: usize, m: usize, n: usize, seed: u64) -> Result<Generated> {
    if d < 2 || n < 2 {
        return Err(SlimError::InvalidArgument("need d ≥ 2 and N ≥ 2".into()));
    }
    let mut rng = RngStream::new(seed, STREAM_LATENT);
    let r = random_support(d, false, &mut rng);
    let b = weights_from_structure(&r, rng.random())?;
    let mut c_latent = vec![vec![0.0; m]; d];
    for l in 0..m {
        let size = rng.random_range(2..=d);
        for i in sample(&mut rng, d, size) {
            c_latent[i][l] = signed_weight(&mut rng);
        }
    }
    let kinds: Vec<SourceKind> = (0..d + m)
        .map(|_| SourceKind::GeneralizedGaussian {
            shape: random_gg_shape(&mut rng),
        })
        .collect();
    let z: Vec<Vec<f64>> = kinds
        .iter()
        .map(|k| (0..n).map(|_| k.draw(&mut rng)).collect())
        .collect();
    let mut x = vec![vec![0.0; n]; d];
    for i in 0..d {
        for t in 0..n {
            let mut v = z[i][t] + (0..i).map(|j| b[i][j] * x[j][t]).sum::<f64>();
            for l in 0..m {
                v += c_latent[i][l] * z[d + l][t];
            }
            x[i][t] = v;
        }
    }
    let perm = Permutation::random(d, &mut rng);
    let p = perm.as_slice().to_vec();
    let (x, r, b, c_latent) = relabel(&p, x, r, b, c_latent);
    let mut sources = z.clone();
    let mut kinds2 = kinds.clone();
    for c in 0..d {
        sources[p[c]] = z[c].clone();
        kinds2[p[c]] = kinds[c];
    }
    let truth = GroundTruthModel {
        kind: TruthKind::Dag,
        d,
        m,
        r,
        b,
        c_driving: vec![1.0; d],
        c_latent,
        mixing: None,
        ordering: perm,
        source_kinds: kinds2,
        nonlinear: false,
        noise_var: Vec::new(),
    };
    Ok(Generated {
        data: Dataset::new(x, Some(names(d)))?,
        truth,
        sources,
    })
}

/// Whether some row and column permutation makes `support` lower
/// triangular (diagonal included), by brute force.
pub fn is_triangularizable(support: &[Vec<bool>]) -> bool {
    let d = support.len();
    let perms = Permutation::all(d);
    perms.iter().any(|p| {
        perms.iter().any(|pf| {
            (0..d).all(|a| (a + 1..d).all(|c| !support[p.as_slice()[a]][pf.as_slice()[c]]))
        })
    })
}

/// Square sparse mixing matrix that admits no DAG representation, with
/// generalized Gaussian sources and Gaussian observation noise of
/// [`FACTOR_NOISE`] times the signal variance.
pub fn generate_factor_truth(d: usize, n: usize, seed: u64) -> Result<Generated> {
    if !(2..=7).contains(&d) {
        return Err(SlimError::InvalidArgument(
            "factor truths are brute-force checked; need 2 ≤ d ≤ 7".into(),
        ));
    }
    let mut rng = RngStream::new(seed, STREAM_FACTOR);
    let support = loop {
        let s: Vec<Vec<bool>> = (0..d)
            .map(|_| (0..d).map(|_| rng.random_bool(0.5)).collect())
            .collect();
        let rows_ok = s.iter().all(|r| r.iter().any(|&v| v));
        let cols_ok = (0..d).all(|j| s.iter().any(|r| r[j]));
        if rows_ok && cols_ok && !is_triangularizable(&s) {
            break s;
        }
    };
    let mix: Vec<Vec<f64>> = support
        .iter()
        .map(|r| {
            r.iter()
                .map(|&e| if e { signed_weight(&mut rng) } else { 0.0 })
                .collect()
        })
        .collect();
    let kinds: Vec<SourceKind> = (0..d)
        .map(|_| SourceKind::GeneralizedGaussian {
            shape: random_gg_shape(&mut rng),
        })
        .collect();
    let z: Vec<Vec<f64>> = kinds
        .iter()
        .map(|k| (0..n).map(|_| k.draw(&mut rng)).collect())
        .collect();
    let mut x: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..n)
                .map(|t| (0..d).map(|k| mix[i][k] * z[k][t]).sum())
                .collect()
        })
        .collect();
    // the model's noise: without it a nearly singular D leaves a direction
    // of almost no variance, which the ψ prior rules out
    let noise_var: Vec<f64> = x.iter().map(|row| FACTOR_NOISE * variance(row)).collect();
    for (row, v) in x.iter_mut().zip(&noise_var) {
        let sd = v.sqrt();
        for val in row.iter_mut() {
            *val += sd * normal(&mut rng);
        }
    }
    let truth = GroundTruthModel {
        kind: TruthKind::Factor,
        d,
        m: 0,
        r: vec![vec![false; d]; d],
        b: vec![vec![0.0; d]; d],
        c_driving: vec![0.0; d],
        c_latent: vec![Vec::new(); d],
        mixing: Some(mix),
        ordering: Permutation::identity(d),
        source_kinds: kinds,
        nonlinear: false,
        noise_var,
    };
    Ok(Generated {
        data: Dataset::new(x, Some(names(d)))?,
        truth,
        sources: z,
    })
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
}

/// Textual generator spec such as `lingam-suite d=5 N=500`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    LingamSuite { d: usize, n: usize },
    ToyLatent { variant: ToyVariant, n: usize },
    NonlinearToy { n: usize },
    LatentDag { d: usize, m: usize, n: usize },
    Factor { d: usize, n: usize },
}

impl GeneratorSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let name = it
            .next()
            .ok_or_else(|| SlimError::InvalidArgument("empty generator spec".into()))?;
        let mut d = None;
        let mut n = None;
        let mut m = None;
        let mut variant = None;
        for kv in it {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                SlimError::InvalidArgument(format!("expected key=value, got {kv}"))
            })?;
            let num = || {
                v.parse::<usize>().map_err(|_| {
                    SlimError::InvalidArgument(format!(
                        "{k} must be a non-negative integer, got {v}"
                    ))
                })
            };
            match k {
                "d" => d = Some(num()?),
                "N" | "n" => n = Some(num()?),
                "m" => m = Some(num()?),
                "variant" => {
                    variant = Some(match v {
                        "u" => ToyVariant::U,
                        "i" => ToyVariant::I,
                        _ => {
                            return Err(SlimError::InvalidArgument(format!(
                                "toy variant must be u or i, got {v}"
                            )))
                        }
                    })
                }
                _ => {
                    return Err(SlimError::InvalidArgument(format!(
                        "unknown generator key {k}"
                    )))
                }
            }
        }
        let need = |o: Option<usize>, k: &str| {
            o.ok_or_else(|| SlimError::InvalidArgument(format!("generator needs {k}=")))
        };
        Ok(match name {
            "lingam-suite" => GeneratorSpec::LingamSuite {
                d: need(d, "d")?,
                n: need(n, "N")?,
            },
            "toy-latent" => GeneratorSpec::ToyLatent {
                variant: variant.unwrap_or(ToyVariant::I),
                n: n.unwrap_or(500),
            },
            "nonlinear-toy" => GeneratorSpec::NonlinearToy {
                n: n.unwrap_or(100),
            },
            "latent-dag" => GeneratorSpec::LatentDag {
                d: need(d, "d")?,
                m: m.unwrap_or(1),
                n: need(n, "N")?,
            },
            "factor" => GeneratorSpec::Factor {
                d: need(d, "d")?,
                n: need(n, "N")?,
            },
            _ => {
                return Err(SlimError::InvalidArgument(format!(
                    "unknown generator {name}"
                )))
            }
        })
    }

    pub fn generate(&self, seed: u64) -> Result<(Dataset, GroundTruthModel)> {
        match *self {
            GeneratorSpec::LingamSuite { d, n } => generate_lingam_suite(d, n, seed),
            GeneratorSpec::ToyLatent { variant, n } => generate_toy_latent_pair(variant, n, seed),
            GeneratorSpec::NonlinearToy { n } => generate_nonlinear_toy(n, seed),
            GeneratorSpec::LatentDag { d, m, n } => {
                generate_latent_dag(d, m, n, seed).map(|g| (g.data, g.truth))
            }
            GeneratorSpec::Factor { d, n } => {
                generate_factor_truth(d, n, seed).map(|g| (g.data, g.truth))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::implied_mixing;

    #[test]
    fn dense_draw_has_all_edges() {
        let dense = (0..40)
            .map(|s| generate_lingam_suite(5, 50, s).unwrap().1)
            .find(|t| t.edge_count() == 10)
            .expect("some dense draw in 40 seeds");
        assert_eq!(dense.valid_orderings().len(), 1);
    }

    #[test]
    fn about_half_dense() {
        // every sparse level drops at least one of the 6 pairs at d = 4
        let dense = (0..1000)
            .filter(|&s| generate_lingam_suite(4, 2, s).unwrap().1.edge_count() == 6)
            .count() as f64;
        // binomial 3σ band around 500
        assert!((dense - 500.0).abs() < 3.0 * 250f64.sqrt(), "{dense}");
    }

    #[test]
    fn sources_have_unit_variance() {
        // one row at shape 0.5 has kurtosis near 25, so a single N = 2000
        // row varies by about 0.1; pool rows over ten datasets instead
        let mut vars = Vec::new();
        for seed in 0..10 {
            let g = generate_lingam_suite_full(5, 2000, seed).unwrap();
            for z in &g.sources {
                let m = z.iter().sum::<f64>() / z.len() as f64;
                vars.push(z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (z.len() - 1) as f64);
            }
        }
        let v = vars.iter().sum::<f64>() / vars.len() as f64;
        assert!((v - 1.0).abs() < 0.05, "{v}");
        assert!(vars.iter().all(|v| (v - 1.0).abs() < 0.5));
    }

    #[test]
    fn regeneration_reproduces_data() {
        for seed in 0..5 {
            let g = generate_lingam_suite_full(5, 100, seed).unwrap();
            let x = g.truth.regenerate(&g.sources).unwrap();
            for (a, b) in x.iter().zip(g.data.values()) {
                for (u, v) in a.iter().zip(b) {
                    assert!((u - v).abs() < 1e-12);
                }
            }
            assert!(g.truth.is_consistent_ordering(&g.truth.ordering));
            let l = generate_latent_dag(5, 1, 50, seed).unwrap();
            let x = l.truth.regenerate(&l.sources).unwrap();
            assert!((x[2][7] - l.data.values()[2][7]).abs() < 1e-12);
            assert!(l.truth.c_latent.iter().filter(|r| r[0] != 0.0).count() >= 2);
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_lingam_suite(5, 30, 9).unwrap();
        let b = generate_lingam_suite(5, 30, 9).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn weights_keep_support() {
        let mut r = vec![vec![false; 3]; 3];
        r[1][0] = true;
        r[2][1] = true;
        let b = weights_from_structure(&r, 1).unwrap();
        assert_eq!(b[0], vec![0.0; 3]);
        assert_eq!(b[2][0], 0.0);
        assert!(b[1][0] != 0.0);
        r[0][2] = true;
        assert!(weights_from_structure(&r, 1).is_err());
    }

    #[test]
    fn weight_magnitude_and_sign_balance() {
        let d = 100;
        let r: Vec<Vec<bool>> = (0..d).map(|i| (0..d).map(|j| j < i).collect()).collect();
        let b = weights_from_structure(&r, 5).unwrap();
        let w: Vec<f64> = (0..d).flat_map(|i| b[i][..i].to_vec()).collect();
        let mean_abs = w.iter().map(|v| v.abs()).sum::<f64>() / w.len() as f64;
        assert!((mean_abs - 1.0).abs() < 0.02, "{mean_abs}");
        let pos = w.iter().filter(|&&v| v > 0.0).count() as f64;
        let n = w.len() as f64;
        assert!((pos - n / 2.0).abs() < 3.0 * (n / 4.0).sqrt());
    }

    #[test]
    fn toy_pair() {
        let (data, t) = generate_toy_latent_pair(ToyVariant::I, 200, 1).unwrap();
        assert_eq!(data.n(), 200);
        assert!(data.values().iter().flatten().all(|v| v.is_finite()));
        assert_eq!(
            t.source_kinds,
            vec![SourceKind::Laplace, SourceKind::Laplace, SourceKind::Cauchy]
        );
        // graph (b) and its latent-free equivalent (a) differ by a column swap
        let c = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, -1.0]];
        let mix = implied_mixing(&t.b, &c).unwrap();
        assert_eq!(mix, vec![vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]);
        let swapped: Vec<Vec<f64>> = mix.iter().map(|r| vec![r[2], r[1], r[0]]).collect();
        assert_eq!(swapped, vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]);
    }

    #[test]
    fn nonlinear_toy() {
        let (data, t) = generate_nonlinear_toy(100, 1).unwrap();
        assert_eq!(data.n(), 100);
        let valid: Vec<Vec<usize>> = t
            .valid_orderings()
            .iter()
            .map(|p| p.as_slice().to_vec())
            .collect();
        assert_eq!(valid, vec![vec![0, 1, 2, 3], vec![0, 2, 1, 3]]);
        let zero = nonlinear_toy_from_sources(&vec![vec![0.0]; 4]).unwrap();
        assert_eq!(zero.values()[3][0], 0.0);
    }

    #[test]
    fn factor_truth_has_no_dag_form() {
        let g = generate_factor_truth(4, 4000, 2).unwrap();
        let s: Vec<Vec<bool>> = g
            .truth
            .mixing
            .as_ref()
            .unwrap()
            .iter()
            .map(|r| r.iter().map(|&v| v != 0.0).collect())
            .collect();
        assert!(!is_triangularizable(&s));
        let tri = vec![vec![true, false], vec![true, true]];
        assert!(is_triangularizable(&tri));
        // the data are the regenerated signal plus the recorded noise
        let x = g.truth.regenerate(&g.sources).unwrap();
        for i in 0..4 {
            let e: Vec<f64> = x[i]
                .iter()
                .zip(&g.data.values()[i])
                .map(|(a, b)| b - a)
                .collect();
            let v = variance(&e);
            assert!((v / g.truth.noise_var[i] - 1.0).abs() < 0.1, "row {i}: {v}");
            assert!((g.truth.noise_var[i] / variance(&x[i]) - FACTOR_NOISE).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            GeneratorSpec::parse("lingam-suite d=5 N=500").unwrap(),
            GeneratorSpec::LingamSuite { d: 5, n: 500 }
        );
        assert!(GeneratorSpec::parse("lingam-suite d=5").is_err());
        assert!(GeneratorSpec::parse("nope").is_err());
        assert_eq!(
            GeneratorSpec::parse("nonlinear-toy").unwrap(),
            GeneratorSpec::NonlinearToy { n: 100 }
        );
    }
}
