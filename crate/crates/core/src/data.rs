//! Observation matrices, standardization and train/test splits.
//!
//! Variables are rows and observations are columns.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: Vec<Vec<f64>>,
    names: Vec<String>,
    /// `true` = observed.
    mask: Option<Vec<Vec<bool>>>,
}

/// Per-variable mean and standard deviation used to standardize a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Dataset {
    pub fn new(values: Vec<Vec<f64>>, names: Option<Vec<String>>) -> Result<Self> {
        Self::with_mask(values, names, None)
    }

    pub fn with_mask(
        values: Vec<Vec<f64>>,
        names: Option<Vec<String>>,
        mask: Option<Vec<Vec<bool>>>,
    ) -> Result<Self> {
        let d = values.len();
        if d < 2 {
            return Err(SlimError::Dimension(format!(
                "need at least 2 variables, got {d}"
            )));
        }
        let n = values[0].len();
        if n == 0 {
            return Err(SlimError::Empty("dataset has no observations"));
        }
        if values.iter().any(|r| r.len() != n) {
            return Err(SlimError::Dimension("rows have unequal lengths".into()));
        }
        let names = match names {
            Some(names) if names.len() != d => {
                return Err(SlimError::Dimension(format!(
                    "{} names for {d} variables",
                    names.len()
                )))
            }
            Some(names) => names,
            None => (1..=d).map(|i| format!("x{i}")).collect(),
        };
        if let Some(m) = &mask {
            if m.len() != d || m.iter().any(|r| r.len() != n) {
                return Err(SlimError::Dimension(
                    "mask shape differs from values".into(),
                ));
            }
        }
        for (i, row) in values.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                let observed = mask.as_ref().is_none_or(|m| m[i][t]);
                if observed && !v.is_finite() {
                    return Err(SlimError::InvalidArgument(format!(
                        "non-finite value at variable {i}, observation {t}"
                    )));
                }
            }
        }
        Ok(Self {
            values,
            names,
            mask,
        })
    }

    /// Build from observations-as-rows, the usual CSV layout.
    pub fn from_observations(obs: &[Vec<f64>], names: Option<Vec<String>>) -> Result<Self> {
        let Some(first) = obs.first() else {
            return Err(SlimError::Empty("no observations"));
        };
        let d = first.len();
        if obs.iter().any(|o| o.len() != d) {
            return Err(SlimError::Dimension("ragged observation rows".into()));
        }
        let values = (0..d).map(|i| obs.iter().map(|o| o[i]).collect()).collect();
        Self::new(values, names)
    }

    pub fn d(&self) -> usize {
        self.values.len()
    }

    pub fn n(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mask(&self) -> Option<&[Vec<bool>]> {
        self.mask.as_deref()
    }

    pub fn is_observed(&self, i: usize, t: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[i][t])
    }

    pub fn set_mask(&mut self, mask: Option<Vec<Vec<bool>>>) -> Result<()> {
        let rebuilt = Self::with_mask(self.values.clone(), Some(self.names.clone()), mask)?;
        *self = rebuilt;
        Ok(())
    }

    /// Keep the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let pick = |row: &Vec<f64>| cols.iter().map(|&c| row[c]).collect::<Vec<f64>>();
        Dataset {
            values: self.values.iter().map(pick).collect(),
            names: self.names.clone(),
            mask: self.mask.as_ref().map(|m| {
                m.iter()
                    .map(|r| cols.iter().map(|&c| r[c]).collect())
                    .collect()
            }),
        }
    }

    /// Relabel variables: row `a` of the result is row `order[a]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Dataset {
        Dataset {
            values: order.iter().map(|&o| self.values[o].clone()).collect(),
            names: order.iter().map(|&o| self.names[o].clone()).collect(),
            mask: self
                .mask
                .as_ref()
                .map(|m| order.iter().map(|&o| m[o].clone()).collect()),
        }
    }

    /// Sample mean and standard deviation (n−1 denominator) of every row over
    /// its observed entries.
    pub fn statistics(&self) -> Result<Standardization> {
        let mut means = Vec::with_capacity(self.d());
        let mut sds = Vec::with_capacity(self.d());
        for (i, row) in self.values.iter().enumerate() {
            let obs: Vec<f64> = row
                .iter()
                .enumerate()
                .filter(|&(t, _)| self.is_observed(i, t))
                .map(|(_, &v)| v)
                .collect();
            let k = obs.len() as f64;
            let mean = obs.iter().sum::<f64>() / k;
            let ss = obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            let sd = if obs.len() > 1 {
                (ss / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            if !(sd > 1e-300) || obs.iter().all(|&v| v == obs[0]) {
                return Err(SlimError::ConstantVariable {
                    index: i,
                    name: self.names[i].clone(),
                });
            }
            means.push(mean);
            sds.push(sd);
        }
        Ok(Standardization { means, sds })
    }

    /// Zero mean, unit standard deviation per row.
    pub fn standardize(&self) -> Result<Dataset> {
        Ok(self.standardize_with_stats()?.0)
    }

    pub fn standardize_with_stats(&self) -> Result<(Dataset, Standardization)> {
        let stats = self.statistics()?;
        Ok((stats.apply(self)?, stats))
    }

    /// Column-disjoint split; the test part gets `round(test_fraction·N)`
    /// columns chosen uniformly at random. Both parts keep column order.
    pub fn partition(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(SlimError::InvalidArgument(format!(
                "test fraction {test_fraction} outside [0, 1)"
            )));
        }
        let n = self.n();
        let n_test = (test_fraction * n as f64).round() as usize;
        if n_test == n {
            return Err(SlimError::InvalidArgument(
                "test fraction leaves no training columns".into(),
            ));
        }
        let mut rng = RngStream::new(seed, 0x7061_7274);
        let mut is_test = vec![false; n];
        for t in sample(&mut rng, n, n_test) {
            is_test[t] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&t| !is_test[t]).collect();
        let test: Vec<usize> = (0..n).filter(|&t| is_test[t]).collect();
        let test_set = Dataset {
            values: self
                .values
                .iter()
                .map(|r| test.iter().map(|&c| r[c]).collect())
                .collect(),
            names: self.names.clone(),
            mask: self.mask.as_ref().map(|m| {
                m.iter()
                    .map(|r| test.iter().map(|&c| r[c]).collect())
                    .collect()
            }),
        };
        Ok((self.select_columns(&train), test_set))
    }

    /// Hide a random `fraction` of entries (mask them out). Returns the masked
    /// dataset; the hidden entries are those with `mask == false`.
    pub fn mask_random(&self, fraction: f64, seed: u64) -> Result<Dataset> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(SlimError::InvalidArgument(format!(
                "missing fraction {fraction} outside [0, 1)"
            )));
        }
        let (d, n) = (self.d(), self.n());
        let total = d * n;
        let k = (fraction * total as f64).round() as usize;
        let mut rng = RngStream::new(seed, 0x6d61_736b);
        let mut mask = vec![vec![true; n]; d];
        for e in sample(&mut rng, total, k) {
            mask[e / n][e % n] = false;
        }
        let mut out = self.clone();
        out.mask = Some(mask);
        Ok(out)
    }
}

impl Standardization {
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.d() != self.means.len() {
            return Err(SlimError::Dimension(format!(
                "statistics for {} variables, data has {}",
                self.means.len(),
                data.d()
            )));
        }
        let values = data
            .values
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|v| (v - self.means[i]) / self.sds[i])
                    .collect()
            })
            .collect();
        Ok(Dataset {
            values,
            names: data.names.clone(),
            mask: data.mask.clone(),
        })
    }

    /// Map a standardized weight `b` of parent `j` in child `i` back to raw units.
    pub fn destandardize_weight(&self, i: usize, j: usize, b: f64) -> f64 {
        b * self.sds[i] / self.sds[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(rows: Vec<Vec<f64>>) -> Dataset {
        Dataset::new(rows, None).unwrap()
    }

    #[test]
    fn standardize_simple_row() {
        let s = ds(vec![vec![1.0, 2.0, 3.0], vec![0.0, 4.0, 2.0]])
            .standardize()
            .unwrap();
        for (a, b) in s.row(0).iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_row_is_named() {
        let d = Dataset::new(
            vec![vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0]],
            Some(vec!["a".into(), "flat".into()]),
        )
        .unwrap();
        match d.standardize() {
            Err(SlimError::ConstantVariable { index, name }) => {
                assert_eq!(index, 1);
                assert_eq!(name, "flat");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Dataset::new(vec![vec![1.0]], None).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], None).is_err());
        assert!(Dataset::new(vec![vec![f64::NAN], vec![1.0]], None).is_err());
        // NaN is fine where masked out
        let m = Some(vec![vec![false], vec![true]]);
        assert!(Dataset::with_mask(vec![vec![f64::NAN], vec![1.0]], None, m).is_ok());
        let bad = Some(vec![vec![true, true], vec![true]]);
        assert!(Dataset::with_mask(vec![vec![1.0], vec![1.0]], None, bad).is_err());
    }

    #[test]
    fn partition_sizes_and_determinism() {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..100).map(|t| (t * (i + 1)) as f64).collect())
            .collect();
        let d = ds(rows);
        let (tr, te) = d.partition(0.2, 9).unwrap();
        assert_eq!((tr.n(), te.n()), (80, 20));
        let (tr2, te2) = d.partition(0.2, 9).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
        // disjoint and covering
        let mut all: Vec<f64> = tr.row(0).iter().chain(te.row(0)).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..100).map(|t| t as f64).collect::<Vec<_>>());
        let (tr0, _) = d.partition(0.0, 1).unwrap();
        assert_eq!(tr0.n(), 100);
        assert!(d.partition(1.0, 1).is_err());
        assert!(d.partition(-0.1, 1).is_err());
    }

    #[test]
    fn masked_statistics_skip_hidden() {
        let d = Dataset::with_mask(
            vec![vec![1.0, 100.0, 3.0], vec![1.0, 2.0, 4.0]],
            None,
            Some(vec![vec![true, false, true], vec![true; 3]]),
        )
        .unwrap();
        let st = d.statistics().unwrap();
        assert!((st.means[0] - 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 5..40), 2..6)) {
            let n = rows[0].len();
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.resize(n, 0.0); r[0] += 1.0; r[1] -= 1.0; r }).collect();
            let d = Dataset::new(rows, None).unwrap();
            prop_assume!(d.statistics().is_ok());
            let once = d.standardize().unwrap();
            let twice = once.standardize().unwrap();
            for (a, b) in once.values().iter().flatten().zip(twice.values().iter().flatten()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let st = once.statistics().unwrap();
            for i in 0..once.d() {
                prop_assert!(st.means[i].abs() < 1e-12);
                prop_assert!((st.sds[i] - 1.0).abs() < 1e-12);
            }
        }
    }
}
