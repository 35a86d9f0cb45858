//! Feature importance for fitted forests.
//!
//! Two measures are provided:
//!
//! - **MDI** (mean decrease in impurity): every split node credits its
//!   feature with `samples × improvement`, where `improvement` is the drop in
//!   residual sum of squares; credits are averaged over trees and normalized
//!   to sum to one.
//! - **Permutation importance** `VI(A) = 1/B · Σ_b (R²_b − R²_b,perm) / R²_b`,
//!   where `R²_b` is tree `b`'s R² on its own out-of-bag rows and
//!   `R²_b,perm` the same after shuffling column `A` among those rows. Trees
//!   whose out-of-bag R² is undefined or zero are left out of the average.
//!
//! Shuffles are drawn from a ChaCha8 generator seeded with the caller's seed
//! on stream `b · p + A`, so each (tree, feature) pair has its own
//! permutation and the result does not depend on evaluation order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forest::{Forest, Node, RegressionTree, SampleView};
use crate::metrics::r_squared_of;

/// Normalized impurity-decrease importance, one entry per feature.
///
/// Returns all zeros when no tree contains a split.
pub fn mdi_importance(forest: &Forest) -> Vec<f64> {
    let p = forest.n_features();
    let mut totals = vec![0.0; p];
    for tree in forest.trees() {
        for node in tree.nodes() {
            if let Node::Split {
                feature,
                samples,
                improvement,
                ..
            } = *node
            {
                totals[feature] += samples as f64 * improvement;
            }
        }
    }
    let b = forest.trees().len() as f64;
    for t in &mut totals {
        *t /= b;
    }
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        for t in &mut totals {
            *t /= sum;
        }
    }
    totals
}

/// How out-of-bag columns are permuted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Permutation {
    Shuffle { seed: u64 },
    /// Leaves every column in place; every score is then exactly zero.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationImportance {
    pub scores: Vec<f64>,
    pub trees_used: usize,
    pub trees_skipped: usize,
}

/// Out-of-bag permutation importance. `train` must be the matrix the forest
/// was fitted on: bag indices refer to its rows.
pub fn permutation_importance(
    forest: &Forest,
    train: &SampleView<'_>,
    permutation: Permutation,
) -> Result<PermutationImportance> {
    if train.n_rows() != forest.n_train() || train.n_features() != forest.n_features() {
        return Err(Error::Incompatible(format!(
            "training data is {}×{}, forest was fitted on {}×{}",
            train.n_rows(),
            train.n_features(),
            forest.n_train(),
            forest.n_features()
        )));
    }
    let p = forest.n_features();
    let per_tree: Vec<Option<Vec<f64>>> = forest
        .trees()
        .par_iter()
        .zip(forest.bags().par_iter())
        .enumerate()
        .map(|(b, (tree, bag))| tree_contributions(tree, &bag.out_of_bag, train, b, p, permutation))
        .collect();

    let mut scores = vec![0.0; p];
    let mut used = 0;
    for contrib in per_tree.iter().flatten() {
        used += 1;
        for (s, c) in scores.iter_mut().zip(contrib) {
            *s += c;
        }
    }
    let skipped = per_tree.len() - used;
    if skipped > 0 {
        log::warn!("{skipped} tree(s) skipped: out-of-bag R² undefined");
    }
    if used == 0 {
        return Err(Error::undefined(
            "no tree has a usable out-of-bag set for permutation importance",
        ));
    }
    for s in &mut scores {
        *s /= used as f64;
    }
    Ok(PermutationImportance {
        scores,
        trees_used: used,
        trees_skipped: skipped,
    })
}

/// Rows re-evaluated side by side in the permuted pass.
const LANES: usize = 8;

/// `(R²_b − R²_b,perm) / R²_b` for every feature, or `None` when the tree's
/// out-of-bag R² is unusable.
///
/// Only rows whose decision path tests feature `A` can change prediction when
/// `A` is permuted, so only those are re-evaluated.
fn tree_contributions(
    tree: &RegressionTree,
    oob: &[u32],
    train: &SampleView<'_>,
    b: usize,
    p: usize,
    permutation: Permutation,
) -> Option<Vec<f64>> {
    if oob.len() < 2 {
        return None;
    }
    let actual: Vec<f64> = oob.iter().map(|&i| train.target(i as usize)).collect();
    let mut predicted = Vec::with_capacity(oob.len());
    // (position in `oob`, first node testing the feature) for every row
    // whose path tests it; above that node the permuted path is unchanged
    let mut touched: Vec<Vec<(u32, u32)>> = vec![Vec::new(); p];
    let mut stamp = vec![u32::MAX; p];
    for (k, &i) in oob.iter().enumerate() {
        let value = tree.predict_tracing(train.row(i as usize), |node, feature| {
            if stamp[feature] != k as u32 {
                stamp[feature] = k as u32;
                touched[feature].push((k as u32, node as u32));
            }
        });
        predicted.push(value);
    }
    let base = r_squared_of(&actual, &predicted).ok()?;
    if base == 0.0 || !base.is_finite() {
        return None;
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let total: f64 = actual.iter().map(|y| (y - mean) * (y - mean)).sum();
    let residual: f64 = actual.iter().zip(&predicted).map(|(y, f)| (y - f) * (y - f)).sum();

    let n = oob.len();
    let mut out = vec![0.0; p];
    // positions into `oob`; the permuted column is read through `column`
    let mut donors: Vec<u32> = (0..n as u32).collect();
    let mut column = vec![0.0; n];
    for (a, slot) in out.iter_mut().enumerate() {
        // a feature no path tests cannot move any prediction
        if touched[a].is_empty() {
            continue;
        }
        let Permutation::Shuffle { seed } = permutation else {
            continue;
        };
        for (v, &i) in column.iter_mut().zip(oob) {
            *v = train.value(i as usize, a);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((b * p + a) as u64);
        // Only the touched positions of the permuted column are read, so a
        // Fisher-Yates pass over that many slots yields their donors: an
        // ordered sample without replacement, which is what a uniform
        // permutation restricts to.
        let rows = &touched[a];
        let mut swaps = Vec::with_capacity(rows.len());
        for t in 0..rows.len() {
            let j = rng.gen_range(t..n);
            donors.swap(t, j);
            swaps.push(j);
        }
        let moved_one = |t: usize| {
            let (k, node) = rows[t];
            let row = train.row(oob[k as usize] as usize);
            let donor = column[donors[t] as usize];
            tree.predict_from(node as usize, |j| if j == a { donor } else { row[j] })
        };
        let mut delta = 0.0;
        let mut add = |t: usize, moved: f64| {
            let k = rows[t].0 as usize;
            let y = actual[k];
            delta += (y - moved) * (y - moved) - (y - predicted[k]) * (y - predicted[k]);
        };
        let full = rows.len() - rows.len() % LANES;
        for t0 in (0..full).step_by(LANES) {
            let starts: [usize; LANES] = std::array::from_fn(|l| rows[t0 + l].1 as usize);
            let moved = tree.predict_lanes(starts, |l, j| {
                let t = t0 + l;
                if j == a {
                    column[donors[t] as usize]
                } else {
                    train.value(oob[rows[t].0 as usize] as usize, j)
                }
            });
            for (l, m) in moved.into_iter().enumerate() {
                add(t0 + l, m);
            }
        }
        for t in full..rows.len() {
            add(t, moved_one(t));
        }
        for (t, &j) in swaps.iter().enumerate().rev() {
            donors.swap(t, j);
        }
        let shuffled = 1.0 - (residual + delta) / total;
        *slot = (base - shuffled) / base;
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub name: String,
    pub mdi: f64,
    pub permutation: f64,
}

/// Both importance measures with their rankings (feature indices, most
/// important first; ties by index).
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
    pub mdi_ranking: Vec<usize>,
    pub permutation_ranking: Vec<usize>,
}

fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

impl ImportanceReport {
    pub fn new(names: Vec<String>, mdi: Vec<f64>, permutation: Vec<f64>) -> Result<Self> {
        if names.len() != mdi.len() || names.len() != permutation.len() {
            return Err(Error::domain("importance vectors differ in length"));
        }
        let mdi_ranking = ranking(&mdi);
        let permutation_ranking = ranking(&permutation);
        let features = names
            .into_iter()
            .zip(mdi)
            .zip(permutation)
            .map(|((name, mdi), permutation)| FeatureImportance {
                name,
                mdi,
                permutation,
            })
            .collect();
        Ok(ImportanceReport {
            features,
            mdi_ranking,
            permutation_ranking,
        })
    }

    /// `feature,mdi,vi,mdi_rank,vi_rank` with 1-based ranks, in column order.
    pub fn to_csv(&self) -> String {
        let mut mdi_rank = vec![0; self.features.len()];
        let mut vi_rank = vec![0; self.features.len()];
        for (r, &j) in self.mdi_ranking.iter().enumerate() {
            mdi_rank[j] = r + 1;
        }
        for (r, &j) in self.permutation_ranking.iter().enumerate() {
            vi_rank[j] = r + 1;
        }
        let mut out = String::from("feature,mdi,vi,mdi_rank,vi_rank\n");
        for (j, f) in self.features.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.name, f.mdi, f.permutation, mdi_rank[j], vi_rank[j]
            ));
        }
        out
    }

    /// Bar-chart data: `method,rank,feature,score`, each method sorted by
    /// rank, at most `top` bars per method.
    pub fn chart_csv(&self, top: usize) -> String {
        let mut out = String::from("method,rank,feature,score\n");
        for (method, order) in [("mdi", &self.mdi_ranking), ("permutation", &self.permutation_ranking)] {
            for (r, &j) in order.iter().take(top).enumerate() {
                let f = &self.features[j];
                let score = if method == "mdi" { f.mdi } else { f.permutation };
                out.push_str(&format!("{method},{},{},{score}\n", r + 1, f.name));
            }
        }
        out
    }
}
