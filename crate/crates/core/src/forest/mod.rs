//! Random forest regression.
//!
//! Each tree `b` is trained on `n` rows drawn with replacement and grown with
//! a fresh uniform subset of `m` candidate features at every node. The forest
//! predicts the arithmetic mean of its trees.
//!
//! # Reproducibility
//!
//! Tree `b` draws all of its randomness from a ChaCha8 generator seeded with
//! the master seed and positioned on stream `b` (ChaCha's 64-bit stream
//! counter). The stream first yields the `n` bootstrap draws, then the
//! per-node feature subsets in depth-first, left-before-right order. Trees
//! never share a generator, so the fitted forest is bit-identical whatever
//! the number of worker threads.

pub(crate) mod format;
pub mod split;
pub mod tree;

use std::ops::RangeInclusive;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub use format::{read_forest, write_forest, FORMAT_HEADER};
pub use split::{best_split, SplitCandidate};
pub use tree::{grow_tree, Node, RegressionTree};

/// Borrowed training data: row-major features and one target per row.
#[derive(Debug, Clone, Copy)]
pub struct SampleView<'a> {
    data: &'a [f64],
    n_features: usize,
    targets: &'a [f64],
}

impl<'a> SampleView<'a> {
    pub fn new(data: &'a [f64], n_features: usize, targets: &'a [f64]) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::domain("sample view needs at least one feature"));
        }
        if data.len() != n_features * targets.len() {
            return Err(Error::domain(format!(
                "{} values do not fill {} rows of {n_features} features",
                data.len(),
                targets.len()
            )));
        }
        Ok(SampleView {
            data,
            n_features,
            targets,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.data[row * self.n_features + feature]
    }

    #[inline]
    pub fn target(&self, row: usize) -> f64 {
        self.targets[row]
    }

    pub fn targets(&self) -> &'a [f64] {
        self.targets
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }
}

/// How each tree picks its training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSampling {
    /// `n` draws with replacement.
    Bootstrap,
    /// Every row exactly once; no out-of-bag rows. Intended for tests.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub features_per_node: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub sampling: RowSampling,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 50,
            features_per_node: 15,
            max_depth: 15,
            seed: 0,
            sampling: RowSampling::Bootstrap,
        }
    }
}

/// Usual range for the number of features tried per node when categorical
/// dummies are present: two to three times `int(log2(p) + 1)`.
pub fn suggested_features_per_node(p: usize) -> RangeInclusive<usize> {
    let base = ((p.max(1) as f64).log2() + 1.0) as usize;
    2 * base..=3 * base
}

/// Rows used and left out by one tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bag {
    /// Training rows in draw order (repeats allowed).
    pub draws: Vec<u32>,
    /// Rows never drawn, ascending.
    pub out_of_bag: Vec<u32>,
}

impl Bag {
    pub fn new(draws: Vec<u32>, n: usize) -> Bag {
        let mut seen = vec![false; n];
        for &i in &draws {
            seen[i as usize] = true;
        }
        let out_of_bag = (0..n as u32).filter(|&i| !seen[i as usize]).collect();
        Bag { draws, out_of_bag }
    }

    fn weights(&self, n: usize) -> Vec<u32> {
        let mut w = vec![0u32; n];
        for &i in &self.draws {
            w[i as usize] += 1;
        }
        w
    }
}

/// Generator for tree `tree` of a forest seeded with `seed`.
pub fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

/// `n` row indices drawn uniformly with replacement.
pub fn bootstrap_draws<R: Rng>(rng: &mut R, n: usize) -> Vec<u32> {
    (0..n).map(|_| rng.gen_range(0..n as u32)).collect()
}

fn draw_bag<R: Rng>(sampling: RowSampling, rng: &mut R, n: usize) -> Bag {
    match sampling {
        RowSampling::Bootstrap => Bag::new(bootstrap_draws(rng, n), n),
        RowSampling::Identity => Bag::new((0..n as u32).collect(), n),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    params: ForestParams,
    n_features: usize,
    n_train: usize,
    trees: Vec<RegressionTree>,
    bags: Vec<Bag>,
}

impl Forest {
    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of rows in the training set the bags index into.
    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    /// Mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::domain(format!(
                "feature vector has {} entries, forest expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in &self.trees {
            total += t.predict(x);
        }
        total / self.trees.len() as f64
    }

    /// Predictions for every row of `view`.
    pub fn predict_rows(&self, view: &SampleView<'_>) -> Result<Vec<f64>> {
        if view.n_features() != self.n_features {
            return Err(Error::domain(format!(
                "data has {} features, forest expects {}",
                view.n_features(),
                self.n_features
            )));
        }
        // tree by tree keeps one tree in cache; each row still sums its trees
        // in the same order as `predict`
        let mut out = vec![0.0; view.n_rows()];
        for t in &self.trees {
            for (i, o) in out.iter_mut().enumerate() {
                *o += t.predict(view.row(i));
            }
        }
        let b = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= b);
        Ok(out)
    }

    /// Assembles a forest from parts, regenerating the bags from the seed.
    pub(crate) fn from_parts(
        params: ForestParams,
        n_features: usize,
        n_train: usize,
        trees: Vec<RegressionTree>,
    ) -> Result<Forest> {
        if trees.len() != params.n_trees {
            return Err(Error::domain(format!(
                "expected {} trees, found {}",
                params.n_trees,
                trees.len()
            )));
        }
        let bags = (0..params.n_trees)
            .map(|b| draw_bag(params.sampling, &mut tree_rng(params.seed, b), n_train))
            .collect();
        Ok(Forest {
            params,
            n_features,
            n_train,
            trees,
            bags,
        })
    }
}

/// Trains a forest on `view`.
///
/// `workers` bounds the number of threads; `None` uses rayon's global pool
/// and `Some(1)` trains sequentially on the calling thread. The result does
/// not depend on this choice.
pub fn fit_forest(
    view: &SampleView<'_>,
    params: &ForestParams,
    workers: Option<usize>,
) -> Result<Forest> {
    let n = view.n_rows();
    let p = view.n_features();
    if n == 0 {
        return Err(Error::domain("cannot fit a forest on an empty training set"));
    }
    if n > u32::MAX as usize {
        return Err(Error::domain("training set too large"));
    }
    if params.n_trees == 0 {
        return Err(Error::domain("forest needs at least one tree"));
    }
    if !(1..=p).contains(&params.features_per_node) {
        return Err(Error::domain(format!(
            "features per node {} not in [1, {p}]",
            params.features_per_node
        )));
    }
    if params.max_depth < 1 {
        return Err(Error::domain("max depth must be >= 1"));
    }

    let presorted = tree::Presorted::new(view);
    let train_one = |b: usize| {
        let mut rng = tree_rng(params.seed, b);
        let bag = draw_bag(params.sampling, &mut rng, n);
        let tree = tree::grow_weighted(
            view,
            &presorted,
            &bag.weights(n),
            params.features_per_node,
            params.max_depth,
            &mut rng,
        );
        (tree, bag)
    };

    let fitted: Vec<(RegressionTree, Bag)> = match workers {
        Some(1) => (0..params.n_trees).map(train_one).collect(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::domain(format!("cannot start {k} workers: {e}")))?
            .install(|| (0..params.n_trees).into_par_iter().map(train_one).collect()),
        None => (0..params.n_trees).into_par_iter().map(train_one).collect(),
    };
    let (trees, bags) = fitted.into_iter().unzip();

    Ok(Forest {
        params: *params,
        n_features: p,
        n_train: n,
        trees,
        bags,
    })
}
