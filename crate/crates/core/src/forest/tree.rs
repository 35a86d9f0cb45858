//! Depth-limited CART regression trees.

use rand::Rng;

use std::ops::Range;

use super::split::{training_threshold, BestSplit};
use super::SampleView;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Bootstrap draws that reached the node.
        samples: usize,
        /// Sum of squared errors removed by the split, `>= 0`.
        improvement: f64,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

impl Node {
    pub fn samples(&self) -> usize {
        match *self {
            Node::Split { samples, .. } | Node::Leaf { samples, .. } => samples,
        }
    }
}

/// A fitted tree stored as a flat pre-order node array; node 0 is the root.
#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    max_depth: usize,
    // compact copy of `nodes` for prediction
    flat: Vec<FlatNode>,
}

impl PartialEq for RegressionTree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.max_depth == other.max_depth
    }
}

const LEAF: u32 = u32::MAX;

/// `feature == LEAF` marks a leaf whose value is stored in `threshold`. The
/// left child of node `i` is `i + 1`.
#[derive(Debug, Clone, Copy)]
struct FlatNode {
    threshold: f64,
    feature: u32,
    right: u32,
}

/// Child of split node `i` for feature value `v`. The direction is random
/// from row to row, so a branch would mispredict about half the time.
#[inline(always)]
fn descend(i: usize, n: FlatNode, v: f64) -> usize {
    std::hint::select_unpredictable(v <= n.threshold, i + 1, n.right as usize)
}

fn flatten(nodes: &[Node]) -> Vec<FlatNode> {
    nodes
        .iter()
        .map(|n| match *n {
            Node::Split {
                feature,
                threshold,
                right,
                ..
            } => FlatNode {
                threshold,
                feature: feature as u32,
                right: right as u32,
            },
            Node::Leaf { value, .. } => FlatNode {
                threshold: value,
                feature: LEAF,
                right: 0,
            },
        })
        .collect()
}

impl RegressionTree {
    /// Builds a tree from raw nodes, checking the structural invariants.
    pub fn from_nodes(nodes: Vec<Node>, max_depth: usize) -> Result<RegressionTree> {
        if nodes.is_empty() {
            return Err(Error::domain("tree has no nodes"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    left,
                    right,
                    threshold,
                    improvement,
                    ..
                } => {
                    if left != i + 1 || right <= left || right >= nodes.len() {
                        return Err(Error::domain(format!("node {i} has invalid children")));
                    }
                    if !threshold.is_finite() || !(improvement >= 0.0) {
                        return Err(Error::domain(format!("node {i} has invalid split values")));
                    }
                    parents[left] += 1;
                    parents[right] += 1;
                }
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::domain(format!("leaf {i} is not finite")));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&c| c != 1) {
            return Err(Error::domain("nodes do not form a tree"));
        }
        if nodes.len() >= LEAF as usize {
            return Err(Error::domain("tree too large"));
        }
        let tree = RegressionTree::assemble(nodes, max_depth);
        if tree.depth() > max_depth {
            return Err(Error::domain("tree deeper than its max depth"));
        }
        Ok(tree)
    }

    fn assemble(nodes: Vec<Node>, max_depth: usize) -> RegressionTree {
        let flat = flatten(&nodes);
        RegressionTree {
            nodes,
            max_depth,
            flat,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Length of the longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            deepest = deepest.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        deepest
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn uses_feature(&self, j: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n, Node::Split { feature, .. } if *feature == j))
    }

    /// Prediction for a feature accessor `value(j)`.
    #[inline]
    pub fn predict_with(&self, value: impl Fn(usize) -> f64) -> f64 {
        self.flat[self.leaf_from(0, value)].threshold
    }

    /// Prediction through `value(j)`, starting the descent at node `start`.
    pub fn predict_from(&self, start: usize, value: impl Fn(usize) -> f64) -> f64 {
        self.flat[self.leaf_from(start, value)].threshold
    }

    /// Predictions for `L` descents run side by side, lane `l` starting at
    /// `starts[l]` and reading features through `value(l, j)`. Interleaving
    /// independent paths hides the latency of each node load.
    pub fn predict_lanes<const L: usize>(
        &self,
        starts: [usize; L],
        value: impl Fn(usize, usize) -> f64,
    ) -> [f64; L] {
        let mut at = starts;
        loop {
            let mut moving = false;
            for (l, i) in at.iter_mut().enumerate() {
                let n = self.flat[*i];
                if n.feature != LEAF {
                    moving = true;
                    *i = descend(*i, n, value(l, n.feature as usize));
                }
            }
            if !moving {
                return at.map(|i| self.flat[i].threshold);
            }
        }
    }

    /// Index of the leaf reached through the accessor `value(j)`.
    pub fn leaf_with(&self, value: impl Fn(usize) -> f64) -> usize {
        self.leaf_from(0, value)
    }

    #[inline]
    fn leaf_from(&self, start: usize, value: impl Fn(usize) -> f64) -> usize {
        let mut i = start;
        loop {
            let n = self.flat[i];
            if n.feature == LEAF {
                return i;
            }
            i = descend(i, n, value(n.feature as usize));
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_with(|j| x[j])
    }

    /// Prediction for `x`, calling `on_split(node, feature)` at every split
    /// node on the path.
    #[inline]
    pub fn predict_tracing(&self, x: &[f64], mut on_split: impl FnMut(usize, usize)) -> f64 {
        let mut i = 0;
        loop {
            let n = self.flat[i];
            if n.feature == LEAF {
                return n.threshold;
            }
            on_split(i, n.feature as usize);
            i = descend(i, n, x[n.feature as usize]);
        }
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        self.leaf_with(|j| x[j])
    }
}

/// How a training column is indexed for split search.
enum ColumnIndex {
    /// Row indices in ascending value order (ties by row index).
    Sorted(Vec<u32>),
    /// A column with exactly two distinct values. The only candidate split
    /// separates them, so it is enough to track the rows holding the less
    /// frequent value (`marked`, ascending row order).
    TwoValued {
        low: f64,
        marked_is_low: bool,
        marked: Vec<u32>,
    },
    /// A column with few distinct values (`values`, ascending); `codes[i]`
    /// indexes row `i`'s value. Split search sums each node's rows into one
    /// bin per value instead of keeping a sorted list.
    Binned { values: Vec<f64>, codes: Vec<u16> },
    /// A single value: never splits.
    Constant,
}

/// Most distinct values a column may have to be binned.
const MAX_BINS: usize = 256;

/// Column-major copy of the training features with a per-column index.
/// Built once per forest and shared by all trees.
pub(crate) struct Presorted {
    columns: Vec<Vec<f64>>,
    index: Vec<ColumnIndex>,
    distinct: Vec<Vec<f64>>,
}

impl Presorted {
    pub(crate) fn new(view: &SampleView<'_>) -> Presorted {
        let n = view.n_rows();
        let p = view.n_features();
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|j| (0..n).map(|i| view.value(i, j)).collect())
            .collect();
        let (index, distinct) = columns.iter().map(|col| index_column(col)).unzip();
        Presorted {
            columns,
            index,
            distinct,
        }
    }
}

/// The column's index and its distinct values in ascending order.
fn index_column(col: &[f64]) -> (ColumnIndex, Vec<f64>) {
    let Some(&first) = col.first() else {
        return (ColumnIndex::Constant, Vec::new());
    };
    let other = col.iter().copied().find(|&v| v != first);
    let Some(other) = other else {
        return (ColumnIndex::Constant, vec![first]);
    };
    let (low, high) = if first < other { (first, other) } else { (other, first) };
    if col.iter().all(|&v| v == low || v == high) {
        let n_low = col.iter().filter(|&&v| v == low).count();
        let marked_is_low = 2 * n_low <= col.len();
        let target = if marked_is_low { low } else { high };
        let marked = (0..col.len() as u32).filter(|&i| col[i as usize] == target).collect();
        let index = ColumnIndex::TwoValued {
            low,
            marked_is_low,
            marked,
        };
        return (index, vec![low, high]);
    }
    let mut idx: Vec<u32> = (0..col.len() as u32).collect();
    idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
    let mut values: Vec<f64> = Vec::new();
    let mut codes = vec![0u16; col.len()];
    for &i in &idx {
        let v = col[i as usize];
        if values.last() != Some(&v) {
            if values.len() == MAX_BINS {
                let mut distinct: Vec<f64> = idx.iter().map(|&i| col[i as usize]).collect();
                distinct.dedup();
                return (ColumnIndex::Sorted(idx), distinct);
            }
            values.push(v);
        }
        codes[i as usize] = (values.len() - 1) as u16;
    }
    (
        ColumnIndex::Binned {
            values: values.clone(),
            codes,
        },
        values,
    )
}

/// Grows one tree on rows weighted by their bootstrap multiplicity.
///
/// Each multi-valued feature keeps its own value-sorted list of the drawn
/// rows; a node owns the same index range in every list, and splitting a node
/// stably partitions that range in each list. Two-valued features only keep
/// their marked rows, with a range per node. The split search therefore
/// never sorts. A feature that is constant on a node stays constant below
/// it, so it is dropped from the node's active set for the whole subtree.
pub(crate) fn grow_weighted<R: Rng>(
    view: &SampleView<'_>,
    presorted: &Presorted,
    weights: &[u32],
    features_per_node: usize,
    max_depth: usize,
    rng: &mut R,
) -> RegressionTree {
    let drawn = |o: &Vec<u32>| -> Vec<u32> { o.iter().copied().filter(|&i| weights[i as usize] > 0).collect() };
    let lists: Vec<Vec<u32>> = presorted
        .index
        .iter()
        .map(|ix| match ix {
            ColumnIndex::Sorted(o) => drawn(o),
            ColumnIndex::TwoValued { marked, .. } => drawn(marked),
            ColumnIndex::Binned { .. } | ColumnIndex::Constant => Vec::new(),
        })
        .collect();
    let rows: Vec<u32> = (0..view.n_rows() as u32).filter(|&i| weights[i as usize] > 0).collect();
    let len = rows.len();
    let rows_w: Vec<(f64, f64)> = (0..view.n_rows())
        .map(|i| (f64::from(weights[i]), view.target(i)))
        .collect();
    let active: Vec<Active> = (0..presorted.columns.len())
        .filter_map(|j| match &presorted.index[j] {
            ColumnIndex::Constant => None,
            ColumnIndex::Sorted(_) | ColumnIndex::Binned { .. } => Some(Active {
                feature: j,
                lo: 0,
                hi: len,
                constant: false,
            }),
            ColumnIndex::TwoValued { .. } => Some(Active {
                feature: j,
                lo: 0,
                hi: lists[j].len(),
                constant: false,
            }),
        })
        .collect();
    let mut grower = Grower {
        rows_w,
        columns: &presorted.columns,
        index: &presorted.index,
        distinct: &presorted.distinct,
        lists,
        rows,
        goes_left: vec![false; view.n_rows()],
        scratch: Vec::with_capacity(len),
        bins: Vec::with_capacity(MAX_BINS),
        binned_rows: Vec::with_capacity(MAX_BINS),
        stack: Vec::new(),
        draw: (0..presorted.columns.len()).collect(),
        subset: Vec::with_capacity(features_per_node),
        features_per_node,
        max_depth,
        nodes: Vec::new(),
    };
    grower.stack = active;
    let n_active = grower.stack.len();
    grower.build(0, len, 0, 0..n_active, rng);
    RegressionTree::assemble(grower.nodes, max_depth)
}

/// A feature still able to split, with its range in `lists[feature]` (the
/// node range itself for sorted and binned features).
#[derive(Clone, Copy)]
struct Active {
    feature: usize,
    lo: usize,
    hi: usize,
    /// Set when a binned feature's scan found a single value on the node.
    constant: bool,
}

struct Grower<'a> {
    /// (bootstrap weight, target) per training row.
    rows_w: Vec<(f64, f64)>,
    columns: &'a [Vec<f64>],
    index: &'a [ColumnIndex],
    distinct: &'a [Vec<f64>],
    lists: Vec<Vec<u32>>,
    /// The node's rows in ascending row order.
    rows: Vec<u32>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    /// (weight, sum, sum of squares) per value of a binned column.
    bins: Vec<(f64, f64, f64)>,
    binned_rows: Vec<u32>,
    /// Active sets of the nodes on the current path and their pending
    /// right siblings, as consecutive runs.
    stack: Vec<Active>,
    /// 0..p, partially shuffled at each node to draw the feature subset.
    draw: Vec<usize>,
    subset: Vec<usize>,
    features_per_node: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

fn stable_partition(list: &mut [u32], goes_left: &[bool], scratch: &mut Vec<u32>) -> usize {
    // branch-free: every element is written to both sides and the matching
    // cursor advances
    scratch.clear();
    scratch.resize(list.len(), 0);
    let (mut w, mut r) = (0, 0);
    for k in 0..list.len() {
        let i = list[k];
        let left = goes_left[i as usize] as usize;
        list[w] = i;
        scratch[r] = i;
        w += left;
        r += 1 - left;
    }
    list[w..].copy_from_slice(&scratch[..r]);
    w
}

impl Grower<'_> {
    fn build<R: Rng>(&mut self, lo: usize, hi: usize, depth: usize, parent: Range<usize>, rng: &mut R) -> usize {
        let id = self.nodes.len();
        let rows = &self.rows[lo..hi];

        let first = self.rows_w[rows[0] as usize].1;
        let (mut w_tot, mut sum, mut pure) = (0.0, 0.0, true);
        for &i in rows {
            let (w, y) = self.rows_w[i as usize];
            w_tot += w;
            sum += w * y;
            pure &= y == first;
        }
        let mean = sum / w_tot;
        let samples = w_tot as usize;

        if samples < 2 || depth >= self.max_depth || pure {
            self.nodes.push(Node::Leaf { value: mean, samples });
            return id;
        }

        let (mut s_tot, mut q_tot) = (0.0, 0.0);
        for &i in rows {
            let (w, y) = self.rows_w[i as usize];
            let y = y - mean;
            s_tot += w * y;
            q_tot += w * y * y;
        }
        let totals = (w_tot, s_tot, q_tot);

        let base = self.stack.len();
        for k in parent {
            let a = self.stack[k];
            let live = match &self.index[a.feature] {
                ColumnIndex::Sorted(_) => {
                    let list = &self.lists[a.feature];
                    let col = &self.columns[a.feature];
                    col[list[lo] as usize] != col[list[hi - 1] as usize]
                }
                ColumnIndex::TwoValued { .. } => a.hi > a.lo && a.hi - a.lo < hi - lo,
                ColumnIndex::Binned { .. } => !a.constant,
                ColumnIndex::Constant => false,
            };
            if live {
                self.stack.push(a);
            }
        }
        let n_active = self.stack.len() - base;

        // the draw always covers all p features so the random stream does not
        // depend on which features happen to be constant here
        let p = self.draw.len();
        for (i, v) in self.draw.iter_mut().enumerate() {
            *v = i;
        }
        for i in 0..self.features_per_node.min(p) {
            let j = rng.gen_range(i..p);
            self.draw.swap(i, j);
        }
        self.subset.clear();
        self.subset.extend_from_slice(&self.draw[..self.features_per_node.min(p)]);
        self.subset.sort_unstable();

        let mut search = BestSplit::new(q_tot);
        let active = &mut self.stack[base..];
        let mut k = 0;
        for &j in &self.subset {
            while k < active.len() && active[k].feature < j {
                k += 1;
            }
            if k == active.len() || active[k].feature != j {
                continue;
            }
            let a = active[k];
            let rows_w = &self.rows_w;
            match &self.index[j] {
                ColumnIndex::Sorted(_) => {
                    let col = &self.columns[j];
                    let items = self.lists[j][lo..hi].iter().map(|&i| {
                        let i = i as usize;
                        let (w, y) = rows_w[i];
                        (col[i], w, y - mean)
                    });
                    search.scan(j, items, totals);
                }
                ColumnIndex::TwoValued {
                    low,
                    marked_is_low,
                    ..
                } => {
                    let (mut wm, mut sm, mut qm) = (0.0, 0.0, 0.0);
                    for &i in &self.lists[j][a.lo..a.hi] {
                        let (w, y) = rows_w[i as usize];
                        let y = y - mean;
                        wm += w;
                        sm += w * y;
                        qm += w * y * y;
                    }
                    let left = if *marked_is_low {
                        (wm, sm, qm)
                    } else {
                        (w_tot - wm, s_tot - sm, q_tot - qm)
                    };
                    search.offer_stats(j, *low, left, totals);
                }
                ColumnIndex::Binned { values, codes } => {
                    let mut left = (0.0, 0.0, 0.0);
                    let mut prev: Option<usize> = None;
                    let mut distinct = 0;
                    let mut close_bin = |c: usize, b: (f64, f64, f64)| {
                        if let Some(pc) = prev {
                            search.offer_stats(j, values[pc], left, totals);
                        }
                        left = (left.0 + b.0, left.1 + b.1, left.2 + b.2);
                        prev = Some(c);
                        distinct += 1;
                    };
                    let node_rows = &self.rows[lo..hi];
                    if node_rows.len() < values.len() {
                        // fewer rows than bins: order the rows by bin instead;
                        // the stable sort keeps row order within a bin, so the
                        // sums match the bin array's
                        let order = &mut self.binned_rows;
                        order.clear();
                        order.extend_from_slice(node_rows);
                        order.sort_by_key(|&i| codes[i as usize]);
                        let mut at = 0;
                        while at < order.len() {
                            let c = codes[order[at] as usize];
                            let mut b = (0.0, 0.0, 0.0);
                            while at < order.len() && codes[order[at] as usize] == c {
                                let (w, y) = rows_w[order[at] as usize];
                                let y = y - mean;
                                b = (b.0 + w, b.1 + w * y, b.2 + w * y * y);
                                at += 1;
                            }
                            close_bin(c as usize, b);
                        }
                    } else {
                        let bins = &mut self.bins;
                        bins.clear();
                        bins.resize(values.len(), (0.0, 0.0, 0.0));
                        for &i in node_rows {
                            let (w, y) = rows_w[i as usize];
                            let y = y - mean;
                            let b = &mut bins[codes[i as usize] as usize];
                            b.0 += w;
                            b.1 += w * y;
                            b.2 += w * y * y;
                        }
                        for (c, &b) in bins.iter().enumerate() {
                            if b.0 != 0.0 {
                                close_bin(c, b);
                            }
                        }
                    }
                    if distinct < 2 {
                        active[k].constant = true;
                    }
                }
                ColumnIndex::Constant => {}
            }
        }

        let Some(found) = search.best else {
            self.stack.truncate(base);
            self.nodes.push(Node::Leaf { value: mean, samples });
            return id;
        };
        let threshold = training_threshold(&self.distinct[found.feature], found.below);

        let col = &self.columns[found.feature];
        for &i in &self.rows[lo..hi] {
            self.goes_left[i as usize] = col[i as usize] <= threshold;
        }
        let n_left = stable_partition(&mut self.rows[lo..hi], &self.goes_left, &mut self.scratch);
        // children's active sets: left run then right run, above this node's
        let left_start = self.stack.len();
        for k in base..base + n_active {
            let a = self.stack[k];
            let j = a.feature;
            let (l, r) = match self.index[j] {
                ColumnIndex::Sorted(_) => {
                    stable_partition(&mut self.lists[j][lo..hi], &self.goes_left, &mut self.scratch);
                    ((lo, lo + n_left), (lo + n_left, hi))
                }
                ColumnIndex::TwoValued { .. } => {
                    let c = stable_partition(&mut self.lists[j][a.lo..a.hi], &self.goes_left, &mut self.scratch);
                    ((a.lo, a.lo + c), (a.lo + c, a.hi))
                }
                ColumnIndex::Binned { .. } => ((lo, lo + n_left), (lo + n_left, hi)),
                ColumnIndex::Constant => continue,
            };
            let constant = a.constant;
            self.stack.push(Active {
                feature: j,
                lo: l.0,
                hi: l.1,
                constant,
            });
            self.stack[k] = Active {
                feature: j,
                lo: r.0,
                hi: r.1,
                constant,
            };
        }
        // the right run reuses this node's slots
        let right_run = base..base + n_active;
        let left_run = left_start..self.stack.len();

        // reserve the slot; children follow in pre-order
        self.nodes.push(Node::Leaf { value: mean, samples });
        let left = self.build(lo, lo + n_left, depth + 1, left_run, rng);
        self.stack.truncate(left_start);
        let right = self.build(lo + n_left, hi, depth + 1, right_run, rng);
        self.stack.truncate(base);
        self.nodes[id] = Node::Split {
            feature: found.feature,
            threshold,
            left,
            right,
            samples,
            improvement: (q_tot - found.sse).max(0.0),
        };
        id
    }
}

/// Grows a tree on `rows` (repeats allowed) drawing `features_per_node`
/// candidate features uniformly without replacement at every node.
///
/// Growth stops at pure nodes, nodes with fewer than two draws, nodes where
/// no drawn feature varies, and at `max_depth` (the root has depth 0).
pub fn grow_tree<R: Rng>(
    view: &SampleView<'_>,
    rows: &[usize],
    features_per_node: usize,
    max_depth: usize,
    rng: &mut R,
) -> Result<RegressionTree> {
    let p = view.n_features();
    if !(1..=p).contains(&features_per_node) {
        return Err(Error::domain(format!(
            "features per node {features_per_node} not in [1, {p}]"
        )));
    }
    if max_depth < 1 {
        return Err(Error::domain("max depth must be >= 1"));
    }
    if rows.is_empty() {
        return Err(Error::domain("cannot grow a tree on zero rows"));
    }
    let mut weights = vec![0u32; view.n_rows()];
    for &i in rows {
        let w = weights
            .get_mut(i)
            .ok_or_else(|| Error::domain(format!("row {i} out of range")))?;
        *w += 1;
    }
    let presorted = Presorted::new(view);
    Ok(grow_weighted(
        view,
        &presorted,
        &weights,
        features_per_node,
        max_depth,
        rng,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::best_split;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn depth_one_stump() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 1.0, 5.0, 5.0];
        let view = SampleView::new(&x, 1, &y).unwrap();
        let t = grow_tree(&view, &[0, 1, 2, 3], 1, 1, &mut rng()).unwrap();
        assert_eq!(t.nodes().len(), 3);
        match t.nodes()[0] {
            Node::Split {
                threshold,
                improvement,
                samples,
                ..
            } => {
                assert_eq!(threshold, 2.5);
                assert_eq!(improvement, 16.0);
                assert_eq!(samples, 4);
            }
            _ => panic!("root should split"),
        }
        assert_eq!(t.predict(&[1.5]), 1.0);
        assert_eq!(t.predict(&[3.5]), 5.0);
    }

    #[test]
    fn fully_grown_tree_memorizes() {
        let n = 40;
        let x: Vec<f64> = (0..n).flat_map(|i| [i as f64, ((i * 7) % 11) as f64]).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 13) % 17) as f64 + 0.5 * i as f64).collect();
        let view = SampleView::new(&x, 2, &y).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let t = grow_tree(&view, &rows, 2, 64, &mut rng()).unwrap();
        for i in 0..n {
            assert_eq!(t.predict(view.row(i)), y[i]);
        }
    }

    #[test]
    fn single_row_is_one_leaf() {
        let x = [3.0, 1.0];
        let y = [42.0];
        let view = SampleView::new(&x, 2, &y).unwrap();
        let t = grow_tree(&view, &[0], 2, 5, &mut rng()).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 42.0, samples: 1 }]);
    }

    #[test]
    fn respects_max_depth_and_leaf_means() {
        let n = 200;
        let x: Vec<f64> = (0..n).flat_map(|i| [(i as f64).sin(), (i as f64 * 0.37).cos()]).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).sin() * 10.0).collect();
        let view = SampleView::new(&x, 2, &y).unwrap();
        let rows: Vec<usize> = (0..n).chain(0..50).collect();
        let t = grow_tree(&view, &rows, 1, 4, &mut rng()).unwrap();
        assert!(t.depth() <= 4);
        // every leaf value equals the mean of the draws routed to it
        let mut sums = vec![(0.0, 0usize); t.nodes().len()];
        for &i in &rows {
            let leaf = t.leaf_index(view.row(i));
            sums[leaf].0 += y[i];
            sums[leaf].1 += 1;
        }
        for (k, node) in t.nodes().iter().enumerate() {
            if let Node::Leaf { value, samples } = *node {
                assert_eq!(samples, sums[k].1);
                let mean = sums[k].0 / sums[k].1 as f64;
                assert!((value - mean).abs() <= 1e-9 * mean.abs().max(1.0));
            }
            if let Node::Split { improvement, .. } = *node {
                assert!(improvement >= 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let x = [1.0, 2.0];
        let y = [1.0, 2.0];
        let view = SampleView::new(&x, 1, &y).unwrap();
        assert!(grow_tree(&view, &[0, 1], 0, 3, &mut rng()).is_err());
        assert!(grow_tree(&view, &[0, 1], 2, 3, &mut rng()).is_err());
        assert!(grow_tree(&view, &[0, 1], 1, 0, &mut rng()).is_err());
        assert!(grow_tree(&view, &[0, 5], 1, 3, &mut rng()).is_err());
    }

    #[test]
    fn every_node_takes_the_exhaustive_best_split() {
        // one column of each index kind: continuous, few-valued, two-valued
        let mut r = rng();
        let n = 120;
        let mut x = Vec::with_capacity(n * 3);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = r.gen_range(-1.0..1.0);
            let b = f64::from(r.gen_range(0..7u8));
            let c = f64::from(r.gen_range(0..2u8));
            x.extend([a, b, c]);
            y.push(a * 3.0 + b * 0.7 - c * 2.0 + r.gen_range(-0.3..0.3));
        }
        let view = SampleView::new(&x, 3, &y).unwrap();
        for _ in 0..20 {
            let rows: Vec<usize> = (0..n).map(|_| r.gen_range(0..n)).collect();
            let t = grow_tree(&view, &rows, 3, 3, &mut r).unwrap();
            let mut reach = vec![Vec::new(); t.nodes().len()];
            reach[0] = rows.clone();
            for (k, node) in t.nodes().iter().enumerate() {
                if let Node::Split { feature, threshold, left, right, .. } = *node {
                    let here = std::mem::take(&mut reach[k]);
                    let best = best_split(&view, &here, &[0, 1, 2]).unwrap().unwrap();
                    assert_eq!((feature, threshold), (best.feature, best.threshold));
                    for i in here {
                        let side = if view.value(i, feature) <= threshold { left } else { right };
                        reach[side].push(i);
                    }
                }
            }
        }
    }

    #[test]
    fn from_nodes_checks_structure() {
        let ok = vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, samples: 2, improvement: 1.0 },
            Node::Leaf { value: 0.0, samples: 1 },
            Node::Leaf { value: 1.0, samples: 1 },
        ];
        assert!(RegressionTree::from_nodes(ok.clone(), 1).is_ok());
        assert!(RegressionTree::from_nodes(ok.clone(), 0).is_err());
        let mut cyclic = ok;
        cyclic[0] = Node::Split { feature: 0, threshold: 0.5, left: 1, right: 1, samples: 2, improvement: 1.0 };
        assert!(RegressionTree::from_nodes(cyclic, 1).is_err());
        let swapped = vec![
            Node::Split { feature: 0, threshold: 0.5, left: 2, right: 1, samples: 2, improvement: 1.0 },
            Node::Leaf { value: 0.0, samples: 1 },
            Node::Leaf { value: 1.0, samples: 1 },
        ];
        assert!(RegressionTree::from_nodes(swapped, 1).is_err());
    }
}
