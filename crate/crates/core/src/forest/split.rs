//! Greedy least-squares split search.
//!
//! For a feature `j` and threshold `s` the rows split into `x_j <= s` and
//! `x_j > s`; each side predicts its mean and the split cost is the summed
//! squared error of both sides. Candidates separate consecutive distinct
//! values of the node's rows. The threshold of the chosen split is the
//! midpoint between its lower value and the next distinct value of the whole
//! training column, so that every training row, in bag or not, falls on the
//! same side under any strictly increasing transform of the feature.
//!
//! Ties are resolved by lower cost, then lower feature index, then lower
//! threshold. Two costs closer than [`SSE_TIE_REL`] times the parent sum of
//! squares count as equal: the same partition reached through two features
//! accumulates its sums in a different order and the results may differ in
//! the last bits.

use super::SampleView;
use crate::error::{Error, Result};

/// Relative tolerance under which two split costs are considered tied.
pub const SSE_TIE_REL: f64 = 1e-10;

/// Best split of a set of rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Sum of squared errors after the split.
    pub sse: f64,
    pub left_mean: f64,
    pub right_mean: f64,
    pub left_count: usize,
    pub right_count: usize,
}

/// Running best over candidates visited in (feature, threshold) order.
#[derive(Debug)]
pub(crate) struct BestSplit {
    tol: f64,
    pub(crate) best: Option<Found>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Found {
    pub feature: usize,
    /// Largest value sent left; the threshold comes from
    /// [`training_threshold`].
    pub below: f64,
    pub sse: f64,
    pub left_weight: f64,
    pub left_sum: f64,
}

impl BestSplit {
    pub(crate) fn new(parent_sse: f64) -> Self {
        BestSplit {
            tol: SSE_TIE_REL * parent_sse,
            best: None,
        }
    }

    fn offer(&mut self, cand: Found) {
        let replace = match &self.best {
            None => true,
            Some(b) => cand.sse < b.sse - self.tol,
        };
        if replace {
            self.best = Some(cand);
        }
    }

    /// Scans one feature. `items` yields `(x, weight, y - parent_mean)` in
    /// ascending `x`; `totals` are the node's (weight, sum, sum of squares)
    /// of the centered targets.
    pub(crate) fn scan(
        &mut self,
        feature: usize,
        items: impl Iterator<Item = (f64, f64, f64)>,
        totals: (f64, f64, f64),
    ) {
        let (mut wl, mut sl, mut ql) = (0.0, 0.0, 0.0);
        let mut last_x: Option<f64> = None;
        for (x, w, y) in items {
            if let Some(lx) = last_x {
                if x > lx {
                    self.offer_stats(feature, lx, (wl, sl, ql), totals);
                }
            }
            wl += w;
            sl += w * y;
            ql += w * y * y;
            last_x = Some(x);
        }
    }

    /// Offers the split sending values `<= below` left, whose left side has
    /// (weight, sum, sum of squares) `left` of the centered targets.
    #[inline]
    pub(crate) fn offer_stats(
        &mut self,
        feature: usize,
        below: f64,
        left: (f64, f64, f64),
        totals: (f64, f64, f64),
    ) {
        let (w_tot, s_tot, q_tot) = totals;
        let (wl, sl, ql) = left;
        let wr = w_tot - wl;
        let sse_left = (ql - sl * sl / wl).max(0.0);
        let sse_right = ((q_tot - ql) - (s_tot - sl) * (s_tot - sl) / wr).max(0.0);
        self.offer(Found {
            feature,
            below,
            sse: sse_left + sse_right,
            left_weight: wl,
            left_sum: sl,
        });
    }
}

/// Midpoint of `a < b` that still separates them in floating point.
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) * 0.5;
    if m >= b || !m.is_finite() {
        a
    } else {
        m
    }
}

/// Midpoint between `below` and the next larger value of the training
/// column. `distinct` is the column's distinct values in ascending order.
pub(crate) fn training_threshold(distinct: &[f64], below: f64) -> f64 {
    let k = distinct.partition_point(|&v| v <= below);
    match distinct.get(k) {
        Some(&above) => midpoint(below, above),
        None => below,
    }
}

/// Sorted distinct values of a column.
pub(crate) fn distinct_values(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Finds the least-squares split of `rows` over the features in
/// `feature_subset`. Rows may repeat (bootstrap draws).
///
/// Returns `None` when fewer than two rows are given or no listed feature
/// takes two distinct values on them.
pub fn best_split(
    view: &SampleView<'_>,
    rows: &[usize],
    feature_subset: &[usize],
) -> Result<Option<SplitCandidate>> {
    if rows.is_empty() {
        return Err(Error::domain("best_split needs at least one row"));
    }
    if feature_subset.is_empty() {
        return Err(Error::domain("best_split needs at least one feature"));
    }
    let p = view.n_features();
    if let Some(&bad) = rows.iter().find(|&&i| i >= view.n_rows()) {
        return Err(Error::domain(format!("row {bad} out of range")));
    }
    if let Some(&bad) = feature_subset.iter().find(|&&j| j >= p) {
        return Err(Error::domain(format!("feature {bad} out of range (p = {p})")));
    }
    if rows.len() < 2 {
        return Ok(None);
    }

    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| view.target(i)).sum::<f64>() / n;
    let centered: Vec<f64> = rows.iter().map(|&i| view.target(i) - mean).collect();
    let s_tot: f64 = centered.iter().sum();
    let q_tot: f64 = centered.iter().map(|y| y * y).sum();

    let mut features = feature_subset.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut search = BestSplit::new(q_tot);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for &j in &features {
        order.sort_by(|&a, &b| view.value(rows[a], j).total_cmp(&view.value(rows[b], j)));
        search.scan(
            j,
            order.iter().map(|&k| (view.value(rows[k], j), 1.0, centered[k])),
            (n, s_tot, q_tot),
        );
    }

    Ok(search.best.map(|f| {
        let column = distinct_values((0..view.n_rows()).map(|i| view.value(i, f.feature)));
        let threshold = training_threshold(&column, f.below);
        let left_count = rows
            .iter()
            .filter(|&&i| view.value(i, f.feature) <= threshold)
            .count();
        let right_count = rows.len() - left_count;
        SplitCandidate {
            feature: f.feature,
            threshold,
            sse: f.sse,
            left_mean: mean + f.left_sum / f.left_weight,
            right_mean: mean + (s_tot - f.left_sum) / (n - f.left_weight),
            left_count,
            right_count,
        }
    }))
}
