//! Accuracy and descriptive statistics for paired panel series.
//!
//! MASE on a panel: the scale is the mean absolute one-step naive error of
//! the *actual* series, computed per firm over its dates in calendar order
//! and then averaged over firms with at least two dates. This adaptation of
//! the single-series definition is reported as [`MASE_SCALING`] wherever a
//! MASE value is written out.

use std::collections::BTreeMap;

use crate::dataset::RowKey;
use crate::error::{Error, Result};

/// Description of the MASE scaling, for report metadata.
pub const MASE_SCALING: &str =
    "per-firm mean absolute lag-1 naive error of the actual series, averaged over firms";

/// Actual and predicted values for a set of firm-date rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    keys: Vec<RowKey>,
    actual: Vec<f64>,
    predicted: Vec<f64>,
}

impl PairedSeries {
    pub fn new(keys: Vec<RowKey>, actual: Vec<f64>, predicted: Vec<f64>) -> Result<Self> {
        if actual.is_empty() {
            return Err(Error::domain("paired series is empty"));
        }
        if keys.len() != actual.len() || predicted.len() != actual.len() {
            return Err(Error::domain(format!(
                "length mismatch: {} keys, {} actual, {} predicted",
                keys.len(),
                actual.len(),
                predicted.len()
            )));
        }
        if actual.iter().chain(&predicted).any(|v| !v.is_finite()) {
            return Err(Error::domain("paired series contains a non-finite value"));
        }
        Ok(PairedSeries {
            keys,
            actual,
            predicted,
        })
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn actual(&self) -> &[f64] {
        &self.actual
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    /// Sub-series of the given rows.
    pub fn subset(&self, rows: &[usize]) -> Result<PairedSeries> {
        PairedSeries::new(
            rows.iter().map(|&i| self.keys[i].clone()).collect(),
            rows.iter().map(|&i| self.actual[i]).collect(),
            rows.iter().map(|&i| self.predicted[i]).collect(),
        )
    }
}

/// `1 - Σ(y - ŷ)² / Σ(y - ȳ)²` on raw slices.
pub fn r_squared_of(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() < 2 || actual.len() != predicted.len() {
        return Err(Error::domain("R² needs at least two paired values"));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let total: f64 = actual.iter().map(|y| (y - mean) * (y - mean)).sum();
    if total == 0.0 {
        return Err(Error::undefined("R² of a constant series"));
    }
    let residual: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    Ok(1.0 - residual / total)
}

/// Coefficient of determination. Can be negative for poor predictors.
pub fn r_squared(s: &PairedSeries) -> Result<f64> {
    r_squared_of(&s.actual, &s.predicted)
}

pub fn rmse(s: &PairedSeries) -> f64 {
    let sq: f64 = s
        .actual
        .iter()
        .zip(&s.predicted)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    (sq / s.len() as f64).sqrt()
}

/// Mean of `|y - ŷ| / |y|`, as a fraction.
pub fn mape(s: &PairedSeries) -> Result<f64> {
    if let Some(i) = s.actual.iter().position(|&y| y == 0.0) {
        return Err(Error::domain(format!(
            "MAPE undefined: actual value is zero at {}",
            s.keys[i]
        )));
    }
    let total: f64 = s
        .actual
        .iter()
        .zip(&s.predicted)
        .map(|(y, f)| (y - f).abs() / y.abs())
        .sum();
    Ok(total / s.len() as f64)
}

/// Mean absolute error scaled by the pooled per-firm naive error.
pub fn mase(s: &PairedSeries) -> Result<f64> {
    let mut by_firm: BTreeMap<&str, Vec<(chrono::NaiveDate, f64)>> = BTreeMap::new();
    for (k, &y) in s.keys.iter().zip(&s.actual) {
        by_firm.entry(&k.firm_id).or_default().push((k.date, y));
    }
    let mut scales = Vec::new();
    for series in by_firm.values_mut() {
        if series.len() < 2 {
            continue;
        }
        series.sort_by_key(|(d, _)| *d);
        let naive: f64 = series.windows(2).map(|w| (w[1].1 - w[0].1).abs()).sum();
        scales.push(naive / (series.len() - 1) as f64);
    }
    if scales.is_empty() {
        return Err(Error::domain("MASE needs a firm observed on at least two dates"));
    }
    let scale = scales.iter().sum::<f64>() / scales.len() as f64;
    if scale == 0.0 {
        return Err(Error::undefined("MASE scale is zero: every firm's series is flat"));
    }
    let mae = s
        .actual
        .iter()
        .zip(&s.predicted)
        .map(|(y, f)| (y - f).abs())
        .sum::<f64>()
        / s.len() as f64;
    Ok(mae / scale)
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("mean of an empty list"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Median; an even count averages the two central values.
pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}

/// Linearly interpolated quantile (`q` in `[0, 1]`).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("quantile of an empty list"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level {q} not in [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Number of points trimmed from each end by [`truncated_mean`].
pub fn trim_count(n: usize, trim_frac: f64) -> usize {
    // the epsilon keeps e.g. 0.1 · 10 from landing just under 1
    (trim_frac * n as f64 + 1e-9).floor() as usize
}

/// Mean after dropping `⌊trim_frac · n⌋` points from each end.
pub fn truncated_mean(values: &[f64], trim_frac: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("truncated mean of an empty list"));
    }
    if !(0.0..0.5).contains(&trim_frac) {
        return Err(Error::domain(format!("trim fraction {trim_frac} not in [0, 0.5)")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = trim_count(v.len(), trim_frac);
    mean(&v[k..v.len() - k])
}

/// Pearson correlation; `None` when either side has zero variance or fewer
/// than two points are given.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    ByFirm,
    ByDate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedCorrelation {
    pub value: f64,
    pub groups_used: usize,
    pub groups_skipped: usize,
}

/// Mean of per-group Pearson correlations. Groups with fewer than two points
/// or zero variance are skipped with a warning.
pub fn mean_group_correlation<'a>(
    groups: impl IntoIterator<Item = (&'a [f64], &'a [f64])>,
) -> Result<AveragedCorrelation> {
    let mut total = 0.0;
    let (mut used, mut skipped) = (0, 0);
    for (a, b) in groups {
        match pearson(a, b) {
            Some(r) => {
                total += r;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} degenerate group(s) skipped in averaged correlation");
    }
    if used == 0 {
        return Err(Error::undefined("no group has a defined correlation"));
    }
    Ok(AveragedCorrelation {
        value: total / used as f64,
        groups_used: used,
        groups_skipped: skipped,
    })
}

/// Correlation between actual and predicted, computed within each firm (over
/// time) or within each date (across firms), then averaged.
pub fn avg_correlation(s: &PairedSeries, mode: Grouping) -> Result<AveragedCorrelation> {
    let groups = group_rows(s.keys(), mode);
    let split: Vec<(Vec<f64>, Vec<f64>)> = groups
        .values()
        .map(|rows| {
            (
                rows.iter().map(|&i| s.actual[i]).collect(),
                rows.iter().map(|&i| s.predicted[i]).collect(),
            )
        })
        .collect();
    mean_group_correlation(split.iter().map(|(a, b)| (a.as_slice(), b.as_slice())))
}

/// Row indices grouped by firm or date, groups in key order.
pub fn group_rows(keys: &[RowKey], mode: Grouping) -> BTreeMap<String, Vec<usize>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        let g = match mode {
            Grouping::ByFirm => k.firm_id.clone(),
            Grouping::ByDate => k.date.to_string(),
        };
        groups.entry(g).or_default().push(i);
    }
    groups
}

/// Summary statistics of one panel variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Describe {
    pub count: usize,
    pub firms: usize,
    pub dates: usize,
    pub mean: f64,
    pub std_overall: f64,
    /// Standard deviation of the firm means.
    pub std_between: f64,
    /// Standard deviation of the deviations from firm means.
    pub std_within: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let m = values.clone().sum::<f64>() / n as f64;
    (values.map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn describe(keys: &[RowKey], values: &[f64]) -> Result<Describe> {
    if values.is_empty() || keys.len() != values.len() {
        return Err(Error::domain("describe needs a non-empty keyed series"));
    }
    let firms = group_rows(keys, Grouping::ByFirm);
    let dates = group_rows(keys, Grouping::ByDate).len();
    let firm_means: BTreeMap<&String, f64> = firms
        .iter()
        .map(|(f, rows)| (f, rows.iter().map(|&i| values[i]).sum::<f64>() / rows.len() as f64))
        .collect();
    let within: Vec<f64> = keys
        .iter()
        .zip(values)
        .map(|(k, v)| v - firm_means[&k.firm_id])
        .collect();
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(Describe {
        count: values.len(),
        firms: firms.len(),
        dates,
        mean: mean(values)?,
        std_overall: sample_std(values.iter().copied()),
        std_between: sample_std(firm_means.values().copied()),
        std_within: sample_std(within.iter().copied()),
        min,
        q25: quantile(values, 0.25)?,
        median: quantile(values, 0.5)?,
        q75: quantile(values, 0.75)?,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, d).unwrap()
    }

    fn series(actual: &[f64], predicted: &[f64]) -> PairedSeries {
        let keys = (0..actual.len()).map(|i| RowKey::new("F", day(1 + i as u32))).collect();
        PairedSeries::new(keys, actual.to_vec(), predicted.to_vec()).unwrap()
    }

    #[test]
    fn r_squared_examples() {
        assert_eq!(r_squared(&series(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])).unwrap(), 1.0);
        assert_eq!(r_squared(&series(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0])).unwrap(), 0.0);
        assert_eq!(r_squared(&series(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0])).unwrap(), 0.5);
        assert!(r_squared(&series(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])).unwrap() < 0.0);
        assert!(matches!(
            r_squared(&series(&[2.0, 2.0], &[1.0, 3.0])),
            Err(Error::Undefined(_))
        ));
        assert!(r_squared(&series(&[2.0], &[1.0])).is_err());
    }

    #[test]
    fn error_metric_examples() {
        assert!((mape(&series(&[100.0, 200.0], &[110.0, 180.0])).unwrap() - 0.10).abs() < 1e-15);
        let same = series(&[3.0, 5.0, 4.0], &[3.0, 5.0, 4.0]);
        assert_eq!(rmse(&same), 0.0);
        assert_eq!(mape(&same).unwrap(), 0.0);
        assert_eq!(mase(&same).unwrap(), 0.0);
        assert_eq!(rmse(&series(&[3.0, 4.0], &[0.0, 0.0])), (12.5f64).sqrt());
        assert!(mape(&series(&[0.0, 1.0], &[1.0, 1.0])).is_err());
    }

    #[test]
    fn mase_scaling_by_firm() {
        // firm A: 10, 14, 12 → naive errors 4, 2 → scale 3
        // firm B: 5, 6       → naive error 1     → scale 1
        // pooled scale 2; MAE = (1+1+1+1+1)/5 = 1 → MASE 0.5
        let keys = vec![
            RowKey::new("A", day(3)),
            RowKey::new("B", day(1)),
            RowKey::new("A", day(1)),
            RowKey::new("A", day(2)),
            RowKey::new("B", day(2)),
        ];
        let actual = vec![12.0, 5.0, 10.0, 14.0, 6.0];
        let predicted = vec![13.0, 6.0, 11.0, 13.0, 5.0];
        let s = PairedSeries::new(keys, actual, predicted).unwrap();
        assert!((mase(&s).unwrap() - 0.5).abs() < 1e-15);

        let single = PairedSeries::new(
            vec![RowKey::new("A", day(1)), RowKey::new("B", day(1))],
            vec![1.0, 2.0],
            vec![1.0, 2.0],
        )
        .unwrap();
        assert!(mase(&single).is_err());
    }

    #[test]
    fn truncated_mean_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(truncated_mean(&v, 0.10).unwrap(), 5.5);
        assert_eq!(truncated_mean(&[4.0; 7], 0.2).unwrap(), 4.0);
        assert_eq!(truncated_mean(&[1.0, 2.0, 6.0], 0.0).unwrap(), 3.0);
        assert!(truncated_mean(&[], 0.1).is_err());
        assert!(truncated_mean(&[1.0], 0.5).is_err());
        // [1, 2, 3, 100] trimmed by 0.25 drops 1 and 100
        assert_eq!(truncated_mean(&[100.0, 1.0, 3.0, 2.0], 0.25).unwrap(), 2.5);
    }

    #[test]
    fn median_and_quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert_eq!(quantile(&[0.0, 10.0], 0.25).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    /// `r·x + sqrt(1 - r²)·z` with centered, orthogonal, equal-norm `x` and
    /// `z` has correlation exactly `r` with `x`.
    fn blended(r: f64) -> (Vec<f64>, Vec<f64>) {
        let x = vec![1.0, -1.0, 1.0, -1.0];
        let z = vec![1.0, 1.0, -1.0, -1.0];
        let y = x
            .iter()
            .zip(&z)
            .map(|(a, b)| r * a + (1.0 - r * r).sqrt() * b)
            .collect();
        (x, y)
    }

    #[test]
    fn averaged_correlation_examples() {
        let (x1, y1) = blended(0.8);
        let (x2, y2) = blended(0.6);
        assert!((pearson(&x1, &y1).unwrap() - 0.8).abs() < 1e-12);
        assert!((pearson(&x2, &y2).unwrap() - 0.6).abs() < 1e-12);
        let avg = mean_group_correlation([(&x1[..], &y1[..]), (&x2[..], &y2[..])]).unwrap();
        assert!((avg.value - 0.7).abs() < 1e-12);

        let keys: Vec<RowKey> = ["A", "A", "A", "B", "B", "B"]
            .iter()
            .zip([1, 2, 3, 1, 2, 3])
            .map(|(f, d)| RowKey::new(*f, day(d)))
            .collect();
        let actual = vec![1.0, 3.0, 2.0, 5.0, 9.0, 4.0];
        let same = PairedSeries::new(keys.clone(), actual.clone(), actual.clone()).unwrap();
        assert!((avg_correlation(&same, Grouping::ByFirm).unwrap().value - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = actual.iter().map(|v| -v).collect();
        let opposite = PairedSeries::new(keys.clone(), actual.clone(), neg).unwrap();
        assert!((avg_correlation(&opposite, Grouping::ByDate).unwrap().value + 1.0).abs() < 1e-12);

        let flat = PairedSeries::new(keys, vec![1.0; 6], actual).unwrap();
        assert!(avg_correlation(&flat, Grouping::ByFirm).is_err());
    }

    #[test]
    fn describe_panel() {
        let keys = vec![
            RowKey::new("A", day(1)),
            RowKey::new("A", day(2)),
            RowKey::new("B", day(1)),
            RowKey::new("B", day(2)),
        ];
        let d = describe(&keys, &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!((d.count, d.firms, d.dates), (4, 2, 2));
        assert_eq!(d.mean, 4.0);
        assert_eq!(d.median, 4.0);
        // firm means 2 and 6
        assert!((d.std_between - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!((d.min, d.max), (1.0, 7.0));
    }

    proptest! {
        #[test]
        fn truncated_mean_in_range(v in proptest::collection::vec(-1e6..1e6f64, 1..60), t in 0.0..0.49f64) {
            let m = truncated_mean(&v, t).unwrap();
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9);
        }

        #[test]
        fn rmse_zero_iff_exact(a in proptest::collection::vec(-1e3..1e3f64, 2..30), k in 0usize..30, d in 1e-3..10.0f64) {
            let mut p = a.clone();
            prop_assert_eq!(rmse(&series(&a, &p)), 0.0);
            let k = k % p.len();
            p[k] += d;
            prop_assert!(rmse(&series(&a, &p)) > 0.0);
        }

        #[test]
        fn r_squared_at_most_one(a in proptest::collection::vec(-1e3..1e3f64, 3..30), noise in proptest::collection::vec(-10.0..10.0f64, 30)) {
            let p: Vec<f64> = a.iter().zip(&noise).map(|(x, e)| x + e).collect();
            if let Ok(r) = r_squared(&series(&a, &p)) {
                prop_assert!(r <= 1.0);
            }
        }

        #[test]
        fn correlation_affine_invariant(a in proptest::collection::vec(-1e3..1e3f64, 3..20),
                                        b in proptest::collection::vec(-1e3..1e3f64, 20),
                                        scale in 0.01..100.0f64, shift in -1e3..1e3f64) {
            let b = &b[..a.len()];
            if let Some(r) = pearson(&a, b) {
                let a2: Vec<f64> = a.iter().map(|x| scale * x + shift).collect();
                let r2 = pearson(&a2, b).unwrap();
                prop_assert!((r - r2).abs() < 1e-9);
            }
        }
    }
}
