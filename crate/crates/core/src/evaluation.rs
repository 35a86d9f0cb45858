//! Comparison and accuracy reports for CDS, E2C, CreditGrades and forest
//! spreads.
//!
//! Comparison tables (median and truncated mean per bucket) use every row.
//! Accuracy tables use the out-of-sample rows only; inside each bucket the
//! rows with the most extreme actual CDS are trimmed before RMSE, MAPE and
//! MASE are computed. Buckets too small to trim are skipped with a warning.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataset::RowKey;
use crate::error::{Error, Result};
use crate::metrics::{
    avg_correlation, describe, mape, mase, median, r_squared, rmse, trim_count, truncated_mean,
    Describe, Grouping, PairedSeries, MASE_SCALING,
};
use crate::rating::{Rating, RatingBucket};

pub const TRIM_FRACTION: f64 = 0.10;

/// Series names in table order. The first is the observed CDS.
pub const SERIES: [&str; 4] = ["cds", "e2c", "creditgrades", "forest"];
pub const MODELS: [&str; 3] = ["e2c", "creditgrades", "forest"];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub key: RowKey,
    pub cds: f64,
    pub e2c: f64,
    pub creditgrades: f64,
    pub forest: f64,
    pub rating: Rating,
    pub sector: String,
    pub in_sample: bool,
}

impl EvalRow {
    fn series(&self) -> [f64; 4] {
        [self.cds, self.e2c, self.creditgrades, self.forest]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BucketBy {
    Rating,
    Sector,
}

impl BucketBy {
    fn name(self) -> &'static str {
        match self {
            BucketBy::Rating => "rating",
            BucketBy::Sector => "sector",
        }
    }
}

/// Indices of `rows` per bucket: rating buckets best first, sectors by name.
fn buckets(rows: &[&EvalRow], by: BucketBy) -> Vec<(String, Vec<usize>)> {
    match by {
        BucketBy::Rating => RatingBucket::ALL
            .iter()
            .map(|b| {
                let idx = (0..rows.len()).filter(|&i| rows[i].rating.bucket() == *b).collect();
                (b.label().to_string(), idx)
            })
            .filter(|(_, idx): &(String, Vec<usize>)| !idx.is_empty())
            .collect(),
        BucketBy::Sector => {
            let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in rows.iter().enumerate() {
                m.entry(r.sector.as_str()).or_default().push(i);
            }
            m.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub bucket: String,
    pub obs: usize,
    /// In [`SERIES`] order.
    pub median: [f64; 4],
    pub truncated_mean: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub bucket: String,
    /// Rows left after trimming.
    pub obs: usize,
    /// `[model][rmse, mape, mase]`, models in [`MODELS`] order. `None` when
    /// the statistic is undefined on this bucket.
    pub metrics: [[Option<f64>; 3]; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverallRow {
    pub sample: &'static str,
    pub model: &'static str,
    pub obs: usize,
    pub r_squared: Option<f64>,
    pub rmse: f64,
    pub mape: Option<f64>,
    pub mase: Option<f64>,
    pub corr_by_firm: Option<f64>,
    pub corr_by_date: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub comparison_by_rating: Vec<ComparisonRow>,
    pub comparison_by_sector: Vec<ComparisonRow>,
    pub accuracy_by_rating: Vec<AccuracyRow>,
    pub accuracy_by_sector: Vec<AccuracyRow>,
    pub overall: Vec<OverallRow>,
    pub describe: Vec<(&'static str, Describe)>,
    /// Averaged pairwise correlations of [`SERIES`], within firms and within
    /// dates. `None` where every group is degenerate.
    pub correlation_by_firm: [[Option<f64>; 4]; 4],
    pub correlation_by_date: [[Option<f64>; 4]; 4],
    pub warnings: Vec<String>,
}

fn comparison(rows: &[&EvalRow], by: BucketBy) -> Result<Vec<ComparisonRow>> {
    let mut out = Vec::new();
    for (bucket, idx) in buckets(rows, by) {
        let mut med = [0.0; 4];
        let mut tm = [0.0; 4];
        for s in 0..4 {
            let v: Vec<f64> = idx.iter().map(|&i| rows[i].series()[s]).collect();
            med[s] = median(&v)?;
            tm[s] = truncated_mean(&v, TRIM_FRACTION)?;
        }
        out.push(ComparisonRow {
            bucket,
            obs: idx.len(),
            median: med,
            truncated_mean: tm,
        });
    }
    Ok(out)
}

fn series_for(rows: &[&EvalRow], model: usize) -> Result<PairedSeries> {
    PairedSeries::new(
        rows.iter().map(|r| r.key.clone()).collect(),
        rows.iter().map(|r| r.cds).collect(),
        rows.iter().map(|r| r.series()[model + 1]).collect(),
    )
}

fn accuracy(rows: &[&EvalRow], by: BucketBy, warnings: &mut Vec<String>) -> Result<Vec<AccuracyRow>> {
    let min_rows = (1.0 / TRIM_FRACTION).round() as usize;
    let mut out = Vec::new();
    for (bucket, mut idx) in buckets(rows, by) {
        if idx.len() < min_rows {
            let w = format!(
                "{} bucket `{bucket}` has {} out-of-sample rows (< {min_rows}); skipped",
                by.name(),
                idx.len()
            );
            log::warn!("{w}");
            warnings.push(w);
            continue;
        }
        idx.sort_by(|&a, &b| rows[a].cds.total_cmp(&rows[b].cds).then(rows[a].key.cmp(&rows[b].key)));
        let k = trim_count(idx.len(), TRIM_FRACTION);
        let kept: Vec<&EvalRow> = idx[k..idx.len() - k].iter().map(|&i| rows[i]).collect();
        let mut metrics = [[None; 3]; 3];
        for (m, slot) in metrics.iter_mut().enumerate() {
            let s = series_for(&kept, m)?;
            *slot = [Some(rmse(&s)), mape(&s).ok(), mase(&s).ok()];
        }
        out.push(AccuracyRow {
            bucket,
            obs: kept.len(),
            metrics,
        });
    }
    Ok(out)
}

fn overall(rows: &[&EvalRow], sample: &'static str) -> Result<Vec<OverallRow>> {
    let mut out = Vec::new();
    if rows.is_empty() {
        return Ok(out);
    }
    for (m, model) in MODELS.iter().enumerate() {
        let s = series_for(rows, m)?;
        out.push(OverallRow {
            sample,
            model,
            obs: s.len(),
            r_squared: r_squared(&s).ok(),
            rmse: rmse(&s),
            mape: mape(&s).ok(),
            mase: mase(&s).ok(),
            corr_by_firm: avg_correlation(&s, Grouping::ByFirm).ok().map(|c| c.value),
            corr_by_date: avg_correlation(&s, Grouping::ByDate).ok().map(|c| c.value),
        });
    }
    Ok(out)
}

fn correlation_matrix(rows: &[&EvalRow], mode: Grouping) -> [[Option<f64>; 4]; 4] {
    let keys: Vec<RowKey> = rows.iter().map(|r| r.key.clone()).collect();
    let mut m = [[None; 4]; 4];
    for a in 0..4 {
        for b in a..4 {
            let s = PairedSeries::new(
                keys.clone(),
                rows.iter().map(|r| r.series()[a]).collect(),
                rows.iter().map(|r| r.series()[b]).collect(),
            );
            let v = s.ok().and_then(|s| avg_correlation(&s, mode).ok()).map(|c| c.value);
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    m
}

pub fn evaluate(rows: &[EvalRow]) -> Result<EvaluationReport> {
    if rows.is_empty() {
        return Err(Error::domain("nothing to evaluate: no rows"));
    }
    let all: Vec<&EvalRow> = rows.iter().collect();
    let ins: Vec<&EvalRow> = rows.iter().filter(|r| r.in_sample).collect();
    let oos: Vec<&EvalRow> = rows.iter().filter(|r| !r.in_sample).collect();
    let mut warnings = Vec::new();
    if oos.is_empty() {
        warnings.push("no out-of-sample rows: accuracy tables are empty".to_string());
    }

    let keys: Vec<RowKey> = rows.iter().map(|r| r.key.clone()).collect();
    let mut desc = Vec::new();
    for (s, name) in SERIES.iter().enumerate() {
        let v: Vec<f64> = rows.iter().map(|r| r.series()[s]).collect();
        desc.push((*name, describe(&keys, &v)?));
    }

    let mut overall_rows = overall(&ins, "in")?;
    overall_rows.extend(overall(&oos, "out")?);

    Ok(EvaluationReport {
        comparison_by_rating: comparison(&all, BucketBy::Rating)?,
        comparison_by_sector: comparison(&all, BucketBy::Sector)?,
        accuracy_by_rating: accuracy(&oos, BucketBy::Rating, &mut warnings)?,
        accuracy_by_sector: accuracy(&oos, BucketBy::Sector, &mut warnings)?,
        overall: overall_rows,
        describe: desc,
        correlation_by_firm: correlation_matrix(&all, Grouping::ByFirm),
        correlation_by_date: correlation_matrix(&all, Grouping::ByDate),
        warnings,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn comparison_csv(rows: &[ComparisonRow], by: BucketBy) -> String {
    let mut s = format!("# truncated means drop {}% of points at each end\n", TRIM_FRACTION * 100.0);
    s.push_str(by.name());
    s.push_str(",obs");
    for stat in ["median", "tmean"] {
        for name in SERIES {
            let _ = write!(s, ",{stat}_{name}");
        }
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{}", csv_field(&r.bucket), r.obs);
        for v in r.median.iter().chain(&r.truncated_mean) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn accuracy_csv(rows: &[AccuracyRow], by: BucketBy) -> String {
    let mut s = format!(
        "# out-of-sample rows; top and bottom {}% by actual CDS removed per bucket\n# MASE scaling: {MASE_SCALING}\n",
        TRIM_FRACTION * 100.0
    );
    s.push_str(by.name());
    s.push_str(",obs");
    for stat in ["rmse", "mape", "mase"] {
        for model in MODELS {
            let _ = write!(s, ",{stat}_{model}");
        }
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{}", csv_field(&r.bucket), r.obs);
        for stat in 0..3 {
            for model in 0..3 {
                let _ = write!(s, ",{}", opt(r.metrics[model][stat]));
            }
        }
        s.push('\n');
    }
    s
}

pub fn overall_csv(rows: &[OverallRow]) -> String {
    let mut s = format!("# MASE scaling: {MASE_SCALING}\n");
    s.push_str("sample,model,obs,r_squared,rmse,mape,mase,corr_by_firm,corr_by_date\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.sample,
            r.model,
            r.obs,
            opt(r.r_squared),
            r.rmse,
            opt(r.mape),
            opt(r.mase),
            opt(r.corr_by_firm),
            opt(r.corr_by_date)
        );
    }
    s
}

pub fn describe_csv(rows: &[(&'static str, Describe)]) -> String {
    let mut s = String::from(
        "series,count,firms,dates,mean,std_overall,std_between,std_within,min,q25,median,q75,max\n",
    );
    for (name, d) in rows {
        let _ = writeln!(
            s,
            "{name},{},{},{},{},{},{},{},{},{},{},{},{}",
            d.count,
            d.firms,
            d.dates,
            d.mean,
            d.std_overall,
            d.std_between,
            d.std_within,
            d.min,
            d.q25,
            d.median,
            d.q75,
            d.max
        );
    }
    s
}

pub fn correlation_csv(m: &[[Option<f64>; 4]; 4], grouping: &str) -> String {
    let mut s = format!("# Pearson correlation within each {grouping}, averaged over groups\nseries");
    for name in SERIES {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for (a, name) in SERIES.iter().enumerate() {
        s.push_str(name);
        for v in &m[a] {
            let _ = write!(s, ",{}", opt(*v));
        }
        s.push('\n');
    }
    s
}

/// One line per firm and date, sorted, for time-series plots.
pub fn timeseries_csv(rows: &[EvalRow]) -> String {
    let mut order: Vec<&EvalRow> = rows.iter().collect();
    order.sort_by(|a, b| a.key.cmp(&b.key));
    let mut s = String::from("firm_id,date,sample,cds_bps,e2c_bps,creditgrades_bps,forest_bps\n");
    for r in order {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            csv_field(&r.key.firm_id),
            r.key.date,
            if r.in_sample { "in" } else { "out" },
            r.cds,
            r.e2c,
            r.creditgrades,
            r.forest
        );
    }
    s
}

impl EvaluationReport {
    /// File name and contents of every report table.
    pub fn files(&self, rows: &[EvalRow]) -> Vec<(&'static str, String)> {
        vec![
            ("comparison_by_rating.csv", comparison_csv(&self.comparison_by_rating, BucketBy::Rating)),
            ("comparison_by_sector.csv", comparison_csv(&self.comparison_by_sector, BucketBy::Sector)),
            ("accuracy_by_rating.csv", accuracy_csv(&self.accuracy_by_rating, BucketBy::Rating)),
            ("accuracy_by_sector.csv", accuracy_csv(&self.accuracy_by_sector, BucketBy::Sector)),
            ("overall_metrics.csv", overall_csv(&self.overall)),
            ("describe.csv", describe_csv(&self.describe)),
            ("correlation_by_firm.csv", correlation_csv(&self.correlation_by_firm, "firm")),
            ("correlation_by_date.csv", correlation_csv(&self.correlation_by_date, "date")),
            ("timeseries.csv", timeseries_csv(rows)),
        ]
    }
}
