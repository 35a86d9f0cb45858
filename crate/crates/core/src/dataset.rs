//! Record ingestion, feature encoding and the firm/date sample split.
//!
//! Features follow a fixed layout: the numeric columns `e2c_bps`,
//! `ig_cdx_bps` and `market_cap`, the ordinal `rating` (see
//! [`Rating::code`]), then one dummy per retained country and per retained
//! sector. Within each one-hot group the category with the fewest
//! observations is dropped (ties: lexicographically smallest name) and the
//! remaining categories are ordered by name.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chrono::NaiveDate;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forest::SampleView;
use crate::rating::{merge_ratings, Rating};

/// Identifies one firm on one date.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub firm_id: String,
    pub date: NaiveDate,
}

impl RowKey {
    pub fn new(firm_id: impl Into<String>, date: NaiveDate) -> Self {
        RowKey {
            firm_id: firm_id.into(),
            date,
        }
    }
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.firm_id, self.date)
    }
}

/// One firm-date observation before encoding. Missing values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub key: RowKey,
    pub e2c_bps: Option<f64>,
    pub cds5y_bps: Option<f64>,
    pub ig_cdx_bps: Option<f64>,
    pub market_cap: Option<f64>,
    pub sp_rating: Option<Rating>,
    pub moody_rating: Option<Rating>,
    pub sector: Option<String>,
    pub country: Option<String>,
}

impl RawRecord {
    pub fn rating(&self) -> Option<Rating> {
        merge_ratings(self.sp_rating, self.moody_rating)
    }

    /// True when every field the feature matrix needs is present.
    pub fn is_complete(&self) -> bool {
        self.e2c_bps.is_some()
            && self.cds5y_bps.is_some()
            && self.ig_cdx_bps.is_some()
            && self.market_cap.is_some()
            && self.rating().is_some()
            && self.sector.is_some()
            && self.country.is_some()
    }
}

/// Keeps the complete records, in input order.
pub fn drop_incomplete(records: Vec<RawRecord>) -> Vec<RawRecord> {
    records.into_iter().filter(RawRecord::is_complete).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Numeric,
    Ordinal,
    Dummy,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Ordinal => "ordinal",
            ColumnKind::Dummy => "dummy",
        }
    }

    pub fn parse(s: &str) -> Option<ColumnKind> {
        match s {
            "numeric" => Some(ColumnKind::Numeric),
            "ordinal" => Some(ColumnKind::Ordinal),
            "dummy" => Some(ColumnKind::Dummy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

pub const COUNTRY_PREFIX: &str = "country_";
pub const SECTOR_PREFIX: &str = "sector_";

const BASE_COLUMNS: [(&str, ColumnKind); 4] = [
    ("e2c_bps", ColumnKind::Numeric),
    ("ig_cdx_bps", ColumnKind::Numeric),
    ("market_cap", ColumnKind::Numeric),
    ("rating", ColumnKind::Ordinal),
];

/// Index of the E2C column in every encoded matrix.
pub const E2C_COLUMN: usize = 0;

/// Fitted encoding: the retained dummy categories of each one-hot group and
/// the dropped reference category, when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    pub countries: Vec<String>,
    pub sectors: Vec<String>,
    pub country_reference: Option<String>,
    pub sector_reference: Option<String>,
}

impl FeatureSchema {
    /// Learns the dummy categories from complete records.
    pub fn fit(records: &[RawRecord]) -> FeatureSchema {
        let (countries, country_reference) =
            retained_categories(records.iter().filter_map(|r| r.country.as_deref()));
        let (sectors, sector_reference) =
            retained_categories(records.iter().filter_map(|r| r.sector.as_deref()));
        FeatureSchema {
            countries,
            sectors,
            country_reference,
            sector_reference,
        }
    }

    pub fn columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> = BASE_COLUMNS
            .iter()
            .map(|(name, kind)| Column {
                name: (*name).to_string(),
                kind: *kind,
            })
            .collect();
        for (prefix, cats) in [(COUNTRY_PREFIX, &self.countries), (SECTOR_PREFIX, &self.sectors)] {
            cols.extend(cats.iter().map(|c| Column {
                name: format!("{prefix}{c}"),
                kind: ColumnKind::Dummy,
            }));
        }
        cols
    }

    pub fn n_features(&self) -> usize {
        BASE_COLUMNS.len() + self.countries.len() + self.sectors.len()
    }

    /// Rebuilds a schema from an ordered column list. Reference categories
    /// are not recoverable from the columns and are left unset.
    pub fn from_columns(columns: &[Column]) -> Result<FeatureSchema> {
        let base: Vec<(&str, ColumnKind)> = columns
            .iter()
            .take(BASE_COLUMNS.len())
            .map(|c| (c.name.as_str(), c.kind))
            .collect();
        if base != BASE_COLUMNS {
            return Err(Error::Incompatible(
                "feature columns do not start with e2c_bps, ig_cdx_bps, market_cap, rating".into(),
            ));
        }
        let mut schema = FeatureSchema {
            countries: Vec::new(),
            sectors: Vec::new(),
            country_reference: None,
            sector_reference: None,
        };
        for col in &columns[BASE_COLUMNS.len()..] {
            if col.kind != ColumnKind::Dummy {
                return Err(Error::Incompatible(format!("unexpected column `{}`", col.name)));
            }
            if let Some(c) = col.name.strip_prefix(COUNTRY_PREFIX) {
                if !schema.sectors.is_empty() {
                    return Err(Error::Incompatible("country dummies after sector dummies".into()));
                }
                schema.countries.push(c.to_string());
            } else if let Some(s) = col.name.strip_prefix(SECTOR_PREFIX) {
                schema.sectors.push(s.to_string());
            } else {
                return Err(Error::Incompatible(format!("unexpected column `{}`", col.name)));
            }
        }
        if schema.columns() != columns {
            return Err(Error::Incompatible("dummy columns are not in canonical order".into()));
        }
        Ok(schema)
    }

    /// Encodes complete records. Categories outside the schema leave their
    /// dummy group all zero and are reported through the returned warnings.
    pub fn transform(&self, records: &[RawRecord]) -> Result<(FeatureMatrix, Vec<String>)> {
        let p = self.n_features();
        let mut data = Vec::with_capacity(records.len() * p);
        let mut keys = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        let mut unseen: BTreeSet<String> = BTreeSet::new();

        for rec in records {
            let incomplete = || Error::domain(format!("record {} is incomplete", rec.key));
            let rating = rec.rating().ok_or_else(incomplete)?;
            let country = rec.country.as_deref().ok_or_else(incomplete)?;
            let sector = rec.sector.as_deref().ok_or_else(incomplete)?;
            let numeric = [
                rec.e2c_bps.ok_or_else(incomplete)?,
                rec.ig_cdx_bps.ok_or_else(incomplete)?,
                rec.market_cap.ok_or_else(incomplete)?,
            ];
            let label = rec.cds5y_bps.ok_or_else(incomplete)?;
            if let Some(bad) = numeric.iter().chain([&label]).find(|v| !v.is_finite()) {
                return Err(Error::domain(format!("record {} has non-finite value {bad}", rec.key)));
            }

            data.extend_from_slice(&numeric);
            data.push(f64::from(rating.code()));
            for (group, cats, reference, value) in [
                ("country", &self.countries, &self.country_reference, country),
                ("sector", &self.sectors, &self.sector_reference, sector),
            ] {
                let hit = cats.iter().position(|c| c == value);
                if hit.is_none() && reference.as_deref() != Some(value) {
                    unseen.insert(format!("{group} `{value}`"));
                }
                data.extend((0..cats.len()).map(|i| if Some(i) == hit { 1.0 } else { 0.0 }));
            }
            keys.push(rec.key.clone());
            labels.push(label);
        }

        let warnings: Vec<String> = unseen
            .into_iter()
            .map(|u| format!("unseen {u}: dummy group left at zero"))
            .collect();
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok((
            FeatureMatrix {
                columns: self.columns(),
                keys,
                labels,
                data,
            },
            warnings,
        ))
    }
}

/// Retained categories sorted by name, and the dropped reference category.
fn retained_categories<'a>(values: impl Iterator<Item = &'a str>) -> (Vec<String>, Option<String>) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    // BTreeMap iterates by name, so min_by_key keeps the smallest name on ties.
    let dropped = counts.iter().min_by_key(|(_, n)| **n).map(|(name, _)| *name);
    let kept = counts
        .keys()
        .filter(|name| Some(**name) != dropped)
        .map(|name| name.to_string())
        .collect();
    (kept, dropped.map(str::to_string))
}

/// Encoded design matrix: row-major features, labels and row keys.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<Column>,
    pub keys: Vec<RowKey>,
    pub labels: Vec<f64>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        columns: Vec<Column>,
        keys: Vec<RowKey>,
        labels: Vec<f64>,
        data: Vec<f64>,
    ) -> Result<FeatureMatrix> {
        if keys.len() != labels.len() || data.len() != labels.len() * columns.len() {
            return Err(Error::domain(format!(
                "shape mismatch: {} keys, {} labels, {} values for {} columns",
                keys.len(),
                labels.len(),
                data.len(),
                columns.len()
            )));
        }
        if data.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(Error::domain("feature matrix contains a missing or non-finite value"));
        }
        Ok(FeatureMatrix {
            columns,
            keys,
            labels,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn view(&self) -> SampleView<'_> {
        SampleView::new(&self.data, self.n_features(), &self.labels)
            .expect("matrix shape is checked at construction")
    }

    /// Copies the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_features());
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            columns: self.columns.clone(),
            keys: rows.iter().map(|&i| self.keys[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            data,
        }
    }

    /// Applies `f` to every value of column `j`.
    pub fn map_column(&mut self, j: usize, f: impl Fn(f64) -> f64) {
        let p = self.n_features();
        for v in self.data.iter_mut().skip(j).step_by(p) {
            *v = f(*v);
        }
    }
}

/// Fits the schema on `records` and encodes them.
pub fn encode_features(records: &[RawRecord]) -> Result<FeatureMatrix> {
    let schema = FeatureSchema::fit(records);
    schema.transform(records).map(|(m, _)| m)
}

/// Firms and dates withheld from the in-sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub firm_fraction: f64,
    pub date_fraction: f64,
    pub seed: u64,
    pub removed_firms: Vec<String>,
    pub removed_dates: Vec<NaiveDate>,
}

impl SplitManifest {
    /// True when the row's firm and date were both retained.
    pub fn is_in_sample(&self, key: &RowKey) -> bool {
        self.removed_firms.binary_search(&key.firm_id).is_err()
            && self.removed_dates.binary_search(&key.date).is_err()
    }

    /// Row indices of `keys` on each side of the split, in input order.
    pub fn partition(&self, keys: &[RowKey]) -> (Vec<usize>, Vec<usize>) {
        (0..keys.len()).partition(|&i| self.is_in_sample(&keys[i]))
    }

    /// CSV listing: `kind,value` with kinds `firm` and `date`.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# firm_fraction={} date_fraction={} seed={}\nkind,value\n",
            self.firm_fraction, self.date_fraction, self.seed
        );
        for f in &self.removed_firms {
            out.push_str(&format!("firm,{f}\n"));
        }
        for d in &self.removed_dates {
            out.push_str(&format!("date,{d}\n"));
        }
        out
    }
}

/// Result of [`split_in_out`].
#[derive(Debug, Clone)]
pub struct SampleSplit {
    pub manifest: SplitManifest,
    pub in_rows: Vec<usize>,
    pub out_rows: Vec<usize>,
    pub in_sample: FeatureMatrix,
    pub out_of_sample: FeatureMatrix,
}

impl SampleSplit {
    /// Fraction of rows that landed out of sample.
    pub fn out_fraction(&self) -> f64 {
        let n = self.in_rows.len() + self.out_rows.len();
        if n == 0 {
            0.0
        } else {
            self.out_rows.len() as f64 / n as f64
        }
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Withholds a random `firm_frac` of the firms and `date_frac` of the dates.
///
/// Firms and dates are sorted before sampling, so the outcome depends only on
/// the set of keys and the seed. A row stays in sample only when both its
/// firm and its date are retained.
pub fn split_in_out(
    matrix: &FeatureMatrix,
    firm_frac: f64,
    date_frac: f64,
    seed: u64,
) -> Result<SampleSplit> {
    for (name, f) in [("firm", firm_frac), ("date", date_frac)] {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::domain(format!("{name} fraction {f} not in [0, 1)")));
        }
    }
    let firms: Vec<String> = matrix
        .keys
        .iter()
        .map(|k| k.firm_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let dates: Vec<NaiveDate> = matrix
        .keys
        .iter()
        .map(|k| k.date)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_firms = round_half_up(firm_frac * firms.len() as f64).min(firms.len());
    let n_dates = round_half_up(date_frac * dates.len() as f64).min(dates.len());
    let mut removed_firms: Vec<String> = index::sample(&mut rng, firms.len(), n_firms)
        .into_iter()
        .map(|i| firms[i].clone())
        .collect();
    let mut removed_dates: Vec<NaiveDate> = index::sample(&mut rng, dates.len(), n_dates)
        .into_iter()
        .map(|i| dates[i])
        .collect();
    removed_firms.sort();
    removed_dates.sort();

    let manifest = SplitManifest {
        firm_fraction: firm_frac,
        date_fraction: date_frac,
        seed,
        removed_firms,
        removed_dates,
    };
    let (in_rows, out_rows) = manifest.partition(&matrix.keys);
    Ok(SampleSplit {
        in_sample: matrix.select(&in_rows),
        out_of_sample: matrix.select(&out_rows),
        manifest,
        in_rows,
        out_rows,
    })
}

/// Checks that no key occurs twice.
pub fn check_unique_keys(keys: &[RowKey]) -> Result<()> {
    let mut seen = HashSet::with_capacity(keys.len());
    for k in keys {
        if !seen.insert(k) {
            return Err(Error::domain(format!("duplicate row {k}")));
        }
    }
    Ok(())
}
