//! The firm-snapshot CSV: one row per firm and date with market data,
//! balance-sheet items, volatility quotes, ratings and the observed spreads.
//!
//! Every column in [`SNAPSHOT_COLUMNS`] must be present in the header (in any
//! order; extra columns are ignored). An empty cell means the value is
//! missing. Nothing is imputed: a row that lacks an input needed for a
//! derived quantity gets a reason string instead of a value.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;

use crate::dataset::{RawRecord, RowKey};
use crate::error::{Error, Result};
use crate::fundamentals::{
    debt_per_share, financial_debt, select_volatility, BalanceSheet, MarketState,
    VolatilityQuotes, HISTORICAL_WINDOWS, IMPLIED_MATURITIES,
};
use crate::rating::Rating;
use crate::structural::{creditgrades_spread, e2c_spread, ModelParams, SpreadInputs};

pub const SNAPSHOT_COLUMNS: [&str; 30] = [
    "firm_id",
    "date",
    "stock_price",
    "market_cap",
    "fx_rate",
    "is_banking",
    "long_term_debt",
    "short_term_debt",
    "other_lt_liabilities",
    "other_st_liabilities",
    "lease_obligations",
    "minority_interest",
    "preferred_equity",
    "hist_vol_30",
    "hist_vol_60",
    "hist_vol_120",
    "hist_vol_200",
    "hist_vol_260",
    "hist_vol_360",
    "impl_vol_3m",
    "impl_vol_6m",
    "impl_vol_12m",
    "impl_vol_18m",
    "impl_vol_24m",
    "sp_rating",
    "moody_rating",
    "sector",
    "country",
    "ig_cdx_bps",
    "cds_5y_bps",
];

/// Columns appended by [`augment_csv`].
pub const DERIVED_COLUMNS: [&str; 5] = [
    "e2c_bps",
    "creditgrades_bps",
    "debt_per_share",
    "selected_vol",
    "reason",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub firm_id: String,
    pub date: Option<NaiveDate>,
    pub stock_price: Option<f64>,
    pub market_cap: Option<f64>,
    pub fx_rate: Option<f64>,
    pub is_banking: Option<bool>,
    pub long_term_debt: Option<f64>,
    pub short_term_debt: Option<f64>,
    pub other_lt_liabilities: Option<f64>,
    pub other_st_liabilities: Option<f64>,
    pub lease_obligations: Option<f64>,
    pub minority_interest: Option<f64>,
    pub preferred_equity: Option<f64>,
    pub vols: VolatilityQuotes,
    pub sp_rating: Option<Rating>,
    pub moody_rating: Option<Rating>,
    pub sector: Option<String>,
    pub country: Option<String>,
    pub ig_cdx_bps: Option<f64>,
    pub cds_5y_bps: Option<f64>,
    /// 1-based line in the source file, 0 when built in memory.
    pub line: usize,
}

/// Quantities derived from one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    pub debt_per_share: f64,
    pub selected_vol: f64,
    pub e2c_bps: f64,
    pub creditgrades_bps: f64,
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::domain(format!("missing {name}")))
}

impl Snapshot {
    pub fn key(&self) -> Result<RowKey> {
        let date = self.date.ok_or_else(|| Error::domain("missing date"))?;
        Ok(RowKey::new(self.firm_id.clone(), date))
    }

    pub fn balance_sheet(&self) -> Result<BalanceSheet> {
        let is_banking = self
            .is_banking
            .ok_or_else(|| Error::domain("missing is_banking"))?;
        // banks only use long-term debt; the other debt items may be absent
        let opt = |v: Option<f64>, name: &str| {
            if is_banking {
                Ok(v.unwrap_or(0.0))
            } else {
                need(v, name)
            }
        };
        let bs = BalanceSheet {
            long_term_debt: need(self.long_term_debt, "long_term_debt")?,
            short_term_debt: opt(self.short_term_debt, "short_term_debt")?,
            other_lt_liabilities: opt(self.other_lt_liabilities, "other_lt_liabilities")?,
            other_st_liabilities: opt(self.other_st_liabilities, "other_st_liabilities")?,
            lease_obligations: opt(self.lease_obligations, "lease_obligations")?,
            minority_interest: need(self.minority_interest, "minority_interest")?,
            preferred_equity: need(self.preferred_equity, "preferred_equity")?,
            is_banking,
        };
        bs.validate()?;
        Ok(bs)
    }

    pub fn market_state(&self) -> Result<MarketState> {
        let m = MarketState {
            stock_price: need(self.stock_price, "stock_price")?,
            market_cap: need(self.market_cap, "market_cap")?,
            fx_report_to_quote: need(self.fx_rate, "fx_rate")?,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn derive(&self, params: &ModelParams) -> Result<Derived> {
        let inputs = self.spread_inputs()?;
        Ok(Derived {
            debt_per_share: inputs.debt_per_share,
            selected_vol: inputs.equity_vol,
            e2c_bps: e2c_spread(&inputs, params)?,
            creditgrades_bps: creditgrades_spread(&inputs, params)?,
        })
    }

    /// The E2C spread alone.
    pub fn e2c(&self, params: &ModelParams) -> Result<f64> {
        e2c_spread(&self.spread_inputs()?, params)
    }

    fn spread_inputs(&self) -> Result<SpreadInputs> {
        let bs = self.balance_sheet()?;
        let mkt = self.market_state()?;
        let d = debt_per_share(financial_debt(&bs), &bs, &mkt)?;
        let vol = select_volatility(&self.vols)?;
        SpreadInputs::new(mkt.stock_price, vol, d)
    }

    /// The forest's view of this row. `e2c_bps` is `None` when it cannot be
    /// derived, which makes the record incomplete.
    pub fn to_record(&self, params: &ModelParams) -> Result<RawRecord> {
        let e2c = match self.e2c(params) {
            Ok(v) => Some(v),
            Err(e) => {
                log::debug!("line {}: no E2C spread: {e}", self.line);
                None
            }
        };
        Ok(RawRecord {
            key: self.key()?,
            e2c_bps: e2c,
            cds5y_bps: self.cds_5y_bps,
            ig_cdx_bps: self.ig_cdx_bps,
            market_cap: self.market_cap,
            sp_rating: self.sp_rating,
            moody_rating: self.moody_rating,
            sector: self.sector.clone(),
            country: self.country.clone(),
        })
    }
}

struct HeaderMap {
    index: BTreeMap<&'static str, usize>,
}

impl HeaderMap {
    fn new(headers: &csv::StringRecord) -> Result<HeaderMap> {
        let mut index = BTreeMap::new();
        for name in SNAPSHOT_COLUMNS {
            let pos = headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            index.insert(name, pos);
        }
        Ok(HeaderMap { index })
    }

    fn cell<'r>(&self, rec: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        rec.get(self.index[name])
            .map(str::trim)
            .filter(|s| !s.is_empty())
    }
}

fn bad(line: usize, msg: String) -> Error {
    Error::Format { line, message: msg }
}

fn num(line: usize, name: &str, cell: Option<&str>) -> Result<Option<f64>> {
    cell.map(|s| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(line, format!("{name}: `{s}` is not a finite number")))
    })
    .transpose()
}

fn flag(line: usize, cell: Option<&str>) -> Result<Option<bool>> {
    cell.map(|s| match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(bad(line, format!("is_banking: `{s}` is not a boolean"))),
    })
    .transpose()
}

fn rating(line: usize, name: &str, cell: Option<&str>, parse: fn(&str) -> Result<Rating>) -> Result<Option<Rating>> {
    cell.map(|s| parse(s).map_err(|e| bad(line, format!("{name}: {e}"))))
        .transpose()
}

fn parse_row(h: &HeaderMap, rec: &csv::StringRecord, line: usize) -> Result<Snapshot> {
    let firm_id = h
        .cell(rec, "firm_id")
        .ok_or_else(|| bad(line, "firm_id is empty".into()))?
        .to_string();
    let date = h
        .cell(rec, "date")
        .map(|s| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map_err(|_| bad(line, format!("date: `{s}` is not an ISO-8601 date")))
        })
        .transpose()?;
    let n = |name: &str| num(line, name, h.cell(rec, name));
    let mut vols = VolatilityQuotes::default();
    for w in HISTORICAL_WINDOWS {
        if let Some(v) = n(&format!("hist_vol_{w}"))? {
            vols.historical.insert(w, v);
        }
    }
    for m in IMPLIED_MATURITIES {
        if let Some(v) = n(&format!("impl_vol_{m}m"))? {
            vols.implied.insert(m, v);
        }
    }
    Ok(Snapshot {
        firm_id,
        date,
        stock_price: n("stock_price")?,
        market_cap: n("market_cap")?,
        fx_rate: n("fx_rate")?,
        is_banking: flag(line, h.cell(rec, "is_banking"))?,
        long_term_debt: n("long_term_debt")?,
        short_term_debt: n("short_term_debt")?,
        other_lt_liabilities: n("other_lt_liabilities")?,
        other_st_liabilities: n("other_st_liabilities")?,
        lease_obligations: n("lease_obligations")?,
        minority_interest: n("minority_interest")?,
        preferred_equity: n("preferred_equity")?,
        vols,
        sp_rating: rating(line, "sp_rating", h.cell(rec, "sp_rating"), Rating::parse_sp)?,
        moody_rating: rating(line, "moody_rating", h.cell(rec, "moody_rating"), Rating::parse_moodys)?,
        sector: h.cell(rec, "sector").map(str::to_string),
        country: h.cell(rec, "country").map(str::to_string),
        ig_cdx_bps: n("ig_cdx_bps")?,
        cds_5y_bps: n("cds_5y_bps")?,
        line,
    })
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(false)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn csv_line(e: csv::Error, fallback: usize) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(fallback);
    bad(line, e.to_string())
}

/// Reads every row of a snapshot file.
pub fn read_snapshots<R: Read>(input: R) -> Result<Vec<Snapshot>> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_line(e, 1))?.clone();
    let h = HeaderMap::new(&headers)?;
    let mut out = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| csv_line(e, 0))?;
        if !more {
            break;
        }
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        out.push(parse_row(&h, &rec, line)?);
    }
    Ok(out)
}

/// Converts snapshots into records, keeping the complete ones. Returns the
/// records and the number of rows dropped.
pub fn complete_records(snapshots: &[Snapshot], params: &ModelParams) -> Result<(Vec<RawRecord>, usize)> {
    let mut records = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        records.push(s.to_record(params).map_err(|e| bad(s.line, e.to_string()))?);
    }
    let before = records.len();
    let kept = crate::dataset::drop_incomplete(records);
    let dropped = before - kept.len();
    Ok((kept, dropped))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes snapshots with the canonical header.
pub fn write_snapshots<W: Write>(out: W, rows: &[Snapshot]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SNAPSHOT_COLUMNS)?;
    for s in rows {
        let mut rec: Vec<String> = vec![
            s.firm_id.clone(),
            s.date.map(|d| d.to_string()).unwrap_or_default(),
            fmt_opt(s.stock_price),
            fmt_opt(s.market_cap),
            fmt_opt(s.fx_rate),
            s.is_banking.map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default(),
            fmt_opt(s.long_term_debt),
            fmt_opt(s.short_term_debt),
            fmt_opt(s.other_lt_liabilities),
            fmt_opt(s.other_st_liabilities),
            fmt_opt(s.lease_obligations),
            fmt_opt(s.minority_interest),
            fmt_opt(s.preferred_equity),
        ];
        for wdw in HISTORICAL_WINDOWS {
            rec.push(fmt_opt(s.vols.historical.get(&wdw).copied()));
        }
        for m in IMPLIED_MATURITIES {
            rec.push(fmt_opt(s.vols.implied.get(&m).copied()));
        }
        rec.push(s.sp_rating.map(|r| r.sp_label().to_string()).unwrap_or_default());
        rec.push(s.moody_rating.map(|r| r.moodys_label().to_string()).unwrap_or_default());
        rec.push(s.sector.clone().unwrap_or_default());
        rec.push(s.country.clone().unwrap_or_default());
        rec.push(fmt_opt(s.ig_cdx_bps));
        rec.push(fmt_opt(s.cds_5y_bps));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Copies a snapshot file, appending [`DERIVED_COLUMNS`] to every row. Rows
/// whose inputs are missing or invalid get empty values and a reason.
/// Returns the number of rows that failed.
pub fn augment_csv<R: Read, W: Write>(input: R, out: W, params: &ModelParams) -> Result<usize> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_line(e, 1))?.clone();
    let h = HeaderMap::new(&headers)?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = headers.clone();
    for c in DERIVED_COLUMNS {
        head.push_field(c);
    }
    w.write_record(&head)?;
    let mut failed = 0;
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec).map_err(|e| csv_line(e, 0))? {
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let snap = parse_row(&h, &rec, line)?;
        let mut row = rec.clone();
        match snap.derive(params) {
            Ok(d) => {
                row.push_field(&d.e2c_bps.to_string());
                row.push_field(&d.creditgrades_bps.to_string());
                row.push_field(&d.debt_per_share.to_string());
                row.push_field(&d.selected_vol.to_string());
                row.push_field("");
            }
            Err(e) => {
                failed += 1;
                for _ in 0..4 {
                    row.push_field("");
                }
                row.push_field(&e.to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(failed)
}
