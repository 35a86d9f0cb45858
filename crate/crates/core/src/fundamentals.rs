//! E2C inputs derived from raw fundamentals: financial debt, debt-per-share
//! and the volatility selection rule.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Historical volatility windows, in trading days.
pub const HISTORICAL_WINDOWS: [u32; 6] = [30, 60, 120, 200, 260, 360];

/// Implied volatility option maturities, in months.
pub const IMPLIED_MATURITIES: [u32; 5] = [3, 6, 12, 18, 24];

/// Balance-sheet items in the report currency.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BalanceSheet {
    pub long_term_debt: f64,
    pub short_term_debt: f64,
    pub other_lt_liabilities: f64,
    pub other_st_liabilities: f64,
    pub lease_obligations: f64,
    pub minority_interest: f64,
    pub preferred_equity: f64,
    pub is_banking: bool,
}

impl BalanceSheet {
    pub fn validate(&self) -> Result<()> {
        let items = [
            ("long_term_debt", self.long_term_debt),
            ("short_term_debt", self.short_term_debt),
            ("other_lt_liabilities", self.other_lt_liabilities),
            ("other_st_liabilities", self.other_st_liabilities),
            ("lease_obligations", self.lease_obligations),
            ("minority_interest", self.minority_interest),
            ("preferred_equity", self.preferred_equity),
        ];
        for (name, value) in items {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::domain(format!("{name} = {value} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Market data in the quote (stock price) currency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    pub stock_price: f64,
    pub market_cap: f64,
    /// Units of quote currency per unit of report currency.
    pub fx_report_to_quote: f64,
}

impl MarketState {
    pub fn validate(&self) -> Result<()> {
        let items = [
            ("stock_price", self.stock_price),
            ("market_cap", self.market_cap),
            ("fx_rate", self.fx_report_to_quote),
        ];
        for (name, value) in items {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::domain(format!("{name} = {value} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

/// Financial debt in the report currency.
///
/// Banks count long-term debt only (deposits are not financial leverage).
/// Other firms add short-term debt, half of the other liabilities and 40% of
/// the minimum operating lease obligations.
pub fn financial_debt(bs: &BalanceSheet) -> f64 {
    if bs.is_banking {
        bs.long_term_debt
    } else {
        bs.long_term_debt
            + bs.short_term_debt
            + 0.5 * (bs.other_lt_liabilities + bs.other_st_liabilities)
            + 0.4 * bs.lease_obligations
    }
}

/// Balance-sheet items after conversion and capping, in quote currency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CappedItems {
    pub financial_debt: f64,
    pub minority_interest: f64,
    pub preferred_equity: f64,
}

/// Minority interest is capped at 50% of financial debt, preferred equity at
/// 50% of market capitalization.
pub fn apply_caps(items: CappedItems, market_cap: f64) -> CappedItems {
    CappedItems {
        financial_debt: items.financial_debt,
        minority_interest: items.minority_interest.min(0.5 * items.financial_debt),
        preferred_equity: items.preferred_equity.min(0.5 * market_cap),
    }
}

/// Debt-per-share `(FinD - MinInt) / ((MktCap + PrefEq) / S₀)`, floored at
/// 10% of the stock price.
///
/// `fin_debt` is in the report currency, as returned by [`financial_debt`];
/// it is converted together with the minority interest and preferred equity
/// before any cap or floor applies.
pub fn debt_per_share(fin_debt: f64, bs: &BalanceSheet, mkt: &MarketState) -> Result<f64> {
    bs.validate()?;
    mkt.validate()?;
    if !(fin_debt >= 0.0 && fin_debt.is_finite()) {
        return Err(Error::domain(format!("financial debt {fin_debt} must be finite and >= 0")));
    }
    let fx = mkt.fx_report_to_quote;
    let capped = apply_caps(
        CappedItems {
            financial_debt: fin_debt * fx,
            minority_interest: bs.minority_interest * fx,
            preferred_equity: bs.preferred_equity * fx,
        },
        mkt.market_cap,
    );
    let shares = (mkt.market_cap + capped.preferred_equity) / mkt.stock_price;
    let raw = (capped.financial_debt - capped.minority_interest) / shares;
    Ok(raw.max(0.1 * mkt.stock_price))
}

/// Volatility quotes available for one firm on one date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VolatilityQuotes {
    /// Window in days → annualized historical volatility.
    pub historical: BTreeMap<u32, f64>,
    /// Maturity in months → annualized implied volatility.
    pub implied: BTreeMap<u32, f64>,
}

impl VolatilityQuotes {
    pub fn len(&self) -> usize {
        self.historical.len() + self.implied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.historical.values().chain(self.implied.values()).copied()
    }
}

/// Median of every available quote, historical and implied pooled together.
/// An even count averages the two central values.
pub fn select_volatility(quotes: &VolatilityQuotes) -> Result<f64> {
    let mut pool: Vec<f64> = quotes.values().collect();
    if pool.is_empty() {
        return Err(Error::domain("no volatility quote available"));
    }
    if let Some(bad) = pool.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("volatility quote {bad} must be finite and >= 0")));
    }
    pool.sort_by(f64::total_cmp);
    let n = pool.len();
    Ok(if n % 2 == 1 {
        pool[n / 2]
    } else {
        0.5 * (pool[n / 2 - 1] + pool[n / 2])
    })
}
