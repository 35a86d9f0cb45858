//! Synthetic firm panels with a known spread-generating process.
//!
//! Each firm gets a country, a sector, a leverage level and a volatility
//! level; prices follow a monthly lognormal walk with a common market factor,
//! and a date-level volatility regime drives both the quotes and the IG CDX
//! index. The E2C spread is derived from the generated fundamentals by this
//! crate, then the CDS label is
//!
//! ```text
//! signal = 25 + 0.9·e2c + 1.5·(16 − rating code) − 4·ln(mcap / median mcap) + 0.2·(cdx − 80)
//! cds    = max(signal · (1 + s·ε), 1),   ε ~ N(0, 1)
//! ```
//!
//! with `s² = var(signal) / (k · mean(signal²))` and `k = r²/(1 − r²)` for the
//! target Bayes-optimal R² `r²`: the noise variance `s²·mean(signal²)` is then
//! `var(signal)·(1 − r²)/r²`. Country and sector have no effect.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fundamentals::{VolatilityQuotes, HISTORICAL_WINDOWS, IMPLIED_MATURITIES};
use crate::rating::{merge_ratings, Rating};
use crate::snapshot::Snapshot;
use crate::structural::ModelParams;

pub const COUNTRIES: [(&str, f64, f64); 10] = [
    // name, weight, report-to-quote fx
    ("United States", 30.0, 1.0),
    ("United Kingdom", 12.0, 1.0),
    ("France", 10.0, 1.0),
    ("Germany", 10.0, 1.0),
    ("Japan", 9.0, 1.0),
    ("Canada", 8.0, 1.0),
    ("Switzerland", 7.0, 1.0),
    ("Netherlands", 6.0, 1.0),
    ("Italy", 5.0, 1.0),
    ("Spain", 3.0, 1.0),
];

pub const SECTORS: [(&str, f64); 15] = [
    ("Banks", 12.0),
    ("Insurance", 8.0),
    ("Energy", 9.0),
    ("Utilities", 8.0),
    ("Telecom", 7.0),
    ("Technology", 9.0),
    ("Healthcare", 8.0),
    ("Consumer Staples", 7.0),
    ("Consumer Discretionary", 8.0),
    ("Industrials", 9.0),
    ("Materials", 6.0),
    ("Real Estate", 5.0),
    ("Media", 4.0),
    ("Transportation", 4.0),
    ("Chemicals", 3.0),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub firms: usize,
    pub dates: usize,
    pub seed: u64,
    /// Target R² of the noise-free signal against the label; 1 disables
    /// the noise.
    pub bayes_r2: f64,
    /// Probability that a row loses its CDS quote.
    pub missing_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            firms: 300,
            dates: 150,
            seed: 0,
            bayes_r2: 0.90,
            missing_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub snapshots: Vec<Snapshot>,
    /// Noise-free expected CDS per snapshot.
    pub signal: Vec<f64>,
    pub noise_scale: f64,
}

fn month_end(start_year: i32, offset: usize) -> NaiveDate {
    let m0 = start_year * 12 + offset as i32 + 1;
    let (y, m) = (m0.div_euclid(12), m0.rem_euclid(12) + 1);
    NaiveDate::from_ymd_opt(y, m as u32, 1)
        .and_then(|d| d.pred_opt())
        .expect("valid month")
}

fn pick<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if u < w {
            return i;
        }
        u -= w;
        last = i;
    }
    last
}

struct Firm {
    id: String,
    country: usize,
    sector: usize,
    banking: bool,
    shares: f64,
    price: f64,
    vol: f64,
    leverage: f64,
    notch: usize,
    moody_offset: i32,
    preferred_share: f64,
}

pub fn generate(cfg: &SynthConfig, params: &ModelParams) -> Result<SynthPanel> {
    if cfg.firms < 2 || cfg.dates < 2 {
        return Err(Error::domain("need at least two firms and two dates"));
    }
    if !(cfg.bayes_r2 > 0.0 && cfg.bayes_r2 <= 1.0) {
        return Err(Error::domain("bayes_r2 must lie in (0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let mut firms: Vec<Firm> = (0..cfg.firms)
        .map(|i| {
            let sector = pick(&mut rng, SECTORS.iter().map(|s| s.1));
            let leverage = (0.8f64.ln() + 0.8 * n(&mut rng)).exp();
            let vol = (0.28f64.ln() + 0.3 * n(&mut rng)).exp().clamp(0.08, 0.8);
            Firm {
                id: format!("F{i:04}"),
                country: pick(&mut rng, COUNTRIES.iter().map(|c| c.1)),
                sector,
                banking: SECTORS[sector].0 == "Banks",
                shares: (18.0 + 1.0 * n(&mut rng)).exp(),
                price: (3.5 + 0.5 * n(&mut rng)).exp(),
                vol,
                leverage,
                notch: 0,
                moody_offset: if rng.gen::<f64>() < 0.3 { 1 } else { 0 },
                preferred_share: if rng.gen::<f64>() < 0.2 { 0.05 } else { 0.0 },
            }
        })
        .collect();

    // rating from the firm's long-run risk level, noisy
    for f in &mut firms {
        let risk = f.vol.ln() * 2.0 + (f.leverage / (1.0 + f.leverage)).ln();
        let z = (risk + 3.3) / 1.0 + 0.8 * n(&mut rng);
        f.notch = (8.0 + 3.0 * z).round().clamp(0.0, 16.0) as usize;
    }

    // date-level regime: log-vol multiplier as AR(1), market returns
    let mut regime = Vec::with_capacity(cfg.dates);
    let mut market = Vec::with_capacity(cfg.dates);
    let mut r = 0.0;
    for _ in 0..cfg.dates {
        r = 0.9 * r + 0.2 * (1.0f64 - 0.81).sqrt() * n(&mut rng);
        regime.push(r.exp());
        market.push(n(&mut rng));
    }
    let cdx: Vec<f64> = regime
        .iter()
        .map(|v| 80.0 * v.powf(1.5) * (0.05 * n(&mut rng)).exp())
        .collect();

    let dt = 1.0f64 / 12.0;
    let mut snapshots = Vec::with_capacity(cfg.firms * cfg.dates);
    for f in firms.iter_mut() {
        let mut debt_scale = 1.0;
        let fin_debt0 = f.leverage * f.shares * f.price;
        // log price mean-reverts around its start so leverage stays in the
        // firm's range over the panel
        let price0 = f.price;
        let mut dev = 0.0;
        for t in 0..cfg.dates {
            let vol_t = f.vol * regime[t] * (0.1 * n(&mut rng)).exp();
            if t > 0 {
                let z = 0.6 * market[t] + 0.8 * n(&mut rng);
                dev = 0.97 * dev + vol_t * dt.sqrt() * z;
                f.price = price0 * dev.exp();
                debt_scale *= (0.02 * n(&mut rng)).exp();
            }
            let fx = COUNTRIES[f.country].2;
            let mcap = f.shares * f.price;
            // quote-currency financial debt, split into balance-sheet items in
            // report currency
            let fin = fin_debt0 * debt_scale / fx;
            let (ltd, std, olt, ost, leases) = if f.banking {
                (fin, 0.3 * fin, 0.2 * fin, 0.1 * fin, 0.0)
            } else {
                (0.55 * fin, 0.2 * fin, 0.2 * fin, 0.1 * fin, 0.125 * fin)
            };
            let mut vols = VolatilityQuotes::default();
            for w in HISTORICAL_WINDOWS {
                if rng.gen::<f64>() > 0.1 {
                    vols.historical.insert(w, vol_t * (0.08 * n(&mut rng)).exp());
                }
            }
            for m in IMPLIED_MATURITIES {
                if rng.gen::<f64>() > 0.1 {
                    vols.implied.insert(m, vol_t * 1.05 * (0.08 * n(&mut rng)).exp());
                }
            }
            if vols.is_empty() {
                vols.historical.insert(30, vol_t);
            }
            let rating = Rating::from_notch(f.notch).expect("notch in range");
            let moody = Rating::from_notch((f.notch as i32 + f.moody_offset).min(16) as usize)
                .expect("notch in range");
            snapshots.push(Snapshot {
                firm_id: f.id.clone(),
                date: Some(month_end(2008, t)),
                stock_price: Some(f.price),
                market_cap: Some(mcap),
                fx_rate: Some(fx),
                is_banking: Some(f.banking),
                long_term_debt: Some(ltd),
                short_term_debt: Some(std),
                other_lt_liabilities: Some(olt),
                other_st_liabilities: Some(ost),
                lease_obligations: Some(leases),
                minority_interest: Some(0.03 * fin),
                preferred_equity: Some(f.preferred_share * mcap / fx),
                vols,
                sp_rating: Some(rating),
                moody_rating: Some(moody),
                sector: Some(SECTORS[f.sector].0.to_string()),
                country: Some(COUNTRIES[f.country].0.to_string()),
                ig_cdx_bps: Some(cdx[t]),
                cds_5y_bps: None,
                line: 0,
            });
        }
    }

    let mut caps: Vec<f64> = snapshots.iter().filter_map(|s| s.market_cap).collect();
    caps.sort_by(f64::total_cmp);
    let median_cap = caps[caps.len() / 2];

    let mut signal = Vec::with_capacity(snapshots.len());
    for s in &snapshots {
        let e2c = s.e2c(params)?;
        let rating = merge_ratings(s.sp_rating, s.moody_rating).expect("rated above");
        let code = f64::from(rating.code());
        let mcap = s.market_cap.expect("set above");
        let cdx = s.ig_cdx_bps.expect("set above");
        let v = 25.0 + 0.9 * e2c + 1.5 * (16.0 - code) - 4.0 * (mcap / median_cap).ln() + 0.2 * (cdx - 80.0);
        signal.push(v.max(1.0));
    }
    let m = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / m;
    let var = signal.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    let mean_sq = signal.iter().map(|v| v * v).sum::<f64>() / m;
    // signal share of the label variance is k / (1 + k)
    let noise_scale = if cfg.bayes_r2 == 1.0 {
        0.0
    } else {
        let k = cfg.bayes_r2 / (1.0 - cfg.bayes_r2);
        (var / (k * mean_sq)).sqrt()
    };

    for (s, &v) in snapshots.iter_mut().zip(&signal) {
        let eps = n(&mut rng);
        let missing = cfg.missing_rate > 0.0 && rng.gen::<f64>() < cfg.missing_rate;
        if !missing {
            s.cds_5y_bps = Some((v * (1.0 + noise_scale * eps)).max(1.0));
        }
    }
    Ok(SynthPanel {
        snapshots,
        signal,
        noise_scale,
    })
}

/// Year and month of each generated date, for documentation and tests.
pub fn date_grid(dates: usize) -> Vec<NaiveDate> {
    (0..dates).map(|t| month_end(2008, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Datelike;

    fn small() -> SynthConfig {
        SynthConfig {
            firms: 40,
            dates: 24,
            seed: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn month_ends() {
        let g = date_grid(14);
        assert_eq!(g[0], NaiveDate::from_ymd_opt(2008, 1, 31).unwrap());
        assert_eq!(g[1], NaiveDate::from_ymd_opt(2008, 2, 29).unwrap());
        assert_eq!(g[13].month(), 2);
        assert_eq!(g[13].year(), 2009);
    }

    #[test]
    fn complete_grid_and_deterministic() {
        let p = ModelParams::default();
        let a = generate(&small(), &p).unwrap();
        let b = generate(&small(), &p).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.snapshots.len(), 40 * 24);
        let (recs, dropped) = crate::snapshot::complete_records(&a.snapshots, &p).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(recs.len(), 960);
    }

    #[test]
    fn noise_matches_target_r2() {
        let p = ModelParams::default();
        let panel = generate(
            &SynthConfig {
                firms: 200,
                dates: 60,
                ..small()
            },
            &p,
        )
        .unwrap();
        let y: Vec<f64> = panel.snapshots.iter().map(|s| s.cds_5y_bps.unwrap()).collect();
        let r2 = crate::metrics::r_squared_of(&y, &panel.signal).unwrap();
        assert!((r2 - 0.90).abs() < 0.02, "{r2}");
    }
}
