//! Closed-form structural spread approximations.
//!
//! Two models share the same inputs (stock price, equity volatility and
//! debt-per-share):
//!
//! - the equity-to-credit (E2C) approximation
//!   `C = (1 - R) · 4/9 · L̄D / (S₀ + L̄D) · σ²`,
//! - the CreditGrades survival probability and the spread `(1 - R) · h`
//!   implied by its flat hazard rate over the maturity `T`.
//!
//! Spreads are returned in basis points (decimal rate × 10⁴).

use crate::error::{Error, Result};
use crate::normal;

/// Basis points per unit of decimal rate.
pub const BPS: f64 = 1e4;

/// Spread reported when the CreditGrades survival probability underflows to
/// zero and the implied hazard rate is infinite.
pub const SPREAD_CAP_BPS: f64 = 1e6;

/// Tolerance beyond which clamping the survival probability into `[0, 1]` is
/// reported as a numerical warning.
const CLAMP_WARN: f64 = 1e-9;

/// Calibration of the structural models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Recovery rate `R` applied to the hazard rate.
    pub recovery: f64,
    /// Mean global recovery `L̄` on debt, defining the default barrier.
    pub global_recovery: f64,
    /// Standard deviation `λ` of the global recovery (CreditGrades only).
    pub recovery_std: f64,
    /// Maturity `T` in years used to turn survival into a hazard rate.
    pub maturity: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            recovery: 0.3,
            global_recovery: 0.5,
            recovery_std: 0.3,
            maturity: 5.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let ModelParams {
            recovery,
            global_recovery,
            recovery_std,
            maturity,
        } = *self;
        if !(0.0..=1.0).contains(&recovery) {
            return Err(Error::domain(format!("recovery {recovery} not in [0, 1]")));
        }
        if !(global_recovery > 0.0 && global_recovery <= 1.0) {
            return Err(Error::domain(format!(
                "global recovery {global_recovery} not in (0, 1]"
            )));
        }
        if !(recovery_std >= 0.0 && recovery_std.is_finite()) {
            return Err(Error::domain(format!(
                "recovery std {recovery_std} must be finite and >= 0"
            )));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::domain(format!("maturity {maturity} must be > 0")));
        }
        Ok(())
    }
}

/// Market and balance-sheet inputs shared by both models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadInputs {
    /// Current stock price `S₀`.
    pub stock_price: f64,
    /// Annualized equity volatility `σ`.
    pub equity_vol: f64,
    /// Debt-per-share `D`, in the stock price currency.
    pub debt_per_share: f64,
}

impl SpreadInputs {
    pub fn new(stock_price: f64, equity_vol: f64, debt_per_share: f64) -> Result<Self> {
        let inputs = SpreadInputs {
            stock_price,
            equity_vol,
            debt_per_share,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stock_price > 0.0 && self.stock_price.is_finite()) {
            return Err(Error::domain(format!(
                "stock price {} must be finite and > 0",
                self.stock_price
            )));
        }
        if !(self.equity_vol >= 0.0 && self.equity_vol.is_finite()) {
            return Err(Error::domain(format!(
                "equity volatility {} must be finite and >= 0",
                self.equity_vol
            )));
        }
        if !(self.debt_per_share >= 0.0 && self.debt_per_share.is_finite()) {
            return Err(Error::domain(format!(
                "debt per share {} must be finite and >= 0",
                self.debt_per_share
            )));
        }
        Ok(())
    }
}

/// Market-adjusted debt ratio `L̄D / (S₀ + L̄D)`.
pub fn mad_ratio(inputs: &SpreadInputs, global_recovery: f64) -> Result<f64> {
    inputs.validate()?;
    if !(global_recovery > 0.0 && global_recovery.is_finite()) {
        return Err(Error::domain(format!(
            "global recovery {global_recovery} must be finite and > 0"
        )));
    }
    let barrier = global_recovery * inputs.debt_per_share;
    Ok(barrier / (inputs.stock_price + barrier))
}

/// E2C spread `(1 - R) · 4/9 · MAD · σ²` in basis points.
pub fn e2c_spread(inputs: &SpreadInputs, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let mad = mad_ratio(inputs, params.global_recovery)?;
    let vol = inputs.equity_vol;
    Ok((1.0 - params.recovery) * (4.0 / 9.0) * mad * vol * vol * BPS)
}

/// CreditGrades survival probability to horizon `t` (years).
///
/// Zero debt has no finite barrier distance; survival is 1 by convention.
/// When `A_t = 0` (no equity volatility and no barrier uncertainty) the
/// barrier can never be reached from `d > 1`, so survival is again 1.
pub fn creditgrades_survival(inputs: &SpreadInputs, params: &ModelParams, t: f64) -> Result<f64> {
    params.validate()?;
    inputs.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("horizon {t} must be > 0")));
    }
    if inputs.debt_per_share == 0.0 {
        return Ok(1.0);
    }
    let s0 = inputs.stock_price;
    let barrier = params.global_recovery * inputs.debt_per_share;
    let lambda_sq = params.recovery_std * params.recovery_std;

    // ln d computed directly; d itself overflows long before its log does.
    let ln_d = ((s0 + barrier) / barrier).ln() + lambda_sq;
    let asset_vol = inputs.equity_vol * s0 / (s0 + barrier);
    let a_sq = asset_vol * asset_vol * t + lambda_sq;
    if a_sq == 0.0 {
        return Ok(1.0);
    }
    let a = a_sq.sqrt();

    let first = normal::cdf(-0.5 * a + ln_d / a);
    // d · Φ(-A/2 - ln d / A), combined in log space to avoid inf · 0.
    let tail = normal::cdf(-0.5 * a - ln_d / a);
    let second = if tail == 0.0 {
        0.0
    } else {
        (ln_d + tail.ln()).exp()
    };
    let raw = first - second;

    if !raw.is_finite() {
        return Err(Error::undefined(format!(
            "survival evaluated to {raw} for {inputs:?}"
        )));
    }
    if raw < -CLAMP_WARN || raw > 1.0 + CLAMP_WARN {
        log::warn!("creditgrades survival {raw} clamped into [0, 1] for {inputs:?}");
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// CreditGrades spread `(1 - R) · h_CG` in basis points, with
/// `h_CG = -ln(survival(T)) / T`.
///
/// Zero survival saturates at [`SPREAD_CAP_BPS`].
pub fn creditgrades_spread(inputs: &SpreadInputs, params: &ModelParams) -> Result<f64> {
    let survival = creditgrades_survival(inputs, params, params.maturity)?;
    if survival >= 1.0 {
        return Ok(0.0);
    }
    if survival <= 0.0 {
        return Ok(SPREAD_CAP_BPS);
    }
    let hazard = -survival.ln() / params.maturity;
    Ok(((1.0 - params.recovery) * hazard * BPS).min(SPREAD_CAP_BPS))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(s: f64, vol: f64, d: f64) -> SpreadInputs {
        SpreadInputs::new(s, vol, d).unwrap()
    }

    #[test]
    fn mad_ratio_examples() {
        assert!((mad_ratio(&inputs(100.0, 0.3, 50.0), 0.5).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(mad_ratio(&inputs(100.0, 0.3, 0.0), 0.5).unwrap(), 0.0);
        assert!((mad_ratio(&inputs(50.0, 0.3, 100.0), 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mad_ratio_rejects_bad_inputs() {
        let bad = SpreadInputs {
            stock_price: 100.0,
            equity_vol: 0.2,
            debt_per_share: -1.0,
        };
        assert!(matches!(mad_ratio(&bad, 0.5), Err(Error::Domain(_))));
        let nan = SpreadInputs {
            stock_price: f64::NAN,
            equity_vol: 0.2,
            debt_per_share: 1.0,
        };
        assert!(mad_ratio(&nan, 0.5).is_err());
        assert!(mad_ratio(&inputs(1.0, 0.2, 1.0), 0.0).is_err());
        assert!(SpreadInputs::new(0.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn mad_ratio_approaches_one() {
        let r = mad_ratio(&inputs(10.0, 0.3, 1e13), 0.5).unwrap();
        assert!(r > 0.999 && r < 1.0);
    }

    #[test]
    fn e2c_examples() {
        let p = ModelParams::default();
        let a = e2c_spread(&inputs(100.0, 0.30, 50.0), &p).unwrap();
        assert!((a - 56.0).abs() < 1e-10, "{a}");
        assert_eq!(e2c_spread(&inputs(100.0, 0.30, 0.0), &p).unwrap(), 0.0);
        let b = e2c_spread(&inputs(50.0, 0.60, 100.0), &p).unwrap();
        assert!((b - 560.0).abs() < 1e-9, "{b}");
    }

    #[test]
    fn e2c_zero_cases() {
        let p = ModelParams::default();
        assert_eq!(e2c_spread(&inputs(100.0, 0.0, 50.0), &p).unwrap(), 0.0);
        let full = ModelParams {
            recovery: 1.0,
            ..p
        };
        assert_eq!(e2c_spread(&inputs(100.0, 0.3, 50.0), &full).unwrap(), 0.0);
    }

    #[test]
    fn e2c_linear_in_loss_given_default() {
        let x = inputs(37.0, 0.42, 61.0);
        let zero = ModelParams {
            recovery: 0.0,
            ..ModelParams::default()
        };
        let a = e2c_spread(&x, &zero).unwrap() * 0.7;
        let b = e2c_spread(&x, &ModelParams::default()).unwrap();
        assert!(((a - b) / b).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let bad = [
            ModelParams { recovery: 1.1, ..Default::default() },
            ModelParams { global_recovery: 0.0, ..Default::default() },
            ModelParams { recovery_std: -0.1, ..Default::default() },
            ModelParams { maturity: 0.0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn survival_reference_example() {
        let p = ModelParams::default();
        let s = creditgrades_survival(&inputs(100.0, 0.30, 50.0), &p, 5.0).unwrap();
        assert!((s - 0.98717).abs() < 1e-5, "{s}");
    }

    #[test]
    fn survival_conventions() {
        let p = ModelParams::default();
        assert_eq!(creditgrades_survival(&inputs(100.0, 0.3, 0.0), &p, 5.0).unwrap(), 1.0);
        let no_lambda = ModelParams { recovery_std: 0.0, ..p };
        assert_eq!(
            creditgrades_survival(&inputs(100.0, 1e-9, 50.0), &no_lambda, 5.0).unwrap(),
            1.0
        );
        assert_eq!(
            creditgrades_survival(&inputs(100.0, 0.0, 50.0), &no_lambda, 5.0).unwrap(),
            1.0
        );
        assert!(creditgrades_survival(&inputs(100.0, 0.3, 50.0), &p, 0.0).is_err());
    }

    #[test]
    fn survival_non_increasing_in_horizon() {
        let p = ModelParams::default();
        let x = inputs(20.0, 0.55, 40.0);
        let mut prev = 1.0;
        for t in 1..=10 {
            let s = creditgrades_survival(&x, &p, t as f64).unwrap();
            assert!(s <= prev, "t={t}: {s} > {prev}");
            prev = s;
        }
    }

    #[test]
    fn creditgrades_spread_examples() {
        let p = ModelParams::default();
        let base = creditgrades_spread(&inputs(100.0, 0.30, 50.0), &p).unwrap();
        assert!((base - 18.1).abs() < 0.05, "{base}");
        assert_eq!(creditgrades_spread(&inputs(100.0, 0.30, 0.0), &p).unwrap(), 0.0);
        let doubled = creditgrades_spread(&inputs(100.0, 0.30, 100.0), &p).unwrap();
        assert!(doubled > base);
    }

    #[test]
    fn creditgrades_spread_finite_for_extreme_inputs() {
        // Extreme leverage and volatility push survival towards zero.
        let p = ModelParams {
            recovery_std: 0.0,
            ..Default::default()
        };
        let s = creditgrades_spread(&inputs(1.0, 50.0, 1e12), &p).unwrap();
        assert!(s.is_finite() && s <= SPREAD_CAP_BPS);
    }
}
