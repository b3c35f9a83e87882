//! Closed-form expectations under Black dynamics.
//!
//! The TRS formulas need two families of expectations taken at an
//! intermediate fixing date: forward-starting at-the-money options on the
//! one-period performance `S_{T_i} / S_{T_{i-1}}` (Tobin tax rebalancing
//! costs) and the inverse spot `E[1 / S_T]` (dividends normalised by the
//! period's starting price). Dividends are deterministic, so only `1/S`
//! carries a convexity adjustment.
//!
//! Each expectation has a forward-intrinsic variant that ignores
//! volatility, selected through [`ExpectationMode`].

use libm::erfc;

use crate::curves::YieldCurve;
use crate::error::{Error, Result};
use crate::forwards::ForwardCurve;

/// How expectations of path-dependent quantities are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpectationMode {
    /// Lognormal spot with the market volatility.
    #[default]
    Black,
    /// Spots replaced by forwards and options by their intrinsic value.
    ForwardIntrinsic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

/// Standard normal CDF. `erfc` keeps full relative precision in the left
/// tail, well inside the 1e-10 absolute accuracy the pricer needs.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Undiscounted Black price for total variance `variance = sigma^2 T`.
pub fn black(forward: f64, strike: f64, variance: f64, kind: OptionKind) -> f64 {
    let intrinsic = match kind {
        OptionKind::Call => (forward - strike).max(0.0),
        OptionKind::Put => (strike - forward).max(0.0),
    };
    if variance <= 0.0 || forward <= 0.0 || strike <= 0.0 {
        return intrinsic;
    }
    let sd = variance.sqrt();
    let d1 = (forward / strike).ln() / sd + 0.5 * sd;
    let d2 = d1 - sd;
    match kind {
        OptionKind::Call => forward * norm_cdf(d1) - strike * norm_cdf(d2),
        OptionKind::Put => strike * norm_cdf(-d2) - forward * norm_cdf(-d1),
    }
}

/// Forward-starting ATM option on the performance `S_pay / S_fix`, paid at
/// `payment`. `discount` is the payment-date discount factor of the
/// contract (TRS curve `y`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceOption {
    pub fixing: f64,
    pub payment: f64,
    pub kind: OptionKind,
    pub discount: f64,
}

impl PerformanceOption {
    pub fn new(fixing: f64, payment: f64, kind: OptionKind, discount: f64) -> Result<Self> {
        if !(fixing >= 0.0 && fixing < payment) {
            return Err(Error::Invalid(format!(
                "performance option needs 0 <= fixing ({fixing}) < payment ({payment})"
            )));
        }
        Ok(PerformanceOption {
            fixing,
            payment,
            kind,
            discount,
        })
    }
}

/// Price of a performance option. The performance forward is the
/// dividend-free growth `P(fix;z) / P(pay;z)` of the hedge curve.
pub fn performance_option_price(
    opt: &PerformanceOption,
    hedge_curve: &YieldCurve,
    vol: f64,
    mode: ExpectationMode,
) -> Result<f64> {
    if !(vol >= 0.0) {
        return Err(Error::Domain(format!("volatility {vol} must be >= 0")));
    }
    let ratio = hedge_curve.discount(opt.fixing) / hedge_curve.discount(opt.payment);
    let variance = match mode {
        ExpectationMode::Black => vol * vol * (opt.payment - opt.fixing),
        ExpectationMode::ForwardIntrinsic => 0.0,
    };
    Ok(opt.discount * black(ratio, 1.0, variance, opt.kind))
}

/// `E[1 / S_T]`. Under Black dynamics `S_T` is lognormal with mean `F(T)`
/// and log-variance `vol^2 T`, giving `exp(vol^2 T) / F(T)`.
pub fn expected_inverse_spot(forwards: &ForwardCurve, vol: f64, maturity: f64, mode: ExpectationMode) -> Result<f64> {
    if !(maturity >= 0.0) {
        return Err(Error::Domain(format!("maturity {maturity} must be >= 0")));
    }
    let f = forwards.at(maturity);
    if !(f > 0.0) {
        return Err(Error::Domain(format!(
            "forward {f} at T={maturity} is not positive; dividends are inconsistent with the spot"
        )));
    }
    Ok(match mode {
        ExpectationMode::Black => (vol * vol * maturity).exp() / f,
        ExpectationMode::ForwardIntrinsic => 1.0 / f,
    })
}

/// `E[Q / S_fix]` for a deterministic gross dividend `Q`.
pub fn expected_dividend_over_spot(
    forwards: &ForwardCurve,
    vol: f64,
    fixing: f64,
    amount: f64,
    mode: ExpectationMode,
) -> Result<f64> {
    Ok(amount * expected_inverse_spot(forwards, vol, fixing, mode)?)
}

/// `E[F_fix(pay) / S_fix]`: the forward seen at `fixing` expands into the
/// z-growth over the period minus the net dividends paid in
/// `[fixing, payment)`, each scaled by `E[1 / S_fix]`.
pub fn expected_terminal_ratio(
    forwards: &ForwardCurve,
    vol: f64,
    fixing: f64,
    payment: f64,
    mode: ExpectationMode,
) -> Result<f64> {
    if !(fixing < payment) {
        return Err(Error::Domain(format!("fixing {fixing} must precede payment {payment}")));
    }
    let z = forwards.hedge_curve();
    let p_pay = z.discount(payment);
    let growth = z.discount(fixing) / p_pay;
    let in_period: f64 = forwards
        .dividends()
        .entries()
        .iter()
        .filter(|d| d.time >= fixing && d.time < payment)
        .map(|d| forwards.net_dividend(d.amount) * z.discount(d.time) / p_pay)
        .sum();
    if in_period == 0.0 {
        return Ok(growth);
    }
    Ok(growth - in_period * expected_inverse_spot(forwards, vol, fixing, mode)?)
}
