//! First-order par-spread approximation.
//!
//! Writing every one-period rate as the OIS rate `E` plus a small spread
//! (`dR` funding, `dC` collateral, `dM` repo, `dL` floating index) and
//! dropping products of spreads, taxes and the Tobin rate gives
//!
//! `K ~ [sum_i x_i P(T_i;e) carry_i + Q(gamma)] / sum_i x_i P(T_i;e)`
//!
//! with `carry = dR - dL` for buy-and-hold and
//! `carry = -alpha dR + (1 + alpha) dC - dL - dM` for lending/borrowing.
//! `Q(gamma)` weights each dividend yield by the dividend tax impact rate
//! `gamma`, minus the first-order Tobin block.

use crate::blackmodel::{
    expected_dividend_over_spot, performance_option_price, ExpectationMode, OptionKind, PerformanceOption,
};
use crate::curves::{CurveSet, YieldCurve};
use crate::error::{Error, Result};
use crate::forwards::ForwardCurve;
use crate::market::{HedgeSpec, MarketSnapshot, Strategy, TaxRegime};
use crate::trs::{Direction, NotionalMode, Schedule, TrsContract};

/// One-period spreads over OIS for `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodSpreads {
    pub start: f64,
    pub end: f64,
    /// One-period OIS rate `E`.
    pub ois: f64,
    pub funding: f64,
    pub collateral: f64,
    /// Repo spread: OIS minus the one-period rate of `e - l`.
    pub repo: f64,
    pub libor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadDecomposition {
    pub periods: Vec<PeriodSpreads>,
}

impl SpreadDecomposition {
    pub fn new(curves: &CurveSet, schedule: &Schedule) -> Result<Self> {
        let repo_rate = YieldCurve::linear_combination(&[(1.0, &curves.ois), (-1.0, &curves.repo_fee)]);
        let periods = schedule
            .dates()
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let e = curves.ois.simple_period_rate(a, b)?;
                Ok(PeriodSpreads {
                    start: a,
                    end: b,
                    ois: e,
                    funding: curves.funding.simple_period_rate(a, b)? - e,
                    collateral: curves.collateral.simple_period_rate(a, b)? - e,
                    repo: e - repo_rate.simple_period_rate(a, b)?,
                    libor: curves.libor_projection.simple_period_rate(a, b)? - e,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SpreadDecomposition { periods })
    }
}

fn gamma_buy_and_hold(rho: f64, rho_trs: f64, beta: f64, s: &PeriodSpreads, gap: f64) -> f64 {
    rho - rho_trs - (1.0 + beta) * (s.funding - s.collateral) * gap
}

fn gamma_lending(rho_b: f64, rho_trs: f64, alpha: f64, beta: f64, s: &PeriodSpreads, gap: f64) -> f64 {
    rho_b - rho_trs - ((beta - alpha) * (s.funding - s.collateral) - s.repo) * gap
}

/// Dividend tax impact rate for a dividend at `dividend_time` inside the
/// period described by `spreads`. Blends mix the two pure rates.
pub fn gamma(
    hedge: &HedgeSpec,
    dividend_time: f64,
    spreads: &PeriodSpreads,
    beta: f64,
    taxes: &TaxRegime,
) -> Result<f64> {
    if dividend_time > spreads.end {
        return Err(Error::Domain(format!(
            "dividend at {dividend_time} falls after the period end {}",
            spreads.end
        )));
    }
    let gap = spreads.end - dividend_time;
    let bh = gamma_buy_and_hold(taxes.rho_investor, taxes.rho_trs, beta, spreads, gap);
    let sl = gamma_lending(taxes.rho_borrower, taxes.rho_trs, hedge.alpha, beta, spreads, gap);
    Ok(match hedge.strategy {
        Strategy::BuyAndHold => bh,
        Strategy::StockLending | Strategy::StockBorrowing => sl,
        Strategy::Blended(w) => w * sl + (1.0 - w) * bh,
    })
}

/// One-period carry of the hedge against the floating index.
fn carry(hedge: &HedgeSpec, s: &PeriodSpreads) -> f64 {
    let bh = s.funding - s.libor;
    let sl = -hedge.alpha * s.funding + (1.0 + hedge.alpha) * s.collateral - s.libor - s.repo;
    match hedge.strategy {
        Strategy::BuyAndHold => bh,
        Strategy::StockLending | Strategy::StockBorrowing => sl,
        Strategy::Blended(w) => w * sl + (1.0 - w) * bh,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxSpread {
    pub spread: f64,
    pub rate_term: f64,
    pub dividend_term: f64,
    pub tobin_term: f64,
    /// OIS-discounted annuity `sum_i x_i P(T_i; e)`.
    pub annuity: f64,
}

/// First-order par spread. Only defined when both legs share a schedule.
pub fn approx_par_spread(
    hedge: &HedgeSpec,
    contract: &TrsContract,
    market: &MarketSnapshot,
    curves: &CurveSet,
) -> Result<ApproxSpread> {
    if !contract.aligned() {
        return Err(Error::Unsupported(
            "the par-spread expansion needs identical equity and funding schedules".into(),
        ));
    }
    contract.check_hedge(hedge)?;
    let schedule = &contract.equity;
    let decomposition = SpreadDecomposition::new(curves, schedule)?;
    let forwards = ForwardCurve::new(market, hedge, curves);
    let mode = contract.expectation_mode;
    let e = &curves.ois;
    let dates = schedule.dates();
    let n = schedule.periods();

    let mut annuity = 0.0;
    let mut rate_term = 0.0;
    for (i, s) in (1..=n).zip(&decomposition.periods) {
        let w = schedule.accrual(i) * e.discount(dates[i]);
        annuity += w;
        rate_term += w * carry(hedge, s);
    }

    let mut dividend_term = 0.0;
    for d in market.dividends.entries() {
        let Some(i) = schedule.period_of(d.time) else {
            continue;
        };
        let eqs = expected_dividend_over_spot(&forwards, market.vol, dates[i - 1], d.amount, mode)?;
        let g = gamma(
            hedge,
            d.time,
            &decomposition.periods[i - 1],
            contract.beta,
            &market.taxes,
        )?;
        dividend_term += e.discount(d.time) * eqs * g;
    }

    let tau = if contract.tobin_enabled {
        market.taxes.tobin
    } else {
        0.0
    };
    let tobin_term = if tau == 0.0 {
        0.0
    } else {
        tau * first_order_tobin(contract, market, &forwards, e, mode)?
    };

    Ok(ApproxSpread {
        spread: (rate_term + dividend_term + tobin_term) / annuity,
        rate_term,
        dividend_term,
        tobin_term,
        annuity,
    })
}

/// Tobin block per unit of tax rate, with options and bonds evaluated on
/// the OIS curve. Sign follows the bank's side as in the exact pricer.
fn first_order_tobin(
    contract: &TrsContract,
    market: &MarketSnapshot,
    forwards: &ForwardCurve,
    e: &YieldCurve,
    mode: ExpectationMode,
) -> Result<f64> {
    let dates = contract.equity.dates();
    let n = contract.equity.periods();
    let s0 = market.spot;
    match (contract.notional_mode, contract.direction) {
        (NotionalMode::Constant, direction) => {
            let kind = match direction {
                Direction::Receiver => OptionKind::Call,
                Direction::Payer => OptionKind::Put,
            };
            let mut options = 0.0;
            for i in 1..n {
                let opt = PerformanceOption::new(dates[i - 1], dates[i], kind, e.discount(dates[i]))?;
                options += performance_option_price(&opt, e, market.vol, mode)?;
            }
            Ok(match direction {
                Direction::Payer => 1.0 + options,
                Direction::Receiver => {
                    let last = dates[n - 1];
                    let mut terminal = e.discount(last);
                    for d in market.dividends.entries() {
                        if d.time >= last && d.time < dates[n] {
                            terminal -= e.discount(d.time)
                                * expected_dividend_over_spot(forwards, market.vol, last, d.amount, mode)?;
                        }
                    }
                    -(options + terminal)
                }
            })
        }
        (NotionalMode::Resetting, Direction::Payer) => Ok(1.0),
        (NotionalMode::Resetting, Direction::Receiver) => {
            let paid: f64 = market.dividends.before(dates[n]).map(|d| d.amount / s0).sum();
            Ok(-(1.0 - paid))
        }
    }
}
