//! Equity market data, dividend taxation and the hedging strategy.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::curves::{CurveSet, YieldCurve};
use crate::error::{Error, Result};

/// Gross cash dividend paid at `time`, in contract currency per share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dividend {
    pub time: f64,
    pub amount: f64,
}

/// Deterministic schedule of gross dividends known at `t = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DividendSchedule {
    entries: Vec<Dividend>,
}

impl DividendSchedule {
    pub fn new(entries: Vec<Dividend>) -> Result<Self> {
        for d in &entries {
            if !(d.time > 0.0) || !d.time.is_finite() {
                return Err(Error::Invalid(format!(
                    "dividend time {} must be finite and > 0",
                    d.time
                )));
            }
            if !(d.amount >= 0.0) || !d.amount.is_finite() {
                return Err(Error::Invalid(format!(
                    "dividend amount {} must be finite and >= 0",
                    d.amount
                )));
            }
        }
        if entries.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::Invalid("dividend times must be strictly increasing".into()));
        }
        Ok(DividendSchedule { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[Dividend] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dividends with `time < before`.
    pub fn before(&self, before: f64) -> impl Iterator<Item = &Dividend> {
        self.entries.iter().take_while(move |d| d.time < before)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.entries
                .iter()
                .map(|d| Dividend {
                    time: d.time,
                    amount: d.amount * factor,
                })
                .collect(),
        )
    }
}

/// Dividend and transaction taxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxRegime {
    /// Withholding suffered by a direct investor.
    pub rho_investor: f64,
    /// Fraction the stock borrower does not pass back to the lender.
    pub rho_borrower: f64,
    /// Fraction the TRS equity receiver does not pass back.
    pub rho_trs: f64,
    /// Tobin tax, fraction of market value paid on every share purchase.
    pub tobin: f64,
}

impl TaxRegime {
    pub fn new(rho_investor: f64, rho_borrower: f64, rho_trs: f64, tobin: f64) -> Result<Self> {
        for (name, v) in [
            ("rho_I", rho_investor),
            ("rho_B", rho_borrower),
            ("rho_T", rho_trs),
            ("tau", tobin),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Invalid(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        if tobin > 0.01 {
            warn!("Tobin tax {tobin} is above 100bps");
        }
        Ok(TaxRegime {
            rho_investor,
            rho_borrower,
            rho_trs,
            tobin,
        })
    }

    pub fn untaxed() -> Self {
        TaxRegime {
            rho_investor: 0.0,
            rho_borrower: 0.0,
            rho_trs: 0.0,
            tobin: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSnapshot {
    pub spot: f64,
    /// Flat lognormal volatility.
    pub vol: f64,
    pub dividends: DividendSchedule,
    pub taxes: TaxRegime,
}

impl MarketSnapshot {
    pub fn new(spot: f64, vol: f64, dividends: DividendSchedule, taxes: TaxRegime) -> Result<Self> {
        if !(spot > 0.0) || !spot.is_finite() {
            return Err(Error::Invalid(format!("spot {spot} must be > 0")));
        }
        if !(vol >= 0.0) || !vol.is_finite() {
            return Err(Error::Invalid(format!("vol {vol} must be >= 0")));
        }
        Ok(MarketSnapshot {
            spot,
            vol,
            dividends,
            taxes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    BuyAndHold,
    StockLending,
    StockBorrowing,
    /// Convex mix: weight `w` on stock lending, `1 - w` on buy-and-hold.
    Blended(f64),
}

/// Hedging strategy plus the repo haircut `alpha` it runs with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeSpec {
    pub strategy: Strategy,
    pub alpha: f64,
}

impl HedgeSpec {
    pub fn new(strategy: Strategy, alpha: f64) -> Result<Self> {
        if let Strategy::Blended(w) = strategy {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Invalid(format!("blending weight {w} outside [0, 1]")));
            }
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Invalid(format!("repo haircut {alpha} must be >= 0")));
        }
        Ok(HedgeSpec { strategy, alpha })
    }

    /// Weight on the repo leg: 0 for buy-and-hold, 1 for lending/borrowing.
    pub fn repo_weight(&self) -> f64 {
        match self.strategy {
            Strategy::BuyAndHold => 0.0,
            Strategy::StockLending | Strategy::StockBorrowing => 1.0,
            Strategy::Blended(w) => w,
        }
    }

    /// Net dividend tax `rho` seen by the hedge.
    pub fn dividend_tax(&self, taxes: &TaxRegime) -> f64 {
        match self.strategy {
            Strategy::BuyAndHold => taxes.rho_investor,
            Strategy::StockLending | Strategy::StockBorrowing => taxes.rho_borrower,
            Strategy::Blended(w) => w * taxes.rho_borrower + (1.0 - w) * taxes.rho_investor,
        }
    }

    /// Growth curve of the hedged asset: `r` for buy-and-hold, the
    /// repo-adjusted blend for lending and borrowing, and their convex mix.
    pub fn hedge_curve(&self, curves: &CurveSet) -> YieldCurve {
        match self.strategy {
            Strategy::BuyAndHold => curves.funding.clone(),
            Strategy::StockLending | Strategy::StockBorrowing => curves.blended_repo_curve(self.alpha),
            Strategy::Blended(w) => YieldCurve::linear_combination(&[
                (w, &curves.blended_repo_curve(self.alpha)),
                (1.0 - w, &curves.funding),
            ]),
        }
    }
}
