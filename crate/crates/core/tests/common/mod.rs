#![allow(dead_code)]

use trs_core::curves::{CurveSet, YieldCurve};
use trs_core::market::{HedgeSpec, Strategy};
use trs_core::scenario::Scenario;
use trs_core::trs::{Direction, NotionalMode};

pub const PAYER_RESETTING: &str = include_str!("../../../../scenarios/payer_resetting.toml");
pub const RECEIVER_CONSTANT: &str = include_str!("../../../../scenarios/receiver_constant.toml");

pub fn payer_resetting() -> Scenario {
    Scenario::from_toml(PAYER_RESETTING).unwrap()
}

pub fn receiver_constant() -> Scenario {
    Scenario::from_toml(RECEIVER_CONSTANT).unwrap()
}

/// The shipped payer scenario with constant notional.
pub fn payer_constant() -> Scenario {
    let mut s = payer_resetting();
    s.contract.notional_mode = NotionalMode::Constant;
    s
}

pub fn with_strategy(s: &Scenario, strategy: Strategy) -> Scenario {
    let mut s = s.clone();
    s.hedge = HedgeSpec::new(strategy, s.hedge.alpha).unwrap();
    if strategy == Strategy::StockBorrowing {
        s.contract.direction = Direction::Receiver;
    } else {
        s.contract.direction = Direction::Payer;
    }
    s
}

pub fn par(s: &Scenario) -> f64 {
    s.par_spread().unwrap().spread
}

/// Moves every spread over OIS, every tax rate and the Tobin rate by the
/// factor `eps`, leaving OIS untouched.
pub fn scaled(s: &Scenario, eps: f64) -> Scenario {
    let mut out = s.clone();
    let e = &s.curves.ois;
    let toward = |x: &YieldCurve| YieldCurve::linear_combination(&[(1.0 - eps, e), (eps, x)]);
    out.curves = CurveSet {
        funding: toward(&s.curves.funding),
        collateral: toward(&s.curves.collateral),
        ois: e.clone(),
        repo_fee: YieldCurve::linear_combination(&[(eps, &s.curves.repo_fee)]),
        libor_projection: toward(&s.curves.libor_projection),
    };
    let t = s.market.taxes;
    out.market.taxes = trs_core::market::TaxRegime::new(
        eps * t.rho_investor,
        eps * t.rho_borrower,
        eps * t.rho_trs,
        eps * t.tobin,
    )
    .unwrap();
    out
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
