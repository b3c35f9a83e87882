mod common;

use approx::assert_abs_diff_eq;
use common::*;
use trs_core::curves::{CurveSet, YieldCurve};
use trs_core::expansion::approx_par_spread;
use trs_core::market::{DividendSchedule, HedgeSpec, MarketSnapshot, Strategy, TaxRegime};
use trs_core::scenario::Scenario;
use trs_core::trs::{Direction, NotionalMode, Schedule, TrsContract};
use trs_core::Error;

fn approx(s: &Scenario) -> f64 {
    approx_par_spread(&s.hedge, &s.contract, &s.market, &s.curves)
        .unwrap()
        .spread
}

fn errors(s: &Scenario, eps: &[f64]) -> Vec<f64> {
    eps.iter()
        .map(|&e| {
            let sc = scaled(s, e);
            (par(&sc) - approx(&sc)).abs()
        })
        .collect()
}

const EPS: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

fn monthly_contract(direction: Direction) -> TrsContract {
    let m = Schedule::regular(1.0, 12).unwrap();
    TrsContract::new(direction, NotionalMode::Constant, m.clone(), m).unwrap()
}

#[test]
fn vanishes_without_spreads_or_tax_asymmetry() {
    let market = MarketSnapshot::new(73.0, 0.2, DividendSchedule::empty(), TaxRegime::untaxed()).unwrap();
    let curves = CurveSet::uniform(YieldCurve::flat(0.01));
    for s in [Strategy::BuyAndHold, Strategy::StockLending] {
        let h = HedgeSpec::new(s, 0.05).unwrap();
        let a = approx_par_spread(&h, &monthly_contract(Direction::Payer), &market, &curves).unwrap();
        assert_eq!(a.spread, 0.0);
    }
}

#[test]
fn buy_and_hold_carry_passes_straight_through() {
    let market = MarketSnapshot::new(73.0, 0.2, DividendSchedule::empty(), TaxRegime::untaxed()).unwrap();
    let e = YieldCurve::flat(0.01);
    // funding and index one-month simple rates 10bp apart
    let simple = |r: f64| 12.0 * ((r / 12.0f64).exp() - 1.0);
    let r = 12.0 * (1.0 + (simple(0.012) + 0.001) / 12.0).ln();
    let curves = CurveSet {
        funding: YieldCurve::flat(r),
        collateral: e.clone(),
        ois: e,
        repo_fee: YieldCurve::flat(0.0),
        libor_projection: YieldCurve::flat(0.012),
    };
    let h = HedgeSpec::new(Strategy::BuyAndHold, 0.05).unwrap();
    let a = approx_par_spread(&h, &monthly_contract(Direction::Payer), &market, &curves).unwrap();
    assert_abs_diff_eq!(a.spread, 0.001, epsilon = 1e-13);
}

#[test]
fn misaligned_schedules_are_unsupported() {
    let mut s = payer_constant();
    s.contract.funding = Schedule::regular(1.0, 4).unwrap();
    assert!(matches!(
        approx_par_spread(&s.hedge, &s.contract, &s.market, &s.curves),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn constant_notional_error_is_second_order() {
    let payer = payer_constant();
    for s in [
        with_strategy(&payer, Strategy::BuyAndHold),
        with_strategy(&payer, Strategy::StockLending),
        with_strategy(&payer, Strategy::Blended(0.7)),
        receiver_constant(),
    ] {
        let errs = errors(&s, &EPS);
        let slope = loglog_slope(&EPS, &errs);
        assert!(slope >= 1.9, "{:?}: slope {slope}, errors {errs:?}", s.hedge.strategy);
        // the error is small relative to the spread itself
        assert!(errs[0] < 0.05 * par(&s).abs(), "{errs:?}");
    }
}

#[test]
fn intrinsic_mode_converges_too() {
    let mut s = payer_constant();
    s.contract = s
        .contract
        .with_expectation_mode(trs_core::blackmodel::ExpectationMode::ForwardIntrinsic);
    // intrinsic values kink where a forward ratio crosses 1, which the
    // largest eps straddles; fit the asymptotic regime
    let errs = errors(&s, &EPS[1..]);
    assert!(loglog_slope(&EPS[1..], &errs) >= 1.9, "{errs:?}");
}

#[test]
fn resetting_gap_is_first_order() {
    // the expansion's annuity ignores the notional shrink after the
    // dividend, so for resetting swaps the gap is (dividend + Tobin terms)
    // times the dividend yield: linear in eps, not quadratic
    let s = payer_resetting();
    let errs = errors(&s, &EPS);
    let slope = loglog_slope(&EPS, &errs);
    assert!((0.9..1.2).contains(&slope), "slope {slope}, errors {errs:?}");
}
