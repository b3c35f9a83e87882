//! Strategy-dependent equity forwards.
//!
//! The hedged asset grows at the hedge curve `z` and drops by the net
//! dividend `(1 - rho) Q_k` at each dividend date, so the forward solves
//! `dF/dT = z_T F - sum_k (1 - rho) Q_k delta(T - t_k)` with `F(0) = S`:
//!
//! `F(T) = S / P(T;z) - sum_{t_k < T} P(t_k;z) / P(T;z) (1 - rho) Q_k`.

use log::warn;

use crate::curves::{CurveSet, YieldCurve};
use crate::error::{Error, Result};
use crate::market::{DividendSchedule, HedgeSpec, MarketSnapshot};

/// Forward term structure of the hedged asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCurve {
    spot: f64,
    hedge_curve: YieldCurve,
    net_tax: f64,
    dividends: DividendSchedule,
}

impl ForwardCurve {
    pub fn new(market: &MarketSnapshot, hedge: &HedgeSpec, curves: &CurveSet) -> Self {
        ForwardCurve {
            spot: market.spot,
            hedge_curve: hedge.hedge_curve(curves),
            net_tax: hedge.dividend_tax(&market.taxes),
            dividends: market.dividends.clone(),
        }
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }

    pub fn hedge_curve(&self) -> &YieldCurve {
        &self.hedge_curve
    }

    pub fn net_tax(&self) -> f64 {
        self.net_tax
    }

    pub fn dividends(&self) -> &DividendSchedule {
        &self.dividends
    }

    /// Net dividend `(1 - rho) Q` actually dropped from the hedged asset.
    pub fn net_dividend(&self, gross: f64) -> f64 {
        (1.0 - self.net_tax) * gross
    }

    /// `sum_{t_k < T} P(t_k;z) (1 - rho) Q_k`, the discounted net dividends
    /// paid strictly before `T`.
    pub fn discounted_net_dividends(&self, maturity: f64) -> f64 {
        self.dividends
            .before(maturity)
            .map(|d| self.hedge_curve.discount(d.time) * self.net_dividend(d.amount))
            .sum()
    }

    /// `F(T)` for `T >= 0`. Dividends falling exactly on `T` are excluded.
    pub fn at(&self, maturity: f64) -> f64 {
        (self.spot - self.discounted_net_dividends(maturity)) / self.hedge_curve.discount(maturity)
    }
}

/// Forward price with a flag for economically inconsistent inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardQuote {
    pub value: f64,
    /// Set when dividends exceed the grown spot and the forward is negative.
    pub negative: bool,
}

pub fn forward_price(
    market: &MarketSnapshot,
    hedge: &HedgeSpec,
    curves: &CurveSet,
    maturity: f64,
) -> Result<ForwardQuote> {
    if !(maturity >= 0.0) {
        return Err(Error::Domain(format!("forward maturity {maturity} must be >= 0")));
    }
    let value = ForwardCurve::new(market, hedge, curves).at(maturity);
    let negative = value < 0.0;
    if negative {
        warn!("negative forward {value} at T={maturity}: dividends exceed the grown spot");
    }
    Ok(ForwardQuote { value, negative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::CurvePoint;
    use crate::market::{Dividend, Strategy, TaxRegime};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn market(divs: Vec<Dividend>, rho_i: f64, rho_b: f64) -> MarketSnapshot {
        MarketSnapshot::new(
            73.0,
            0.2,
            DividendSchedule::new(divs).unwrap(),
            TaxRegime::new(rho_i, rho_b, 0.0, 0.0).unwrap(),
        )
        .unwrap()
    }

    fn hedge(s: Strategy) -> HedgeSpec {
        HedgeSpec::new(s, 0.05).unwrap()
    }

    #[test]
    fn zero_rates_no_dividends() {
        let m = market(vec![], 0.15, 0.05);
        let set = CurveSet::uniform(YieldCurve::flat(0.0));
        for s in [Strategy::BuyAndHold, Strategy::StockLending, Strategy::StockBorrowing] {
            let q = forward_price(&m, &hedge(s), &set, 1.0).unwrap();
            assert_eq!(q.value, 73.0);
            assert!(!q.negative);
        }
    }

    #[test]
    fn buy_and_hold_grows_at_funding() {
        let m = market(vec![], 0.15, 0.05);
        let mut set = CurveSet::uniform(YieldCurve::flat(0.0));
        set.funding = YieldCurve::flat(0.02);
        let f = forward_price(&m, &hedge(Strategy::BuyAndHold), &set, 1.0).unwrap();
        assert_abs_diff_eq!(f.value, 73.0 * 0.02f64.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(f.value, 74.4747, epsilon = 5e-5);
    }

    #[test]
    fn net_dividend_example() {
        let m = market(
            vec![Dividend {
                time: 0.25,
                amount: 3.2,
            }],
            0.15,
            0.05,
        );
        let set = CurveSet::uniform(YieldCurve::flat(0.02));
        let f = forward_price(&m, &hedge(Strategy::BuyAndHold), &set, 1.0).unwrap();
        let expected = 73.0 * 0.02f64.exp() - 0.015f64.exp() * 0.85 * 3.2;
        assert_abs_diff_eq!(f.value, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(f.value, 71.7136, epsilon = 5e-5);
    }

    #[test]
    fn dividend_on_maturity_is_excluded() {
        let m = market(vec![Dividend { time: 0.5, amount: 3.2 }], 0.15, 0.05);
        let set = CurveSet::uniform(YieldCurve::flat(0.02));
        let fc = ForwardCurve::new(&m, &hedge(Strategy::BuyAndHold), &set);
        assert_abs_diff_eq!(fc.at(0.5), 73.0 * 0.01f64.exp(), epsilon = 1e-12);
        assert!(fc.at(0.5 + 1e-9) < fc.at(0.5) - 2.0);
    }

    #[test]
    fn negative_forward_is_flagged() {
        let m = market(
            vec![Dividend {
                time: 0.1,
                amount: 80.0,
            }],
            0.0,
            0.0,
        );
        let set = CurveSet::uniform(YieldCurve::flat(0.0));
        let q = forward_price(&m, &hedge(Strategy::BuyAndHold), &set, 0.5).unwrap();
        assert!(q.negative);
        assert_abs_diff_eq!(q.value, -7.0, epsilon = 1e-12);
        assert!(forward_price(&m, &hedge(Strategy::BuyAndHold), &set, -0.1).is_err());
    }

    #[test]
    fn strategies_agree_without_frictions() {
        let m = market(
            vec![Dividend { time: 0.3, amount: 1.5 }, Dividend { time: 0.7, amount: 2.0 }],
            0.1,
            0.1,
        );
        let r = YieldCurve::new(&[
            CurvePoint { time: 0.0, rate: 0.01 },
            CurvePoint { time: 0.4, rate: 0.013 },
        ])
        .unwrap();
        let set = CurveSet {
            funding: r.clone(),
            collateral: r.clone(),
            ois: r.clone(),
            repo_fee: YieldCurve::flat(0.0),
            libor_projection: r,
        };
        let bh = ForwardCurve::new(&m, &HedgeSpec::new(Strategy::BuyAndHold, 0.0).unwrap(), &set);
        for s in [Strategy::StockLending, Strategy::StockBorrowing, Strategy::Blended(0.3)] {
            let other = ForwardCurve::new(&m, &HedgeSpec::new(s, 0.0).unwrap(), &set);
            for i in 0..=24 {
                let t = i as f64 / 24.0;
                assert_relative_eq!(bh.at(t), other.at(t), max_relative = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn spot_at_inception(z in -0.02f64..0.08, w in 0.0f64..=1.0, q in 0.0f64..10.0) {
            let m = market(vec![Dividend { time: 0.2, amount: q }], 0.15, 0.05);
            let set = CurveSet::uniform(YieldCurve::flat(z));
            let fc = ForwardCurve::new(&m, &hedge(Strategy::Blended(w)), &set);
            prop_assert_eq!(fc.at(0.0), 73.0);
        }

        #[test]
        fn carry_is_flat_between_dividends(a in 0.31f64..0.69, b in 0.31f64..0.69, z in -0.02f64..0.08) {
            let m = market(
                vec![Dividend { time: 0.3, amount: 2.0 }, Dividend { time: 0.7, amount: 1.0 }],
                0.15,
                0.05,
            );
            let mut set = CurveSet::uniform(YieldCurve::flat(z));
            set.collateral = YieldCurve::new(&[
                CurvePoint { time: 0.0, rate: z },
                CurvePoint { time: 0.5, rate: z + 0.01 },
            ]).unwrap();
            let fc = ForwardCurve::new(&m, &hedge(Strategy::StockLending), &set);
            let p = |t: f64| fc.at(t) * fc.hedge_curve().discount(t);
            prop_assert!((p(a) - p(b)).abs() <= 1e-12 * 73.0);
        }
    }
}
