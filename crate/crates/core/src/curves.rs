//! Deterministic term structures.
//!
//! Every curve is a piecewise-flat instantaneous rate `z(u)` on `[0, inf)`
//! with flat extrapolation at both ends. Pillar `i` sets the rate on
//! `[t_i, t_{i+1})`. Because the rate is flat between pillars, the integral
//! `int_t^T z(u) du` and therefore every zero-coupon bond is exact.
//!
//! Times are ACT/365 year fractions measured from the valuation date, rates
//! are continuously compounded decimals and may be negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(time, rate)` pillar as it appears in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time: f64,
    pub rate: f64,
}

/// Piecewise-flat instantaneous rate curve.
///
/// The representation is canonical: the first pillar sits at `t = 0` and no
/// two consecutive pillars carry the same rate. Two curves that agree
/// pointwise therefore compare equal and produce bit-identical bonds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CurvePoint>", into = "Vec<CurvePoint>")]
pub struct YieldCurve {
    times: Vec<f64>,
    rates: Vec<f64>,
    /// `int_0^{times[i]} z(u) du`
    cumulative: Vec<f64>,
}

impl YieldCurve {
    pub fn new(pillars: &[CurvePoint]) -> Result<Self> {
        if pillars.is_empty() {
            return Err(Error::Invalid("curve needs at least one pillar".into()));
        }
        for p in pillars {
            if !p.time.is_finite() || p.time < 0.0 {
                return Err(Error::Invalid(format!(
                    "pillar time {} must be finite and >= 0",
                    p.time
                )));
            }
            if !p.rate.is_finite() {
                return Err(Error::Invalid(format!("pillar rate at t={} is not finite", p.time)));
            }
        }
        if pillars.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::Invalid("pillar times must be strictly increasing".into()));
        }
        Ok(Self::from_sorted(
            pillars.iter().map(|p| p.time).collect(),
            pillars.iter().map(|p| p.rate).collect(),
        ))
    }

    pub fn flat(rate: f64) -> Self {
        Self::from_sorted(vec![0.0], vec![rate])
    }

    // Inputs already validated: times strictly increasing, all finite.
    fn from_sorted(times: Vec<f64>, rates: Vec<f64>) -> Self {
        let mut ct = Vec::with_capacity(times.len());
        let mut cr: Vec<f64> = Vec::with_capacity(rates.len());
        for (i, (&t, &r)) in times.iter().zip(&rates).enumerate() {
            if i == 0 {
                // flat to the left, so the first pillar effectively starts at 0
                ct.push(0.0);
                cr.push(r);
            } else if r != *cr.last().unwrap() {
                ct.push(t);
                cr.push(r);
            }
        }
        let mut cumulative = Vec::with_capacity(ct.len());
        cumulative.push(0.0);
        for i in 1..ct.len() {
            cumulative.push(cumulative[i - 1] + cr[i - 1] * (ct[i] - ct[i - 1]));
        }
        YieldCurve {
            times: ct,
            rates: cr,
            cumulative,
        }
    }

    pub fn pillars(&self) -> Vec<CurvePoint> {
        self.times
            .iter()
            .zip(&self.rates)
            .map(|(&time, &rate)| CurvePoint { time, rate })
            .collect()
    }

    pub fn pillar_times(&self) -> &[f64] {
        &self.times
    }

    /// Instantaneous rate at `t` (right-continuous).
    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        self.rates[idx.saturating_sub(1)]
    }

    /// `int_0^t z(u) du` for `t >= 0`.
    pub fn integral(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            return self.rates[0] * t;
        }
        let i = idx - 1;
        self.cumulative[i] + self.rates[i] * (t - self.times[i])
    }

    /// Zero-coupon bond `P_t(T; z) = exp(-int_t^T z du)`.
    pub fn zero_bond(&self, t: f64, maturity: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("bond start {t} must be >= 0")));
        }
        if !(maturity >= t) {
            return Err(Error::Domain(format!("bond maturity {maturity} precedes start {t}")));
        }
        if maturity == t {
            return Ok(1.0);
        }
        Ok((self.integral(t) - self.integral(maturity)).exp())
    }

    /// `P_0(T; z)`. Callers guarantee `T >= 0`.
    pub fn discount(&self, maturity: f64) -> f64 {
        (-self.integral(maturity)).exp()
    }

    /// Simply compounded rate over `[start, end]`:
    /// `(P(start)/P(end) - 1) / (end - start)`.
    pub fn simple_period_rate(&self, start: f64, end: f64) -> Result<f64> {
        if !(start < end) {
            return Err(Error::Domain(format!("period start {start} must precede end {end}")));
        }
        if start < 0.0 {
            return Err(Error::Domain(format!("period start {start} must be >= 0")));
        }
        let growth = (self.integral(end) - self.integral(start)).exp();
        Ok((growth - 1.0) / (end - start))
    }

    /// Pointwise `sum_k w_k z_k(u)` on the union of pillar grids.
    pub fn linear_combination(terms: &[(f64, &YieldCurve)]) -> YieldCurve {
        let mut times: Vec<f64> = terms.iter().flat_map(|(_, c)| c.times.iter().copied()).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let rates = times
            .iter()
            .map(|&t| terms.iter().fold(0.0, |acc, (w, c)| acc + w * c.rate_at(t)))
            .collect();
        Self::from_sorted(times, rates)
    }

    /// Parallel shift of the instantaneous rate.
    pub fn shifted(&self, delta: f64) -> YieldCurve {
        Self::from_sorted(self.times.clone(), self.rates.iter().map(|r| r + delta).collect())
    }
}

impl TryFrom<Vec<CurvePoint>> for YieldCurve {
    type Error = Error;

    fn try_from(points: Vec<CurvePoint>) -> Result<Self> {
        YieldCurve::new(&points)
    }
}

impl From<YieldCurve> for Vec<CurvePoint> {
    fn from(curve: YieldCurve) -> Self {
        curve.pillars()
    }
}

/// The five market curves every valuation consumes, all dated `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    /// Effective unsecured funding rate `r`.
    pub funding: YieldCurve,
    /// Effective collateral accrual rate `c`.
    pub collateral: YieldCurve,
    /// Overnight index rate `e`.
    pub ois: YieldCurve,
    /// Proportional repo fee `l` earned by the stock lender.
    pub repo_fee: YieldCurve,
    /// Projection curve for the floating index paid on the funding leg.
    pub libor_projection: YieldCurve,
}

impl CurveSet {
    /// Same curve for every role; handy for degenerate test cases.
    pub fn uniform(curve: YieldCurve) -> Self {
        CurveSet {
            funding: curve.clone(),
            collateral: curve.clone(),
            ois: curve.clone(),
            repo_fee: YieldCurve::flat(0.0),
            libor_projection: curve,
        }
    }

    /// Repo-adjusted blended curve `z = -alpha r + (1 + alpha) c - l`.
    pub fn blended_repo_curve(&self, alpha: f64) -> YieldCurve {
        YieldCurve::linear_combination(&[
            (-alpha, &self.funding),
            (1.0 + alpha, &self.collateral),
            (-1.0, &self.repo_fee),
        ])
    }

    /// TRS collateral discounting curve `y = -beta r + (1 + beta) c`.
    pub fn trs_discount_curve(&self, beta: f64) -> YieldCurve {
        YieldCurve::linear_combination(&[(-beta, &self.funding), (1.0 + beta, &self.collateral)])
    }
}
