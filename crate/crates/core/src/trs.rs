//! Equity total return swaps: contract description, analytic valuation and
//! par spreads for the constant-notional and resetting-notional conventions.
//!
//! Values are quoted from the hedging bank's side. The bank either receives
//! the equity performance and hedges by borrowing the stock (receiver), or
//! pays it and hedges by holding the stock outright, lending it, or a blend
//! of both (payer). The contractual legs are priced under the measure in
//! which the stock grows at the hedge curve `z` and drops by the hedge's net
//! dividend; cash flows are discounted on the TRS collateral curve `y`.
//! Tobin tax on hedge purchases is always a cost to the bank.

use crate::blackmodel::{
    expected_dividend_over_spot, expected_terminal_ratio, performance_option_price, ExpectationMode, OptionKind,
    PerformanceOption,
};
use crate::curves::{CurveSet, YieldCurve};
use crate::error::{Error, Result};
use crate::forwards::ForwardCurve;
use crate::market::{Dividend, HedgeSpec, MarketSnapshot, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Bank receives the equity leg and pays the floating leg plus spread.
    Receiver,
    /// Bank pays the equity leg and receives the floating leg plus spread.
    Payer,
}

impl Direction {
    /// Sign of the receiver-side contractual legs in the bank's value.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Receiver => 1.0,
            Direction::Payer => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotionalMode {
    /// Notional fixed, share quantity rebalanced every period.
    Constant,
    /// Share quantity fixed at `1 / S_0`, notional follows the spot.
    Resetting,
}

/// Payment dates `0 = T_0 < T_1 < ... < T_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    dates: Vec<f64>,
}

impl Schedule {
    pub fn new(dates: Vec<f64>) -> Result<Self> {
        if dates.len() < 2 {
            return Err(Error::Invalid("schedule needs a start and at least one payment".into()));
        }
        if dates[0] != 0.0 {
            return Err(Error::Invalid(format!("schedule must start at 0, got {}", dates[0])));
        }
        if dates.iter().any(|t| !t.is_finite()) || dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("schedule dates must be strictly increasing".into()));
        }
        Ok(Schedule { dates })
    }

    /// `periods` equal accruals up to `maturity`.
    pub fn regular(maturity: f64, periods: usize) -> Result<Self> {
        if periods == 0 || !(maturity > 0.0) {
            return Err(Error::Invalid(format!(
                "regular schedule needs maturity > 0 and periods > 0, got {maturity} and {periods}"
            )));
        }
        let mut dates: Vec<f64> = (0..=periods).map(|i| maturity * i as f64 / periods as f64).collect();
        dates[periods] = maturity;
        Schedule::new(dates)
    }

    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    pub fn periods(&self) -> usize {
        self.dates.len() - 1
    }

    pub fn maturity(&self) -> f64 {
        self.dates[self.dates.len() - 1]
    }

    /// Accrual `x_i = T_i - T_{i-1}` for `i >= 1`.
    pub fn accrual(&self, i: usize) -> f64 {
        self.dates[i] - self.dates[i - 1]
    }

    /// Index `i` of the period `[T_{i-1}, T_i)` containing `t`, if any.
    pub fn period_of(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t >= self.maturity() {
            return None;
        }
        Some(self.dates.partition_point(|&d| d <= t))
    }
}

/// `eta(T) = max { T_i : T_i < T }`.
pub fn eta(t: f64, equity: &Schedule) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("eta needs T > 0, got {t}")));
    }
    let idx = equity.dates.partition_point(|&d| d < t);
    Ok(equity.dates[idx - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrsContract {
    pub direction: Direction,
    pub notional_mode: NotionalMode,
    pub equity: Schedule,
    pub funding: Schedule,
    /// Contract spread `K` over the floating index, when fixed.
    pub spread: Option<f64>,
    /// Haircut on the TRS collateral agreement.
    pub beta: f64,
    pub tobin_enabled: bool,
    pub expectation_mode: ExpectationMode,
}

impl TrsContract {
    pub fn new(direction: Direction, notional_mode: NotionalMode, equity: Schedule, funding: Schedule) -> Result<Self> {
        if equity.maturity() != funding.maturity() {
            return Err(Error::Invalid(format!(
                "equity maturity {} differs from funding maturity {}",
                equity.maturity(),
                funding.maturity()
            )));
        }
        Ok(TrsContract {
            direction,
            notional_mode,
            equity,
            funding,
            spread: None,
            beta: 0.0,
            tobin_enabled: true,
            expectation_mode: ExpectationMode::Black,
        })
    }

    pub fn with_spread(mut self, spread: f64) -> Self {
        self.spread = Some(spread);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_tobin(mut self, enabled: bool) -> Self {
        self.tobin_enabled = enabled;
        self
    }

    pub fn with_expectation_mode(mut self, mode: ExpectationMode) -> Self {
        self.expectation_mode = mode;
        self
    }

    /// Same dates on both legs.
    pub fn aligned(&self) -> bool {
        self.equity == self.funding
    }

    pub fn maturity(&self) -> f64 {
        self.equity.maturity()
    }

    /// Receivers hedge by stock borrowing; payers by buy-and-hold, stock
    /// lending or a blend. Other pairings have no pricing formula.
    pub fn check_hedge(&self, hedge: &HedgeSpec) -> Result<()> {
        let ok = match (self.direction, hedge.strategy) {
            (Direction::Receiver, Strategy::StockBorrowing) => true,
            (Direction::Receiver, _) => false,
            (Direction::Payer, Strategy::StockBorrowing) => false,
            (Direction::Payer, _) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "{:?} TRS cannot be hedged with {:?}; receivers use stock borrowing, payers use buy-and-hold, stock lending or a blend",
                self.direction, hedge.strategy
            )))
        }
    }
}

/// Par spread split into the numerator contributions and the annuity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadBreakdown {
    pub spread: f64,
    /// Effective-rate versus floating-index carry.
    pub rate_leg: f64,
    /// Dividend tax asymmetries between hedge and TRS.
    pub dividend_tax_cost: f64,
    pub tobin_cost: f64,
    pub annuity: f64,
}

impl SpreadBreakdown {
    fn from_parts(rate_leg: f64, dividend_tax_cost: f64, tobin_cost: f64, annuity: f64) -> Self {
        SpreadBreakdown {
            spread: (rate_leg + dividend_tax_cost + tobin_cost) / annuity,
            rate_leg,
            dividend_tax_cost,
            tobin_cost,
            annuity,
        }
    }
}

/// Bank-side value split by leg; `total` is the sum of the four legs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueBreakdown {
    pub performance: f64,
    pub dividends: f64,
    pub funding: f64,
    pub tobin: f64,
    pub total: f64,
}

impl ValueBreakdown {
    pub fn new(performance: f64, dividends: f64, funding: f64, tobin: f64) -> Self {
        ValueBreakdown {
            performance,
            dividends,
            funding,
            tobin,
            total: performance + dividends + funding + tobin,
        }
    }
}

/// Analytic TRS pricer for one contract, market, curve set and hedge.
#[derive(Debug, Clone)]
pub struct TrsPricer {
    contract: TrsContract,
    vol: f64,
    rho_trs: f64,
    tobin: f64,
    /// TRS discounting curve `y`.
    discount: YieldCurve,
    libor: YieldCurve,
    forwards: ForwardCurve,
    /// Dividends paid strictly before maturity with their period index.
    dividends: Vec<(usize, Dividend)>,
}

impl TrsPricer {
    pub fn new(contract: &TrsContract, market: &MarketSnapshot, curves: &CurveSet, hedge: &HedgeSpec) -> Result<Self> {
        contract.check_hedge(hedge)?;
        if !(contract.beta >= 0.0) {
            return Err(Error::Invalid(format!("TRS haircut {} must be >= 0", contract.beta)));
        }
        let dividends = market
            .dividends
            .entries()
            .iter()
            .filter_map(|d| contract.equity.period_of(d.time).map(|i| (i, *d)))
            .collect();
        Ok(TrsPricer {
            contract: contract.clone(),
            vol: market.vol,
            rho_trs: market.taxes.rho_trs,
            tobin: if contract.tobin_enabled {
                market.taxes.tobin
            } else {
                0.0
            },
            discount: curves.trs_discount_curve(contract.beta),
            libor: curves.libor_projection.clone(),
            forwards: ForwardCurve::new(market, hedge, curves),
            dividends,
        })
    }

    pub fn contract(&self) -> &TrsContract {
        &self.contract
    }

    pub fn forwards(&self) -> &ForwardCurve {
        &self.forwards
    }

    pub fn discount_curve(&self) -> &YieldCurve {
        &self.discount
    }

    fn mode(&self) -> ExpectationMode {
        self.contract.expectation_mode
    }

    fn z(&self) -> &YieldCurve {
        self.forwards.hedge_curve()
    }

    /// `P(t; y - z)`
    fn spread_bond(&self, t: f64) -> f64 {
        self.discount.discount(t) / self.z().discount(t)
    }

    fn effective_rate(&self, i: usize) -> f64 {
        let d = self.contract.equity.dates();
        self.z()
            .simple_period_rate(d[i - 1], d[i])
            .expect("schedule is increasing")
    }

    fn libor_rate(&self, start: f64, end: f64) -> f64 {
        self.libor
            .simple_period_rate(start, end)
            .expect("schedule is increasing")
    }

    /// `E[Q / S_{T_{i-1}}]`
    fn expected_dividend_yield(&self, period: usize, amount: f64) -> Result<f64> {
        let fixing = self.contract.equity.dates()[period - 1];
        expected_dividend_over_spot(&self.forwards, self.vol, fixing, amount, self.mode())
    }

    /// `1 - rho_T - (1 - rho) P(T_i; y - z) / P(t_k; y - z)`
    fn dividend_asymmetry(&self, period: usize, time: f64) -> f64 {
        let pay = self.contract.equity.dates()[period];
        1.0 - self.rho_trs - (1.0 - self.forwards.net_tax()) * self.spread_bond(pay) / self.spread_bond(time)
    }

    /// `sum_j x'_j P(T'_j; y) w_j` with `w_j = 1` (constant notional) or
    /// `F(eta(T'_j)) / S_0` (resetting notional).
    pub fn annuity(&self) -> f64 {
        let funding = &self.contract.funding;
        let s0 = self.forwards.spot();
        (1..=funding.periods())
            .map(|j| {
                let t = funding.dates()[j];
                let notional = match self.contract.notional_mode {
                    NotionalMode::Constant => 1.0,
                    NotionalMode::Resetting => self.forwards.at(eta(t, &self.contract.equity).unwrap()) / s0,
                };
                funding.accrual(j) * self.discount.discount(t) * notional
            })
            .sum()
    }

    /// Bank-side value of the Tobin tax paid on hedge purchases (<= 0).
    fn tobin_value(&self) -> Result<f64> {
        if self.tobin == 0.0 {
            return Ok(0.0);
        }
        let tau = self.tobin;
        let dates = self.contract.equity.dates();
        let n = self.contract.equity.periods();
        let py = |t: f64| self.discount.discount(t);
        match (self.contract.notional_mode, self.contract.direction) {
            (NotionalMode::Constant, direction) => {
                let kind = match direction {
                    Direction::Receiver => OptionKind::Call,
                    Direction::Payer => OptionKind::Put,
                };
                let mut options = 0.0;
                for i in 1..n {
                    let opt = PerformanceOption::new(dates[i - 1], dates[i], kind, py(dates[i]))?;
                    options += performance_option_price(&opt, self.z(), self.vol, self.mode())?;
                }
                Ok(match direction {
                    Direction::Receiver => {
                        let terminal =
                            expected_terminal_ratio(&self.forwards, self.vol, dates[n - 1], dates[n], self.mode())?;
                        -tau * (options + py(dates[n]) * terminal)
                    }
                    Direction::Payer => -tau * (1.0 + options),
                })
            }
            (NotionalMode::Resetting, Direction::Receiver) => {
                let t_n = dates[n];
                Ok(-tau * py(t_n) * self.forwards.at(t_n) / self.forwards.spot())
            }
            (NotionalMode::Resetting, Direction::Payer) => Ok(-tau),
        }
    }

    /// Tobin contribution to the par-spread numerator. Receivers pay the
    /// spread, so the cost lowers it; payers receive it, so the cost raises it.
    fn tobin_cost(&self) -> Result<f64> {
        let v = self.tobin_value()?;
        Ok(match self.contract.direction {
            Direction::Receiver => v,
            Direction::Payer => -v,
        })
    }

    /// Par spread for the constant-notional convention.
    pub fn par_spread_constant_notional(&self) -> Result<SpreadBreakdown> {
        let equity = &self.contract.equity;
        let funding = &self.contract.funding;
        let py = |t: f64| self.discount.discount(t);

        let mut rate_leg = 0.0;
        for i in 1..=equity.periods() {
            rate_leg += equity.accrual(i) * py(equity.dates()[i]) * self.effective_rate(i);
        }
        for j in 1..=funding.periods() {
            let (a, b) = (funding.dates()[j - 1], funding.dates()[j]);
            rate_leg -= funding.accrual(j) * py(b) * self.libor_rate(a, b);
        }

        let mut dividend_tax_cost = 0.0;
        for &(i, d) in &self.dividends {
            dividend_tax_cost +=
                py(d.time) * self.expected_dividend_yield(i, d.amount)? * self.dividend_asymmetry(i, d.time);
        }

        let annuity = (1..=funding.periods())
            .map(|j| funding.accrual(j) * py(funding.dates()[j]))
            .sum();
        Ok(SpreadBreakdown::from_parts(
            rate_leg,
            dividend_tax_cost,
            self.tobin_cost()?,
            annuity,
        ))
    }

    /// Par spread for the resetting-notional convention. Aligned schedules
    /// use the simplified closed form, anything else the general one.
    pub fn par_spread_resetting(&self) -> Result<SpreadBreakdown> {
        if self.contract.aligned() {
            self.par_spread_resetting_aligned()
        } else {
            self.par_spread_resetting_general()
        }
    }

    /// Shared pieces of the resetting formulas.
    fn resetting_dividend_terms(&self, carry: impl Fn(usize) -> f64) -> f64 {
        let equity = &self.contract.equity;
        let s0 = self.forwards.spot();
        let rho = self.forwards.net_tax();
        let py = |t: f64| self.discount.discount(t);
        let pz = |t: f64| self.z().discount(t);

        let mut total = 0.0;
        for &(i, d) in &self.dividends {
            total += py(d.time) * d.amount / s0 * self.dividend_asymmetry(i, d.time);
        }
        // dividends paid before the period starts shrink its notional
        for i in 1..=equity.periods() {
            let start = equity.dates()[i - 1];
            let shrink: f64 = self
                .forwards
                .dividends()
                .before(start)
                .map(|d| (1.0 - rho) * d.amount / s0 * pz(d.time) / pz(start))
                .sum();
            total -= equity.accrual(i) * py(equity.dates()[i]) * carry(i) * shrink;
        }
        total
    }

    fn resetting_tobin_cost(&self) -> Result<f64> {
        if self.contract.direction == Direction::Payer || self.tobin == 0.0 {
            return self.tobin_cost();
        }
        // -tau P(T_n;y) F(T_n) / S_0 expanded through the forward solution
        let t_n = self.contract.maturity();
        let s0 = self.forwards.spot();
        let p_n = self.spread_bond(t_n);
        let dividends: f64 = self
            .forwards
            .dividends()
            .before(t_n)
            .map(|d| self.z().discount(d.time) * p_n * self.forwards.net_dividend(d.amount) / s0)
            .sum();
        Ok(-self.tobin * (p_n - dividends))
    }

    fn par_spread_resetting_aligned(&self) -> Result<SpreadBreakdown> {
        let equity = &self.contract.equity;
        let s0 = self.forwards.spot();
        let py = |t: f64| self.discount.discount(t);
        let dates = equity.dates();
        let carry = |i: usize| self.effective_rate(i) - self.libor_rate(dates[i - 1], dates[i]);

        let mut rate_leg = 0.0;
        let mut annuity = 0.0;
        for i in 1..=equity.periods() {
            let (a, b) = (dates[i - 1], dates[i]);
            let forward_bond = py(b) / py(a);
            rate_leg += equity.accrual(i) * self.spread_bond(a) * forward_bond * carry(i);
            annuity += equity.accrual(i) * py(b) * self.forwards.at(a) / s0;
        }
        Ok(SpreadBreakdown::from_parts(
            rate_leg,
            self.resetting_dividend_terms(carry),
            self.resetting_tobin_cost()?,
            annuity,
        ))
    }

    /// General resetting formula; valid for any pair of schedules.
    pub fn par_spread_resetting_general(&self) -> Result<SpreadBreakdown> {
        let equity = &self.contract.equity;
        let funding = &self.contract.funding;
        let s0 = self.forwards.spot();
        let py = |t: f64| self.discount.discount(t);

        let mut rate_leg = 0.0;
        for i in 1..=equity.periods() {
            let (a, b) = (equity.dates()[i - 1], equity.dates()[i]);
            rate_leg += equity.accrual(i) * self.spread_bond(a) * (py(b) / py(a)) * self.effective_rate(i);
        }
        for j in 1..=funding.periods() {
            let (a, b) = (funding.dates()[j - 1], funding.dates()[j]);
            let notional = self.forwards.at(eta(b, equity)?) / s0;
            rate_leg -= funding.accrual(j) * py(b) * self.libor_rate(a, b) * notional;
        }
        Ok(SpreadBreakdown::from_parts(
            rate_leg,
            self.resetting_dividend_terms(|i| self.effective_rate(i)),
            self.resetting_tobin_cost()?,
            self.annuity(),
        ))
    }

    /// Par spread for the contract's own notional convention.
    pub fn par_spread(&self) -> Result<SpreadBreakdown> {
        match self.contract.notional_mode {
            NotionalMode::Constant => self.par_spread_constant_notional(),
            NotionalMode::Resetting => self.par_spread_resetting(),
        }
    }

    /// Analytic bank-side value at spread `spread`, built leg by leg from
    /// the expected contractual cash flows.
    pub fn value(&self, spread: f64) -> Result<ValueBreakdown> {
        let equity = &self.contract.equity;
        let funding = &self.contract.funding;
        let s0 = self.forwards.spot();
        let py = |t: f64| self.discount.discount(t);
        let sign = self.contract.direction.sign();

        let (performance, dividends, floating) = match self.contract.notional_mode {
            NotionalMode::Constant => {
                let mut perf = 0.0;
                for i in 1..=equity.periods() {
                    perf += equity.accrual(i) * py(equity.dates()[i]) * self.effective_rate(i);
                }
                let mut divs = 0.0;
                let rho = self.forwards.net_tax();
                for &(i, d) in &self.dividends {
                    let eqs = self.expected_dividend_yield(i, d.amount)?;
                    let pay = equity.dates()[i];
                    perf -= (1.0 - rho) * eqs * py(d.time) * self.spread_bond(pay) / self.spread_bond(d.time);
                    divs += (1.0 - self.rho_trs) * py(d.time) * eqs;
                }
                let mut fund = 0.0;
                for j in 1..=funding.periods() {
                    let (a, b) = (funding.dates()[j - 1], funding.dates()[j]);
                    fund -= funding.accrual(j) * py(b) * (self.libor_rate(a, b) + spread);
                }
                (perf, divs, fund)
            }
            NotionalMode::Resetting => {
                let f = |t: f64| self.forwards.at(t);
                let mut perf = 0.0;
                for i in 1..=equity.periods() {
                    let (a, b) = (equity.dates()[i - 1], equity.dates()[i]);
                    perf += py(b) * (f(b) - f(a)) / s0;
                }
                let divs: f64 = self
                    .dividends
                    .iter()
                    .map(|(_, d)| (1.0 - self.rho_trs) * py(d.time) * d.amount / s0)
                    .sum();
                let mut fund = 0.0;
                for j in 1..=funding.periods() {
                    let (a, b) = (funding.dates()[j - 1], funding.dates()[j]);
                    let notional = f(eta(b, equity)?) / s0;
                    fund -= funding.accrual(j) * py(b) * (self.libor_rate(a, b) + spread) * notional;
                }
                (perf, divs, fund)
            }
        };
        Ok(ValueBreakdown::new(
            sign * performance,
            sign * dividends,
            sign * floating,
            self.tobin_value()?,
        ))
    }
}

pub fn par_spread_constant_notional(
    contract: &TrsContract,
    market: &MarketSnapshot,
    curves: &CurveSet,
    hedge: &HedgeSpec,
) -> Result<SpreadBreakdown> {
    TrsPricer::new(contract, market, curves, hedge)?.par_spread_constant_notional()
}

pub fn par_spread_resetting(
    contract: &TrsContract,
    market: &MarketSnapshot,
    curves: &CurveSet,
    hedge: &HedgeSpec,
) -> Result<SpreadBreakdown> {
    TrsPricer::new(contract, market, curves, hedge)?.par_spread_resetting()
}

/// Value of a contract whose spread is fixed.
pub fn trs_value(
    contract: &TrsContract,
    market: &MarketSnapshot,
    curves: &CurveSet,
    hedge: &HedgeSpec,
) -> Result<ValueBreakdown> {
    let spread = contract
        .spread
        .ok_or_else(|| Error::Invalid("contract spread is not set".into()))?;
    TrsPricer::new(contract, market, curves, hedge)?.value(spread)
}
