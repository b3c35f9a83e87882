//! Scenario files, parameter sweeps and bump-and-revalue sensitivities.
//!
//! A scenario is a TOML document; see `scenarios/` and the README for the
//! full grammar. Parse errors carry TOML line/column information and
//! semantic errors name the offending field.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::blackmodel::ExpectationMode;
use crate::curves::{CurvePoint, CurveSet, YieldCurve};
use crate::error::{Error, Result};
use crate::expansion::approx_par_spread;
use crate::forwards::ForwardCurve;
use crate::market::{Dividend, DividendSchedule, HedgeSpec, MarketSnapshot, Strategy, TaxRegime};
use crate::oracle::{SimulationSpec, ValidationReport};
use crate::trs::{Direction, NotionalMode, Schedule, SpreadBreakdown, TrsContract, TrsPricer};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    market: RawMarket,
    taxes: RawTaxes,
    hedge: RawHedge,
    curves: RawCurves,
    contract: RawContract,
    simulation: Option<RawSimulation>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    spot: f64,
    vol: f64,
    #[serde(default)]
    dividends: Vec<Dividend>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTaxes {
    #[serde(rename = "rho_I", default)]
    rho_investor: f64,
    #[serde(rename = "rho_B", default)]
    rho_borrower: f64,
    #[serde(rename = "rho_T", default)]
    rho_trs: f64,
    #[serde(default)]
    tau: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawStrategy {
    BuyAndHold,
    StockLending,
    StockBorrowing,
    Blended,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHedge {
    strategy: RawStrategy,
    /// Stock-lending weight, required for `blended`.
    w: Option<f64>,
    #[serde(default)]
    alpha: f64,
}

/// Either a flat rate or a list of `{ time, rate }` pillars.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawCurve {
    Flat(f64),
    Pillars(Vec<CurvePoint>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurves {
    funding: RawCurve,
    collateral: RawCurve,
    ois: RawCurve,
    #[serde(default = "zero_curve")]
    repo_fee: RawCurve,
    libor_projection: RawCurve,
}

fn zero_curve() -> RawCurve {
    RawCurve::Flat(0.0)
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawDirection {
    Receiver,
    Payer,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawNotional {
    Constant,
    Resetting,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawExpectation {
    Black,
    ForwardIntrinsic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContract {
    direction: RawDirection,
    notional_mode: RawNotional,
    /// Regular schedule: maturity plus period counts.
    maturity: Option<f64>,
    periods: Option<usize>,
    funding_periods: Option<usize>,
    /// Explicit schedules, overriding the regular ones.
    equity_dates: Option<Vec<f64>>,
    funding_dates: Option<Vec<f64>>,
    spread: Option<f64>,
    #[serde(default)]
    beta: f64,
    #[serde(default = "yes")]
    tobin_enabled: bool,
    #[serde(default = "black")]
    expectation_mode: RawExpectation,
}

fn yes() -> bool {
    true
}

fn black() -> RawExpectation {
    RawExpectation::Black
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    paths: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    antithetic: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeries {
    axis: SweepAxis,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: SweepAxis,
    grid: Vec<f64>,
    series: Option<RawSeries>,
}

/// Parameter moved by a sweep. Bumps are parallel shifts of the named
/// curve; spot and dividend bumps are relative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "rho_B")]
    RhoB,
    /// Stock-lending weight of a blended hedge.
    #[serde(rename = "w")]
    W,
    /// Flat repo fee level.
    #[serde(rename = "repo_fee")]
    RepoFee,
    #[serde(rename = "funding_bump")]
    FundingBump,
    #[serde(rename = "collateral_bump")]
    CollateralBump,
    #[serde(rename = "spot_bump")]
    SpotBump,
    #[serde(rename = "dividend_bump")]
    DividendBump,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::RhoB => "rho_B",
            SweepAxis::W => "w",
            SweepAxis::RepoFee => "repo_fee",
            SweepAxis::FundingBump => "funding_bump",
            SweepAxis::CollateralBump => "collateral_bump",
            SweepAxis::SpotBump => "spot_bump",
            SweepAxis::DividendBump => "dividend_bump",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        ALL_AXES.iter().copied().find(|a| a.name() == name).ok_or_else(|| {
            let names: Vec<_> = ALL_AXES.iter().map(|a| a.name()).collect();
            Error::Config(format!(
                "unknown sweep axis '{name}', expected one of {}",
                names.join(", ")
            ))
        })
    }
}

const ALL_AXES: [SweepAxis; 7] = [
    SweepAxis::RhoB,
    SweepAxis::W,
    SweepAxis::RepoFee,
    SweepAxis::FundingBump,
    SweepAxis::CollateralBump,
    SweepAxis::SpotBump,
    SweepAxis::DividendBump,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    /// Optional second parameter; one block of rows per value.
    pub series: Option<(SweepAxis, Vec<f64>)>,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, grid: Vec<f64>, series: Option<(SweepAxis, Vec<f64>)>) -> Result<Self> {
        check_grid("sweep.grid", &grid)?;
        if let Some((s, values)) = &series {
            check_grid("sweep.series.values", values)?;
            if *s == axis {
                return Err(Error::Config("sweep.series: series axis equals the sweep axis".into()));
            }
        }
        Ok(SweepSpec { axis, grid, series })
    }
}

fn check_grid(field: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{field}: grid is empty")));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{field}: values must be finite and strictly increasing"
        )));
    }
    Ok(())
}

/// Fully validated pricing inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub market: MarketSnapshot,
    pub curves: CurveSet,
    pub hedge: HedgeSpec,
    pub contract: TrsContract,
    pub simulation: Option<SimulationSpec>,
    pub sweep: Option<SweepSpec>,
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| {
        let msg = match e {
            Error::Domain(m) | Error::Invalid(m) | Error::Unsupported(m) | Error::Config(m) | Error::Simulation(m) => m,
        };
        Error::Config(format!("{name}: {msg}"))
    })
}

fn build_curve(name: &str, raw: &RawCurve) -> Result<YieldCurve> {
    match raw {
        RawCurve::Flat(r) if r.is_finite() => Ok(YieldCurve::flat(*r)),
        RawCurve::Flat(_) => Err(Error::Config(format!("curves.{name}: rate is not finite"))),
        RawCurve::Pillars(p) => field(&format!("curves.{name}"), YieldCurve::new(p)),
    }
}

fn build_schedule(
    name: &str,
    dates: &Option<Vec<f64>>,
    maturity: Option<f64>,
    periods: Option<usize>,
) -> Result<Schedule> {
    match (dates, maturity, periods) {
        (Some(d), _, _) => field(&format!("contract.{name}_dates"), Schedule::new(d.clone())),
        (None, Some(m), Some(p)) => field("contract.maturity", Schedule::regular(m, p)),
        _ => Err(Error::Config(format!(
            "contract: give either {name}_dates or maturity and periods"
        ))),
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn from_raw(raw: RawScenario) -> Result<Self> {
        let taxes = field(
            "taxes",
            TaxRegime::new(
                raw.taxes.rho_investor,
                raw.taxes.rho_borrower,
                raw.taxes.rho_trs,
                raw.taxes.tau,
            ),
        )?;
        let dividends = field("market.dividends", DividendSchedule::new(raw.market.dividends))?;
        let market = field(
            "market",
            MarketSnapshot::new(raw.market.spot, raw.market.vol, dividends, taxes),
        )?;

        let curves = CurveSet {
            funding: build_curve("funding", &raw.curves.funding)?,
            collateral: build_curve("collateral", &raw.curves.collateral)?,
            ois: build_curve("ois", &raw.curves.ois)?,
            repo_fee: build_curve("repo_fee", &raw.curves.repo_fee)?,
            libor_projection: build_curve("libor_projection", &raw.curves.libor_projection)?,
        };

        let strategy = match (raw.hedge.strategy, raw.hedge.w) {
            (RawStrategy::Blended, Some(w)) => Strategy::Blended(w),
            (RawStrategy::Blended, None) => {
                return Err(Error::Config("hedge.w: required for a blended strategy".into()))
            }
            (_, Some(_)) => return Err(Error::Config("hedge.w: only valid for a blended strategy".into())),
            (RawStrategy::BuyAndHold, None) => Strategy::BuyAndHold,
            (RawStrategy::StockLending, None) => Strategy::StockLending,
            (RawStrategy::StockBorrowing, None) => Strategy::StockBorrowing,
        };
        let hedge = field("hedge", HedgeSpec::new(strategy, raw.hedge.alpha))?;

        let c = &raw.contract;
        let equity = build_schedule("equity", &c.equity_dates, c.maturity, c.periods)?;
        let funding = build_schedule("funding", &c.funding_dates, c.maturity, c.funding_periods.or(c.periods))?;
        let direction = match c.direction {
            RawDirection::Receiver => Direction::Receiver,
            RawDirection::Payer => Direction::Payer,
        };
        let notional = match c.notional_mode {
            RawNotional::Constant => NotionalMode::Constant,
            RawNotional::Resetting => NotionalMode::Resetting,
        };
        if !(c.beta >= 0.0) {
            return Err(Error::Config(format!("contract.beta: {} must be >= 0", c.beta)));
        }
        let mut contract = field("contract", TrsContract::new(direction, notional, equity, funding))?
            .with_beta(c.beta)
            .with_tobin(c.tobin_enabled)
            .with_expectation_mode(match c.expectation_mode {
                RawExpectation::Black => ExpectationMode::Black,
                RawExpectation::ForwardIntrinsic => ExpectationMode::ForwardIntrinsic,
            });
        if let Some(k) = c.spread {
            contract = contract.with_spread(k);
        }
        field("contract", contract.check_hedge(&hedge))?;

        let simulation = raw
            .simulation
            .map(|s| field("simulation.paths", SimulationSpec::new(s.paths, s.seed, s.antithetic)))
            .transpose()?;
        let sweep = raw
            .sweep
            .map(|s| SweepSpec::new(s.axis, s.grid, s.series.map(|r| (r.axis, r.values))))
            .transpose()?;

        Ok(Scenario {
            market,
            curves,
            hedge,
            contract,
            simulation,
            sweep,
        })
    }

    pub fn pricer(&self) -> Result<TrsPricer> {
        TrsPricer::new(&self.contract, &self.market, &self.curves, &self.hedge)
    }

    pub fn par_spread(&self) -> Result<SpreadBreakdown> {
        self.pricer()?.par_spread()
    }

    /// Copy with one parameter moved.
    pub fn bumped(&self, axis: SweepAxis, value: f64) -> Result<Scenario> {
        let mut s = self.clone();
        match axis {
            SweepAxis::RhoB => {
                let t = s.market.taxes;
                s.market.taxes = TaxRegime::new(t.rho_investor, value, t.rho_trs, t.tobin)?;
            }
            SweepAxis::W => s.hedge = HedgeSpec::new(Strategy::Blended(value), s.hedge.alpha)?,
            SweepAxis::RepoFee => s.curves.repo_fee = YieldCurve::flat(value),
            SweepAxis::FundingBump => s.curves.funding = s.curves.funding.shifted(value),
            SweepAxis::CollateralBump => s.curves.collateral = s.curves.collateral.shifted(value),
            SweepAxis::SpotBump => {
                s.market = MarketSnapshot::new(
                    s.market.spot * (1.0 + value),
                    s.market.vol,
                    s.market.dividends.clone(),
                    s.market.taxes,
                )?
            }
            SweepAxis::DividendBump => s.market.dividends = s.market.dividends.scaled(1.0 + value)?,
        }
        Ok(s)
    }

    /// Analytic forward of the hedged asset at each date.
    pub fn forwards(&self, dates: &[f64]) -> Vec<f64> {
        let fc = ForwardCurve::new(&self.market, &self.hedge, &self.curves);
        dates.iter().map(|&t| fc.at(t)).collect()
    }
}

/// One evaluated sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub series_value: Option<f64>,
    pub breakdown: SpreadBreakdown,
}

pub fn run_sweep(scenario: &Scenario, sweep: &SweepSpec) -> Result<Vec<SweepRow>> {
    let series: Vec<Option<f64>> = match &sweep.series {
        Some((_, values)) => values.iter().map(|v| Some(*v)).collect(),
        None => vec![None],
    };
    let points: Vec<(Option<f64>, f64)> = series
        .iter()
        .flat_map(|s| sweep.grid.iter().map(move |x| (*s, *x)))
        .collect();
    // evaluated in parallel; collect keeps grid order
    points
        .par_iter()
        .map(|&(s, x)| {
            let base = match (s, &sweep.series) {
                (Some(v), Some((axis, _))) => scenario.bumped(*axis, v)?,
                _ => scenario.clone(),
            };
            let breakdown = base.bumped(sweep.axis, x)?.par_spread()?;
            Ok(SweepRow {
                axis_value: x,
                series_value: s,
                breakdown,
            })
        })
        .collect()
}

pub fn sweep_csv(sweep: &SweepSpec, rows: &[SweepRow]) -> String {
    let series = sweep.series.as_ref().map_or("series", |(a, _)| a.name());
    let mut out = format!(
        "{},{},K_percent,rate_leg,dividend_tax_cost,tobin_cost,annuity\n",
        sweep.axis.name(),
        series
    );
    for r in rows {
        let b = &r.breakdown;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.axis_value,
            r.series_value.map(|v| v.to_string()).unwrap_or_default(),
            100.0 * b.spread,
            b.rate_leg,
            b.dividend_tax_cost,
            b.tobin_cost,
            b.annuity
        );
    }
    out
}

/// Two-column `axis K_percent` plot files, one per series value.
pub fn sweep_dat(sweep: &SweepSpec, rows: &[SweepRow]) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = Vec::new();
    for r in rows {
        let name = match (r.series_value, &sweep.series) {
            (Some(v), Some((a, _))) => format!("{}_{}={}.dat", sweep.axis.name(), a.name(), v),
            _ => format!("{}.dat", sweep.axis.name()),
        };
        if files.last().map(|f| &f.0) != Some(&name) {
            files.push((name, String::new()));
        }
        let _ = writeln!(
            files.last_mut().unwrap().1,
            "{} {}",
            r.axis_value,
            100.0 * r.breakdown.spread
        );
    }
    files
}

/// Bump-and-revalue result for one market move.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    pub name: &'static str,
    pub axis: SweepAxis,
    pub bump: f64,
    pub base: f64,
    pub bumped: f64,
}

impl Sensitivity {
    pub fn delta_bps(&self) -> f64 {
        1e4 * (self.bumped - self.base)
    }
}

pub const SENSITIVITY_BUMPS: [(&str, SweepAxis, f64); 8] = [
    ("spot_up_10pct", SweepAxis::SpotBump, 0.10),
    ("spot_down_10pct", SweepAxis::SpotBump, -0.10),
    ("dividends_up_10pct", SweepAxis::DividendBump, 0.10),
    ("dividends_down_10pct", SweepAxis::DividendBump, -0.10),
    ("funding_up_10bp", SweepAxis::FundingBump, 0.001),
    ("funding_down_10bp", SweepAxis::FundingBump, -0.001),
    ("collateral_up_10bp", SweepAxis::CollateralBump, 0.001),
    ("collateral_down_10bp", SweepAxis::CollateralBump, -0.001),
];

pub fn run_sensitivities(scenario: &Scenario) -> Result<Vec<Sensitivity>> {
    let base = scenario.par_spread()?.spread;
    SENSITIVITY_BUMPS
        .par_iter()
        .map(|&(name, axis, bump)| {
            Ok(Sensitivity {
                name,
                axis,
                bump,
                base,
                bumped: scenario.bumped(axis, bump)?.par_spread()?.spread,
            })
        })
        .collect()
}

pub fn sensitivities_csv(rows: &[Sensitivity]) -> String {
    let mut out = String::from("bump,axis,size,K_base_percent,K_bumped_percent,dK_bps\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.name,
            r.axis.name(),
            r.bump,
            100.0 * r.base,
            100.0 * r.bumped,
            r.delta_bps()
        );
    }
    out
}

pub fn par_csv(b: &SpreadBreakdown) -> String {
    format!(
        "K,K_bps,rate_leg,dividend_tax_cost,tobin_cost,annuity\n{},{},{},{},{},{}\n",
        b.spread,
        1e4 * b.spread,
        b.rate_leg,
        b.dividend_tax_cost,
        b.tobin_cost,
        b.annuity
    )
}

pub fn value_csv(spread: f64, v: &crate::trs::ValueBreakdown) -> String {
    format!(
        "K,performance,dividends,funding,tobin,total\n{},{},{},{},{},{}\n",
        spread, v.performance, v.dividends, v.funding, v.tobin, v.total
    )
}

pub fn forward_csv(dates: &[f64], forwards: &[f64]) -> String {
    let mut out = String::from("T,forward\n");
    for (t, f) in dates.iter().zip(forwards) {
        let _ = writeln!(out, "{t},{f}");
    }
    out
}

/// Exact versus first-order par spread with the expansion terms.
pub fn expand_csv(scenario: &Scenario) -> Result<String> {
    let exact = scenario.par_spread()?;
    let approx = approx_par_spread(&scenario.hedge, &scenario.contract, &scenario.market, &scenario.curves)?;
    Ok(format!(
        "K_exact,K_approx,difference,rate_term,dividend_term,tobin_term,annuity_ois\n{},{},{},{},{},{},{}\n",
        exact.spread,
        approx.spread,
        exact.spread - approx.spread,
        approx.rate_term,
        approx.dividend_term,
        approx.tobin_term,
        approx.annuity
    ))
}

pub fn validation_csv(report: &ValidationReport) -> String {
    let mut out = String::from("check,estimate,reference,std_error,tolerance,pass\n");
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.name, c.estimate, c.reference, c.std_error, c.tolerance, c.pass
        );
    }
    out
}
