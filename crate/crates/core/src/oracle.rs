//! Monte Carlo cash-flow oracle.
//!
//! Simulates the hedged asset exactly on a time grid (geometric Brownian
//! motion with the hedge curve as drift, dropping by the net dividend at
//! each dividend date) and prices the TRS by summing its discounted
//! contractual cash flows path by path. It shares no valuation code with
//! [`crate::trs`]; only curves, forwards and market objects are reused.
//!
//! Random numbers: ChaCha20 keyed by the 64-bit seed, one stream per block
//! of `BLOCK_SAMPLES` samples, uniforms from the top 53 bits of each
//! `u64` mapped to `(k + 0.5) / 2^53`, normals by inverse CDF. Blocks are
//! reduced in block order, so results do not depend on the thread count.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use statrs::function::erf::erfc_inv;

use crate::curves::{CurveSet, YieldCurve};
use crate::error::{Error, Result};
use crate::forwards::ForwardCurve;
use crate::market::{HedgeSpec, MarketSnapshot};
use crate::trs::{eta, Direction, NotionalMode, TrsContract, TrsPricer};

/// Samples generated from one random stream.
pub const BLOCK_SAMPLES: usize = 4096;

/// Largest tolerated share of paths driven to a non-positive spot.
pub const MAX_INVALID_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationSpec {
    pub paths: usize,
    pub seed: u64,
    /// Pair every path with its mirror `-Z`; one sample is the pair mean.
    pub antithetic: bool,
}

impl SimulationSpec {
    pub fn new(paths: usize, seed: u64, antithetic: bool) -> Result<Self> {
        if paths < 2 {
            return Err(Error::Invalid(format!("need at least 2 paths, got {paths}")));
        }
        Ok(SimulationSpec {
            paths,
            seed,
            antithetic,
        })
    }

    fn samples(&self) -> usize {
        if self.antithetic {
            self.paths / 2
        } else {
            self.paths
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Running moments for one output (Welford within a block, Chan across).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.count == 0.0 {
            return b;
        }
        if b.count == 0.0 {
            return a;
        }
        let count = a.count + b.count;
        let d = b.mean - a.mean;
        Moments {
            count,
            mean: a.mean + d * b.count / count,
            m2: a.m2 + b.m2 + d * d * a.count * b.count / count,
        }
    }

    fn estimate(&self) -> Estimate {
        let var = if self.count > 1.0 {
            self.m2 / (self.count - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            std_error: (var / self.count).sqrt(),
        }
    }
}

struct BlockStats {
    moments: Vec<Moments>,
    invalid_paths: usize,
}

fn merge_blocks(blocks: &[BlockStats], outputs: usize) -> BlockStats {
    match blocks.len() {
        0 => BlockStats {
            moments: vec![Moments::default(); outputs],
            invalid_paths: 0,
        },
        1 => BlockStats {
            moments: blocks[0].moments.clone(),
            invalid_paths: blocks[0].invalid_paths,
        },
        n => {
            let (l, r) = blocks.split_at(n / 2);
            let (a, b) = (merge_blocks(l, outputs), merge_blocks(r, outputs));
            BlockStats {
                moments: a
                    .moments
                    .iter()
                    .zip(&b.moments)
                    .map(|(x, y)| Moments::merge(*x, *y))
                    .collect(),
                invalid_paths: a.invalid_paths + b.invalid_paths,
            }
        }
    }
}

fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// Exact simulator of the hedged asset on a fixed grid.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    spot: f64,
    grid: Vec<f64>,
    /// Per step: log drift including the `-vol^2/2` correction.
    drift: Vec<f64>,
    /// Per step: `vol sqrt(dt)`.
    diffusion: Vec<f64>,
    /// Net dividend dropped right after observing grid point `s`.
    drops: Vec<f64>,
}

impl PathSimulator {
    /// Grid is `{0} U times U {dividend dates <= max(times)}`.
    pub fn new(market: &MarketSnapshot, hedge: &HedgeSpec, curves: &CurveSet, times: &[f64]) -> Result<Self> {
        let forwards = ForwardCurve::new(market, hedge, curves);
        Self::from_forwards(&forwards, market.vol, times)
    }

    pub fn from_forwards(forwards: &ForwardCurve, vol: f64, times: &[f64]) -> Result<Self> {
        if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::Invalid("simulation times must be finite and >= 0".into()));
        }
        let horizon = times.iter().copied().fold(0.0, f64::max);
        let mut grid: Vec<f64> = std::iter::once(0.0)
            .chain(times.iter().copied())
            .chain(
                forwards
                    .dividends()
                    .entries()
                    .iter()
                    .map(|d| d.time)
                    .filter(|&t| t <= horizon),
            )
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();

        let z: &YieldCurve = forwards.hedge_curve();
        let mut drift = Vec::with_capacity(grid.len());
        let mut diffusion = Vec::with_capacity(grid.len());
        drift.push(0.0);
        diffusion.push(0.0);
        for w in grid.windows(2) {
            let dt = w[1] - w[0];
            drift.push(z.integral(w[1]) - z.integral(w[0]) - 0.5 * vol * vol * dt);
            diffusion.push(vol * dt.sqrt());
        }
        let drops = grid
            .iter()
            .map(|&t| {
                forwards
                    .dividends()
                    .entries()
                    .iter()
                    .find(|d| d.time == t)
                    .map_or(0.0, |d| forwards.net_dividend(d.amount))
            })
            .collect();
        Ok(PathSimulator {
            spot: forwards.spot(),
            grid,
            drift,
            diffusion,
            drops,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Position of `t` on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.grid.iter().position(|&g| g == t)
    }

    fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// Fills `out` with the pre-dividend spot at each grid point. Returns
    /// false if a dividend drives the spot to zero or below.
    fn path(&self, normals: &[f64], sign: f64, out: &mut [f64]) -> bool {
        let mut s = self.spot;
        out[0] = s;
        s -= self.drops[0];
        for k in 1..self.grid.len() {
            s *= (self.drift[k] + self.diffusion[k] * sign * normals[k - 1]).exp();
            out[k] = s;
            s -= self.drops[k];
            if s <= 0.0 && k + 1 < self.grid.len() {
                return false;
            }
        }
        true
    }

    /// Monte Carlo means of `outputs` functionals of the path. `f` receives
    /// the grid observations and writes one value per output.
    pub fn estimate<F>(&self, spec: &SimulationSpec, outputs: usize, f: F) -> Result<Vec<Estimate>>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let samples = spec.samples();
        let blocks = samples.div_ceil(BLOCK_SAMPLES);
        let stats: Vec<BlockStats> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
                rng.set_stream(b as u64);
                let count = BLOCK_SAMPLES.min(samples - b * BLOCK_SAMPLES);
                let mut normals = vec![0.0; self.steps()];
                let mut obs = vec![0.0; self.grid.len()];
                let mut vals = vec![0.0; outputs];
                let mut mirror = vec![0.0; outputs];
                let mut moments = vec![Moments::default(); outputs];
                let mut invalid_paths = 0;
                for _ in 0..count {
                    normals.iter_mut().for_each(|z| *z = standard_normal(&mut rng));
                    let ok = self.path(&normals, 1.0, &mut obs);
                    if ok {
                        f(&obs, &mut vals);
                    } else {
                        invalid_paths += 1;
                    }
                    if spec.antithetic {
                        if self.path(&normals, -1.0, &mut obs) {
                            if ok {
                                f(&obs, &mut mirror);
                                vals.iter_mut().zip(&mirror).for_each(|(v, m)| *v = 0.5 * (*v + m));
                            }
                        } else {
                            invalid_paths += 1;
                            continue;
                        }
                    }
                    if ok {
                        moments.iter_mut().zip(&vals).for_each(|(m, &v)| m.push(v));
                    }
                }
                BlockStats { moments, invalid_paths }
            })
            .collect();
        let merged = merge_blocks(&stats, outputs);
        if merged.invalid_paths as f64 > MAX_INVALID_FRACTION * spec.paths as f64 {
            return Err(Error::Simulation(format!(
                "{} of {} paths hit a non-positive spot after a dividend",
                merged.invalid_paths, spec.paths
            )));
        }
        if merged.moments.first().is_some_and(|m| m.count < 2.0) {
            return Err(Error::Simulation("fewer than two valid samples".into()));
        }
        Ok(merged.moments.iter().map(Moments::estimate).collect())
    }

    /// Materialises every simulated path (mirror paths follow their
    /// originals when antithetic). Intended for small path counts.
    pub fn simulate_paths(&self, spec: &SimulationSpec) -> Result<PathSet> {
        let samples = spec.samples();
        let width = self.grid.len();
        let per_sample = if spec.antithetic { 2 } else { 1 };
        let mut values = Vec::with_capacity(samples * per_sample * width);
        let mut valid = Vec::with_capacity(samples * per_sample);
        let mut obs = vec![0.0; width];
        let mut normals = vec![0.0; self.steps()];
        for b in 0..samples.div_ceil(BLOCK_SAMPLES) {
            let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
            rng.set_stream(b as u64);
            for _ in 0..BLOCK_SAMPLES.min(samples - b * BLOCK_SAMPLES) {
                normals.iter_mut().for_each(|z| *z = standard_normal(&mut rng));
                for sign in [1.0, -1.0].iter().take(per_sample) {
                    valid.push(self.path(&normals, *sign, &mut obs));
                    values.extend_from_slice(&obs);
                }
            }
        }
        let invalid = valid.iter().filter(|v| !**v).count();
        if invalid as f64 > MAX_INVALID_FRACTION * valid.len() as f64 {
            return Err(Error::Simulation(format!(
                "{invalid} of {} paths hit a non-positive spot after a dividend",
                valid.len()
            )));
        }
        Ok(PathSet {
            grid: self.grid.clone(),
            values,
            valid,
        })
    }
}

/// Stored paths, one row of grid observations per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub grid: Vec<f64>,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.grid.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }
}

pub fn simulate_paths(
    market: &MarketSnapshot,
    hedge: &HedgeSpec,
    curves: &CurveSet,
    times: &[f64],
    spec: &SimulationSpec,
) -> Result<PathSet> {
    PathSimulator::new(market, hedge, curves, times)?.simulate_paths(spec)
}

/// Simulated mean of `S_T` at each requested time.
pub fn mc_forwards(
    market: &MarketSnapshot,
    hedge: &HedgeSpec,
    curves: &CurveSet,
    times: &[f64],
    spec: &SimulationSpec,
) -> Result<Vec<Estimate>> {
    let sim = PathSimulator::new(market, hedge, curves, times)?;
    let idx: Vec<usize> = times.iter().map(|&t| sim.index_of(t).unwrap()).collect();
    sim.estimate(spec, idx.len(), |obs, out| {
        for (o, &i) in out.iter_mut().zip(&idx) {
            *o = obs[i];
        }
    })
}

/// Simulated `E[P(T;z) S_T + sum_{t_k < T} P(t_k;z) (1 - rho) Q_k]`, which
/// must equal the spot (deflated gain of the hedge is a martingale).
pub fn mc_discounted_gain(
    market: &MarketSnapshot,
    hedge: &HedgeSpec,
    curves: &CurveSet,
    maturity: f64,
    spec: &SimulationSpec,
) -> Result<Estimate> {
    let forwards = ForwardCurve::new(market, hedge, curves);
    let sim = PathSimulator::from_forwards(&forwards, market.vol, &[maturity])?;
    let z = forwards.hedge_curve();
    let i_t = sim.index_of(maturity).unwrap();
    let p_t = z.discount(maturity);
    // dividend cash is taken pathwise from the simulated drop sizes
    let paid: Vec<(usize, f64)> = forwards
        .dividends()
        .before(maturity)
        .map(|d| (sim.index_of(d.time).unwrap(), z.discount(d.time)))
        .collect();
    let drops = sim.drops.clone();
    let est = sim.estimate(spec, 1, |obs, out| {
        let divs: f64 = paid.iter().map(|&(i, p)| p * drops[i]).sum();
        out[0] = p_t * obs[i_t] + divs;
    })?;
    Ok(est[0])
}

/// Per-leg estimates; `value` is the estimate of the pathwise leg sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationResult {
    pub value: f64,
    pub std_error: f64,
    pub performance: Estimate,
    pub dividends: Estimate,
    pub funding: Estimate,
    pub tobin: Estimate,
    /// Pathwise annuity: value change per unit of spread (bank side, sign
    /// removed).
    pub annuity: Estimate,
}

impl SimulationResult {
    pub fn leg_sum(&self) -> f64 {
        self.performance.mean + self.dividends.mean + self.funding.mean + self.tobin.mean
    }
}

struct FundingFlow {
    accrual: f64,
    discount: f64,
    libor: f64,
    /// Grid index of `eta(T'_j)`.
    notional_index: usize,
}

/// Prices the TRS by simulating its cash flows at the contract spread.
pub fn mc_price_trs(
    contract: &TrsContract,
    market: &MarketSnapshot,
    curves: &CurveSet,
    hedge: &HedgeSpec,
    spec: &SimulationSpec,
) -> Result<SimulationResult> {
    let spread = contract
        .spread
        .ok_or_else(|| Error::Invalid("contract spread is not set".into()))?;
    contract.check_hedge(hedge)?;

    let y = curves.trs_discount_curve(contract.beta);
    let equity = contract.equity.dates();
    let n = contract.equity.periods();
    let times: Vec<f64> = equity.iter().chain(contract.funding.dates()).copied().collect();
    let sim = PathSimulator::new(market, hedge, curves, &times)?;
    let at = |t: f64| sim.index_of(t).unwrap();

    let eq_idx: Vec<usize> = equity.iter().map(|&t| at(t)).collect();
    let eq_df: Vec<f64> = equity.iter().map(|&t| y.discount(t)).collect();
    let funding: Vec<FundingFlow> = (1..=contract.funding.periods())
        .map(|j| {
            let d = contract.funding.dates();
            Ok(FundingFlow {
                accrual: contract.funding.accrual(j),
                discount: y.discount(d[j]),
                libor: curves.libor_projection.simple_period_rate(d[j - 1], d[j])?,
                notional_index: at(eta(d[j], &contract.equity)?),
            })
        })
        .collect::<Result<_>>()?;
    // (discount, gross amount, grid index of the period start)
    let dividends: Vec<(f64, f64, usize)> = market
        .dividends
        .entries()
        .iter()
        .filter_map(|d| {
            contract
                .equity
                .period_of(d.time)
                .map(|i| (y.discount(d.time), d.amount, eq_idx[i - 1]))
        })
        .collect();

    let pass_through = 1.0 - market.taxes.rho_trs;
    let tau = if contract.tobin_enabled {
        market.taxes.tobin
    } else {
        0.0
    };
    let sign = contract.direction.sign();
    let s0 = market.spot;
    let mode = contract.notional_mode;
    let direction = contract.direction;

    let est = sim.estimate(spec, 6, |obs, out| {
        let s = |i: usize| obs[eq_idx[i]];
        let (perf, mut divs, mut fund, mut annuity, tobin);
        divs = 0.0;
        fund = 0.0;
        annuity = 0.0;
        match mode {
            NotionalMode::Constant => {
                perf = (1..=n).map(|i| eq_df[i] * (s(i) / s(i - 1) - 1.0)).sum::<f64>();
                for &(p, q, start) in &dividends {
                    divs += p * pass_through * q / obs[start];
                }
                for f in &funding {
                    annuity += f.accrual * f.discount;
                    fund -= f.accrual * f.discount * (f.libor + spread);
                }
                tobin = match direction {
                    Direction::Receiver => {
                        let calls: f64 = (1..n).map(|i| eq_df[i] * (s(i) / s(i - 1) - 1.0).max(0.0)).sum();
                        -tau * (calls + eq_df[n] * s(n) / s(n - 1))
                    }
                    Direction::Payer => {
                        let puts: f64 = (1..n).map(|i| eq_df[i] * (1.0 - s(i) / s(i - 1)).max(0.0)).sum();
                        -tau * (1.0 + puts)
                    }
                };
            }
            NotionalMode::Resetting => {
                perf = (1..=n).map(|i| eq_df[i] * (s(i) - s(i - 1)) / s0).sum::<f64>();
                for &(p, q, _) in &dividends {
                    divs += p * pass_through * q / s0;
                }
                for f in &funding {
                    let notional = obs[f.notional_index] / s0;
                    annuity += f.accrual * f.discount * notional;
                    fund -= f.accrual * f.discount * (f.libor + spread) * notional;
                }
                tobin = match direction {
                    Direction::Receiver => -tau * eq_df[n] * s(n) / s0,
                    Direction::Payer => -tau,
                };
            }
        }
        out[0] = sign * perf;
        out[1] = sign * divs;
        out[2] = sign * fund;
        out[3] = tobin;
        out[4] = out[0] + out[1] + out[2] + out[3];
        out[5] = annuity;
    })?;
    Ok(SimulationResult {
        value: est[4].mean,
        std_error: est[4].std_error,
        performance: est[0],
        dividends: est[1],
        funding: est[2],
        tobin: est[3],
        annuity: est[5],
    })
}

/// One line of the validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationCheck {
    pub name: String,
    pub estimate: f64,
    pub reference: f64,
    pub std_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ValidationCheck {
    /// Passes when `|estimate - reference| <= sigmas * SE + floor`.
    pub fn within(name: impl Into<String>, est: Estimate, reference: f64, sigmas: f64, floor: f64) -> Self {
        let tolerance = sigmas * est.std_error + floor;
        ValidationCheck {
            name: name.into(),
            estimate: est.mean,
            reference,
            std_error: est.std_error,
            tolerance,
            pass: (est.mean - reference).abs() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Standard-error multiple used by every oracle comparison.
pub const ORACLE_SIGMAS: f64 = 3.0;

/// Oracle suite for one scenario: par spread zeroes the simulated value,
/// simulated forwards match the analytic ones, the hedge's discounted gain
/// is a martingale, and leg values and annuity agree.
pub fn validate(
    contract: &TrsContract,
    market: &MarketSnapshot,
    curves: &CurveSet,
    hedge: &HedgeSpec,
    spec: &SimulationSpec,
) -> Result<ValidationReport> {
    let pricer = TrsPricer::new(contract, market, curves, hedge)?;
    let par = pricer.par_spread()?;
    let priced = contract.clone().with_spread(par.spread);
    let analytic = pricer.value(par.spread)?;
    let mc = mc_price_trs(&priced, market, curves, hedge, spec)?;
    // deterministic legs come out with zero SE; allow for rounding only
    let floor = 1e-12;

    let mut checks = vec![
        ValidationCheck::within(
            "par_value",
            Estimate {
                mean: mc.value,
                std_error: mc.std_error,
            },
            0.0,
            ORACLE_SIGMAS,
            floor,
        ),
        ValidationCheck::within("dividend_leg", mc.dividends, analytic.dividends, ORACLE_SIGMAS, floor),
        ValidationCheck::within("annuity", mc.annuity, pricer.annuity(), ORACLE_SIGMAS, floor),
    ];

    let dates = &contract.equity.dates()[1..];
    let forwards = mc_forwards(market, hedge, curves, dates, spec)?;
    for (t, est) in dates.iter().zip(forwards) {
        checks.push(ValidationCheck::within(
            format!("forward_T={t}"),
            est,
            pricer.forwards().at(*t),
            ORACLE_SIGMAS,
            floor * market.spot,
        ));
    }
    let gain = mc_discounted_gain(market, hedge, curves, contract.maturity(), spec)?;
    checks.push(ValidationCheck::within(
        "discounted_gain",
        gain,
        market.spot,
        ORACLE_SIGMAS,
        floor * market.spot,
    ));
    Ok(ValidationReport { checks })
}
