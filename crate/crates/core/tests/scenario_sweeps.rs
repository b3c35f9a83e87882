mod common;

use common::*;
use proptest::prelude::*;
use trs_core::market::{DividendSchedule, MarketSnapshot, Strategy};
use trs_core::scenario::{
    run_sensitivities, run_sweep, sensitivities_csv, sweep_csv, sweep_dat, Scenario, SweepAxis, SweepSpec,
};

fn spreads(rows: &[trs_core::scenario::SweepRow]) -> Vec<f64> {
    rows.iter().map(|r| r.breakdown.spread).collect()
}

#[test]
fn lending_weight_endpoints_are_the_pure_strategies() {
    let s = payer_resetting();
    let rows = run_sweep(&s, &SweepSpec::new(SweepAxis::W, vec![0.0, 1.0], None).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].breakdown.spread, par(&with_strategy(&s, Strategy::BuyAndHold)));
    assert_eq!(
        rows[1].breakdown.spread,
        par(&with_strategy(&s, Strategy::StockLending))
    );
}

#[test]
fn buy_and_hold_ignores_borrower_tax() {
    let s = payer_resetting();
    let grid: Vec<f64> = (0..7).map(|i| 0.05 * i as f64).collect();
    let sweep = SweepSpec::new(SweepAxis::RhoB, grid, Some((SweepAxis::W, vec![0.0]))).unwrap();
    let k = spreads(&run_sweep(&s, &sweep).unwrap());
    assert!(k.iter().all(|&x| x == k[0]), "{k:?}");
}

#[test]
fn repo_fee_lowers_the_lending_spread() {
    let s = payer_resetting();
    let grid: Vec<f64> = (0..11).map(|i| 0.0005 * i as f64).collect();
    let sweep = SweepSpec::new(SweepAxis::RepoFee, grid, Some((SweepAxis::W, vec![1.0]))).unwrap();
    let k = spreads(&run_sweep(&s, &sweep).unwrap());
    assert!(k.windows(2).all(|w| w[1] < w[0]), "{k:?}");
}

#[test]
fn rows_come_in_series_then_grid_order() {
    let s = payer_resetting();
    let sweep = s.sweep.clone().unwrap();
    let rows = run_sweep(&s, &sweep).unwrap();
    let (_, series) = sweep.series.clone().unwrap();
    assert_eq!(rows.len(), sweep.grid.len() * series.len());
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.series_value, Some(series[i / sweep.grid.len()]));
        assert_eq!(r.axis_value, sweep.grid[i % sweep.grid.len()]);
    }
    let csv = sweep_csv(&sweep, &rows);
    assert!(csv.starts_with("rho_B,w,K_percent,rate_leg,dividend_tax_cost,tobin_cost,annuity\n"));
    assert_eq!(csv.lines().count(), rows.len() + 1);
    let files = sweep_dat(&sweep, &rows);
    assert_eq!(files.len(), series.len());
    assert!(files.iter().all(|(_, body)| body.lines().count() == sweep.grid.len()));
}

#[test]
fn shared_points_agree_across_sweeps() {
    let s = payer_resetting();
    // the same (rho_B, w) point reached from two directions
    let by_rho = run_sweep(
        &s,
        &SweepSpec::new(SweepAxis::RhoB, vec![0.0, 0.1, 0.2], Some((SweepAxis::W, vec![0.4]))).unwrap(),
    )
    .unwrap();
    let by_w = run_sweep(
        &s,
        &SweepSpec::new(SweepAxis::W, vec![0.2, 0.4, 0.6], Some((SweepAxis::RhoB, vec![0.1]))).unwrap(),
    )
    .unwrap();
    assert_eq!(by_rho[1].breakdown, by_w[1].breakdown);
}

#[test]
fn output_is_identical_across_runs_and_threads() {
    let s = payer_resetting();
    let sweep = s.sweep.clone().unwrap();
    let render = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| {
                let rows = run_sweep(&s, &sweep).unwrap();
                (
                    sweep_csv(&sweep, &rows),
                    sensitivities_csv(&run_sensitivities(&s).unwrap()),
                )
            })
    };
    let one = render(1);
    assert_eq!(one, render(1));
    assert_eq!(one, render(5));
}

#[test]
fn series_axis_must_differ() {
    assert!(SweepSpec::new(SweepAxis::W, vec![0.0], Some((SweepAxis::W, vec![0.5]))).is_err());
    assert!(SweepSpec::new(SweepAxis::W, vec![], None).is_err());
    assert!(SweepSpec::new(SweepAxis::W, vec![0.5, 0.5], None).is_err());
}

#[test]
fn axis_names_round_trip() {
    for name in [
        "rho_B",
        "w",
        "repo_fee",
        "funding_bump",
        "collateral_bump",
        "spot_bump",
        "dividend_bump",
    ] {
        assert_eq!(SweepAxis::parse(name).unwrap().name(), name);
    }
    assert!(SweepAxis::parse("vol").is_err());
}

fn without_dividends(s: &Scenario) -> Scenario {
    let mut out = s.clone();
    let mut taxes = s.market.taxes;
    taxes.tobin = 0.0;
    out.market = MarketSnapshot::new(s.market.spot, s.market.vol, DividendSchedule::empty(), taxes).unwrap();
    out
}

#[test]
fn spot_drops_out_without_dividends() {
    for strategy in [Strategy::BuyAndHold, Strategy::StockLending, Strategy::Blended(0.3)] {
        let s = without_dividends(&with_strategy(&payer_resetting(), strategy));
        let sens = run_sensitivities(&s).unwrap();
        for r in sens.iter().filter(|r| r.axis == SweepAxis::SpotBump) {
            assert!(r.delta_bps().abs() < 1e-9, "{strategy:?} {}: {}", r.name, r.delta_bps());
        }
    }
}

#[test]
fn rate_bumps_dominate_equity_bumps() {
    let s = payer_resetting();
    let sens = run_sensitivities(&s).unwrap();
    let get = |name: &str| sens.iter().find(|r| r.name == name).unwrap().delta_bps();
    let (up, down) = (get("funding_up_10bp"), get("funding_down_10bp"));
    assert!(up > 0.0 && down < 0.0, "{up} {down}");
    let rate = up.abs().min(down.abs());
    for name in ["spot_up_10pct", "spot_down_10pct"] {
        assert!(get(name).abs() < rate, "{name}: {} vs {rate}", get(name));
    }
    // bumps are reported in basis points of spread
    let r = &sens[0];
    assert_eq!(r.delta_bps(), 1e4 * (r.bumped - r.base));
}

#[test]
fn sensitivity_table_has_all_bumps() {
    let csv = sensitivities_csv(&run_sensitivities(&receiver_constant()).unwrap());
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("bump,axis,size,K_base_percent,K_bumped_percent,dK_bps")
    );
    assert_eq!(lines.count(), 8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_point_sweep_equals_direct_bump(w in 0.0f64..1.0, rho in 0.0f64..0.3) {
        let s = payer_resetting();
        let rows = run_sweep(&s, &SweepSpec::new(SweepAxis::RhoB, vec![rho], Some((SweepAxis::W, vec![w]))).unwrap())
            .unwrap();
        let direct = s.bumped(SweepAxis::W, w).unwrap().bumped(SweepAxis::RhoB, rho).unwrap();
        prop_assert_eq!(rows[0].breakdown.spread, par(&direct));
    }
}
