//! Parameter sweeps producing CSV tables.

use serde::Serialize;

use crate::agents::{absence_sweep, no_clause_payoffs, AbsenceSweep, AnalysisError};
use crate::scenario::{presets, run_scenario, Scenario, ScenarioError};
use crate::types::Amount;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsenceCsvRow {
    pub p_absent: f64,
    pub threshold: f64,
    pub analytic_bot_payoff: f64,
    pub simulated_bot_payoff: f64,
    pub std_error: f64,
    pub runs: u64,
    pub analytic_profitable: bool,
    pub simulated_profitable: bool,
}

pub fn absence_rows(sweep: &AbsenceSweep) -> Vec<AbsenceCsvRow> {
    sweep
        .rows
        .iter()
        .map(|r| AbsenceCsvRow {
            p_absent: r.p_absent,
            threshold: sweep.threshold,
            analytic_bot_payoff: r.analytic,
            simulated_bot_payoff: r.simulated,
            std_error: r.std_error,
            runs: r.runs,
            analytic_profitable: r.analytic > 0.0,
            simulated_profitable: r.simulated > 0.0,
        })
        .collect()
}

pub fn sweep_absence(
    grid: &[f64],
    payment: Amount,
    fee: Amount,
    runs: u64,
    seed: u64,
) -> Result<Vec<AbsenceCsvRow>, AnalysisError> {
    Ok(absence_rows(&absence_sweep(grid, payment, fee, runs, seed)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowCsvRow {
    pub window: u64,
    pub runs: u32,
    pub paid_legitimate_rate: f64,
    pub burn_rate: f64,
    pub unsettled: u32,
    pub mean_delay: Option<f64>,
    pub performer_payoff: f64,
}

/// Runs `base` once per window length.
pub fn sweep_window(base: &Scenario, grid: &[u64]) -> Result<Vec<WindowCsvRow>, ScenarioError> {
    if !base.clause.enabled {
        return Err(ScenarioError::Invalid("window sweep needs the clause enabled".into()));
    }
    grid.iter()
        .map(|&w| {
            let mut s = base.clone();
            s.clause.window = w;
            let r = run_scenario(&s)?.report;
            let a = &r.aggregates;
            Ok(WindowCsvRow {
                window: w,
                runs: a.runs,
                paid_legitimate_rate: a.paid_legitimate_rate,
                burn_rate: a.burn_rate,
                unsettled: a.unsettled,
                mean_delay: a.mean_delay,
                performer_payoff: a.mean_net_payoff.get("performer").copied().unwrap_or(0.0),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BotsCsvRow {
    pub n_bots: usize,
    pub runs: u32,
    pub analytic_share: f64,
    pub simulated_share: f64,
    pub analytic_performer_payoff: f64,
    pub simulated_performer_payoff: f64,
    pub burn_rate: f64,
}

/// No clause, equal fees, random priority among ties, `n` bots per point.
pub fn sweep_bots(grid: &[usize], repetitions: u32, seed: u64) -> Result<Vec<BotsCsvRow>, ScenarioError> {
    grid.iter()
        .map(|&n| {
            let s = presets::no_clause_equal_fees(seed, repetitions, n);
            let (payment, cost, fee) = match &s.agents[0] {
                crate::agents::AgentSpec::Legitimate(p) => (s.payment, p.cost, p.fee),
                _ => unreachable!("preset starts with the performer"),
            };
            let analytic = no_clause_payoffs(payment, cost, fee, &vec![fee; n]);
            let r = run_scenario(&s)?.report;
            let a = &r.aggregates;
            let to_f = |x: crate::agents::Value| *x.numer() as f64 / *x.denom() as f64;
            Ok(BotsCsvRow {
                n_bots: n,
                runs: a.runs,
                analytic_share: to_f(analytic[0].win_probability),
                simulated_share: a.paid_legitimate_rate,
                analytic_performer_payoff: to_f(analytic[0].net),
                simulated_performer_payoff: a.mean_net_payoff.get("performer").copied().unwrap_or(0.0),
                burn_rate: a.burn_rate,
            })
        })
        .collect()
}

/// Renders rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_delay_grows_with_window() {
        let rows = sweep_window(&presets::deterrence(5, 3, 1), &[1, 2, 4, 8]).unwrap();
        let delays: Vec<f64> = rows.iter().map(|r| r.mean_delay.unwrap()).collect();
        assert!(rows.iter().all(|r| r.unsettled == 0 && r.paid_legitimate_rate == 1.0));
        let block = 4.0;
        for w in delays.windows(2).zip([1.0, 2.0, 4.0]) {
            let (pair, dw) = w;
            assert_eq!(pair[1] - pair[0], dw * block);
        }
    }

    #[test]
    fn csv_header_is_stable() {
        let rows = sweep_absence(&[0.0], 100, 5, 10, 1).unwrap();
        let text = to_csv(&rows);
        assert!(text.starts_with(
            "p_absent,threshold,analytic_bot_payoff,simulated_bot_payoff,std_error,runs,analytic_profitable,simulated_profitable\n"
        ));
    }
}
