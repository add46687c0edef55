use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clause::{run_challenge_two, ClauseConfig, ConfirmedClaim, PolicySelector, SelectionPolicy};
use crate::rng;
use crate::types::{Address, Amount, ChallengeAction, Settlement};

pub type Value = Ratio<i128>;

/// Serializes an exact value as `"n/d"`, or `"n"` when integral.
pub fn value_str<S: serde::Serializer>(x: &Value, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(x)
}

fn v(x: Amount) -> Value {
    Value::from_integer(x as i128)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("fee grid must contain 0 and the payment {payment}")]
    GridTooCoarse { payment: Amount },
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
}

/// What a performer expects when the contract has no clause.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoClauseModel {
    /// Everyone bids the same fixed fee and priority is a fair draw.
    #[default]
    FixedFee,
    /// Fees are set in an all-pay priority auction.
    Auction,
}

/// Expected payoff of performing and claiming.
pub fn performance_value(
    payment: Amount,
    cost: Amount,
    fee: Amount,
    has_clause: bool,
    frontrunners: u32,
    model: NoClauseModel,
) -> Value {
    if has_clause || frontrunners == 0 {
        return v(payment) - v(cost) - v(fee);
    }
    match model {
        NoClauseModel::FixedFee => Value::new(payment as i128, frontrunners as i128 + 1) - v(cost) - v(fee),
        NoClauseModel::Auction => -v(cost),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExpectedPayoff {
    pub agent: String,
    pub fee: Amount,
    #[serde(serialize_with = "value_str")]
    pub win_probability: Value,
    #[serde(serialize_with = "value_str")]
    pub net: Value,
}

/// Payoffs without the clause when the performer and `bot_fees.len()` copies
/// bid fixed fees. The highest fee wins; ties are broken uniformly. Every
/// message pays its fee.
pub fn no_clause_payoffs(
    payment: Amount,
    cost: Amount,
    performer_fee: Amount,
    bot_fees: &[Amount],
) -> Vec<ExpectedPayoff> {
    let all: Vec<Amount> = std::iter::once(performer_fee).chain(bot_fees.iter().copied()).collect();
    let top = *all.iter().max().expect("performer always bids");
    let winners = all.iter().filter(|&&f| f == top).count() as i128;
    all.iter()
        .enumerate()
        .map(|(i, &fee)| {
            let win = if fee == top {
                Value::new(1, winners)
            } else {
                Value::from_integer(0)
            };
            let mut net = win * v(payment) - v(fee);
            if i == 0 {
                net -= v(cost);
            }
            ExpectedPayoff {
                agent: if i == 0 { "performer".into() } else { format!("bot{i}") },
                fee,
                win_probability: win,
                net,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BidProfile {
    pub performer_fee: Amount,
    pub bot_fee: Amount,
    /// Net of the performance cost.
    #[serde(serialize_with = "value_str")]
    pub performer_value: Value,
    #[serde(serialize_with = "value_str")]
    pub bot_value: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Deviation {
    pub player: &'static str,
    pub to_fee: Amount,
    #[serde(serialize_with = "value_str")]
    pub gain: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuctionAnalysis {
    pub grid: Vec<Amount>,
    pub equilibria: Vec<BidProfile>,
    pub both_max_deviation: Option<Deviation>,
    pub perform: bool,
}

/// Payoffs of the priority auction before the performance cost.
///
/// A zero performer fee means no claim is sent, so there is nothing to copy.
/// A zero bot fee means the bot does not copy. Otherwise the higher fee takes
/// the payment, ties split it evenly, and both fees are paid.
pub fn auction_payoffs(payment: Amount, fa: Amount, fb: Amount) -> (Value, Value) {
    let t = v(payment);
    if fa == 0 {
        return (0.into(), 0.into());
    }
    if fb == 0 {
        return (t - v(fa), 0.into());
    }
    let (wa, wb) = match fa.cmp(&fb) {
        std::cmp::Ordering::Greater => (t, 0.into()),
        std::cmp::Ordering::Less => (0.into(), t),
        std::cmp::Ordering::Equal => (t / 2, t / 2),
    };
    (wa - v(fa), wb - v(fb))
}

/// Best unilateral deviation from `(fa, fb)` over the grid, if profitable.
pub fn profitable_deviation(payment: Amount, grid: &[Amount], fa: Amount, fb: Amount) -> Option<Deviation> {
    let (ua, ub) = auction_payoffs(payment, fa, fb);
    let mut best: Option<Deviation> = None;
    for &g in grid {
        let gain_a = auction_payoffs(payment, g, fb).0 - ua;
        let gain_b = auction_payoffs(payment, fa, g).1 - ub;
        for (player, gain) in [("performer", gain_a), ("bot", gain_b)] {
            if gain > 0.into() && best.as_ref().is_none_or(|d| gain > d.gain) {
                best = Some(Deviation {
                    player,
                    to_fee: g,
                    gain,
                });
            }
        }
    }
    best
}

/// Pure Nash equilibria of the discretized priority auction.
pub fn fee_auction_equilibrium(
    payment: Amount,
    grid: &[Amount],
    cost: Amount,
) -> Result<AuctionAnalysis, AnalysisError> {
    if !grid.contains(&0) || !grid.contains(&payment) {
        return Err(AnalysisError::GridTooCoarse { payment });
    }
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut equilibria = Vec::new();
    for &fa in &grid {
        for &fb in &grid {
            if profitable_deviation(payment, &grid, fa, fb).is_none() {
                let (ua, ub) = auction_payoffs(payment, fa, fb);
                equilibria.push(BidProfile {
                    performer_fee: fa,
                    bot_fee: fb,
                    performer_value: ua - v(cost),
                    bot_value: ub,
                });
            }
        }
    }
    let perform = equilibria.iter().any(|e| e.performer_value > 0.into());
    Ok(AuctionAnalysis {
        both_max_deviation: profitable_deviation(payment, &grid, payment, payment),
        grid,
        equilibria,
        perform,
    })
}

/// `n + 1` evenly spaced fees from 0 to `payment`.
pub fn uniform_grid(payment: Amount, steps: u64) -> Vec<Amount> {
    (0..=steps).map(|i| payment * i / steps).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsenceRow {
    pub p_absent: f64,
    pub analytic: f64,
    pub simulated: f64,
    pub std_error: f64,
    pub runs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsenceSweep {
    pub payment: Amount,
    pub fee: Amount,
    pub threshold: f64,
    pub rows: Vec<AbsenceRow>,
}

impl AbsenceSweep {
    /// First grid point with positive analytic payoff.
    pub fn analytic_crossing(&self) -> Option<f64> {
        self.rows.iter().find(|r| r.analytic > 0.0).map(|r| r.p_absent)
    }

    /// First grid point with positive simulated payoff.
    pub fn simulated_crossing(&self) -> Option<f64> {
        self.rows.iter().find(|r| r.simulated > 0.0).map(|r| r.p_absent)
    }
}

/// Payoff of a single bot claiming against a clause whose legitimate claimant
/// is absent with probability `p_absent`. Analytic value and a Monte-Carlo
/// estimate that runs the clause itself.
pub fn absence_sweep(
    grid: &[f64],
    payment: Amount,
    fee: Amount,
    runs: u64,
    seed: u64,
) -> Result<AbsenceSweep, AnalysisError> {
    if let Some(&bad) = grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(AnalysisError::BadProbability(bad));
    }
    let config = ClauseConfig::new(payment, 1);
    let bot = Address::new("bot");
    let legit = Address::new("legit");
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut agents = rng::substream(seed, rng::AGENTS, i as u64);
            let mut selection = rng::substream(seed, rng::SELECTION, i as u64);
            let mut sum = 0f64;
            let mut sum_sq = 0f64;
            for _ in 0..runs {
                let absent = agents.gen_bool(p);
                let mut selector = PolicySelector {
                    policy: SelectionPolicy::UniformRandom,
                    rng: &mut selection,
                };
                let settlement = if absent {
                    Settlement::Paid(bot.clone())
                } else {
                    let claims = [
                        ConfirmedClaim::new(legit.clone(), 1, 0),
                        ConfirmedClaim::new(bot.clone(), 1, 1),
                    ];
                    run_challenge_two(&config, claims, &mut selector, |a, _| {
                        (a == &legit).then_some(ChallengeAction::Assert)
                    })
                    .expect("valid challenge")
                    .0
                };
                let received = if settlement == Settlement::Paid(bot.clone()) {
                    payment
                } else {
                    0
                };
                let x = received as f64 - fee as f64;
                sum += x;
                sum_sq += x * x;
            }
            let n = runs as f64;
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0);
            AbsenceRow {
                p_absent: p,
                analytic: p * payment as f64 - fee as f64,
                simulated: mean,
                std_error: (var / n).sqrt(),
                runs,
            }
        })
        .collect();
    Ok(AbsenceSweep {
        payment,
        fee,
        threshold: fee as f64 / payment as f64,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Value {
        Value::new(n, d)
    }

    #[test]
    fn equal_fees_tax_half() {
        let p = no_clause_payoffs(100, 10, 2, &[2]);
        assert_eq!(p[0].net, r(50 - 10 - 2, 1));
        assert_eq!(p[1].net, r(50 - 2, 1));
    }

    #[test]
    fn more_bots_raise_the_tax() {
        let p = no_clause_payoffs(100, 10, 2, &[2, 2, 2]);
        assert_eq!(p[0].net, r(100, 4) - 12);
        let total: Value = p.iter().map(|x| x.net).sum();
        assert_eq!(total, r(100 - 10 - 8, 1));
    }

    #[test]
    fn outbid_takes_everything() {
        let p = no_clause_payoffs(100, 10, 2, &[3]);
        assert_eq!(p[0].net, r(-12, 1));
        assert_eq!(p[1].net, r(97, 1));
    }

    #[test]
    fn performance_value_by_model() {
        assert_eq!(performance_value(100, 10, 1, true, 3, NoClauseModel::Auction), r(89, 1));
        assert_eq!(
            performance_value(100, 10, 1, false, 1, NoClauseModel::FixedFee),
            r(39, 1)
        );
        assert_eq!(
            performance_value(100, 10, 1, false, 1, NoClauseModel::Auction),
            r(-10, 1)
        );
    }

    #[test]
    fn five_level_grid() {
        let a = fee_auction_equilibrium(100, &uniform_grid(100, 4), 10).unwrap();
        assert!(a.equilibria.iter().any(|e| e.performer_fee == 0 && e.bot_fee == 100));
        assert!(a.equilibria.iter().all(|e| e.performer_value == r(-10, 1)));
        assert!(a.both_max_deviation.is_some());
        assert!(!a.perform);
    }

    #[test]
    fn grid_must_span() {
        assert!(matches!(
            fee_auction_equilibrium(100, &[0, 50], 1),
            Err(AnalysisError::GridTooCoarse { .. })
        ));
        assert!(fee_auction_equilibrium(100, &[10, 100], 1).is_err());
    }

    #[test]
    fn absence_endpoints() {
        let s = absence_sweep(&[0.0, 1.0], 100, 5, 200, 1).unwrap();
        assert_eq!(s.rows[0].simulated, -5.0);
        assert_eq!(s.rows[1].simulated, 95.0);
        assert_eq!(s.threshold, 0.05);
    }
}
