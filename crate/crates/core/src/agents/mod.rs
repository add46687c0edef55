//! Agent strategies for the simulator and closed-form payoff analysis.

mod analysis;
mod claim_game;
mod strategies;

use serde::{Deserialize, Serialize};

pub use analysis::{
    absence_sweep, auction_payoffs, fee_auction_equilibrium, no_clause_payoffs, performance_value,
    profitable_deviation, uniform_grid, AbsenceRow, AbsenceSweep, AnalysisError, AuctionAnalysis, BidProfile,
    Deviation, ExpectedPayoff, NoClauseModel, Value,
};
pub use claim_game::{build_claim_game, ClaimGameParams, BOT, PERFORMER};
pub use strategies::{
    copy_value, BotMode, ChallengePolicy, Coalition, CoalitionProfile, CoalitionResponse, FeePolicy, FrontRunner,
    FrontRunnerProfile, LegitimateAgent, LegitimateProfile, PerformPolicy,
};

use crate::chain_sim::Actor;
use crate::types::{Address, Amount};

/// One roster entry of a scenario, keyed by its strategy name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum AgentSpec {
    Legitimate(LegitimateProfile),
    Frontrunner(FrontRunnerProfile),
    Coalition(CoalitionProfile),
}

impl AgentSpec {
    pub fn name(&self) -> &str {
        match self {
            AgentSpec::Legitimate(p) => &p.name,
            AgentSpec::Frontrunner(p) => &p.name,
            AgentSpec::Coalition(p) => &p.name,
        }
    }

    pub fn addresses(&self) -> Vec<Address> {
        match self {
            AgentSpec::Legitimate(p) => vec![p.address.clone()],
            AgentSpec::Frontrunner(p) => vec![p.address.clone()],
            AgentSpec::Coalition(p) => p.wallets.clone(),
        }
    }

    pub fn build(&self, payment: Amount) -> Box<dyn Actor> {
        match self {
            AgentSpec::Legitimate(p) => Box::new(LegitimateAgent::new(p.clone(), payment)),
            AgentSpec::Frontrunner(p) => Box::new(FrontRunner::new(p.clone(), payment)),
            AgentSpec::Coalition(p) => Box::new(Coalition::new(p.clone(), payment)),
        }
    }
}
