//! Scenario files, repeated simulation runs and their reports.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{
    AgentSpec, BotMode, ChallengePolicy, CoalitionProfile, CoalitionResponse, FeePolicy, FrontRunnerProfile,
    LegitimateProfile, NoClauseModel, PerformPolicy,
};
use crate::chain_sim::{ChainConfig, Event, SimError, Simulation, TieBreak, TxBody};
use crate::clause::{BurnDestination, Clause, ClauseConfig, ClauseContract, PlainContract, SelectionPolicy};
use crate::rng;
use crate::types::{Address, Amount, ContractId, Settlement, Tick};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("schema error at {path} (line {line}, column {column}): {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

fn one_u32() -> u32 {
    1
}
fn one_u64() -> u64 {
    1
}
fn default_interval() -> Tick {
    4
}
fn default_capacity() -> usize {
    16
}
fn default_payor() -> Address {
    Address::new("payor")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSettings {
    #[serde(default = "default_interval")]
    pub block_interval: Tick,
    #[serde(default = "default_capacity")]
    pub block_capacity: usize,
    #[serde(default = "one_u64")]
    pub observation_latency: Tick,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            block_interval: default_interval(),
            block_capacity: default_capacity(),
            observation_latency: 1,
            tie_break: TieBreak::default(),
        }
    }
}

impl ChainSettings {
    pub fn to_config(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            block_interval: self.block_interval,
            block_capacity: self.block_capacity,
            observation_latency: self.observation_latency,
            tie_break: self.tie_break,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClauseSettings {
    pub enabled: bool,
    /// The contract visibly advertises the clause.
    #[serde(default)]
    pub signal: bool,
    #[serde(default = "one_u64")]
    pub window: u64,
    #[serde(default)]
    pub selection_policy: SelectionPolicy,
    #[serde(default)]
    pub burn_destination: BurnDestination,
    #[serde(default)]
    pub challenge_fee: Amount,
    #[serde(default)]
    pub hardcoded_responses: bool,
    #[serde(default = "one_u64")]
    pub response_deadline: u64,
}

impl ClauseSettings {
    pub fn enabled(window: u64, signal: bool) -> Self {
        ClauseSettings {
            enabled: true,
            signal,
            window,
            selection_policy: SelectionPolicy::default(),
            burn_destination: BurnDestination::default(),
            challenge_fee: 0,
            hardcoded_responses: false,
            response_deadline: 1,
        }
    }

    pub fn disabled() -> Self {
        ClauseSettings {
            enabled: false,
            ..Self::enabled(1, false)
        }
    }

    pub fn to_config(&self, payment: Amount) -> ClauseConfig {
        ClauseConfig {
            payment,
            window: self.window,
            selection_policy: self.selection_policy,
            burn_destination: self.burn_destination.clone(),
            challenge_fee: self.challenge_fee,
            hardcoded_responses: self.hardcoded_responses,
            response_deadline: self.response_deadline,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    #[serde(default = "one_u32")]
    pub repetitions: u32,
    pub horizon: Tick,
    pub payment: Amount,
    #[serde(default = "default_payor")]
    pub payor: Address,
    #[serde(default)]
    pub chain: ChainSettings,
    pub clause: ClauseSettings,
    pub agents: Vec<AgentSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Schema {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.payment == 0 {
            return bad("payment must be positive".into());
        }
        self.chain
            .to_config(0)
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if self.clause.enabled {
            self.clause
                .to_config(self.payment)
                .validate(&self.payor)
                .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        let mut names = BTreeSet::new();
        let mut addresses = BTreeSet::new();
        for a in &self.agents {
            if !names.insert(a.name()) {
                return bad(format!("duplicate agent name {}", a.name()));
            }
            if let AgentSpec::Coalition(c) = a {
                if c.wallets.len() < 2 {
                    return bad(format!("coalition {} needs at least two wallets", c.name));
                }
            }
            for addr in a.addresses() {
                if addr == self.payor {
                    return bad(format!("agent {} uses the payor address", a.name()));
                }
                if !addresses.insert(addr.clone()) {
                    return bad(format!("address {addr} used twice"));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn legitimate_addresses(&self) -> BTreeSet<Address> {
        self.agents
            .iter()
            .filter(|a| matches!(a, AgentSpec::Legitimate(_)))
            .flat_map(|a| a.addresses())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayoffRecord {
    pub agent: String,
    pub strategy: String,
    pub received: i128,
    pub fees: i128,
    pub cost: i128,
    pub theta_penalty: i128,
    pub net: i128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    PaidLegitimate,
    PaidOther,
    Burned,
    Unsettled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rep: u32,
    pub seed: u64,
    pub outcome: RunOutcome,
    pub settlement: Option<Settlement>,
    pub rounds: u32,
    pub first_claim_at: Option<Tick>,
    pub settled_at: Option<Tick>,
    pub delay: Option<Tick>,
    /// Claims broadcast by agents other than legitimate performers.
    pub bot_claims: u32,
    pub payoffs: Vec<PayoffRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub runs: u32,
    pub paid_legitimate: u32,
    pub paid_other: u32,
    pub burned: u32,
    pub unsettled: u32,
    pub paid_legitimate_rate: f64,
    /// Three binomial standard errors of `paid_legitimate_rate`.
    pub paid_legitimate_3sigma: f64,
    pub burn_rate: f64,
    pub mean_rounds: f64,
    pub max_rounds: u32,
    pub mean_delay: Option<f64>,
    pub bot_claims: u64,
    pub mean_net_payoff: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    pub digest: String,
    pub seed: u64,
    pub repetitions: u32,
    pub clause_enabled: bool,
    pub signal: bool,
    /// Ordering rule applied among equal fees.
    pub tie_break: TieBreak,
    pub aggregates: Aggregates,
    pub runs: Vec<RunRecord>,
}

impl Report {
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub struct ScenarioOutput {
    pub report: Report,
    pub traces: Vec<Vec<Event>>,
}

impl ScenarioOutput {
    /// All traces as JSON lines, each event tagged with its repetition.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for (rep, trace) in self.traces.iter().enumerate() {
            for e in trace {
                let mut v = serde_json::to_value(e).expect("event serializes");
                v.as_object_mut()
                    .expect("events are objects")
                    .insert("rep".into(), serde_json::Value::from(rep));
                out.push_str(&v.to_string());
                out.push('\n');
            }
        }
        out
    }
}

const CONTRACT: ContractId = ContractId(0);

/// Runs one repetition and returns its record and trace.
pub fn run_repetition(s: &Scenario, rep: u32) -> Result<(RunRecord, Vec<Event>), ScenarioError> {
    let seed = rng::derive_seed(s.seed, rng::REPETITION, rep as u64);
    let mut sim = Simulation::new(s.chain.to_config(seed)).map_err(SimError::from)?;
    if s.clause.enabled {
        let clause = Clause::new(CONTRACT, s.payor.clone(), s.clause.to_config(s.payment))
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        sim.add_contract(Box::new(ClauseContract::new(clause, s.clause.signal)));
    } else {
        sim.add_contract(Box::new(PlainContract::new(CONTRACT, s.payor.clone(), s.payment)));
    }
    for a in &s.agents {
        sim.add_actor(a.build(s.payment));
    }
    sim.run_until(s.horizon)?;

    let legit = s.legitimate_addresses();
    let record = sim.settlements().get(&CONTRACT).cloned();
    let settlement = record.as_ref().map(|r| r.settlement.clone());
    let outcome = match &settlement {
        None => RunOutcome::Unsettled,
        Some(Settlement::Burned(_)) => RunOutcome::Burned,
        Some(Settlement::Paid(a)) if legit.contains(a) => RunOutcome::PaidLegitimate,
        Some(Settlement::Paid(_)) => RunOutcome::PaidOther,
    };

    let mut fees: BTreeMap<&Address, i128> = BTreeMap::new();
    for b in sim.chain().blocks() {
        for tx in &b.transactions {
            *fees.entry(&tx.sender).or_insert(0) += tx.fee as i128;
        }
    }
    let mut first_claim_at = None;
    let mut bot_claims = 0;
    for e in sim.trace() {
        if let Event::Broadcast { tick, tx, .. } = e {
            if let TxBody::Claim(c) = &tx.body {
                first_claim_at.get_or_insert(*tick);
                if !legit.contains(&c.payee) {
                    bot_claims += 1;
                }
            }
        }
    }

    let payoffs = sim
        .actors()
        .map(|a| {
            let balance: i128 = a.addresses.iter().map(|x| sim.ledger().balance(x)).sum();
            let paid_fees: i128 = a.addresses.iter().map(|x| fees.get(x).copied().unwrap_or(0)).sum();
            let wronged =
                a.legitimate && a.performed && matches!(&settlement, Some(Settlement::Paid(x)) if !legit.contains(x));
            let theta_penalty = if wronged { a.theta as i128 } else { 0 };
            let cost = a.cost_incurred as i128;
            PayoffRecord {
                agent: a.name,
                strategy: a.strategy,
                received: balance + paid_fees,
                fees: paid_fees,
                cost,
                theta_penalty,
                net: balance - cost - theta_penalty,
            }
        })
        .collect();

    let settled_at = record.as_ref().map(|r| r.tick);
    let run = RunRecord {
        rep,
        seed,
        outcome,
        rounds: record.as_ref().map_or(0, |r| r.rounds),
        settlement,
        first_claim_at,
        settled_at,
        delay: settled_at.zip(first_claim_at).map(|(s, f)| s - f),
        bot_claims,
        payoffs,
    };
    Ok((run, sim.into_trace()))
}

fn aggregate(runs: &[RunRecord]) -> Aggregates {
    let n = runs.len() as u32;
    let count = |o: RunOutcome| runs.iter().filter(|r| r.outcome == o).count() as u32;
    let paid_legitimate = count(RunOutcome::PaidLegitimate);
    let burned = count(RunOutcome::Burned);
    let rate = paid_legitimate as f64 / n as f64;
    let delays: Vec<f64> = runs.iter().filter_map(|r| r.delay).map(|d| d as f64).collect();
    let mut mean_net_payoff: BTreeMap<String, f64> = BTreeMap::new();
    for r in runs {
        for p in &r.payoffs {
            *mean_net_payoff.entry(p.agent.clone()).or_insert(0.0) += p.net as f64 / n as f64;
        }
    }
    Aggregates {
        runs: n,
        paid_legitimate,
        paid_other: count(RunOutcome::PaidOther),
        burned,
        unsettled: count(RunOutcome::Unsettled),
        paid_legitimate_rate: rate,
        paid_legitimate_3sigma: 3.0 * (rate * (1.0 - rate) / n as f64).sqrt(),
        burn_rate: burned as f64 / n as f64,
        mean_rounds: runs.iter().map(|r| r.rounds as f64).sum::<f64>() / n as f64,
        max_rounds: runs.iter().map(|r| r.rounds).max().unwrap_or(0),
        mean_delay: (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64),
        bot_claims: runs.iter().map(|r| r.bot_claims as u64).sum(),
        mean_net_payoff,
    }
}

/// Runs every repetition, in parallel, and assembles them in order.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutput, ScenarioError> {
    s.validate()?;
    let results: Vec<(RunRecord, Vec<Event>)> = (0..s.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(s, rep))
        .collect::<Result<_, _>>()?;
    let (runs, traces): (Vec<RunRecord>, Vec<Vec<Event>>) = results.into_iter().unzip();
    let report = Report {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        digest: s.digest(),
        seed: s.seed,
        repetitions: s.repetitions,
        clause_enabled: s.clause.enabled,
        signal: s.clause.signal,
        tie_break: s.chain.tie_break,
        aggregates: aggregate(&runs),
        runs,
    };
    Ok(ScenarioOutput { report, traces })
}

/// Ready-made rosters.
pub mod presets {
    use super::*;

    pub fn legitimate(cost: Amount, fee: Amount, theta: Amount) -> LegitimateProfile {
        LegitimateProfile {
            name: "performer".into(),
            address: Address::new("0xa11ce"),
            cost,
            theta,
            fee,
            challenge_policy: ChallengePolicy::Rational,
            perform: PerformPolicy::Rational,
            expected_frontrunners: 0,
            no_clause_model: NoClauseModel::FixedFee,
            contract: ContractId(0),
            act_at: 0,
        }
    }

    pub fn bot(i: usize, fee_policy: FeePolicy, mode: BotMode) -> FrontRunnerProfile {
        FrontRunnerProfile {
            name: format!("bot{i}"),
            address: Address::new(format!("0xb07{i}")),
            fee_policy,
            mode,
            clause_belief: 0.0,
            challenge_policy: ChallengePolicy::AlwaysWithdraw,
        }
    }

    fn base(name: &str, seed: u64, repetitions: u32, payment: Amount, clause: ClauseSettings) -> Scenario {
        Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            seed,
            repetitions,
            horizon: 400,
            payment,
            payor: default_payor(),
            chain: ChainSettings::default(),
            clause,
            agents: Vec::new(),
        }
    }

    /// No clause; the performer and `bots` copies bid the same fee and
    /// priority among them is random.
    pub fn no_clause_equal_fees(seed: u64, repetitions: u32, bots: usize) -> Scenario {
        let mut s = base(
            "no-clause-equal-fees",
            seed,
            repetitions,
            100,
            ClauseSettings::disabled(),
        );
        s.chain.tie_break = TieBreak::Random;
        s.chain.block_capacity = s.chain.block_capacity.max(bots + 1);
        let mut perf = legitimate(10, 1, 5);
        perf.expected_frontrunners = bots as u32;
        s.agents.push(AgentSpec::Legitimate(perf));
        for i in 1..=bots {
            s.agents.push(AgentSpec::Frontrunner(bot(
                i,
                FeePolicy::Fixed(1),
                BotMode::BestResponse,
            )));
        }
        s
    }

    /// No clause; one bot copies and outbids.
    pub fn no_clause_outbid(seed: u64, repetitions: u32) -> Scenario {
        let mut s = base("no-clause-outbid", seed, repetitions, 100, ClauseSettings::disabled());
        let mut perf = legitimate(10, 1, 5);
        perf.perform = PerformPolicy::Always;
        s.agents.push(AgentSpec::Legitimate(perf));
        s.agents
            .push(AgentSpec::Frontrunner(bot(1, FeePolicy::Outbid(1), BotMode::Always)));
        s
    }

    /// Signaled clause with a best-responding bot.
    pub fn deterrence(seed: u64, repetitions: u32, window: u64) -> Scenario {
        let mut s = base(
            "clause-deterrence",
            seed,
            repetitions,
            100,
            ClauseSettings::enabled(window, true),
        );
        s.agents.push(AgentSpec::Legitimate(legitimate(10, 1, 5)));
        s.agents.push(AgentSpec::Frontrunner(bot(
            1,
            FeePolicy::Outbid(1),
            BotMode::BestResponse,
        )));
        s
    }

    /// A coalition of `k` wallets against an always-asserting performer.
    pub fn coalition(seed: u64, repetitions: u32, k: usize) -> Scenario {
        let mut s = base("coalition", seed, repetitions, 100, ClauseSettings::enabled(2, false));
        s.chain.block_capacity = s.chain.block_capacity.max(k + 1);
        let mut perf = legitimate(10, 1, 5);
        perf.challenge_policy = ChallengePolicy::AlwaysAssert;
        s.agents.push(AgentSpec::Legitimate(perf));
        s.agents.push(AgentSpec::Coalition(CoalitionProfile {
            name: "coalition".into(),
            wallets: (0..k).map(|i| Address::new(format!("0xc0{i}"))).collect(),
            fee: 1,
            response: CoalitionResponse::WithdrawAll,
            mode: BotMode::Always,
            clause_belief: 0.0,
        }));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_errors_carry_path_and_line() {
        let text = r#"{
  "schema_version": 1,
  "name": "x",
  "seed": 1,
  "horizon": 10,
  "payment": 100,
  "clause": {"enabled": true, "window": "four"},
  "agents": []
}"#;
        match Scenario::from_json(text) {
            Err(ScenarioError::Schema { path, line, .. }) => {
                assert_eq!(path, "clause.window");
                assert_eq!(line, 7);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_is_mandatory() {
        let text =
            r#"{"schema_version":1,"name":"x","horizon":10,"payment":100,"clause":{"enabled":false},"agents":[]}"#;
        let err = Scenario::from_json(text).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn unknown_strategy_rejected() {
        let text = r#"{"schema_version":1,"name":"x","seed":1,"horizon":10,"payment":100,"clause":{"enabled":false},
            "agents":[{"strategy":"oracle","name":"o"}]}"#;
        assert!(matches!(Scenario::from_json(text), Err(ScenarioError::Schema { .. })));
    }

    #[test]
    fn presets_round_trip() {
        for s in [
            presets::no_clause_equal_fees(1, 2, 1),
            presets::deterrence(1, 2, 4),
            presets::coalition(1, 2, 4),
        ] {
            let back = Scenario::from_json(&s.to_json_pretty()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn single_performer_paid_at_window_close() {
        let mut s = presets::deterrence(3, 1, 4);
        s.agents.truncate(1);
        let out = run_scenario(&s).unwrap();
        let run = &out.report.runs[0];
        assert_eq!(run.outcome, RunOutcome::PaidLegitimate);
        assert_eq!(run.rounds, 0);
        // first block at tick 4 (height 1), window closes at height 5
        assert_eq!(run.settled_at, Some(20));
        assert_eq!(run.payoffs[0].net, 100 - 10 - 1);
    }

    #[test]
    fn outbidding_bot_is_paid_without_clause() {
        let out = run_scenario(&presets::no_clause_outbid(1, 1)).unwrap();
        let run = &out.report.runs[0];
        assert_eq!(run.outcome, RunOutcome::PaidOther);
        assert_eq!(run.settlement, Some(Settlement::Paid(Address::new("0xb071"))));
        let perf = &run.payoffs[0];
        assert_eq!(perf.net, -10 - 1 - 5);
        assert_eq!(run.payoffs[1].net, 100 - 2);
    }
}
