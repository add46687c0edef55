use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::analysis::{performance_value, NoClauseModel};
use crate::chain_sim::{
    Actor, ActorSummary, ChainView, ClaimMessage, ContractStatus, Evidence, Phase, ResponseMessage, TxBody, TxRequest,
};
use crate::types::{Address, Amount, ChallengeAction, ContractId, Tick};

/// How a claimant answers when selected in a challenge round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengePolicy {
    /// Assert iff the loss from a wrongful payment exceeds zero and covers
    /// the response fee.
    #[default]
    Rational,
    AlwaysAssert,
    AlwaysWithdraw,
    IndifferentRandom,
    Precommitted(ChallengeAction),
}

impl ChallengePolicy {
    pub fn decide(self, theta: Amount, challenge_fee: Amount, rng: &mut impl Rng) -> ChallengeAction {
        let assert = match self {
            ChallengePolicy::Rational => theta > 0 && theta >= challenge_fee,
            ChallengePolicy::AlwaysAssert => true,
            ChallengePolicy::AlwaysWithdraw => false,
            ChallengePolicy::IndifferentRandom => rng.gen_bool(0.5),
            ChallengePolicy::Precommitted(a) => a == ChallengeAction::Assert,
        };
        if assert {
            ChallengeAction::Assert
        } else {
            ChallengeAction::Withdraw
        }
    }

    /// Action committed with a claim, when the policy fixes one in advance.
    fn commitment(self, theta: Amount, challenge_fee: Amount) -> ChallengeAction {
        match self {
            ChallengePolicy::Precommitted(a) => a,
            ChallengePolicy::AlwaysAssert => ChallengeAction::Assert,
            ChallengePolicy::Rational if theta > 0 && theta >= challenge_fee => ChallengeAction::Assert,
            _ => ChallengeAction::Withdraw,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformPolicy {
    /// Perform iff the expected payoff is positive.
    #[default]
    Rational,
    Always,
    Never,
}

fn default_contract() -> ContractId {
    ContractId(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegitimateProfile {
    pub name: String,
    pub address: Address,
    pub cost: Amount,
    #[serde(default)]
    pub theta: Amount,
    pub fee: Amount,
    #[serde(default)]
    pub challenge_policy: ChallengePolicy,
    #[serde(default)]
    pub perform: PerformPolicy,
    /// Number of front-runners the performer expects when there is no clause.
    #[serde(default)]
    pub expected_frontrunners: u32,
    #[serde(default)]
    pub no_clause_model: NoClauseModel,
    #[serde(default = "default_contract")]
    pub contract: ContractId,
    #[serde(default)]
    pub act_at: Tick,
}

/// The agent who performs the obligation and holds valid evidence.
pub struct LegitimateAgent {
    profile: LegitimateProfile,
    payment: Amount,
    decided: bool,
    performed: bool,
    answered: BTreeSet<u32>,
}

impl LegitimateAgent {
    pub fn new(profile: LegitimateProfile, payment: Amount) -> Self {
        LegitimateAgent {
            profile,
            payment,
            decided: false,
            performed: false,
            answered: BTreeSet::new(),
        }
    }

    fn should_perform(&self, status: &ContractStatus) -> bool {
        match self.profile.perform {
            PerformPolicy::Always => true,
            PerformPolicy::Never => false,
            PerformPolicy::Rational => {
                let p = &self.profile;
                performance_value(
                    self.payment,
                    p.cost,
                    p.fee,
                    status.has_clause,
                    p.expected_frontrunners,
                    p.no_clause_model,
                ) > 0.into()
            }
        }
    }
}

impl Actor for LegitimateAgent {
    fn summary(&self) -> ActorSummary {
        ActorSummary {
            name: self.profile.name.clone(),
            strategy: "legitimate".into(),
            addresses: vec![self.profile.address.clone()],
            legitimate: true,
            performed: self.performed,
            cost_incurred: if self.performed { self.profile.cost } else { 0 },
            theta: self.profile.theta,
        }
    }

    fn act(&mut self, view: &ChainView<'_>, rng: &mut ChaCha8Rng) -> Vec<TxRequest> {
        let p = &self.profile;
        let Some(status) = view.contract(p.contract) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if !self.decided && view.tick >= p.act_at {
            self.decided = true;
            if status.accepts_claims() && self.should_perform(status) {
                self.performed = true;
                let precommit = status
                    .hardcoded_responses
                    .then(|| p.challenge_policy.commitment(p.theta, status.challenge_fee));
                out.push(TxRequest {
                    sender: p.address.clone(),
                    fee: p.fee,
                    body: TxBody::Claim(ClaimMessage {
                        contract: p.contract,
                        payee: p.address.clone(),
                        evidence: Evidence {
                            token: p.address.hash64(),
                            valid: true,
                        },
                        precommit,
                    }),
                });
            }
        }
        if let Phase::Challenge { round, selected, .. } = &status.phase {
            if self.performed
                && !status.hardcoded_responses
                && selected.contains(&p.address)
                && self.answered.insert(*round)
            {
                let action = p.challenge_policy.decide(p.theta, status.challenge_fee, rng);
                if action == ChallengeAction::Assert {
                    out.push(respond(&p.address, p.contract, *round, action, status.challenge_fee));
                }
            }
        }
        out
    }
}

fn respond(sender: &Address, contract: ContractId, round: u32, action: ChallengeAction, fee: Amount) -> TxRequest {
    TxRequest {
        sender: sender.clone(),
        fee,
        body: TxBody::Response(ResponseMessage {
            contract,
            round,
            action,
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeePolicy {
    Fixed(Amount),
    /// Highest visible fee plus the increment.
    Outbid(Amount),
}

impl FeePolicy {
    pub fn fee(self, observed: Amount) -> Amount {
        match self {
            FeePolicy::Fixed(f) => f,
            FeePolicy::Outbid(inc) => observed + inc,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BotMode {
    /// Claim only when the expected payoff is positive.
    #[default]
    BestResponse,
    Always,
}

fn withdraw() -> ChallengePolicy {
    ChallengePolicy::AlwaysWithdraw
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontRunnerProfile {
    pub name: String,
    pub address: Address,
    pub fee_policy: FeePolicy,
    #[serde(default)]
    pub mode: BotMode,
    /// Believed probability that an unsignaled contract carries the clause.
    #[serde(default)]
    pub clause_belief: f64,
    #[serde(default = "withdraw")]
    pub challenge_policy: ChallengePolicy,
}

/// Expected payoff of copying a claim that pays `payment`.
///
/// Without the clause the copy wins priority outright with a higher fee and
/// half the time on a tie. With the clause a legitimate claimant is in the
/// pool, so the copy is never paid.
pub fn copy_value(payment: Amount, own_fee: Amount, observed_fee: Amount, clause_probability: f64) -> f64 {
    let win = match own_fee.cmp(&observed_fee) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Equal => 0.5,
        std::cmp::Ordering::Less => 0.0,
    };
    (1.0 - clause_probability) * win * payment as f64 - own_fee as f64
}

fn clause_probability(status: &ContractStatus, belief: f64) -> f64 {
    if status.signaled {
        if status.has_clause {
            1.0
        } else {
            0.0
        }
    } else {
        belief
    }
}

/// Finds a visible claim by someone else on a contract still accepting claims.
fn copy_target<'a>(view: &ChainView<'a>, own: &[Address]) -> Option<(&'a ClaimMessage, Amount, &'a ContractStatus)> {
    let visible = view.observe(own);
    let claim = visible
        .iter()
        .filter(|tx| !own.contains(&tx.sender))
        .find_map(|tx| tx.body.as_claim())?;
    let status = view.contract(claim.contract).filter(|s| s.accepts_claims())?;
    let top_fee = visible
        .iter()
        .filter(|tx| !own.contains(&tx.sender) && tx.body.contract() == claim.contract)
        .map(|tx| tx.fee)
        .max()
        .unwrap_or(0);
    Some((claim, top_fee, status))
}

/// Copies a visible claim with its own payee address.
pub struct FrontRunner {
    profile: FrontRunnerProfile,
    payment: Amount,
    claimed: BTreeSet<ContractId>,
    answered: BTreeSet<(ContractId, u32)>,
}

impl FrontRunner {
    pub fn new(profile: FrontRunnerProfile, payment: Amount) -> Self {
        FrontRunner {
            profile,
            payment,
            claimed: BTreeSet::new(),
            answered: BTreeSet::new(),
        }
    }
}

impl Actor for FrontRunner {
    fn summary(&self) -> ActorSummary {
        ActorSummary {
            name: self.profile.name.clone(),
            strategy: "frontrunner".into(),
            addresses: vec![self.profile.address.clone()],
            legitimate: false,
            performed: false,
            cost_incurred: 0,
            theta: 0,
        }
    }

    fn act(&mut self, view: &ChainView<'_>, rng: &mut ChaCha8Rng) -> Vec<TxRequest> {
        let p = &self.profile;
        let own = std::slice::from_ref(&p.address);
        let mut out = Vec::new();
        if let Some((claim, top_fee, status)) = copy_target(view, own) {
            if !self.claimed.contains(&claim.contract) {
                let fee = p.fee_policy.fee(top_fee);
                let go = match p.mode {
                    BotMode::Always => true,
                    BotMode::BestResponse => {
                        copy_value(self.payment, fee, top_fee, clause_probability(status, p.clause_belief)) > 0.0
                    }
                };
                // A decision is made once per contract.
                self.claimed.insert(claim.contract);
                if go {
                    let precommit = status
                        .hardcoded_responses
                        .then(|| p.challenge_policy.commitment(0, status.challenge_fee));
                    out.push(TxRequest {
                        sender: p.address.clone(),
                        fee,
                        body: TxBody::Claim(ClaimMessage {
                            contract: claim.contract,
                            payee: p.address.clone(),
                            evidence: claim.evidence,
                            precommit,
                        }),
                    });
                }
            }
        }
        for status in view.contracts() {
            if let Phase::Challenge { round, selected, .. } = &status.phase {
                if !status.hardcoded_responses
                    && selected.contains(&p.address)
                    && self.answered.insert((status.id, *round))
                    && p.challenge_policy.decide(0, status.challenge_fee, rng) == ChallengeAction::Assert
                {
                    out.push(respond(
                        &p.address,
                        status.id,
                        *round,
                        ChallengeAction::Assert,
                        status.challenge_fee,
                    ));
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoalitionResponse {
    /// Every selected wallet stays silent.
    #[default]
    WithdrawAll,
    AssertAll,
    /// Each selected wallet asserts with probability one half.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalitionProfile {
    pub name: String,
    pub wallets: Vec<Address>,
    pub fee: Amount,
    #[serde(default)]
    pub response: CoalitionResponse,
    #[serde(default)]
    pub mode: BotMode,
    #[serde(default)]
    pub clause_belief: f64,
}

/// One controller claiming from several wallets.
pub struct Coalition {
    profile: CoalitionProfile,
    payment: Amount,
    claimed: BTreeSet<ContractId>,
    answered: BTreeSet<(ContractId, u32)>,
}

impl Coalition {
    pub fn new(profile: CoalitionProfile, payment: Amount) -> Self {
        Coalition {
            profile,
            payment,
            claimed: BTreeSet::new(),
            answered: BTreeSet::new(),
        }
    }
}

impl Actor for Coalition {
    fn summary(&self) -> ActorSummary {
        ActorSummary {
            name: self.profile.name.clone(),
            strategy: "coalition".into(),
            addresses: self.profile.wallets.clone(),
            legitimate: false,
            performed: false,
            cost_incurred: 0,
            theta: 0,
        }
    }

    fn act(&mut self, view: &ChainView<'_>, rng: &mut ChaCha8Rng) -> Vec<TxRequest> {
        let p = &self.profile;
        let mut out = Vec::new();
        if let Some((claim, top_fee, status)) = copy_target(view, &p.wallets) {
            if self.claimed.insert(claim.contract) {
                let k = p.wallets.len() as f64;
                let single = copy_value(
                    self.payment,
                    p.fee,
                    top_fee,
                    clause_probability(status, p.clause_belief),
                );
                // Without the clause only one copy can win; the rest pay fees.
                let go = match p.mode {
                    BotMode::Always => true,
                    BotMode::BestResponse => single - (k - 1.0) * p.fee as f64 > 0.0,
                };
                if go {
                    let precommit = status.hardcoded_responses.then_some(match p.response {
                        CoalitionResponse::AssertAll => ChallengeAction::Assert,
                        _ => ChallengeAction::Withdraw,
                    });
                    for w in &p.wallets {
                        out.push(TxRequest {
                            sender: w.clone(),
                            fee: p.fee,
                            body: TxBody::Claim(ClaimMessage {
                                contract: claim.contract,
                                payee: w.clone(),
                                evidence: claim.evidence,
                                precommit,
                            }),
                        });
                    }
                }
            }
        }
        for status in view.contracts() {
            if let Phase::Challenge { round, selected, .. } = &status.phase {
                if status.hardcoded_responses || !self.answered.insert((status.id, *round)) {
                    continue;
                }
                for w in selected.iter().filter(|w| p.wallets.contains(w)) {
                    let assert = match p.response {
                        CoalitionResponse::WithdrawAll => false,
                        CoalitionResponse::AssertAll => true,
                        CoalitionResponse::Random => rng.gen_bool(0.5),
                    };
                    if assert {
                        out.push(respond(
                            w,
                            status.id,
                            *round,
                            ChallengeAction::Assert,
                            status.challenge_fee,
                        ));
                    }
                }
            }
        }
        out
    }
}
