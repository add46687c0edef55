//! The Solomonic settlement clause.
//!
//! Claims are collected for a window of `window` blocks counted from the block
//! that confirmed the first claim (inclusive of the last block). A single
//! claimant is paid. With two claimants one is selected and may withdraw, which
//! pays the other, or assert, which burns the payment. With more claimants,
//! rounds select half of the remaining pool (at least one); any assertion burns
//! the payment, and selected agents that withdraw leave the pool. When one
//! claimant remains it is selected on its own, and the payment is burned
//! whatever it answers. A solicited claimant that stays silent until the
//! response deadline is treated as withdrawing.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain_sim::{Block, Contract, ContractEvent, ContractStatus, Phase, TxBody};
use crate::types::{Address, Amount, ChallengeAction, ContractId, Settlement, Tick};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClauseError {
    #[error("claim window closed (block {height}, window end {window_end:?})")]
    WindowClosed { height: u64, window_end: Option<u64> },
    #[error("address {0} already claimed")]
    DuplicateAddress(Address),
    #[error("the payor {0} may not claim")]
    PayorClaim(Address),
    #[error("the window is still open until block {0}")]
    WindowOpen(u64),
    #[error("no challenge is running")]
    NoChallenge,
    #[error("response for round {got} but round {expected} is running")]
    StaleRound { expected: u32, got: u32 },
    #[error("{0} was not selected in this round")]
    UnsolicitedResponse(Address),
    #[error("{0} already responded in this round")]
    DuplicateResponse(Address),
    #[error("response fee {fee} below challenge fee {required}")]
    InsufficientFee { fee: Amount, required: Amount },
    #[error("round still open until block {0}")]
    RoundOpen(u64),
    #[error("contract is not settled")]
    NotSettled,
    #[error("contract already settled")]
    AlreadySettled,
    #[error("invalid clause config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    #[default]
    UniformRandom,
    /// Select the claimants with the most recent broadcast time.
    LatestTimestamp,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnDestination {
    #[default]
    Null,
    Charity(Address),
}

impl BurnDestination {
    pub fn address(&self) -> Address {
        match self {
            BurnDestination::Null => Address::null(),
            BurnDestination::Charity(a) => a.clone(),
        }
    }
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClauseConfig {
    pub payment: Amount,
    /// Collection window in blocks.
    pub window: u64,
    #[serde(default)]
    pub selection_policy: SelectionPolicy,
    #[serde(default)]
    pub burn_destination: BurnDestination,
    /// Minimum fee a challenge response must carry.
    #[serde(default)]
    pub challenge_fee: Amount,
    /// Resolve the challenge from responses committed with the claims.
    #[serde(default)]
    pub hardcoded_responses: bool,
    /// Blocks a selected claimant has to respond.
    #[serde(default = "one")]
    pub response_deadline: u64,
}

impl ClauseConfig {
    pub fn new(payment: Amount, window: u64) -> Self {
        ClauseConfig {
            payment,
            window,
            selection_policy: SelectionPolicy::default(),
            burn_destination: BurnDestination::default(),
            challenge_fee: 0,
            hardcoded_responses: false,
            response_deadline: 1,
        }
    }

    pub fn validate(&self, payor: &Address) -> Result<(), ClauseError> {
        if self.payment == 0 {
            return Err(ClauseError::InvalidConfig("payment must be positive".into()));
        }
        if self.window < 1 {
            return Err(ClauseError::InvalidConfig("window must be at least 1 block".into()));
        }
        if self.response_deadline < 1 {
            return Err(ClauseError::InvalidConfig(
                "response_deadline must be at least 1 block".into(),
            ));
        }
        if &self.burn_destination.address() == payor {
            return Err(ClauseError::InvalidConfig(
                "the payor cannot be the burn destination".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmedClaim {
    pub payee: Address,
    pub height: u64,
    pub position: usize,
    pub broadcast_time: Tick,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precommit: Option<ChallengeAction>,
}

impl ConfirmedClaim {
    pub fn new(payee: impl Into<Address>, height: u64, broadcast_time: Tick) -> Self {
        ConfirmedClaim {
            payee: payee.into(),
            height,
            position: 0,
            broadcast_time,
            precommit: None,
        }
    }

    pub fn with_precommit(mut self, action: ChallengeAction) -> Self {
        self.precommit = Some(action);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeState {
    pub pool: Vec<ConfirmedClaim>,
    pub selected: Vec<Address>,
    pub round: u32,
    pub respond_by: u64,
    pub responses: BTreeMap<Address, ChallengeAction>,
    /// Pool size when the challenge began.
    pub initial_size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ClauseState {
    Idle,
    Collecting {
        window_end: u64,
        claims: Vec<ConfirmedClaim>,
    },
    Challenge(ChallengeState),
    Settled {
        settlement: Settlement,
        rounds: u32,
    },
}

/// Chooses `k` of the remaining claimants, returned as pool indices.
pub trait Selector {
    fn select(&mut self, pool: &[ConfirmedClaim], k: usize, round: u32) -> Vec<usize>;
}

impl<F> Selector for F
where
    F: FnMut(&[ConfirmedClaim], usize, u32) -> Vec<usize>,
{
    fn select(&mut self, pool: &[ConfirmedClaim], k: usize, round: u32) -> Vec<usize> {
        self(pool, k, round)
    }
}

pub struct PolicySelector<'a, R: Rng> {
    pub policy: SelectionPolicy,
    pub rng: &'a mut R,
}

impl<R: Rng> Selector for PolicySelector<'_, R> {
    fn select(&mut self, pool: &[ConfirmedClaim], k: usize, _round: u32) -> Vec<usize> {
        match self.policy {
            SelectionPolicy::UniformRandom => {
                let mut v = index::sample(self.rng, pool.len(), k).into_vec();
                v.sort_unstable();
                v
            }
            SelectionPolicy::LatestTimestamp => {
                let mut order: Vec<usize> = (0..pool.len()).collect();
                order.sort_by_key(|&i| {
                    let c = &pool[i];
                    std::cmp::Reverse((c.broadcast_time, c.height, c.position))
                });
                let mut v: Vec<usize> = order.into_iter().take(k).collect();
                v.sort_unstable();
                v
            }
        }
    }
}

/// Number of claimants selected from a pool of `m`.
pub fn selection_size(m: usize) -> usize {
    (m / 2).max(1)
}

/// Upper bound on challenge rounds for an initial pool of `n` claimants.
pub fn round_bound(n: usize) -> u32 {
    if n <= 1 {
        return 0;
    }
    let mut log = 0;
    while (1usize << log) < n {
        log += 1;
    }
    log + 1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub from: Address,
    pub to: Address,
    pub amount: Amount,
}

#[derive(Clone, Debug)]
pub struct Clause {
    id: ContractId,
    payor: Address,
    config: ClauseConfig,
    state: ClauseState,
    paid_out: bool,
}

impl Clause {
    pub fn new(id: ContractId, payor: Address, config: ClauseConfig) -> Result<Self, ClauseError> {
        config.validate(&payor)?;
        Ok(Clause {
            id,
            payor,
            config,
            state: ClauseState::Idle,
            paid_out: false,
        })
    }

    pub fn id(&self) -> ContractId {
        self.id
    }

    pub fn payor(&self) -> &Address {
        &self.payor
    }

    pub fn config(&self) -> &ClauseConfig {
        &self.config
    }

    pub fn state(&self) -> &ClauseState {
        &self.state
    }

    pub fn settlement(&self) -> Option<(&Settlement, u32)> {
        match &self.state {
            ClauseState::Settled { settlement, rounds } => Some((settlement, *rounds)),
            _ => None,
        }
    }

    pub fn on_claim_confirmed(&mut self, claim: ConfirmedClaim) -> Result<Vec<ContractEvent>, ClauseError> {
        if claim.payee == self.payor {
            return Err(ClauseError::PayorClaim(claim.payee));
        }
        match &mut self.state {
            ClauseState::Idle => {
                let window_end = claim.height + self.config.window;
                self.state = ClauseState::Collecting {
                    window_end,
                    claims: vec![claim],
                };
                Ok(vec![ContractEvent::WindowOpened { window_end }])
            }
            ClauseState::Collecting { window_end, claims } => {
                if claim.height > *window_end {
                    return Err(ClauseError::WindowClosed {
                        height: claim.height,
                        window_end: Some(*window_end),
                    });
                }
                if claims.iter().any(|c| c.payee == claim.payee) {
                    return Err(ClauseError::DuplicateAddress(claim.payee));
                }
                claims.push(claim);
                Ok(Vec::new())
            }
            _ => Err(ClauseError::WindowClosed {
                height: claim.height,
                window_end: None,
            }),
        }
    }

    /// Ends collection at `height`: pays a lone claimant or opens the challenge.
    pub fn close_window(
        &mut self,
        height: u64,
        selector: &mut dyn Selector,
    ) -> Result<Vec<ContractEvent>, ClauseError> {
        let claims = match &self.state {
            ClauseState::Collecting { window_end, claims } => {
                if height < *window_end {
                    return Err(ClauseError::WindowOpen(*window_end));
                }
                claims.clone()
            }
            _ => return Err(ClauseError::NoChallenge),
        };
        if claims.len() == 1 {
            return Ok(self.finish(Settlement::Paid(claims[0].payee.clone()), 0));
        }
        let initial_size = claims.len();
        let mut events = self.open_round(claims, 1, height, initial_size, selector);
        if self.config.hardcoded_responses {
            while let ClauseState::Challenge(ch) = &self.state {
                let answers: Vec<(Address, ChallengeAction)> = ch
                    .pool
                    .iter()
                    .filter(|c| ch.selected.contains(&c.payee))
                    .filter_map(|c| c.precommit.map(|a| (c.payee.clone(), a)))
                    .collect();
                if let ClauseState::Challenge(ch) = &mut self.state {
                    ch.responses.extend(answers);
                }
                events.extend(self.resolve_round_unchecked(height, selector));
            }
        }
        Ok(events)
    }

    fn open_round(
        &mut self,
        pool: Vec<ConfirmedClaim>,
        round: u32,
        height: u64,
        initial_size: usize,
        selector: &mut dyn Selector,
    ) -> Vec<ContractEvent> {
        let k = selection_size(pool.len());
        let mut picks = selector.select(&pool, k, round);
        picks.sort_unstable();
        picks.dedup();
        assert!(
            picks.len() == k && picks.iter().all(|&i| i < pool.len()),
            "selector returned an invalid set"
        );
        let selected: Vec<Address> = picks.iter().map(|&i| pool[i].payee.clone()).collect();
        let respond_by = height + self.config.response_deadline;
        let event = ContractEvent::ChallengeOpened {
            round,
            pool: pool.iter().map(|c| c.payee.clone()).collect(),
            selected: selected.clone(),
            respond_by,
        };
        self.state = ClauseState::Challenge(ChallengeState {
            pool,
            selected,
            round,
            respond_by,
            responses: BTreeMap::new(),
            initial_size,
        });
        vec![event]
    }

    pub fn respond(
        &mut self,
        from: &Address,
        round: u32,
        action: ChallengeAction,
        fee: Amount,
    ) -> Result<ContractEvent, ClauseError> {
        let ClauseState::Challenge(ch) = &mut self.state else {
            return Err(ClauseError::NoChallenge);
        };
        if round != ch.round {
            return Err(ClauseError::StaleRound {
                expected: ch.round,
                got: round,
            });
        }
        if !ch.selected.contains(from) {
            return Err(ClauseError::UnsolicitedResponse(from.clone()));
        }
        if ch.responses.contains_key(from) {
            return Err(ClauseError::DuplicateResponse(from.clone()));
        }
        if fee < self.config.challenge_fee {
            return Err(ClauseError::InsufficientFee {
                fee,
                required: self.config.challenge_fee,
            });
        }
        ch.responses.insert(from.clone(), action);
        Ok(ContractEvent::ResponseAccepted {
            from: from.clone(),
            round,
            action,
        })
    }

    /// Resolves the running round once its deadline has passed.
    pub fn resolve_round(
        &mut self,
        height: u64,
        selector: &mut dyn Selector,
    ) -> Result<Vec<ContractEvent>, ClauseError> {
        match &self.state {
            ClauseState::Challenge(ch) if height < ch.respond_by => Err(ClauseError::RoundOpen(ch.respond_by)),
            ClauseState::Challenge(_) => Ok(self.resolve_round_unchecked(height, selector)),
            _ => Err(ClauseError::NoChallenge),
        }
    }

    fn resolve_round_unchecked(&mut self, height: u64, selector: &mut dyn Selector) -> Vec<ContractEvent> {
        let ClauseState::Challenge(ch) = std::mem::replace(&mut self.state, ClauseState::Idle) else {
            unreachable!("caller checked the phase");
        };
        let action_of = |a: &Address| ch.responses.get(a).copied().unwrap_or(ChallengeAction::Withdraw);
        let (asserted, withdrawn): (Vec<Address>, Vec<Address>) = ch
            .selected
            .iter()
            .cloned()
            .partition(|a| action_of(a) == ChallengeAction::Assert);
        let mut events = vec![ContractEvent::RoundResolved {
            round: ch.round,
            withdrawn: withdrawn.clone(),
            asserted: asserted.clone(),
        }];
        let burn = Settlement::Burned(self.config.burn_destination.address());
        if !asserted.is_empty() {
            events.extend(self.finish(burn, ch.round));
            return events;
        }
        let remaining: Vec<ConfirmedClaim> = ch.pool.into_iter().filter(|c| !withdrawn.contains(&c.payee)).collect();
        if ch.initial_size == 2 {
            let other = remaining.into_iter().next().expect("one claimant remains");
            events.extend(self.finish(Settlement::Paid(other.payee), ch.round));
        } else if remaining.is_empty() {
            events.extend(self.finish(burn, ch.round));
        } else {
            events.extend(self.open_round(remaining, ch.round + 1, height, ch.initial_size, selector));
        }
        events
    }

    fn finish(&mut self, settlement: Settlement, rounds: u32) -> Vec<ContractEvent> {
        self.state = ClauseState::Settled {
            settlement: settlement.clone(),
            rounds,
        };
        vec![ContractEvent::Settled {
            settlement,
            amount: self.config.payment,
            rounds,
        }]
    }

    /// Releases the escrow. Only the first call succeeds.
    pub fn settle(&mut self) -> Result<Transfer, ClauseError> {
        let ClauseState::Settled { settlement, .. } = &self.state else {
            return Err(ClauseError::NotSettled);
        };
        if self.paid_out {
            return Err(ClauseError::AlreadySettled);
        }
        self.paid_out = true;
        Ok(Transfer {
            from: Address::escrow(self.id),
            to: settlement.destination().clone(),
            amount: self.config.payment,
        })
    }

    /// Advances time-driven transitions after block `height` was processed.
    pub fn advance(&mut self, height: u64, selector: &mut dyn Selector) -> Vec<ContractEvent> {
        match &self.state {
            ClauseState::Collecting { window_end, .. } if height >= *window_end => {
                self.close_window(height, selector).expect("window is due")
            }
            ClauseState::Challenge(ch) if height >= ch.respond_by => self.resolve_round_unchecked(height, selector),
            _ => Vec::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        match &self.state {
            ClauseState::Idle => Phase::Idle,
            ClauseState::Collecting { window_end, .. } => Phase::Collecting {
                window_end: *window_end,
            },
            ClauseState::Challenge(ch) => Phase::Challenge {
                round: ch.round,
                selected: ch.selected.clone(),
                respond_by: ch.respond_by,
            },
            ClauseState::Settled { settlement, .. } => Phase::Settled {
                settlement: settlement.clone(),
            },
        }
    }
}

/// Runs a whole challenge among `claims` with responses given by `respond`.
/// Returns the settlement and the number of rounds used.
pub fn run_challenge(
    config: &ClauseConfig,
    claims: Vec<ConfirmedClaim>,
    selector: &mut dyn Selector,
    mut respond: impl FnMut(&Address, u32) -> Option<ChallengeAction>,
) -> Result<(Settlement, u32), ClauseError> {
    let payor = Address::new("payor");
    let mut clause = Clause::new(ContractId(0), payor, config.clone())?;
    let height = claims.iter().map(|c| c.height).min().unwrap_or(0);
    for c in claims {
        clause.on_claim_confirmed(ConfirmedClaim { height, ..c })?;
    }
    let mut h = height + config.window;
    clause.close_window(h, selector)?;
    while let ClauseState::Challenge(ch) = clause.state() {
        let round = ch.round;
        let selected = ch.selected.clone();
        let respond_by = ch.respond_by;
        for a in &selected {
            if let Some(action) = respond(a, round) {
                clause.respond(a, round, action, config.challenge_fee)?;
            }
        }
        h = respond_by;
        clause.resolve_round(h, selector)?;
    }
    let (s, r) = clause.settlement().expect("loop ends settled");
    Ok((s.clone(), r))
}

/// Two-claimant challenge with a single response from the selected agent.
pub fn run_challenge_two(
    config: &ClauseConfig,
    claims: [ConfirmedClaim; 2],
    selector: &mut dyn Selector,
    respond: impl FnMut(&Address, u32) -> Option<ChallengeAction>,
) -> Result<(Settlement, u32), ClauseError> {
    run_challenge(config, claims.to_vec(), selector, respond)
}

/// Multi-claimant challenge for pools of three or more.
pub fn run_challenge_multi(
    config: &ClauseConfig,
    claims: Vec<ConfirmedClaim>,
    selector: &mut dyn Selector,
    respond: impl FnMut(&Address, u32) -> Option<ChallengeAction>,
) -> Result<(Settlement, u32), ClauseError> {
    if claims.len() < 3 {
        return Err(ClauseError::InvalidConfig(
            "multi-claimant challenge needs at least three claims".into(),
        ));
    }
    run_challenge(config, claims, selector, respond)
}

/// Chain adapter for a contract carrying the clause.
pub struct ClauseContract {
    clause: Clause,
    signaled: bool,
}

impl ClauseContract {
    pub fn new(clause: Clause, signaled: bool) -> Self {
        ClauseContract { clause, signaled }
    }

    pub fn clause(&self) -> &Clause {
        &self.clause
    }
}

impl Contract for ClauseContract {
    fn id(&self) -> ContractId {
        self.clause.id
    }

    fn payor(&self) -> &Address {
        &self.clause.payor
    }

    fn payment(&self) -> Amount {
        self.clause.config.payment
    }

    fn status(&self) -> ContractStatus {
        ContractStatus {
            id: self.clause.id,
            has_clause: true,
            signaled: self.signaled,
            challenge_fee: self.clause.config.challenge_fee,
            hardcoded_responses: self.clause.config.hardcoded_responses,
            phase: self.clause.phase(),
        }
    }

    fn on_block(&mut self, block: &Block, rng: &mut ChaCha8Rng) -> Vec<ContractEvent> {
        let id = self.clause.id;
        let mut events = Vec::new();
        for (position, tx) in block.transactions.iter().enumerate() {
            if tx.body.contract() != id {
                continue;
            }
            match &tx.body {
                TxBody::Claim(c) => {
                    if !c.evidence.valid {
                        events.push(ContractEvent::ClaimRejected {
                            payee: c.payee.clone(),
                            tx: tx.id,
                            reason: "invalid evidence".into(),
                        });
                        continue;
                    }
                    let claim = ConfirmedClaim {
                        payee: c.payee.clone(),
                        height: block.height,
                        position,
                        broadcast_time: tx.broadcast_time,
                        precommit: c.precommit,
                    };
                    match self.clause.on_claim_confirmed(claim) {
                        Ok(extra) => {
                            events.push(ContractEvent::ClaimAccepted {
                                payee: c.payee.clone(),
                                tx: tx.id,
                            });
                            events.extend(extra);
                        }
                        Err(e) => events.push(ContractEvent::ClaimRejected {
                            payee: c.payee.clone(),
                            tx: tx.id,
                            reason: e.to_string(),
                        }),
                    }
                }
                TxBody::Response(r) => match self.clause.respond(&tx.sender, r.round, r.action, tx.fee) {
                    Ok(ev) => events.push(ev),
                    Err(e) => events.push(ContractEvent::ResponseRejected {
                        from: tx.sender.clone(),
                        tx: tx.id,
                        reason: e.to_string(),
                    }),
                },
            }
        }
        let policy = self.clause.config.selection_policy;
        let mut selector = PolicySelector { policy, rng };
        events.extend(self.clause.advance(block.height, &mut selector));
        if self.clause.settlement().is_some() && !self.clause.paid_out {
            self.clause.settle().expect("settled once");
        }
        events
    }
}

/// A contract without the clause: the first valid claim confirmed is paid.
pub struct PlainContract {
    id: ContractId,
    payor: Address,
    payment: Amount,
    paid: Option<Settlement>,
}

impl PlainContract {
    pub fn new(id: ContractId, payor: Address, payment: Amount) -> Self {
        PlainContract {
            id,
            payor,
            payment,
            paid: None,
        }
    }
}

impl Contract for PlainContract {
    fn id(&self) -> ContractId {
        self.id
    }

    fn payor(&self) -> &Address {
        &self.payor
    }

    fn payment(&self) -> Amount {
        self.payment
    }

    fn status(&self) -> ContractStatus {
        ContractStatus {
            id: self.id,
            has_clause: false,
            signaled: false,
            challenge_fee: 0,
            hardcoded_responses: false,
            phase: match &self.paid {
                Some(s) => Phase::Settled { settlement: s.clone() },
                None => Phase::Idle,
            },
        }
    }

    fn on_block(&mut self, block: &Block, _rng: &mut ChaCha8Rng) -> Vec<ContractEvent> {
        let mut events = Vec::new();
        for tx in &block.transactions {
            let Some(c) = tx.body.as_claim().filter(|c| c.contract == self.id) else {
                continue;
            };
            let reason = if self.paid.is_some() {
                Some("already paid")
            } else if !c.evidence.valid {
                Some("invalid evidence")
            } else if c.payee == self.payor {
                Some("payor may not claim")
            } else {
                None
            };
            match reason {
                Some(r) => events.push(ContractEvent::ClaimRejected {
                    payee: c.payee.clone(),
                    tx: tx.id,
                    reason: r.into(),
                }),
                None => {
                    events.push(ContractEvent::ClaimAccepted {
                        payee: c.payee.clone(),
                        tx: tx.id,
                    });
                    let settlement = Settlement::Paid(c.payee.clone());
                    self.paid = Some(settlement.clone());
                    events.push(ContractEvent::Settled {
                        settlement,
                        amount: self.payment,
                        rounds: 0,
                    });
                }
            }
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn clause(window: u64) -> Clause {
        Clause::new(ContractId(0), Address::new("payor"), ClauseConfig::new(100, window)).unwrap()
    }

    fn first(_: &[ConfirmedClaim], k: usize, _: u32) -> Vec<usize> {
        (0..k).collect()
    }

    #[test]
    fn window_end_counts_from_first_claim() {
        let mut c = clause(4);
        c.on_claim_confirmed(ConfirmedClaim::new("x", 10, 0)).unwrap();
        assert!(matches!(c.state(), ClauseState::Collecting { window_end: 14, .. }));
        c.on_claim_confirmed(ConfirmedClaim::new("y", 12, 0)).unwrap();
        c.on_claim_confirmed(ConfirmedClaim::new("z", 14, 0)).unwrap();
        let err = c.on_claim_confirmed(ConfirmedClaim::new("w", 15, 0)).unwrap_err();
        assert!(matches!(err, ClauseError::WindowClosed { height: 15, .. }));
        match c.state() {
            ClauseState::Collecting { claims, .. } => assert_eq!(claims.len(), 3),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn duplicate_and_payor_claims_rejected() {
        let mut c = clause(4);
        c.on_claim_confirmed(ConfirmedClaim::new("x", 1, 0)).unwrap();
        assert!(matches!(
            c.on_claim_confirmed(ConfirmedClaim::new("x", 2, 0)),
            Err(ClauseError::DuplicateAddress(_))
        ));
        assert!(matches!(
            c.on_claim_confirmed(ConfirmedClaim::new("payor", 2, 0)),
            Err(ClauseError::PayorClaim(_))
        ));
    }

    #[test]
    fn single_claim_paid_at_window_close() {
        let mut c = clause(4);
        c.on_claim_confirmed(ConfirmedClaim::new("x", 1, 0)).unwrap();
        assert!(matches!(c.close_window(4, &mut first), Err(ClauseError::WindowOpen(5))));
        c.close_window(5, &mut first).unwrap();
        assert_eq!(c.settlement().unwrap().0, &Settlement::Paid("x".into()));
    }

    #[test]
    fn pool_of_five_opens_multi_challenge() {
        let mut c = clause(1);
        for a in ["a", "b", "c", "d", "e"] {
            c.on_claim_confirmed(ConfirmedClaim::new(a, 1, 0)).unwrap();
        }
        c.close_window(2, &mut first).unwrap();
        match c.state() {
            ClauseState::Challenge(ch) => {
                assert_eq!(ch.pool.len(), 5);
                assert_eq!(ch.selected.len(), 2);
            }
            s => panic!("{s:?}"),
        }
    }

    fn pair() -> [ConfirmedClaim; 2] {
        [ConfirmedClaim::new("legit", 1, 10), ConfirmedClaim::new("bot", 1, 12)]
    }

    #[test]
    fn two_claimants_assert_burns_withdraw_pays_other() {
        let cfg = ClauseConfig::new(100, 2);
        let mut pick =
            |p: &[ConfirmedClaim], _: usize, _: u32| vec![p.iter().position(|c| c.payee.as_str() == "legit").unwrap()];
        let (s, r) = run_challenge_two(&cfg, pair(), &mut pick, |_, _| Some(ChallengeAction::Assert)).unwrap();
        assert_eq!((s, r), (Settlement::Burned(Address::null()), 1));

        let mut pick =
            |p: &[ConfirmedClaim], _: usize, _: u32| vec![p.iter().position(|c| c.payee.as_str() == "bot").unwrap()];
        let (s, _) = run_challenge_two(&cfg, pair(), &mut pick, |_, _| None).unwrap();
        assert_eq!(s, Settlement::Paid("legit".into()));
    }

    #[test]
    fn latest_timestamp_selects_most_recent() {
        let mut r = rng::substream(0, rng::SELECTION, 0);
        let mut sel = PolicySelector {
            policy: SelectionPolicy::LatestTimestamp,
            rng: &mut r,
        };
        let pool = pair();
        assert_eq!(sel.select(&pool, 1, 1), vec![1]);
    }

    #[test]
    fn charity_burn_destination() {
        let mut cfg = ClauseConfig::new(100, 2);
        cfg.burn_destination = BurnDestination::Charity("fund".into());
        let (s, _) = run_challenge_two(&cfg, pair(), &mut first, |_, _| Some(ChallengeAction::Assert)).unwrap();
        assert_eq!(s, Settlement::Burned("fund".into()));
        cfg.burn_destination = BurnDestination::Charity("payor".into());
        assert!(Clause::new(ContractId(0), "payor".into(), cfg).is_err());
    }

    #[test]
    fn pool_of_four_halves_down_to_one() {
        let cfg = ClauseConfig::new(100, 1);
        let claims: Vec<ConfirmedClaim> = ["a", "b", "c", "d"]
            .iter()
            .map(|a| ConfirmedClaim::new(*a, 1, 0))
            .collect();
        let mut sizes = Vec::new();
        let mut sel = |p: &[ConfirmedClaim], k: usize, _: u32| {
            sizes.push((p.len(), k));
            (0..k).collect()
        };
        let (s, r) = run_challenge_multi(&cfg, claims, &mut sel, |_, _| None).unwrap();
        assert_eq!(sizes, vec![(4, 2), (2, 1), (1, 1)]);
        assert_eq!(r, 3);
        assert!(s.is_burn());
    }

    #[test]
    fn n3_legitimate_selected_first_burns_in_round_one() {
        let cfg = ClauseConfig::new(100, 1);
        let claims: Vec<ConfirmedClaim> = ["legit", "b", "c"]
            .iter()
            .map(|a| ConfirmedClaim::new(*a, 1, 0))
            .collect();
        let (s, r) = run_challenge_multi(&cfg, claims, &mut first, |a, _| {
            (a.as_str() == "legit").then_some(ChallengeAction::Assert)
        })
        .unwrap();
        assert!(s.is_burn());
        assert_eq!(r, 1);
    }

    #[test]
    fn response_validation() {
        let mut cfg = ClauseConfig::new(100, 1);
        cfg.challenge_fee = 2;
        let mut c = Clause::new(ContractId(0), "payor".into(), cfg).unwrap();
        c.on_claim_confirmed(ConfirmedClaim::new("a", 1, 0)).unwrap();
        c.on_claim_confirmed(ConfirmedClaim::new("b", 1, 0)).unwrap();
        c.close_window(2, &mut first).unwrap();
        let a = Address::new("a");
        let b = Address::new("b");
        assert!(matches!(
            c.respond(&b, 1, ChallengeAction::Assert, 2),
            Err(ClauseError::UnsolicitedResponse(_))
        ));
        assert!(matches!(
            c.respond(&a, 2, ChallengeAction::Assert, 2),
            Err(ClauseError::StaleRound { .. })
        ));
        assert!(matches!(
            c.respond(&a, 1, ChallengeAction::Assert, 1),
            Err(ClauseError::InsufficientFee { .. })
        ));
        c.respond(&a, 1, ChallengeAction::Assert, 2).unwrap();
        assert!(matches!(
            c.respond(&a, 1, ChallengeAction::Withdraw, 2),
            Err(ClauseError::DuplicateResponse(_))
        ));
        assert!(matches!(c.resolve_round(2, &mut first), Err(ClauseError::RoundOpen(3))));
        c.resolve_round(3, &mut first).unwrap();
        assert!(c.settlement().unwrap().0.is_burn());
    }

    #[test]
    fn settle_moves_payment_once() {
        let mut c = clause(1);
        assert_eq!(c.settle(), Err(ClauseError::NotSettled));
        c.on_claim_confirmed(ConfirmedClaim::new("x", 1, 0)).unwrap();
        c.close_window(2, &mut first).unwrap();
        let t = c.settle().unwrap();
        assert_eq!(t.to, Address::new("x"));
        assert_eq!(t.from, Address::escrow(ContractId(0)));
        assert_eq!(t.amount, 100);
        assert_eq!(c.settle(), Err(ClauseError::AlreadySettled));
    }

    #[test]
    fn round_bound_values() {
        assert_eq!(round_bound(2), 2);
        assert_eq!(round_bound(3), 3);
        assert_eq!(round_bound(4), 3);
        assert_eq!(round_bound(5), 4);
        assert_eq!(round_bound(21), 6);
    }

    #[test]
    fn hardcoded_matches_interactive() {
        let names = ["a", "b", "c", "d", "e", "f"];
        for seed in 0..50u64 {
            let response = |a: &Address| match a.as_str() {
                "c" => ChallengeAction::Assert,
                _ => ChallengeAction::Withdraw,
            };
            let claims: Vec<ConfirmedClaim> = names
                .iter()
                .map(|n| ConfirmedClaim::new(*n, 1, 0).with_precommit(response(&Address::new(*n))))
                .collect();

            let mut cfg = ClauseConfig::new(100, 1);
            let mut r1 = rng::substream(seed, rng::SELECTION, 0);
            let interactive = run_challenge(
                &cfg,
                claims.clone(),
                &mut PolicySelector {
                    policy: SelectionPolicy::UniformRandom,
                    rng: &mut r1,
                },
                |a, _| Some(response(a)),
            )
            .unwrap();

            cfg.hardcoded_responses = true;
            let mut c = Clause::new(ContractId(0), "payor".into(), cfg).unwrap();
            for cl in claims {
                c.on_claim_confirmed(cl).unwrap();
            }
            let mut r2 = rng::substream(seed, rng::SELECTION, 0);
            c.close_window(
                2,
                &mut PolicySelector {
                    policy: SelectionPolicy::UniformRandom,
                    rng: &mut r2,
                },
            )
            .unwrap();
            let (s, r) = c.settlement().unwrap();
            assert_eq!((s.clone(), r), interactive);
        }
    }
}
