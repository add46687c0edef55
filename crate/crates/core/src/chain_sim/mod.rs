//! Discrete-time simulation of a public mempool and fee-priority block building.
//!
//! Each tick, registered actors observe the mempool (subject to an observation
//! latency) and may broadcast transactions. At every block boundary the
//! pending transactions are ordered by fee, highest first, and the best
//! `block_capacity` are confirmed. Contracts then see each confirmed block.
//! Everything that happens is recorded in a replayable event trace.

mod ledger;
mod mempool;

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ledger::Ledger;
pub use mempool::{ClaimMessage, Evidence, Mempool, ResponseMessage, TieBreak, Transaction, TxBody, TxId, TxRequest};

use crate::rng;
use crate::types::{Address, Amount, ChallengeAction, ContractId, Settlement, Tick};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("duplicate claim for {payee} on contract {contract:?}")]
    DuplicateClaim { payee: Address, contract: ContractId },
    #[error("duplicate response from {sender} on contract {contract:?} round {round}")]
    DuplicateResponse {
        sender: Address,
        contract: ContractId,
        round: u32,
    },
    #[error("tick {at} is before current time {now}")]
    TimeTravel { at: Tick, now: Tick },
    #[error("tick {0} is not a block boundary")]
    NotBlockBoundary(Tick),
    #[error("invalid chain config: {0}")]
    InvalidConfig(String),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("contract {contract:?} still unsettled at horizon {horizon}")]
    HorizonExceeded { contract: ContractId, horizon: Tick },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

fn default_interval() -> Tick {
    4
}
fn default_capacity() -> usize {
    16
}
fn default_latency() -> Tick {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Ticks between blocks; blocks are built at positive multiples.
    #[serde(default = "default_interval")]
    pub block_interval: Tick,
    #[serde(default = "default_capacity")]
    pub block_capacity: usize,
    /// Ticks before a broadcast becomes visible to other agents.
    #[serde(default = "default_latency")]
    pub observation_latency: Tick,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            block_interval: default_interval(),
            block_capacity: default_capacity(),
            observation_latency: default_latency(),
            tie_break: TieBreak::default(),
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.block_interval < 1 {
            return Err(ChainError::InvalidConfig("block_interval must be at least 1".into()));
        }
        if self.block_capacity < 1 {
            return Err(ChainError::InvalidConfig("block_capacity must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_block_boundary(&self, at: Tick) -> bool {
        at > 0 && at.is_multiple_of(self.block_interval)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub build_time: Tick,
    pub transactions: Vec<Transaction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx: TxId,
    pub visible_at: Tick,
}

/// Mempool plus confirmed blocks.
#[derive(Clone, Debug)]
pub struct Chain {
    config: ChainConfig,
    mempool: Mempool,
    blocks: Vec<Block>,
    now: Tick,
    rng: ChaCha8Rng,
}

impl Chain {
    pub fn new(config: ChainConfig) -> Result<Self, ChainError> {
        config.validate()?;
        let rng = rng::substream(config.seed, rng::CHAIN, 0);
        Ok(Chain {
            config,
            mempool: Mempool::default(),
            blocks: Vec::new(),
            now: 0,
            rng,
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn broadcast(&mut self, req: TxRequest, at: Tick) -> Result<Receipt, ChainError> {
        if at < self.now {
            return Err(ChainError::TimeTravel { at, now: self.now });
        }
        self.now = at;
        let tx = self.mempool.admit(req, at, &mut self.rng)?;
        Ok(Receipt {
            tx,
            visible_at: at + self.config.observation_latency,
        })
    }

    /// Confirms up to `block_capacity` pending transactions in fee order.
    pub fn build_block(&mut self, at: Tick) -> Result<Block, ChainError> {
        if !self.config.is_block_boundary(at) {
            return Err(ChainError::NotBlockBoundary(at));
        }
        if at < self.now || self.blocks.last().is_some_and(|b| b.build_time >= at) {
            return Err(ChainError::TimeTravel { at, now: self.now });
        }
        self.now = at;
        let transactions = self
            .mempool
            .take_best(self.config.block_capacity, self.config.tie_break);
        let block = Block {
            height: self.height() + 1,
            build_time: at,
            transactions,
        };
        self.blocks.push(block.clone());
        Ok(block)
    }

    /// Pending transactions visible at `at` to an agent controlling `observer`.
    pub fn observe_mempool(&self, observer: &[Address], at: Tick) -> Vec<&Transaction> {
        let latency = self.config.observation_latency;
        self.mempool
            .pending()
            .filter(|tx| tx.broadcast_time + latency <= at || observer.contains(&tx.sender))
            .collect()
    }

    pub fn pending_ids(&self) -> Vec<TxId> {
        self.mempool.pending().map(|t| t.id).collect()
    }

    /// Rebuilds a chain from the broadcast and block events of a trace,
    /// checking that every recorded block is reproduced.
    pub fn replay(config: ChainConfig, events: &[Event]) -> Result<Chain, ChainError> {
        let mut chain = Chain::new(config)?;
        for ev in events {
            match ev {
                Event::Broadcast { tick, tx, .. } => {
                    chain.now = *tick;
                    chain.mempool.restore(tx.clone())?;
                }
                Event::Block { tick, height, txs, .. } => {
                    let block = chain.build_block(*tick)?;
                    let ids: Vec<TxId> = block.transactions.iter().map(|t| t.id).collect();
                    if block.height != *height || &ids != txs {
                        return Err(ChainError::ReplayMismatch(format!(
                            "block {height} expected {txs:?}, rebuilt {ids:?}"
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(chain)
    }
}

/// Phase of a contract as seen by agents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Collecting {
        window_end: u64,
    },
    Challenge {
        round: u32,
        selected: Vec<Address>,
        respond_by: u64,
    },
    Settled {
        settlement: Settlement,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractStatus {
    pub id: ContractId,
    pub has_clause: bool,
    /// The contract publicly advertises its settlement clause.
    pub signaled: bool,
    pub challenge_fee: Amount,
    pub hardcoded_responses: bool,
    pub phase: Phase,
}

impl ContractStatus {
    pub fn accepts_claims(&self) -> bool {
        matches!(self.phase, Phase::Idle | Phase::Collecting { .. })
    }

    pub fn is_pending(&self) -> bool {
        matches!(self.phase, Phase::Collecting { .. } | Phase::Challenge { .. })
    }
}

/// What a contract reports while processing a block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContractEvent {
    ClaimAccepted {
        payee: Address,
        tx: TxId,
    },
    ClaimRejected {
        payee: Address,
        tx: TxId,
        reason: String,
    },
    WindowOpened {
        window_end: u64,
    },
    ChallengeOpened {
        round: u32,
        pool: Vec<Address>,
        selected: Vec<Address>,
        respond_by: u64,
    },
    ResponseAccepted {
        from: Address,
        round: u32,
        action: ChallengeAction,
    },
    ResponseRejected {
        from: Address,
        tx: TxId,
        reason: String,
    },
    RoundResolved {
        round: u32,
        withdrawn: Vec<Address>,
        asserted: Vec<Address>,
    },
    Settled {
        settlement: Settlement,
        amount: Amount,
        rounds: u32,
    },
}

pub trait Contract: Send {
    fn id(&self) -> ContractId;
    fn payor(&self) -> &Address;
    fn payment(&self) -> Amount;
    fn status(&self) -> ContractStatus;
    fn on_block(&mut self, block: &Block, rng: &mut ChaCha8Rng) -> Vec<ContractEvent>;
}

/// What the harness needs to know about an actor to compute payoffs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorSummary {
    pub name: String,
    pub strategy: String,
    pub addresses: Vec<Address>,
    pub legitimate: bool,
    pub performed: bool,
    pub cost_incurred: Amount,
    /// Disutility suffered if the payment goes to another claimant.
    pub theta: Amount,
}

pub trait Actor: Send {
    fn summary(&self) -> ActorSummary;
    fn act(&mut self, view: &ChainView<'_>, rng: &mut ChaCha8Rng) -> Vec<TxRequest>;
}

/// Read-only view handed to actors.
pub struct ChainView<'a> {
    pub tick: Tick,
    chain: &'a Chain,
    contracts: &'a [ContractStatus],
}

impl<'a> ChainView<'a> {
    pub fn observe(&self, observer: &[Address]) -> Vec<&'a Transaction> {
        self.chain.observe_mempool(observer, self.tick)
    }

    pub fn contract(&self, id: ContractId) -> Option<&'a ContractStatus> {
        self.contracts.iter().find(|c| c.id == id)
    }

    pub fn contracts(&self) -> &'a [ContractStatus] {
        self.contracts
    }

    pub fn blocks(&self) -> &'a [Block] {
        self.chain.blocks()
    }

    pub fn config(&self) -> &'a ChainConfig {
        self.chain.config()
    }
}

/// One line of the trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Broadcast {
        tick: Tick,
        tx: Transaction,
        visible_at: Tick,
    },
    Rejected {
        tick: Tick,
        sender: Address,
        reason: String,
    },
    Block {
        tick: Tick,
        height: u64,
        txs: Vec<TxId>,
        fees: Amount,
    },
    Contract {
        tick: Tick,
        contract: ContractId,
        detail: ContractEvent,
    },
    Settlement {
        tick: Tick,
        contract: ContractId,
        settlement: Settlement,
        amount: Amount,
        rounds: u32,
    },
}

pub fn miner_address() -> Address {
    Address::new("miner")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementRecord {
    pub contract: ContractId,
    pub settlement: Settlement,
    pub tick: Tick,
    pub rounds: u32,
}

/// Event loop tying chain, contracts and actors together.
pub struct Simulation {
    chain: Chain,
    ledger: Ledger,
    contracts: Vec<Box<dyn Contract>>,
    actors: Vec<Box<dyn Actor>>,
    trace: Vec<Event>,
    settlements: BTreeMap<ContractId, SettlementRecord>,
    selection_rng: ChaCha8Rng,
    agent_rng: ChaCha8Rng,
    next_tick: Tick,
}

impl Simulation {
    pub fn new(config: ChainConfig) -> Result<Self, ChainError> {
        let seed = config.seed;
        Ok(Simulation {
            chain: Chain::new(config)?,
            ledger: Ledger::default(),
            contracts: Vec::new(),
            actors: Vec::new(),
            trace: Vec::new(),
            settlements: BTreeMap::new(),
            selection_rng: rng::substream(seed, rng::SELECTION, 0),
            agent_rng: rng::substream(seed, rng::AGENTS, 0),
            next_tick: 0,
        })
    }

    /// Registers a contract and moves its payment from the payor into escrow.
    pub fn add_contract(&mut self, contract: Box<dyn Contract>) {
        self.ledger
            .transfer(contract.payor(), &Address::escrow(contract.id()), contract.payment());
        self.contracts.push(contract);
    }

    pub fn add_actor(&mut self, actor: Box<dyn Actor>) {
        self.actors.push(actor);
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn trace(&self) -> &[Event] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<Event> {
        self.trace
    }

    pub fn actors(&self) -> impl Iterator<Item = ActorSummary> + '_ {
        self.actors.iter().map(|a| a.summary())
    }

    pub fn contract_statuses(&self) -> Vec<ContractStatus> {
        self.contracts.iter().map(|c| c.status()).collect()
    }

    pub fn settlements(&self) -> &BTreeMap<ContractId, SettlementRecord> {
        &self.settlements
    }

    fn quiescent(&self, statuses: &[ContractStatus]) -> bool {
        !statuses.is_empty()
            && statuses.iter().all(|s| matches!(s.phase, Phase::Settled { .. }))
            && self.chain.mempool().is_empty()
    }

    /// Advances through tick `horizon` (inclusive), stopping early once every
    /// contract has settled and the mempool is empty.
    pub fn run_until(&mut self, horizon: Tick) -> Result<&[Event], SimError> {
        while self.next_tick <= horizon {
            let tick = self.next_tick;
            self.next_tick += 1;
            self.step(tick)?;
            if self.quiescent(&self.contract_statuses()) {
                break;
            }
        }
        if self.next_tick > horizon {
            if let Some(s) = self.contract_statuses().into_iter().find(|s| s.is_pending()) {
                return Err(SimError::HorizonExceeded {
                    contract: s.id,
                    horizon,
                });
            }
        }
        Ok(&self.trace)
    }

    fn step(&mut self, tick: Tick) -> Result<(), SimError> {
        for i in 0..self.actors.len() {
            let statuses = self.contract_statuses();
            let requests = {
                let view = ChainView {
                    tick,
                    chain: &self.chain,
                    contracts: &statuses,
                };
                self.actors[i].act(&view, &mut self.agent_rng)
            };
            for req in requests {
                let sender = req.sender.clone();
                match self.chain.broadcast(req, tick) {
                    Ok(receipt) => {
                        let tx = self.chain.mempool().get(receipt.tx).expect("just admitted").clone();
                        self.trace.push(Event::Broadcast {
                            tick,
                            tx,
                            visible_at: receipt.visible_at,
                        });
                    }
                    Err(e @ (ChainError::DuplicateClaim { .. } | ChainError::DuplicateResponse { .. })) => {
                        self.trace.push(Event::Rejected {
                            tick,
                            sender,
                            reason: e.to_string(),
                        });
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }

        if self.chain.config().is_block_boundary(tick) {
            let block = self.chain.build_block(tick)?;
            let miner = miner_address();
            let mut fees = 0;
            for tx in &block.transactions {
                self.ledger.transfer(&tx.sender, &miner, tx.fee);
                fees += tx.fee;
            }
            self.trace.push(Event::Block {
                tick,
                height: block.height,
                txs: block.transactions.iter().map(|t| t.id).collect(),
                fees,
            });
            for contract in self.contracts.iter_mut() {
                let id = contract.id();
                for ev in contract.on_block(&block, &mut self.selection_rng) {
                    if let ContractEvent::Settled {
                        settlement,
                        amount,
                        rounds,
                    } = &ev
                    {
                        self.ledger
                            .transfer(&Address::escrow(id), settlement.destination(), *amount);
                        self.settlements.insert(
                            id,
                            SettlementRecord {
                                contract: id,
                                settlement: settlement.clone(),
                                tick,
                                rounds: *rounds,
                            },
                        );
                        self.trace.push(Event::Settlement {
                            tick,
                            contract: id,
                            settlement: settlement.clone(),
                            amount: *amount,
                            rounds: *rounds,
                        });
                    } else {
                        self.trace.push(Event::Contract {
                            tick,
                            contract: id,
                            detail: ev,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Serializes events as JSON lines.
pub fn trace_to_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

pub fn trace_from_jsonl(s: &str) -> Result<Vec<Event>, serde_json::Error> {
    s.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
