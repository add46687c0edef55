use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ChainError;
use crate::types::{Address, Amount, ChallengeAction, ContractId, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

/// Opaque evidence of performance. Copies keep the validity of the original.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub token: u64,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimMessage {
    pub contract: ContractId,
    pub payee: Address,
    pub evidence: Evidence,
    /// Challenge response committed with the claim, for clauses that use
    /// hard-coded responses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precommit: Option<ChallengeAction>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseMessage {
    pub contract: ContractId,
    pub round: u32,
    pub action: ChallengeAction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TxBody {
    Claim(ClaimMessage),
    Response(ResponseMessage),
}

impl TxBody {
    pub fn contract(&self) -> ContractId {
        match self {
            TxBody::Claim(c) => c.contract,
            TxBody::Response(r) => r.contract,
        }
    }

    pub fn as_claim(&self) -> Option<&ClaimMessage> {
        match self {
            TxBody::Claim(c) => Some(c),
            _ => None,
        }
    }
}

/// What an agent asks the network to carry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxRequest {
    pub sender: Address,
    pub fee: Amount,
    pub body: TxBody,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub sender: Address,
    pub fee: Amount,
    pub broadcast_time: Tick,
    /// Random priority used only by the random tie-break.
    pub nonce: u64,
    pub body: TxBody,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Earlier broadcast first, then lower address hash.
    #[default]
    TimeThenAddress,
    /// Uniformly random order among equal fees.
    Random,
}

/// Ordering key of a transaction inside a block: smaller sorts first.
pub(crate) fn priority_key(tx: &Transaction, tie: TieBreak) -> (std::cmp::Reverse<Amount>, u64, u64, TxId) {
    match tie {
        TieBreak::TimeThenAddress => (std::cmp::Reverse(tx.fee), tx.broadcast_time, tx.sender.hash64(), tx.id),
        TieBreak::Random => (std::cmp::Reverse(tx.fee), tx.nonce, 0, tx.id),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum DedupKey<'a> {
    Claim(ContractId, &'a Address),
    Response(ContractId, u32, &'a Address),
}

fn dedup_key(tx: &TxRequest) -> DedupKey<'_> {
    match &tx.body {
        TxBody::Claim(c) => DedupKey::Claim(c.contract, &c.payee),
        TxBody::Response(r) => DedupKey::Response(r.contract, r.round, &tx.sender),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum OwnedKey {
    Claim(ContractId, Address),
    Response(ContractId, u32, Address),
}

impl From<DedupKey<'_>> for OwnedKey {
    fn from(k: DedupKey<'_>) -> Self {
        match k {
            DedupKey::Claim(c, a) => OwnedKey::Claim(c, a.clone()),
            DedupKey::Response(c, r, a) => OwnedKey::Response(c, r, a.clone()),
        }
    }
}

/// Publicly observable pool of broadcast, unconfirmed transactions.
#[derive(Clone, Debug, Default)]
pub struct Mempool {
    pending: BTreeMap<TxId, Transaction>,
    seen: BTreeSet<OwnedKey>,
    next_id: u64,
}

impl Mempool {
    pub(crate) fn admit(&mut self, req: TxRequest, at: Tick, rng: &mut ChaCha8Rng) -> Result<TxId, ChainError> {
        let key: OwnedKey = dedup_key(&req).into();
        if self.seen.contains(&key) {
            return Err(match &req.body {
                TxBody::Claim(c) => ChainError::DuplicateClaim {
                    payee: c.payee.clone(),
                    contract: c.contract,
                },
                TxBody::Response(r) => ChainError::DuplicateResponse {
                    sender: req.sender.clone(),
                    contract: r.contract,
                    round: r.round,
                },
            });
        }
        let id = TxId(self.next_id);
        self.next_id += 1;
        self.seen.insert(key);
        let tx = Transaction {
            id,
            sender: req.sender,
            fee: req.fee,
            broadcast_time: at,
            nonce: rng.gen(),
            body: req.body,
        };
        self.pending.insert(id, tx);
        Ok(id)
    }

    /// Inserts an already-built transaction, as recorded in a trace.
    pub(crate) fn restore(&mut self, tx: Transaction) -> Result<(), ChainError> {
        let req = TxRequest {
            sender: tx.sender.clone(),
            fee: tx.fee,
            body: tx.body.clone(),
        };
        let key: OwnedKey = dedup_key(&req).into();
        if !self.seen.insert(key) || self.pending.contains_key(&tx.id) {
            return Err(ChainError::ReplayMismatch(format!(
                "transaction {:?} restored twice",
                tx.id
            )));
        }
        self.next_id = self.next_id.max(tx.id.0 + 1);
        self.pending.insert(tx.id, tx);
        Ok(())
    }

    pub fn pending(&self) -> impl Iterator<Item = &Transaction> {
        self.pending.values()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn get(&self, id: TxId) -> Option<&Transaction> {
        self.pending.get(&id)
    }

    /// Removes and returns up to `capacity` transactions in block order.
    pub(crate) fn take_best(&mut self, capacity: usize, tie: TieBreak) -> Vec<Transaction> {
        let mut all: Vec<&Transaction> = self.pending.values().collect();
        all.sort_by_key(|tx| priority_key(tx, tie));
        let chosen: Vec<TxId> = all.into_iter().take(capacity).map(|t| t.id).collect();
        chosen
            .into_iter()
            .map(|id| self.pending.remove(&id).expect("chosen from pending"))
            .collect()
    }
}
