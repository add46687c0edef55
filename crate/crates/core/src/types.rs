//! Shared identifiers used by the chain simulator, the clause state machine and
//! the agent strategies.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Token amount. All ledger arithmetic is integral.
pub type Amount = u64;

/// Discrete simulation time.
pub type Tick = u64;

/// Opaque wallet identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(pub String);

impl Address {
    pub fn new(s: impl Into<String>) -> Self {
        Address(s.into())
    }

    /// The conventional burn address.
    pub fn null() -> Self {
        Address("0x0".into())
    }

    /// Escrow account holding the payment of a contract.
    pub fn escrow(contract: ContractId) -> Self {
        Address(format!("escrow:{}", contract.0))
    }

    /// First eight bytes of the SHA-256 digest, used as the last-resort
    /// ordering key inside a block.
    pub fn hash64(&self) -> u64 {
        let digest = Sha256::digest(self.0.as_bytes());
        let mut buf = [0u8; 8];
        buf.copy_from_slice(&digest[..8]);
        u64::from_be_bytes(buf)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Address {
    fn from(s: &str) -> Self {
        Address(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractId(pub u32);

/// How a contract's escrow was finally released.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Settlement {
    Paid(Address),
    Burned(Address),
}

impl Settlement {
    pub fn destination(&self) -> &Address {
        match self {
            Settlement::Paid(a) | Settlement::Burned(a) => a,
        }
    }

    pub fn is_burn(&self) -> bool {
        matches!(self, Settlement::Burned(_))
    }
}

/// Response of a solicited claimant during a challenge round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeAction {
    Withdraw,
    Assert,
}
