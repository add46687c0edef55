use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::types::Amount;

/// Player index in a game tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

// Map keys arrive as strings when buffered inside tagged nodes, so both
// integers and decimal strings are accepted.
impl<'de> Deserialize<'de> for AgentId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = AgentId;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an agent index")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<AgentId, E> {
                u32::try_from(v).map(AgentId).map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<AgentId, E> {
                u32::try_from(v).map(AgentId).map_err(E::custom)
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<AgentId, E> {
                v.parse().map(AgentId).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent{}", self.0)
    }
}

/// Who receives the contested object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    Agent(AgentId),
    /// A third party, or equivalently burned tokens.
    ThirdParty,
    /// Nothing was triggered; the object stays with its original holder.
    Unpaid,
}

/// An allocation together with the amounts charged to each agent.
///
/// Zero charges are never stored, so two outcomes compare equal exactly when
/// they allocate to the same target and charge every agent the same amount.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Outcome {
    allocation: Allocation,
    fines: BTreeMap<AgentId, Amount>,
}

impl Outcome {
    pub fn new(allocation: Allocation) -> Self {
        Outcome {
            allocation,
            fines: BTreeMap::new(),
        }
    }

    pub fn to_agent(agent: AgentId) -> Self {
        Outcome::new(Allocation::Agent(agent))
    }

    pub fn third_party() -> Self {
        Outcome::new(Allocation::ThirdParty)
    }

    /// Adds `amount` to the charge already levied on `agent`.
    pub fn with_fine(mut self, agent: AgentId, amount: Amount) -> Self {
        self.add_fine(agent, amount);
        self
    }

    pub fn add_fine(&mut self, agent: AgentId, amount: Amount) {
        if amount == 0 {
            return;
        }
        *self.fines.entry(agent).or_insert(0) += amount;
    }

    pub fn allocation(&self) -> Allocation {
        self.allocation
    }

    pub fn fines(&self) -> &BTreeMap<AgentId, Amount> {
        &self.fines
    }

    pub fn fine_on(&self, agent: AgentId) -> Amount {
        self.fines.get(&agent).copied().unwrap_or(0)
    }

    pub fn total_fines(&self) -> Amount {
        self.fines.values().sum()
    }

    pub fn is_fine_free(&self) -> bool {
        self.fines.is_empty()
    }

    /// True when `other` equals `self` except that `agent` is charged strictly more.
    pub fn is_fined_variant_for(&self, other: &Outcome, agent: AgentId) -> bool {
        if self.allocation != other.allocation || other.fine_on(agent) <= self.fine_on(agent) {
            return false;
        }
        let strip = |o: &Outcome| {
            o.fines
                .iter()
                .filter(|(a, _)| **a != agent)
                .map(|(a, f)| (*a, *f))
                .collect::<Vec<_>>()
        };
        strip(self) == strip(other)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.allocation {
            Allocation::Agent(a) => write!(f, "allocate {a}")?,
            Allocation::ThirdParty => write!(f, "third party")?,
            Allocation::Unpaid => write!(f, "unpaid")?,
        }
        if !self.fines.is_empty() {
            let parts: Vec<String> = self.fines.iter().map(|(a, x)| format!("{a}:-{x}")).collect();
            write!(f, " [{}]", parts.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutcome {
    allocation: Allocation,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    fines: BTreeMap<AgentId, Amount>,
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawOutcome {
            allocation: self.allocation,
            fines: self.fines.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawOutcome::deserialize(d)?;
        let mut out = Outcome::new(raw.allocation);
        for (agent, amount) in raw.fines {
            out.add_fine(agent, amount);
        }
        Ok(out)
    }
}

/// Exact probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prob(pub Ratio<i64>);

impl Prob {
    pub fn new(num: i64, den: i64) -> Self {
        Prob(Ratio::new(num, den))
    }

    pub fn one() -> Self {
        Prob(Ratio::one())
    }

    pub fn zero() -> Self {
        Prob(Ratio::zero())
    }

    pub fn half() -> Self {
        Prob::new(1, 2)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl std::ops::Add for Prob {
    type Output = Prob;
    fn add(self, rhs: Prob) -> Prob {
        Prob(self.0 + rhs.0)
    }
}

impl std::ops::Mul for Prob {
    type Output = Prob;
    fn mul(self, rhs: Prob) -> Prob {
        Prob(self.0 * rhs.0)
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProb {
    num: i64,
    den: i64,
}

impl Serialize for Prob {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawProb {
            num: *self.0.numer(),
            den: *self.0.denom(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Prob {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawProb::deserialize(d)?;
        if raw.den <= 0 {
            return Err(serde::de::Error::custom("probability denominator must be positive"));
        }
        Ok(Prob::new(raw.num, raw.den))
    }
}
