use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::outcome::{Outcome, Prob};
use super::preference::OrdinalPreference;
use super::GameError;

/// A finite probability distribution over outcomes with exact weights.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lottery(BTreeMap<Outcome, Prob>);

impl Lottery {
    pub fn degenerate(outcome: Outcome) -> Self {
        let mut m = BTreeMap::new();
        m.insert(outcome, Prob::one());
        Lottery(m)
    }

    /// Weighted mixture. Weights are expected to sum to one.
    pub fn mix<'a>(parts: impl IntoIterator<Item = (Prob, &'a Lottery)>) -> Self {
        let mut m: BTreeMap<Outcome, Prob> = BTreeMap::new();
        for (w, lottery) in parts {
            for (o, p) in &lottery.0 {
                let entry = m.entry(o.clone()).or_insert_with(Prob::zero);
                *entry = *entry + w * *p;
            }
        }
        m.retain(|_, p| !p.is_zero());
        Lottery(m)
    }

    pub fn support(&self) -> impl Iterator<Item = (&Outcome, &Prob)> {
        self.0.iter()
    }

    pub fn is_degenerate(&self) -> bool {
        self.0.len() == 1
    }

    /// The single outcome of a degenerate lottery.
    pub fn sure_outcome(&self) -> Option<&Outcome> {
        if self.is_degenerate() {
            self.0.keys().next()
        } else {
            None
        }
    }

    pub fn probability_of(&self, outcome: &Outcome) -> Prob {
        self.0.get(outcome).copied().unwrap_or_else(Prob::zero)
    }

    /// Probability mass on each rank class of `pref`.
    fn rank_distribution(&self, pref: &OrdinalPreference) -> Result<Vec<Prob>, GameError> {
        let mut dist = vec![Prob::zero(); pref.class_count()];
        for (o, p) in &self.0 {
            let r = pref.rank(o).ok_or_else(|| GameError::UnrankedOutcome {
                agent: pref.agent(),
                outcome: o.to_string(),
                path: String::new(),
            })?;
            dist[r] = dist[r] + *p;
        }
        Ok(dist)
    }
}

impl fmt::Display for Lottery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(o) = self.sure_outcome() {
            return write!(f, "{o}");
        }
        let parts: Vec<String> = self.0.iter().map(|(o, p)| format!("{p}*({o})")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Serialize, Deserialize)]
struct WeightedOutcome {
    p: Prob,
    outcome: Outcome,
}

impl Serialize for Lottery {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let parts: Vec<WeightedOutcome> = self
            .0
            .iter()
            .map(|(o, p)| WeightedOutcome {
                p: *p,
                outcome: o.clone(),
            })
            .collect();
        parts.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lottery {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let parts = Vec::<WeightedOutcome>::deserialize(d)?;
        let mut m: BTreeMap<Outcome, Prob> = BTreeMap::new();
        for w in parts {
            let e = m.entry(w.outcome).or_insert_with(Prob::zero);
            *e = *e + w.p;
        }
        Ok(Lottery(m))
    }
}

/// Verdict of a first-order stochastic dominance comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    First,
    Second,
    Equal,
    Incomparable,
}

impl Dominance {
    /// The first lottery is weakly preferred.
    pub fn first_weakly_better(self) -> bool {
        matches!(self, Dominance::First | Dominance::Equal)
    }
}

/// First-order stochastic dominance with respect to the rank classes of `pref`.
///
/// `first` dominates when, for every rank `r`, it puts at least as much mass on
/// ranks `0..=r` as `second` does.
pub fn dominance_compare(first: &Lottery, second: &Lottery, pref: &OrdinalPreference) -> Result<Dominance, GameError> {
    let d1 = first.rank_distribution(pref)?;
    let d2 = second.rank_distribution(pref)?;
    let (mut c1, mut c2) = (Prob::zero(), Prob::zero());
    let (mut above, mut below) = (false, false);
    for (p1, p2) in d1.iter().zip(&d2) {
        c1 = c1 + *p1;
        c2 = c2 + *p2;
        if c1 > c2 {
            above = true;
        } else if c1 < c2 {
            below = true;
        }
    }
    Ok(match (above, below) {
        (false, false) => Dominance::Equal,
        (true, false) => Dominance::First,
        (false, true) => Dominance::Second,
        (true, true) => Dominance::Incomparable,
    })
}
