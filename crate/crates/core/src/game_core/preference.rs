use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::outcome::{AgentId, Outcome};
use super::GameError;

/// A total preorder over outcomes, stored as ordered indifference classes.
///
/// Rank 0 is the most preferred class. Construction rejects any ranking in
/// which charging the agent more makes an outcome better or equal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPreference", into = "RawPreference")]
pub struct OrdinalPreference {
    agent: AgentId,
    classes: Vec<BTreeSet<Outcome>>,
    index: BTreeMap<Outcome, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPreference {
    agent: AgentId,
    classes: Vec<Vec<Outcome>>,
}

impl TryFrom<RawPreference> for OrdinalPreference {
    type Error = GameError;
    fn try_from(raw: RawPreference) -> Result<Self, GameError> {
        OrdinalPreference::from_classes(raw.agent, raw.classes)
    }
}

impl From<OrdinalPreference> for RawPreference {
    fn from(p: OrdinalPreference) -> Self {
        RawPreference {
            agent: p.agent,
            classes: p.classes.into_iter().map(|c| c.into_iter().collect()).collect(),
        }
    }
}

impl OrdinalPreference {
    pub fn from_classes(agent: AgentId, classes: Vec<Vec<Outcome>>) -> Result<Self, GameError> {
        let mut index = BTreeMap::new();
        let mut sets = Vec::with_capacity(classes.len());
        for (rank, class) in classes.into_iter().enumerate() {
            if class.is_empty() {
                return Err(GameError::InvalidPreference {
                    agent,
                    reason: format!("rank class {rank} is empty"),
                });
            }
            let mut set = BTreeSet::new();
            for o in class {
                if index.insert(o.clone(), rank).is_some() {
                    return Err(GameError::InvalidPreference {
                        agent,
                        reason: format!("outcome `{o}` ranked twice"),
                    });
                }
                set.insert(o);
            }
            sets.push(set);
        }
        let pref = OrdinalPreference {
            agent,
            classes: sets,
            index,
        };
        if let Some((better, worse)) = pref.fine_monotonicity_violations().into_iter().next() {
            return Err(GameError::InvalidPreference {
                agent,
                reason: format!("`{worse}` carries a larger fine than `{better}` but is not ranked strictly worse"),
            });
        }
        Ok(pref)
    }

    /// Ranks outcomes by a score, highest score best; equal scores are indifferent.
    pub fn from_score<K: Ord>(
        agent: AgentId,
        outcomes: impl IntoIterator<Item = Outcome>,
        score: impl Fn(&Outcome) -> K,
    ) -> Result<Self, GameError> {
        let mut grouped: BTreeMap<std::cmp::Reverse<K>, Vec<Outcome>> = BTreeMap::new();
        let unique: BTreeSet<Outcome> = outcomes.into_iter().collect();
        for o in unique {
            grouped.entry(std::cmp::Reverse(score(&o))).or_default().push(o);
        }
        Self::from_classes(agent, grouped.into_values().collect())
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn rank(&self, outcome: &Outcome) -> Option<usize> {
        self.index.get(outcome).copied()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[BTreeSet<Outcome>] {
        &self.classes
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &Outcome> {
        self.index.keys()
    }

    /// `a` strictly preferred to `b`. `None` when either is unranked.
    pub fn prefers(&self, a: &Outcome, b: &Outcome) -> Option<bool> {
        Some(self.rank(a)? < self.rank(b)?)
    }

    pub fn indifferent(&self, a: &Outcome, b: &Outcome) -> Option<bool> {
        Some(self.rank(a)? == self.rank(b)?)
    }

    /// Pairs `(x, x_fined)` where the fined variant is not strictly worse.
    pub fn fine_monotonicity_violations(&self) -> Vec<(Outcome, Outcome)> {
        let mut out = Vec::new();
        for (x, rx) in &self.index {
            for (y, ry) in &self.index {
                if x.is_fined_variant_for(y, self.agent) && ry <= rx {
                    out.push((x.clone(), y.clone()));
                }
            }
        }
        out
    }
}

/// Preferences of every player, keyed by agent.
pub type PreferenceProfile = BTreeMap<AgentId, OrdinalPreference>;

pub fn profile_from(prefs: impl IntoIterator<Item = OrdinalPreference>) -> PreferenceProfile {
    prefs.into_iter().map(|p| (p.agent(), p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_core::Allocation;

    const A: AgentId = AgentId(0);

    #[test]
    fn fined_variant_must_rank_strictly_worse() {
        let x = Outcome::to_agent(A);
        let fined = x.clone().with_fine(A, 1);
        let err = OrdinalPreference::from_classes(A, vec![vec![x.clone(), fined.clone()]]);
        assert!(matches!(err, Err(GameError::InvalidPreference { .. })));
        let err = OrdinalPreference::from_classes(A, vec![vec![fined.clone()], vec![x.clone()]]);
        assert!(err.is_err());
        let ok = OrdinalPreference::from_classes(A, vec![vec![x.clone()], vec![fined.clone()]]).unwrap();
        assert!(ok.prefers(&x, &fined).unwrap());
        assert!(ok.fine_monotonicity_violations().is_empty());
    }

    #[test]
    fn fines_on_others_do_not_trigger_monotonicity() {
        let x = Outcome::to_agent(A);
        let other_fined = x.clone().with_fine(AgentId(1), 1);
        let p = OrdinalPreference::from_classes(A, vec![vec![x.clone(), other_fined.clone()]]).unwrap();
        assert!(p.indifferent(&x, &other_fined).unwrap());
    }

    #[test]
    fn duplicate_and_empty_classes_rejected() {
        let x = Outcome::new(Allocation::ThirdParty);
        assert!(OrdinalPreference::from_classes(A, vec![vec![x.clone()], vec![x.clone()]]).is_err());
        assert!(OrdinalPreference::from_classes(A, vec![vec![x], vec![]]).is_err());
    }

    #[test]
    fn score_groups_ties() {
        let outs = vec![
            Outcome::to_agent(A),
            Outcome::third_party(),
            Outcome::new(Allocation::Unpaid),
        ];
        let p = OrdinalPreference::from_score(A, outs, |o| match o.allocation() {
            Allocation::Agent(_) => 2,
            _ => 0,
        })
        .unwrap();
        assert_eq!(p.class_count(), 2);
        assert_eq!(p.rank(&Outcome::to_agent(A)), Some(0));
        assert_eq!(p.rank(&Outcome::third_party()), Some(1));
    }

    #[test]
    fn json_round_trip_keeps_ranking() {
        let p =
            OrdinalPreference::from_classes(A, vec![vec![Outcome::to_agent(A)], vec![Outcome::third_party()]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: OrdinalPreference = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
