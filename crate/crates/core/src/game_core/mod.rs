//! Finite perfect-information games with ordinal preferences.
//!
//! Players rank outcomes by a total preorder only. Chance moves produce
//! lotteries, which are compared by first-order stochastic dominance over the
//! mover's rank classes; a comparison that dominance cannot settle is reported
//! as [`GameError::IncomparableLottery`] rather than resolved by assuming
//! cardinal utilities.
//!
//! [`solve_spe`] runs backward induction keeping every weakly-best action, so
//! the returned outcome set is the union over all subgame-perfect profiles.
//! [`brute_force_spe`] enumerates pure profiles directly and serves as the
//! cross-check.

mod brute;
mod lottery;
mod outcome;
mod preference;
mod solve;
mod tree;

use thiserror::Error;

pub use brute::{brute_force_spe, brute_force_spe_capped, DEFAULT_PROFILE_CAP};
pub use lottery::{dominance_compare, Dominance, Lottery};
pub use outcome::{AgentId, Allocation, Outcome, Prob};
pub use preference::{profile_from, OrdinalPreference, PreferenceProfile};
pub use solve::{is_unique_outcome, solve_spe, solve_subgame, SpeSolution, Uniqueness};
pub use tree::{path_string, Branch, GameDocument, GameTree, Node};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("lotteries at {path} are not dominance-ranked for {player}: `{first}` vs `{second}`")]
    IncomparableLottery {
        path: String,
        player: AgentId,
        first: String,
        second: String,
    },
    #[error("outcome `{outcome}` at {path} is not ranked by {agent}")]
    UnrankedOutcome {
        agent: AgentId,
        outcome: String,
        path: String,
    },
    #[error("{agent} acts at {path} but has no preference")]
    MissingPreference { agent: AgentId, path: String },
    #[error("invalid preference for {agent}: {reason}")]
    InvalidPreference { agent: AgentId, reason: String },
    #[error("malformed game at {path}: {reason}")]
    MalformedTree { path: String, reason: String },
    #[error("{profiles} strategy profiles exceed the enumeration cap of {cap}")]
    ProfileCapExceeded { profiles: u128, cap: u128 },
    #[error("profile count overflowed")]
    CountOverflow,
}

impl GameError {
    /// Short machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            GameError::IncomparableLottery { .. } => "incomparable_lottery",
            GameError::UnrankedOutcome { .. } => "unranked_outcome",
            GameError::MissingPreference { .. } => "missing_preference",
            GameError::InvalidPreference { .. } => "invalid_preference",
            GameError::MalformedTree { .. } => "malformed_tree",
            GameError::ProfileCapExceeded { .. } => "profile_cap_exceeded",
            GameError::CountOverflow => "count_overflow",
        }
    }

    fn at(self, path: &[String]) -> Self {
        match self {
            GameError::UnrankedOutcome { agent, outcome, .. } => GameError::UnrankedOutcome {
                agent,
                outcome,
                path: path_string(path),
            },
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P0: AgentId = AgentId(0);
    const P1: AgentId = AgentId(1);

    fn strict(agent: AgentId, order: &[&Outcome]) -> OrdinalPreference {
        OrdinalPreference::from_classes(agent, order.iter().map(|o| vec![(*o).clone()]).collect()).unwrap()
    }

    #[test]
    fn single_terminal() {
        let o = Outcome::third_party();
        let g = GameTree::new(Node::terminal(o.clone())).unwrap();
        let s = solve_spe(&g, &PreferenceProfile::new()).unwrap();
        assert_eq!(s.profile_count, 1);
        assert_eq!(s.outcome_set.len(), 1);
        assert_eq!(s.outcome_set.iter().next().unwrap().sure_outcome(), Some(&o));
        assert!(is_unique_outcome(&s).unique);
    }

    #[test]
    fn one_decision_picks_preferred() {
        let x = Outcome::to_agent(P0);
        let y = Outcome::to_agent(P1);
        let g = GameTree::new(Node::decision(
            P0,
            [("x", Node::terminal(x.clone())), ("y", Node::terminal(y.clone()))],
        ))
        .unwrap();
        let prefs = profile_from([strict(P0, &[&x, &y])]);
        let s = solve_spe(&g, &prefs).unwrap();
        let b = brute_force_spe(&g, &prefs).unwrap();
        assert_eq!(s, b);
        assert_eq!(s.outcome_set, [Lottery::degenerate(x)].into_iter().collect());
        assert_eq!(s.best_responses["/"], ["x".to_string()].into_iter().collect());
    }

    /// Matching-pennies flavoured game: the first mover is indifferent between
    /// two subgames that end differently, so two SPE outcomes survive.
    #[test]
    fn indifference_yields_two_outcomes() {
        let x = Outcome::to_agent(P0);
        let y = Outcome::to_agent(P1);
        let z = Outcome::third_party();
        let g = GameTree::new(Node::decision(
            P0,
            [
                (
                    "heads",
                    Node::decision(P1, [("h", Node::terminal(x.clone())), ("t", Node::terminal(z.clone()))]),
                ),
                (
                    "tails",
                    Node::decision(P1, [("h", Node::terminal(z.clone())), ("t", Node::terminal(y.clone()))]),
                ),
            ],
        ))
        .unwrap();
        let p0 = OrdinalPreference::from_classes(P0, vec![vec![x.clone(), y.clone()], vec![z.clone()]]).unwrap();
        let p1 = OrdinalPreference::from_classes(P1, vec![vec![x.clone(), y.clone()], vec![z.clone()]]).unwrap();
        let prefs = profile_from([p0, p1]);
        let s = solve_spe(&g, &prefs).unwrap();
        let u = is_unique_outcome(&s);
        assert!(!u.unique);
        assert_eq!(u.witness.len(), 2);
        assert_ne!(u.witness[0], u.witness[1]);
        assert_eq!(s.profile_count, 2);
        assert_eq!(brute_force_spe(&g, &prefs).unwrap(), s);
    }

    #[test]
    fn incomparable_lotteries_reported_with_path() {
        let a = Outcome::to_agent(P0);
        let b = Outcome::to_agent(P1);
        let c = Outcome::third_party();
        let g = GameTree::new(Node::decision(
            P0,
            [
                (
                    "gamble",
                    Node::chance([
                        (Prob::half(), Node::terminal(a.clone())),
                        (Prob::half(), Node::terminal(b.clone())),
                    ]),
                ),
                ("safe", Node::terminal(c.clone())),
            ],
        ))
        .unwrap();
        let prefs = profile_from([strict(P0, &[&a, &c, &b])]);
        match solve_spe(&g, &prefs) {
            Err(GameError::IncomparableLottery { path, player, .. }) => {
                assert_eq!(path, "/");
                assert_eq!(player, P0);
            }
            other => panic!("expected incomparable, got {other:?}"),
        }
        assert!(matches!(
            brute_force_spe(&g, &prefs),
            Err(GameError::IncomparableLottery { .. })
        ));
    }

    #[test]
    fn profile_cap_is_enforced() {
        let leaf = || Node::terminal(Outcome::third_party());
        let g = GameTree::new(Node::decision(
            P0,
            [
                ("a", Node::decision(P1, [("a", leaf()), ("b", leaf())])),
                ("b", Node::decision(P1, [("a", leaf()), ("b", leaf())])),
            ],
        ))
        .unwrap();
        let prefs = profile_from([
            strict(P0, &[&Outcome::third_party()]),
            strict(P1, &[&Outcome::third_party()]),
        ]);
        assert!(matches!(
            brute_force_spe_capped(&g, &prefs, 7),
            Err(GameError::ProfileCapExceeded { profiles: 8, cap: 7 })
        ));
        assert_eq!(brute_force_spe_capped(&g, &prefs, 8).unwrap().profile_count, 8);
    }

    #[test]
    fn missing_preference_rejected() {
        let g = GameTree::new(Node::decision(P1, [("a", Node::terminal(Outcome::third_party()))])).unwrap();
        assert!(matches!(
            solve_spe(&g, &PreferenceProfile::new()),
            Err(GameError::MissingPreference { .. })
        ));
    }
}
