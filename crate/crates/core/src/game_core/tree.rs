use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::outcome::{AgentId, Outcome, Prob};
use super::preference::{OrdinalPreference, PreferenceProfile};
use super::GameError;

/// A node of a finite perfect-information game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Node {
    Decision {
        player: AgentId,
        actions: BTreeMap<String, Node>,
    },
    Chance {
        branches: Vec<Branch>,
    },
    Terminal {
        outcome: Outcome,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub p: Prob,
    pub node: Node,
}

impl Node {
    pub fn terminal(outcome: Outcome) -> Node {
        Node::Terminal { outcome }
    }

    pub fn decision<S: Into<String>>(player: AgentId, actions: impl IntoIterator<Item = (S, Node)>) -> Node {
        Node::Decision {
            player,
            actions: actions.into_iter().map(|(l, n)| (l.into(), n)).collect(),
        }
    }

    pub fn chance(branches: impl IntoIterator<Item = (Prob, Node)>) -> Node {
        Node::Chance {
            branches: branches.into_iter().map(|(p, node)| Branch { p, node }).collect(),
        }
    }

    /// Step label used in node paths for chance branch `i`.
    pub fn chance_step(i: usize) -> String {
        format!("chance#{i}")
    }

    pub fn child(&self, step: &str) -> Option<&Node> {
        match self {
            Node::Decision { actions, .. } => actions.get(step),
            Node::Chance { branches } => {
                let i: usize = step.strip_prefix("chance#")?.parse().ok()?;
                branches.get(i).map(|b| &b.node)
            }
            Node::Terminal { .. } => None,
        }
    }

    fn visit<'a>(&'a self, path: &mut Vec<String>, f: &mut dyn FnMut(&[String], &'a Node)) {
        f(path, self);
        match self {
            Node::Decision { actions, .. } => {
                for (label, child) in actions {
                    path.push(label.clone());
                    child.visit(path, f);
                    path.pop();
                }
            }
            Node::Chance { branches } => {
                for (i, b) in branches.iter().enumerate() {
                    path.push(Node::chance_step(i));
                    b.node.visit(path, f);
                    path.pop();
                }
            }
            Node::Terminal { .. } => {}
        }
    }
}

/// Renders a node path as `/step/step`; the root is `/`.
pub fn path_string(path: &[String]) -> String {
    if path.is_empty() {
        "/".to_string()
    } else {
        path.iter().map(|s| format!("/{s}")).collect()
    }
}

/// A validated game tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Node", into = "Node")]
pub struct GameTree {
    root: Node,
}

impl TryFrom<Node> for GameTree {
    type Error = GameError;
    fn try_from(root: Node) -> Result<Self, GameError> {
        GameTree::new(root)
    }
}

impl From<GameTree> for Node {
    fn from(g: GameTree) -> Node {
        g.root
    }
}

impl GameTree {
    pub fn new(root: Node) -> Result<Self, GameError> {
        let mut err = None;
        root.visit(&mut Vec::new(), &mut |path, node| {
            if err.is_some() {
                return;
            }
            match node {
                Node::Decision { actions, .. } if actions.is_empty() => {
                    err = Some(GameError::MalformedTree {
                        path: path_string(path),
                        reason: "decision node without actions".into(),
                    });
                }
                Node::Chance { branches } => {
                    if branches.is_empty() {
                        err = Some(GameError::MalformedTree {
                            path: path_string(path),
                            reason: "chance node without branches".into(),
                        });
                        return;
                    }
                    let mut total = Prob::zero();
                    for b in branches {
                        if b.p <= Prob::zero() || b.p > Prob::one() {
                            err = Some(GameError::MalformedTree {
                                path: path_string(path),
                                reason: format!("branch probability {} outside (0, 1]", b.p),
                            });
                            return;
                        }
                        total = total + b.p;
                    }
                    if total != Prob::one() {
                        err = Some(GameError::MalformedTree {
                            path: path_string(path),
                            reason: format!("branch probabilities sum to {total}"),
                        });
                    }
                }
                _ => {}
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(GameTree { root }),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// The subgame rooted at `path`.
    pub fn subgame(&self, path: &[String]) -> Option<GameTree> {
        let mut node = &self.root;
        for step in path {
            node = node.child(step)?;
        }
        Some(GameTree { root: node.clone() })
    }

    /// Visits every node in pre-order with its path.
    pub fn for_each_node<'a>(&'a self, mut f: impl FnMut(&[String], &'a Node)) {
        self.root.visit(&mut Vec::new(), &mut f);
    }

    pub fn terminal_outcomes(&self) -> Vec<(String, Outcome)> {
        let mut out = Vec::new();
        self.for_each_node(|path, node| {
            if let Node::Terminal { outcome } = node {
                out.push((path_string(path), outcome.clone()));
            }
        });
        out
    }

    /// The terminal reached by following `steps` from the root.
    pub fn outcome_at(&self, steps: &[&str]) -> Option<&Outcome> {
        let mut node = &self.root;
        for s in steps {
            node = node.child(s)?;
        }
        match node {
            Node::Terminal { outcome } => Some(outcome),
            _ => None,
        }
    }

    pub fn decision_node_count(&self) -> usize {
        let mut n = 0;
        self.for_each_node(|_, node| {
            if matches!(node, Node::Decision { .. }) {
                n += 1;
            }
        });
        n
    }

    /// Number of pure strategy profiles, saturating at `u128::MAX`.
    pub fn profile_count(&self) -> u128 {
        let mut n: u128 = 1;
        self.for_each_node(|_, node| {
            if let Node::Decision { actions, .. } = node {
                n = n.saturating_mul(actions.len() as u128);
            }
        });
        n
    }

    /// Checks that every terminal outcome is ranked by every acting player
    /// and that each acting player has a preference.
    pub fn check_ranked(&self, prefs: &PreferenceProfile) -> Result<(), GameError> {
        let mut players = Vec::new();
        self.for_each_node(|path, node| {
            if let Node::Decision { player, .. } = node {
                players.push((path_string(path), *player));
            }
        });
        for (path, p) in &players {
            if !prefs.contains_key(p) {
                return Err(GameError::MissingPreference {
                    agent: *p,
                    path: path.clone(),
                });
            }
        }
        for (path, o) in self.terminal_outcomes() {
            for (_, p) in players.iter() {
                let pref: &OrdinalPreference = &prefs[p];
                if pref.rank(&o).is_none() {
                    return Err(GameError::UnrankedOutcome {
                        agent: *p,
                        outcome: o.to_string(),
                        path,
                    });
                }
            }
        }
        Ok(())
    }
}

/// A game together with the players' preferences, as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub schema_version: u32,
    pub name: String,
    pub root: GameTree,
    pub preferences: Vec<OrdinalPreference>,
}

impl GameDocument {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn new(name: impl Into<String>, game: GameTree, prefs: &PreferenceProfile) -> Self {
        GameDocument {
            schema_version: Self::SCHEMA_VERSION,
            name: name.into(),
            root: game,
            preferences: prefs.values().cloned().collect(),
        }
    }

    pub fn profile(&self) -> PreferenceProfile {
        super::preference::profile_from(self.preferences.iter().cloned())
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("game documents always serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: AgentId = AgentId(0);

    #[test]
    fn chance_must_sum_to_one() {
        let leaf = || Node::terminal(Outcome::third_party());
        let bad = Node::chance([(Prob::new(1, 3), leaf()), (Prob::new(1, 3), leaf())]);
        assert!(matches!(GameTree::new(bad), Err(GameError::MalformedTree { .. })));
        let zero = Node::chance([(Prob::zero(), leaf()), (Prob::one(), leaf())]);
        assert!(GameTree::new(zero).is_err());
        let ok = Node::chance([(Prob::new(1, 3), leaf()), (Prob::new(2, 3), leaf())]);
        assert!(GameTree::new(ok).is_ok());
    }

    #[test]
    fn empty_decision_rejected() {
        let n = Node::Decision {
            player: A,
            actions: BTreeMap::new(),
        };
        assert!(GameTree::new(n).is_err());
    }

    #[test]
    fn paths_and_subgames() {
        let g = GameTree::new(Node::decision(
            A,
            [
                ("l", Node::terminal(Outcome::to_agent(A))),
                (
                    "r",
                    Node::chance([
                        (Prob::half(), Node::terminal(Outcome::third_party())),
                        (Prob::half(), Node::terminal(Outcome::to_agent(A))),
                    ]),
                ),
            ],
        ))
        .unwrap();
        assert_eq!(g.outcome_at(&["r", "chance#0"]), Some(&Outcome::third_party()));
        let sub = g.subgame(&["r".to_string()]).unwrap();
        assert!(matches!(sub.root(), Node::Chance { .. }));
        assert_eq!(g.profile_count(), 2);
        assert_eq!(path_string(&["r".into(), "chance#1".into()]), "/r/chance#1");
    }

    #[test]
    fn json_kind_tags() {
        let g = GameTree::new(Node::decision(A, [("x", Node::terminal(Outcome::third_party()))])).unwrap();
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(v["kind"], "decision");
        assert_eq!(v["actions"]["x"]["kind"], "terminal");
        let bad = r#"{"kind":"chance","branches":[{"p":{"num":1,"den":2},"node":{"kind":"terminal","outcome":{"allocation":"unpaid"}}}]}"#;
        assert!(serde_json::from_str::<GameTree>(bad).is_err());
    }
}
