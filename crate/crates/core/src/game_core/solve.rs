use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::lottery::{dominance_compare, Dominance, Lottery};
use super::preference::PreferenceProfile;
use super::tree::{path_string, GameTree, Node};
use super::GameError;

/// Result of a subgame-perfect analysis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeSolution {
    /// Every outcome lottery induced by some SPE profile.
    pub outcome_set: BTreeSet<Lottery>,
    /// Number of pure SPE strategy profiles.
    pub profile_count: u128,
    /// For each decision node, the actions played there by some SPE profile.
    pub best_responses: BTreeMap<String, BTreeSet<String>>,
    /// SPE outcome set of the subgame rooted at each node.
    pub subgame_outcomes: BTreeMap<String, BTreeSet<Lottery>>,
}

impl SpeSolution {
    /// Actions taken along equilibrium play, as `(node path, actions)`.
    ///
    /// Follows every best response from the root through chance nodes, so a
    /// node appears only if some SPE reaches it with positive probability.
    pub fn equilibrium_path(&self, game: &GameTree) -> Vec<(String, BTreeSet<String>)> {
        let mut out = Vec::new();
        let mut stack = vec![(Vec::<String>::new(), game.root())];
        while let Some((path, node)) = stack.pop() {
            match node {
                Node::Decision { actions, .. } => {
                    let key = path_string(&path);
                    let chosen = self.best_responses.get(&key).cloned().unwrap_or_default();
                    for label in chosen.iter().rev() {
                        let mut p = path.clone();
                        p.push(label.clone());
                        stack.push((p, &actions[label]));
                    }
                    out.push((key, chosen));
                }
                Node::Chance { branches } => {
                    for (i, b) in branches.iter().enumerate().rev() {
                        let mut p = path.clone();
                        p.push(Node::chance_step(i));
                        stack.push((p, &b.node));
                    }
                }
                Node::Terminal { .. } => {}
            }
        }
        out
    }
}

/// Whether an SPE outcome set is a singleton.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Uniqueness {
    pub unique: bool,
    /// The unique outcome, or two distinct SPE outcomes.
    pub witness: Vec<Lottery>,
}

pub fn is_unique_outcome(solution: &SpeSolution) -> Uniqueness {
    let witness: Vec<Lottery> = solution.outcome_set.iter().take(2).cloned().collect();
    Uniqueness {
        unique: solution.outcome_set.len() == 1,
        witness,
    }
}

/// Lotteries supported by SPE profiles of a subgame, with the number of
/// profiles inducing each.
type Support = BTreeMap<Lottery, u128>;

struct Solver<'a> {
    prefs: &'a PreferenceProfile,
    best_responses: BTreeMap<String, BTreeSet<String>>,
    subgame_outcomes: BTreeMap<String, BTreeSet<Lottery>>,
}

/// Backward induction over the game tree.
///
/// At each decision node an action's continuation lottery `l` survives when,
/// for every other action, some SPE continuation of that action is weakly
/// dominated by `l` for the mover. Every cross-action pair is compared, and an
/// incomparable pair aborts the solve.
pub fn solve_spe(game: &GameTree, prefs: &PreferenceProfile) -> Result<SpeSolution, GameError> {
    game.check_ranked(prefs)?;
    let mut solver = Solver {
        prefs,
        best_responses: BTreeMap::new(),
        subgame_outcomes: BTreeMap::new(),
    };
    let mut path = Vec::new();
    let root = solver.solve_node(game.root(), &mut path)?;
    let profile_count = root
        .values()
        .try_fold(0u128, |acc, c| acc.checked_add(*c))
        .ok_or(GameError::CountOverflow)?;
    Ok(SpeSolution {
        outcome_set: root.into_keys().collect(),
        profile_count,
        best_responses: solver.best_responses,
        subgame_outcomes: solver.subgame_outcomes,
    })
}

/// Solves the subgame at `path`; equivalent to solving `game.subgame(path)`.
pub fn solve_subgame(game: &GameTree, prefs: &PreferenceProfile, path: &[String]) -> Result<SpeSolution, GameError> {
    let sub = game.subgame(path).ok_or_else(|| GameError::MalformedTree {
        path: path_string(path),
        reason: "no such node".into(),
    })?;
    solve_spe(&sub, prefs)
}

impl Solver<'_> {
    fn solve_node(&mut self, node: &Node, path: &mut Vec<String>) -> Result<Support, GameError> {
        let support = match node {
            Node::Terminal { outcome } => {
                let mut s = Support::new();
                s.insert(Lottery::degenerate(outcome.clone()), 1);
                s
            }
            Node::Chance { branches } => {
                let mut acc: Vec<(Vec<(super::Prob, Lottery)>, u128)> = vec![(Vec::new(), 1)];
                for (i, b) in branches.iter().enumerate() {
                    path.push(Node::chance_step(i));
                    let child = self.solve_node(&b.node, path)?;
                    path.pop();
                    let mut next = Vec::with_capacity(acc.len() * child.len());
                    for (parts, count) in &acc {
                        for (l, c) in &child {
                            let mut p = parts.clone();
                            p.push((b.p, l.clone()));
                            let n = count.checked_mul(*c).ok_or(GameError::CountOverflow)?;
                            next.push((p, n));
                        }
                    }
                    acc = next;
                }
                let mut s = Support::new();
                for (parts, count) in acc {
                    let l = Lottery::mix(parts.iter().map(|(p, l)| (*p, l)));
                    let e = s.entry(l).or_insert(0);
                    *e = e.checked_add(count).ok_or(GameError::CountOverflow)?;
                }
                s
            }
            Node::Decision { player, actions } => {
                let pref = &self.prefs[player];
                let mut children: Vec<(&String, Support)> = Vec::with_capacity(actions.len());
                for (label, child) in actions {
                    path.push(label.clone());
                    let s = self.solve_node(child, path)?;
                    path.pop();
                    children.push((label, s));
                }
                // weakly_beats[k][j][(x, y)] : x (of action k) weakly dominates y (of action j)
                let n = children.len();
                let mut verdicts: BTreeMap<(usize, usize), Vec<Vec<Dominance>>> = BTreeMap::new();
                for k in 0..n {
                    for j in (k + 1)..n {
                        let mut rows = Vec::with_capacity(children[k].1.len());
                        for x in children[k].1.keys() {
                            let mut row = Vec::with_capacity(children[j].1.len());
                            for y in children[j].1.keys() {
                                let d = dominance_compare(x, y, pref).map_err(|e| e.at(path))?;
                                if d == Dominance::Incomparable {
                                    return Err(GameError::IncomparableLottery {
                                        path: path_string(path),
                                        player: *player,
                                        first: x.to_string(),
                                        second: y.to_string(),
                                    });
                                }
                                row.push(d);
                            }
                            rows.push(row);
                        }
                        verdicts.insert((k, j), rows);
                    }
                }
                let weakly_beats = |k: usize, xi: usize, j: usize, yi: usize| -> bool {
                    if k < j {
                        verdicts[&(k, j)][xi][yi].first_weakly_better()
                    } else {
                        matches!(verdicts[&(j, k)][yi][xi], Dominance::Second | Dominance::Equal)
                    }
                };
                let mut s = Support::new();
                let mut chosen = BTreeSet::new();
                for k in 0..n {
                    for (xi, (x, cx)) in children[k].1.iter().enumerate() {
                        let mut count = *cx;
                        for (j, (_, other)) in children.iter().enumerate() {
                            if j == k {
                                continue;
                            }
                            let mut weight: u128 = 0;
                            for (yi, cy) in other.values().enumerate() {
                                if weakly_beats(k, xi, j, yi) {
                                    weight = weight.checked_add(*cy).ok_or(GameError::CountOverflow)?;
                                }
                            }
                            count = count.checked_mul(weight).ok_or(GameError::CountOverflow)?;
                            if count == 0 {
                                break;
                            }
                        }
                        if count > 0 {
                            chosen.insert(children[k].0.clone());
                            let e = s.entry(x.clone()).or_insert(0);
                            *e = e.checked_add(count).ok_or(GameError::CountOverflow)?;
                        }
                    }
                }
                self.best_responses.insert(path_string(path), chosen);
                s
            }
        };
        self.subgame_outcomes
            .insert(path_string(path), support.keys().cloned().collect());
        Ok(support)
    }
}
