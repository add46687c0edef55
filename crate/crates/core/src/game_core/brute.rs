//! Exhaustive strategy-profile enumeration, used as an oracle for `solve_spe`.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use super::lottery::{dominance_compare, Dominance, Lottery};
use super::outcome::{AgentId, Prob};
use super::preference::PreferenceProfile;
use super::solve::SpeSolution;
use super::tree::{path_string, GameTree, Node};
use super::GameError;

pub const DEFAULT_PROFILE_CAP: u128 = 1_000_000;

enum Flat {
    Terminal(Rc<Lottery>),
    Chance(Vec<(Prob, usize)>),
    Decision {
        player: AgentId,
        labels: Vec<String>,
        children: Vec<usize>,
    },
}

struct Arena {
    nodes: Vec<Flat>,
    paths: Vec<String>,
}

impl Arena {
    /// Flattens in post-order so every child precedes its parent.
    fn build(node: &Node, path: &mut Vec<String>, arena: &mut Arena) -> usize {
        let flat = match node {
            Node::Terminal { outcome } => Flat::Terminal(Rc::new(Lottery::degenerate(outcome.clone()))),
            Node::Chance { branches } => {
                let mut kids = Vec::with_capacity(branches.len());
                for (i, b) in branches.iter().enumerate() {
                    path.push(Node::chance_step(i));
                    kids.push((b.p, Arena::build(&b.node, path, arena)));
                    path.pop();
                }
                Flat::Chance(kids)
            }
            Node::Decision { player, actions } => {
                let mut labels = Vec::with_capacity(actions.len());
                let mut children = Vec::with_capacity(actions.len());
                for (label, child) in actions {
                    path.push(label.clone());
                    children.push(Arena::build(child, path, arena));
                    path.pop();
                    labels.push(label.clone());
                }
                Flat::Decision {
                    player: *player,
                    labels,
                    children,
                }
            }
        };
        arena.nodes.push(flat);
        arena.paths.push(path_string(path));
        arena.nodes.len() - 1
    }
}

/// Enumerates every pure strategy profile and keeps those in which each
/// decision node's action is a best response given the profile's continuation
/// play (checked bottom-up, so every subgame is checked).
pub fn brute_force_spe(game: &GameTree, prefs: &PreferenceProfile) -> Result<SpeSolution, GameError> {
    brute_force_spe_capped(game, prefs, DEFAULT_PROFILE_CAP)
}

pub fn brute_force_spe_capped(game: &GameTree, prefs: &PreferenceProfile, cap: u128) -> Result<SpeSolution, GameError> {
    let total = game.profile_count();
    if total > cap {
        return Err(GameError::ProfileCapExceeded { profiles: total, cap });
    }
    game.check_ranked(prefs)?;
    let mut arena = Arena {
        nodes: Vec::new(),
        paths: Vec::new(),
    };
    let root = Arena::build(game.root(), &mut Vec::new(), &mut arena);

    let decisions: Vec<usize> = (0..arena.nodes.len())
        .filter(|i| matches!(arena.nodes[*i], Flat::Decision { .. }))
        .collect();
    let slot: BTreeMap<usize, usize> = decisions.iter().enumerate().map(|(s, n)| (*n, s)).collect();
    let radix: Vec<usize> = decisions
        .iter()
        .map(|i| match &arena.nodes[*i] {
            Flat::Decision { children, .. } => children.len(),
            _ => unreachable!(),
        })
        .collect();

    let mut choice = vec![0usize; decisions.len()];
    let mut values: Vec<Option<Rc<Lottery>>> = vec![None; arena.nodes.len()];
    let mut outcome_set = BTreeSet::new();
    let mut profile_count: u128 = 0;
    let mut best_responses: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut subgame_outcomes: BTreeMap<String, BTreeSet<Lottery>> = BTreeMap::new();

    loop {
        if evaluate(&arena, prefs, &slot, &choice, &mut values)? {
            profile_count += 1;
            outcome_set.insert((*values[root].clone().expect("root evaluated")).clone());
            for (i, node) in arena.nodes.iter().enumerate() {
                if let Flat::Decision { labels, .. } = node {
                    best_responses
                        .entry(arena.paths[i].clone())
                        .or_default()
                        .insert(labels[choice[slot[&i]]].clone());
                }
                subgame_outcomes
                    .entry(arena.paths[i].clone())
                    .or_default()
                    .insert((*values[i].clone().expect("all nodes evaluated")).clone());
            }
        }
        // odometer
        let mut d = 0;
        loop {
            if d == choice.len() {
                return Ok(SpeSolution {
                    outcome_set,
                    profile_count,
                    best_responses,
                    subgame_outcomes,
                });
            }
            choice[d] += 1;
            if choice[d] < radix[d] {
                break;
            }
            choice[d] = 0;
            d += 1;
        }
    }
}

/// Evaluates one profile bottom-up. Returns `Ok(false)` at the first node
/// whose chosen action is not a best response.
fn evaluate(
    arena: &Arena,
    prefs: &PreferenceProfile,
    slot: &BTreeMap<usize, usize>,
    choice: &[usize],
    values: &mut [Option<Rc<Lottery>>],
) -> Result<bool, GameError> {
    for (i, node) in arena.nodes.iter().enumerate() {
        let v = match node {
            Flat::Terminal(l) => l.clone(),
            Flat::Chance(kids) => {
                let parts: Vec<(Prob, Rc<Lottery>)> = kids
                    .iter()
                    .map(|(p, c)| (*p, values[*c].clone().expect("child evaluated")))
                    .collect();
                Rc::new(Lottery::mix(parts.iter().map(|(p, l)| (*p, l.as_ref()))))
            }
            Flat::Decision { player, children, .. } => {
                let pref = &prefs[player];
                let k = choice[slot[&i]];
                let chosen = values[children[k]].clone().expect("child evaluated");
                for (j, c) in children.iter().enumerate() {
                    if j == k {
                        continue;
                    }
                    let alt = values[*c].as_ref().expect("child evaluated");
                    match dominance_compare(&chosen, alt, pref)? {
                        Dominance::First | Dominance::Equal => {}
                        Dominance::Second => return Ok(false),
                        Dominance::Incomparable => {
                            return Err(GameError::IncomparableLottery {
                                path: arena.paths[i].clone(),
                                player: *player,
                                first: chosen.to_string(),
                                second: alt.to_string(),
                            })
                        }
                    }
                }
                chosen
            }
        };
        values[i] = Some(v);
    }
    Ok(true)
}
