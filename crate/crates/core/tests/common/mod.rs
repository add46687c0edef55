#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solomonic::game_core::{
    profile_from, AgentId, Allocation, GameTree, Lottery, Node, OrdinalPreference, Outcome, PreferenceProfile, Prob,
};

pub const A: AgentId = AgentId(0);
pub const B: AgentId = AgentId(1);

pub fn outcome_pool() -> Vec<Outcome> {
    vec![
        Outcome::to_agent(A),
        Outcome::to_agent(B),
        Outcome::third_party(),
        Outcome::new(Allocation::Unpaid),
        Outcome::to_agent(A).with_fine(A, 1),
        Outcome::to_agent(B).with_fine(B, 1),
    ]
}

/// Random scores in a small range, so indifference is common. The fined
/// variant of an outcome is pushed strictly below its unfined base for the
/// charged agent.
pub fn random_preferences(rng: &mut ChaCha8Rng) -> PreferenceProfile {
    let pool = outcome_pool();
    let prefs = [A, B].map(|agent| {
        let mut score: BTreeMap<Outcome, i32> = pool.iter().map(|o| (o.clone(), rng.gen_range(0..4))).collect();
        for o in &pool {
            if o.fine_on(agent) > 0 {
                let base = Outcome::new(o.allocation());
                let cap = score[&base] - 1;
                let s = score.get_mut(o).unwrap();
                *s = (*s).min(cap);
            }
        }
        OrdinalPreference::from_score(agent, pool.clone(), |o| score[o]).unwrap()
    });
    profile_from(prefs)
}

fn random_subtree(rng: &mut ChaCha8Rng, pool: &[Outcome], depth_left: u32) -> Node {
    if depth_left == 0 || rng.gen_bool(0.3) {
        return Node::terminal(pool[rng.gen_range(0..pool.len())].clone());
    }
    let player = if rng.gen_bool(0.5) { A } else { B };
    let width = rng.gen_range(1..=3);
    let actions: Vec<(String, Node)> = (0..width)
        .map(|i| (format!("m{i}"), random_subtree(rng, pool, depth_left - 1)))
        .collect();
    Node::decision(player, actions)
}

/// Largest pure-profile count a random game may have.
pub const PROFILE_CAP: u128 = 20_000;

/// Two-player game of depth at most 4 and branching at most 3, with an
/// optional chance move at the root. Trees over [`PROFILE_CAP`] are redrawn.
pub fn random_game(seed: u64) -> (GameTree, PreferenceProfile) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let game = random_tree(&mut rng);
        if game.profile_count() <= PROFILE_CAP {
            let prefs = random_preferences(&mut rng);
            return (game, prefs);
        }
    }
}

fn random_tree(rng: &mut ChaCha8Rng) -> GameTree {
    let pool = outcome_pool();
    let root = if rng.gen_bool(0.3) {
        let splits: [&[(i64, i64)]; 3] = [&[(1, 2), (1, 2)], &[(1, 3), (1, 3), (1, 3)], &[(1, 4), (3, 4)]];
        let split = splits[rng.gen_range(0..3)];
        Node::chance(
            split
                .iter()
                .map(|&(n, d)| (Prob::new(n, d), random_subtree(rng, &pool, 3)))
                .collect::<Vec<_>>(),
        )
    } else {
        let player = if rng.gen_bool(0.5) { A } else { B };
        let width = rng.gen_range(2..=3);
        Node::decision(
            player,
            (0..width)
                .map(|i| (format!("m{i}"), random_subtree(rng, &pool, 3)))
                .collect::<Vec<_>>(),
        )
    };
    GameTree::new(root).unwrap()
}

/// Independent SPE enumeration for games whose only chance move, if any, is at
/// the root. Every pure profile is played out and accepted when no mover at any
/// node strictly prefers a different action given the profile's continuation.
/// Returns the outcome set and the number of accepted profiles.
pub fn enumerate_spe(game: &GameTree, prefs: &PreferenceProfile) -> (BTreeSet<Lottery>, u128) {
    let mut decisions: Vec<(Vec<String>, &Node)> = Vec::new();
    game.for_each_node(|path, n| {
        if matches!(n, Node::Decision { .. }) {
            decisions.push((path.to_vec(), n));
        }
    });
    let widths: Vec<usize> = decisions
        .iter()
        .map(|(_, n)| match n {
            Node::Decision { actions, .. } => actions.len(),
            _ => unreachable!(),
        })
        .collect();
    let index: BTreeMap<Vec<String>, usize> = decisions.iter().enumerate().map(|(i, (p, _))| (p.clone(), i)).collect();

    fn play<'a>(
        node: &'a Node,
        path: &mut Vec<String>,
        choice: &[usize],
        index: &BTreeMap<Vec<String>, usize>,
    ) -> &'a Outcome {
        match node {
            Node::Terminal { outcome } => outcome,
            Node::Decision { actions, .. } => {
                let (label, child) = actions.iter().nth(choice[index[path]]).unwrap();
                path.push(label.clone());
                let o = play(child, path, choice, index);
                path.pop();
                o
            }
            Node::Chance { .. } => panic!("chance below the root"),
        }
    }

    let mut set = BTreeSet::new();
    let mut count = 0u128;
    let mut choice = vec![0usize; decisions.len()];
    loop {
        let stable = decisions.iter().all(|(path, node)| {
            let Node::Decision { player, actions } = node else {
                unreachable!()
            };
            let pref = &prefs[player];
            let chosen = pref.rank(play(node, &mut path.clone(), &choice, &index)).unwrap();
            actions.iter().all(|(label, child)| {
                let mut p = path.clone();
                p.push(label.clone());
                pref.rank(play(child, &mut p, &choice, &index)).unwrap() >= chosen
            })
        });
        if stable {
            count += 1;
            let lottery = match game.root() {
                Node::Chance { branches } => {
                    let parts: Vec<(Prob, Lottery)> = branches
                        .iter()
                        .enumerate()
                        .map(|(i, b)| {
                            let mut p = vec![Node::chance_step(i)];
                            (b.p, Lottery::degenerate(play(&b.node, &mut p, &choice, &index).clone()))
                        })
                        .collect();
                    Lottery::mix(parts.iter().map(|(p, l)| (*p, l)))
                }
                root => Lottery::degenerate(play(root, &mut Vec::new(), &choice, &index).clone()),
            };
            set.insert(lottery);
        }
        let mut i = 0;
        loop {
            if i == choice.len() {
                return (set, count);
            }
            choice[i] += 1;
            if choice[i] < widths[i] {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}
