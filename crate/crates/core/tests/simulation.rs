use std::collections::BTreeMap;

use proptest::prelude::*;
use solomonic::chain_sim::{
    trace_from_jsonl, trace_to_jsonl, Chain, ChainConfig, ClaimMessage, Event, Evidence, TieBreak, TxBody, TxId,
    TxRequest,
};
use solomonic::clause::{round_bound, selection_size, Clause, ClauseConfig, ClauseState, ConfirmedClaim};
use solomonic::scenario::{presets, run_repetition, run_scenario, RunOutcome, Scenario};
use solomonic::types::{Address, ChallengeAction, ContractId, Settlement, Tick};

fn claim(payee: &str, fee: u64) -> TxRequest {
    TxRequest {
        sender: Address::new(payee),
        fee,
        body: TxBody::Claim(ClaimMessage {
            contract: ContractId(0),
            payee: Address::new(payee),
            evidence: Evidence { token: 1, valid: true },
            precommit: None,
        }),
    }
}

/// Broadcasts `(tick, fee)` messages in order and mines until the pool drains.
/// Returns each message's `(height, index in block)`.
fn mine(config: &ChainConfig, txs: &[(Tick, u64)]) -> Vec<(u64, usize)> {
    let mut chain = Chain::new(config.clone()).unwrap();
    let mut ids = Vec::new();
    let mut order: Vec<usize> = (0..txs.len()).collect();
    order.sort_by_key(|&i| txs[i].0);
    let mut next = 0;
    let mut tick = 0;
    while next < order.len() || !chain.mempool().is_empty() {
        while next < order.len() && txs[order[next]].0 == tick {
            let i = order[next];
            let r = chain.broadcast(claim(&format!("0x{i:02x}"), txs[i].1), tick).unwrap();
            ids.push((i, r.tx));
            next += 1;
        }
        if config.is_block_boundary(tick) {
            chain.build_block(tick).unwrap();
        }
        tick += 1;
    }
    let mut place: BTreeMap<TxId, (u64, usize)> = BTreeMap::new();
    for b in chain.blocks() {
        for (k, t) in b.transactions.iter().enumerate() {
            assert!(place.insert(t.id, (b.height, k)).is_none(), "included twice");
        }
    }
    let mut out = vec![(0, 0); txs.len()];
    for (i, id) in ids {
        out[i] = place[&id];
    }
    out
}

fn config(tie_break: TieBreak, seed: u64) -> ChainConfig {
    ChainConfig {
        block_interval: 4,
        block_capacity: 2,
        observation_latency: 1,
        tie_break,
        seed,
    }
}

proptest! {
    #[test]
    fn raising_a_fee_never_delays_inclusion(
        txs in proptest::collection::vec((0u64..12, 0u64..6), 1..12),
        pick in any::<prop::sample::Index>(),
        bump in 1u64..5,
        random in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let cfg = config(if random { TieBreak::Random } else { TieBreak::TimeThenAddress }, seed);
        let j = pick.index(txs.len());
        let before = mine(&cfg, &txs);
        let mut raised = txs.clone();
        raised[j].1 += bump;
        let after = mine(&cfg, &raised);
        prop_assert!(after[j] <= before[j], "{:?} -> {:?}", before[j], after[j]);
    }

    #[test]
    fn every_broadcast_is_included_once_or_pending(
        txs in proptest::collection::vec((0u64..20, 0u64..6), 1..20),
        horizon in 0u64..24,
    ) {
        let mut chain = Chain::new(config(TieBreak::TimeThenAddress, 3)).unwrap();
        let mut sorted = txs.clone();
        sorted.sort();
        let mut ids = Vec::new();
        let mut next = 0;
        for tick in 0..=horizon {
            while next < sorted.len() && sorted[next].0 == tick {
                ids.push(chain.broadcast(claim(&format!("0x{next:02x}"), sorted[next].1), tick).unwrap().tx);
                next += 1;
            }
            if chain.config().is_block_boundary(tick) {
                chain.build_block(tick).unwrap();
            }
        }
        let pending = chain.pending_ids();
        for id in ids {
            let included = chain.blocks().iter().flat_map(|b| &b.transactions).filter(|t| t.id == id).count();
            let waiting = pending.iter().filter(|p| **p == id).count();
            prop_assert_eq!(included + waiting, 1);
        }
        for b in chain.blocks() {
            prop_assert!(b.transactions.len() <= 2);
            prop_assert!(b.transactions.windows(2).all(|w| w[0].fee >= w[1].fee));
        }
    }
}

#[test]
fn duplicate_claims_are_rejected() {
    let mut chain = Chain::new(ChainConfig::default()).unwrap();
    chain.broadcast(claim("0xa", 1), 0).unwrap();
    assert!(chain.broadcast(claim("0xa", 5), 1).is_err());
}

fn scenarios() -> Vec<Scenario> {
    let mut naive = presets::deterrence(21, 12, 3);
    naive.clause.signal = false;
    vec![
        presets::no_clause_equal_fees(5, 12, 2),
        presets::no_clause_outbid(5, 12),
        presets::deterrence(5, 12, 2),
        naive,
        presets::coalition(5, 12, 5),
    ]
}

#[test]
fn identical_seed_gives_identical_output() {
    for s in scenarios() {
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        assert_eq!(a.report.to_json_pretty(), b.report.to_json_pretty(), "{}", s.name);
        assert_eq!(a.trace_jsonl(), b.trace_jsonl(), "{}", s.name);
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(
            run_scenario(&other).unwrap().trace_jsonl(),
            a.trace_jsonl(),
            "{}",
            s.name
        );
    }
}

#[test]
fn trace_replay_rebuilds_the_chain() {
    for s in scenarios() {
        for rep in 0..4 {
            let (record, trace) = run_repetition(&s, rep).unwrap();
            let parsed = trace_from_jsonl(&trace_to_jsonl(&trace)).unwrap();
            assert_eq!(parsed, trace);
            let chain = Chain::replay(s.chain.to_config(record.seed), &parsed).unwrap();
            let blocks: Vec<Vec<TxId>> = chain
                .blocks()
                .iter()
                .map(|b| b.transactions.iter().map(|t| t.id).collect())
                .collect();
            let recorded: Vec<Vec<TxId>> = trace
                .iter()
                .filter_map(|e| match e {
                    Event::Block { txs, .. } => Some(txs.clone()),
                    _ => None,
                })
                .collect();
            assert_eq!(blocks, recorded);
        }
    }
}

#[test]
fn payoffs_reconcile_with_ledger_transfers() {
    for s in scenarios() {
        for rep in 0..6 {
            let (record, trace) = run_repetition(&s, rep).unwrap();
            let mut fees: BTreeMap<String, i128> = BTreeMap::new();
            let mut senders: BTreeMap<TxId, (String, u64)> = BTreeMap::new();
            let mut received: BTreeMap<String, i128> = BTreeMap::new();
            for e in &trace {
                match e {
                    Event::Broadcast { tx, .. } => {
                        senders.insert(tx.id, (tx.sender.as_str().to_string(), tx.fee));
                    }
                    Event::Block { txs, .. } => {
                        for id in txs {
                            let (who, fee) = &senders[id];
                            *fees.entry(who.clone()).or_default() += *fee as i128;
                        }
                    }
                    Event::Settlement { settlement, amount, .. } => {
                        *received
                            .entry(settlement.destination().as_str().to_string())
                            .or_default() += *amount as i128;
                    }
                    _ => {}
                }
            }
            let addresses: BTreeMap<String, Vec<String>> = s
                .agents
                .iter()
                .map(|a| {
                    (
                        a.name().to_string(),
                        a.addresses().iter().map(|x| x.as_str().to_string()).collect(),
                    )
                })
                .collect();
            for p in &record.payoffs {
                let own = &addresses[&p.agent];
                let got: i128 = own.iter().map(|a| received.get(a).copied().unwrap_or(0)).sum();
                let paid: i128 = own.iter().map(|a| fees.get(a).copied().unwrap_or(0)).sum();
                assert_eq!(p.received, got, "{} {}", s.name, p.agent);
                assert_eq!(p.fees, paid, "{} {}", s.name, p.agent);
                assert_eq!(
                    p.net,
                    p.received - p.fees - p.cost - p.theta_penalty,
                    "{} {}",
                    s.name,
                    p.agent
                );
            }
        }
    }
}

/// One step of an exhaustive challenge exploration: every selection the
/// clause could make and every response (assert, withdraw, silence) of every
/// selected claimant is tried.
struct Explorer {
    config: ClauseConfig,
    runs: u64,
}

impl Explorer {
    fn explore(
        &mut self,
        clause: Clause,
        height: u64,
        asserted: bool,
        withdrew: Vec<Address>,
        pool_sizes: Vec<usize>,
        n: usize,
    ) {
        let ClauseState::Challenge(ch) = clause.state().clone() else {
            let (settlement, rounds) = clause.settlement().expect("terminal state");
            self.runs += 1;
            assert!(rounds <= round_bound(n), "n={n}: {rounds} rounds");
            assert!(
                pool_sizes.windows(2).all(|w| w[1] < w[0]),
                "pool must shrink: {pool_sizes:?}"
            );
            if asserted {
                assert!(settlement.is_burn(), "n={n}: assertion did not burn");
            }
            if let Settlement::Paid(to) = settlement {
                assert!(!withdrew.contains(to), "paid a withdrawn claimant");
                assert_eq!(n, 2, "multi-claimant challenges never pay");
            }
            return;
        };
        let selected = ch.selected.clone();
        let k = selected.len();
        assert_eq!(k, selection_size(ch.pool.len()));
        for combo in 0..3usize.pow(k as u32) {
            let mut c = clause.clone();
            let mut code = combo;
            let mut any_assert = asserted;
            let mut gone = withdrew.clone();
            for a in &selected {
                let choice = code % 3;
                code /= 3;
                match choice {
                    0 => {
                        c.respond(a, ch.round, ChallengeAction::Assert, self.config.challenge_fee)
                            .unwrap();
                        any_assert = true;
                    }
                    1 => {
                        c.respond(a, ch.round, ChallengeAction::Withdraw, self.config.challenge_fee)
                            .unwrap();
                        gone.push(a.clone());
                    }
                    _ => gone.push(a.clone()),
                }
            }
            let h = ch.respond_by.max(height);
            for pick in subsets_after(&c, h) {
                let mut next = c.clone();
                let mut chosen = Some(pick);
                let mut sel = |_: &[ConfirmedClaim], k: usize, _: u32| {
                    let v = chosen.take().unwrap_or_else(|| (0..k).collect());
                    assert_eq!(v.len(), k);
                    v
                };
                next.resolve_round(h, &mut sel).unwrap();
                let mut sizes = pool_sizes.clone();
                if let ClauseState::Challenge(s) = next.state() {
                    sizes.push(s.pool.len());
                }
                self.explore(next, h, any_assert, gone.clone(), sizes, n);
            }
        }
    }
}

/// Every selection the next round could use, or a single placeholder when the
/// round settles.
fn subsets_after(clause: &Clause, height: u64) -> Vec<Vec<usize>> {
    let mut probe = clause.clone();
    let mut size = None;
    let mut sel = |pool: &[ConfirmedClaim], k: usize, _: u32| {
        size = Some(pool.len());
        (0..k).collect()
    };
    probe.resolve_round(height, &mut sel).unwrap();
    match size {
        None => vec![Vec::new()],
        Some(m) => combinations(m, selection_size(m)),
    }
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << m)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

#[test]
fn exhaustive_challenge_never_pays_after_an_assertion() {
    let mut config = ClauseConfig::new(100, 2);
    config.challenge_fee = 1;
    let mut total = 0;
    for n in 2..=6 {
        let mut explorer = Explorer {
            config: config.clone(),
            runs: 0,
        };
        for first in combinations(n, selection_size(n)) {
            let mut clause = Clause::new(ContractId(0), Address::new("payor"), config.clone()).unwrap();
            for i in 0..n {
                let mut c = ConfirmedClaim::new(format!("0xc{i}").as_str(), 1, 0);
                c.position = i;
                clause.on_claim_confirmed(c).unwrap();
            }
            let mut chosen = Some(first);
            let mut sel = |_: &[ConfirmedClaim], _: usize, _: u32| chosen.take().unwrap();
            clause.close_window(3, &mut sel).unwrap();
            explorer.explore(clause, 3, false, Vec::new(), vec![n], n);
        }
        assert!(explorer.runs > 0);
        total += explorer.runs;
    }
    assert!(total > 10_000, "explored {total} executions");
}

#[test]
fn settlement_is_idempotent() {
    let mut clause = Clause::new(ContractId(0), Address::new("payor"), ClauseConfig::new(100, 1)).unwrap();
    clause.on_claim_confirmed(ConfirmedClaim::new("0xa", 1, 0)).unwrap();
    clause
        .close_window(2, &mut |_: &[ConfirmedClaim], k: usize, _: u32| (0..k).collect())
        .unwrap();
    assert!(clause.settle().is_ok());
    assert!(clause.settle().is_err());
}

#[test]
fn simulated_outcomes_match_scenario_class() {
    let r = run_scenario(&presets::deterrence(9, 30, 2)).unwrap().report;
    assert!(r.runs.iter().all(|x| x.outcome == RunOutcome::PaidLegitimate));
    let r = run_scenario(&presets::coalition(9, 30, 6)).unwrap().report;
    assert!(r.runs.iter().all(|x| x.outcome == RunOutcome::Burned));
}

proptest! {
    #[test]
    fn hardcoded_responses_match_interactive(actions in proptest::collection::vec(any::<bool>(), 2..8), seed in any::<u64>()) {
        use rand::SeedableRng;
        use solomonic::clause::{run_challenge, PolicySelector, SelectionPolicy};
        let action = |b: bool| if b { ChallengeAction::Assert } else { ChallengeAction::Withdraw };
        let claims: Vec<ConfirmedClaim> = actions
            .iter()
            .enumerate()
            .map(|(i, &b)| ConfirmedClaim::new(format!("0xd{i}").as_str(), 1, i as u64).with_precommit(action(b)))
            .collect();
        let by_address: BTreeMap<Address, ChallengeAction> = claims.iter().map(|c| (c.payee.clone(), c.precommit.unwrap())).collect();

        let interactive_config = ClauseConfig::new(50, 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut sel = PolicySelector { policy: SelectionPolicy::UniformRandom, rng: &mut rng };
        let interactive = run_challenge(&interactive_config, claims.clone(), &mut sel, |a, _| Some(by_address[a])).unwrap();

        let mut hard_config = interactive_config.clone();
        hard_config.hardcoded_responses = true;
        let mut clause = Clause::new(ContractId(0), Address::new("payor"), hard_config).unwrap();
        for c in claims {
            clause.on_claim_confirmed(c).unwrap();
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut sel = PolicySelector { policy: SelectionPolicy::UniformRandom, rng: &mut rng };
        clause.close_window(2, &mut sel).unwrap();
        let (s, r) = clause.settlement().unwrap();
        prop_assert_eq!((s.clone(), r), interactive);
    }
}
