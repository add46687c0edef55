use serde::{Deserialize, Serialize};

use crate::game_core::{
    AgentId, Allocation, GameError, GameTree, Node, OrdinalPreference, Outcome, PreferenceProfile, Prob,
};
use crate::types::{Amount, ChallengeAction};

pub const PERFORMER: AgentId = AgentId(0);
pub const BOT: AgentId = AgentId(1);

/// Parameters of the claim game between a performer and one front-runner
/// facing the clause. Costs and fees are recorded as fines on the outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimGameParams {
    pub payment: Amount,
    pub cost: Amount,
    pub performer_fee: Amount,
    pub bot_fee: Amount,
    pub theta: Amount,
    pub challenge_fee: Amount,
    /// Challenge response the performer committed to with its claim.
    pub precommit: Option<ChallengeAction>,
}

impl ClaimGameParams {
    pub fn new(payment: Amount, cost: Amount, fee: Amount, theta: Amount) -> Self {
        ClaimGameParams {
            payment,
            cost,
            performer_fee: fee,
            bot_fee: fee,
            theta,
            challenge_fee: 0,
            precommit: None,
        }
    }

    /// The outcome where only the performer claims.
    pub fn single_claimant_outcome(&self) -> Outcome {
        Outcome::to_agent(PERFORMER).with_fine(PERFORMER, self.cost + self.performer_fee)
    }

    fn utility(&self, agent: AgentId, o: &Outcome) -> i128 {
        let t = self.payment as i128;
        let paid = match o.allocation() {
            Allocation::Agent(a) if a == agent => t,
            _ => 0,
        };
        let wrongful = agent == PERFORMER && o.allocation() == Allocation::Agent(BOT);
        paid - o.fine_on(agent) as i128 - if wrongful { self.theta as i128 } else { 0 }
    }
}

/// Game tree and preferences of the claim game.
///
/// The performer chooses whether to perform and then whether to claim. The
/// bot sees the claim and chooses whether to copy it. With two claims one
/// claimant is selected with probability one half and asserts or withdraws.
pub fn build_claim_game(params: &ClaimGameParams) -> Result<(GameTree, PreferenceProfile), GameError> {
    let p = params;
    let base = p.cost + p.performer_fee;
    let challenge = |selected: AgentId| -> Node {
        let (assert_fines, withdraw_alloc) = if selected == PERFORMER {
            ((base + p.challenge_fee, p.bot_fee), Allocation::Agent(BOT))
        } else {
            ((base, p.bot_fee + p.challenge_fee), Allocation::Agent(PERFORMER))
        };
        let asserted = Node::terminal(
            Outcome::third_party()
                .with_fine(PERFORMER, assert_fines.0)
                .with_fine(BOT, assert_fines.1),
        );
        let withdrawn = Node::terminal(
            Outcome::new(withdraw_alloc)
                .with_fine(PERFORMER, base)
                .with_fine(BOT, p.bot_fee),
        );
        match (selected, p.precommit) {
            (PERFORMER, Some(ChallengeAction::Assert)) => asserted,
            (PERFORMER, Some(ChallengeAction::Withdraw)) => withdrawn,
            _ => Node::decision(selected, [("assert", asserted), ("withdraw", withdrawn)]),
        }
    };
    let bot = Node::decision(
        BOT,
        [
            ("abstain", Node::terminal(p.single_claimant_outcome())),
            (
                "claim",
                Node::chance([(Prob::half(), challenge(PERFORMER)), (Prob::half(), challenge(BOT))]),
            ),
        ],
    );
    let performed = Node::decision(
        PERFORMER,
        [
            ("claim", bot),
            (
                "abstain",
                Node::terminal(Outcome::new(Allocation::Unpaid).with_fine(PERFORMER, p.cost)),
            ),
        ],
    );
    let root = Node::decision(
        PERFORMER,
        [
            ("perform", performed),
            ("idle", Node::terminal(Outcome::new(Allocation::Unpaid))),
        ],
    );
    let game = GameTree::new(root)?;
    let outcomes: Vec<Outcome> = game.terminal_outcomes().into_iter().map(|(_, o)| o).collect();
    let mut prefs = PreferenceProfile::new();
    for agent in [PERFORMER, BOT] {
        let pref = OrdinalPreference::from_score(agent, outcomes.iter().cloned(), |o| p.utility(agent, o))?;
        prefs.insert(agent, pref);
    }
    Ok((game, prefs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_core::{brute_force_spe, is_unique_outcome, solve_spe};

    #[test]
    fn theta_positive_single_claimant() {
        let params = ClaimGameParams {
            challenge_fee: 1,
            ..ClaimGameParams::new(100, 10, 2, 5)
        };
        let (g, prefs) = build_claim_game(&params).unwrap();
        let sol = solve_spe(&g, &prefs).unwrap();
        let u = is_unique_outcome(&sol);
        assert!(u.unique);
        assert_eq!(u.witness[0].sure_outcome(), Some(&params.single_claimant_outcome()));
        assert_eq!(brute_force_spe(&g, &prefs).unwrap().outcome_set, sol.outcome_set);
    }

    #[test]
    fn zero_theta_without_commitment_is_not_resolvable() {
        let params = ClaimGameParams {
            challenge_fee: 1,
            ..ClaimGameParams::new(100, 10, 2, 0)
        };
        let (g, prefs) = build_claim_game(&params).unwrap();
        let err = solve_spe(&g, &prefs).unwrap_err();
        assert_eq!(err.kind(), "incomparable_lottery");
    }

    #[test]
    fn response_fee_at_theta_leaves_performer_indifferent() {
        let params = ClaimGameParams {
            challenge_fee: 1,
            ..ClaimGameParams::new(100, 1, 1, 1)
        };
        let (g, prefs) = build_claim_game(&params).unwrap();
        let err = solve_spe(&g, &prefs).unwrap_err();
        assert_eq!(err.kind(), "incomparable_lottery");
    }

    #[test]
    fn precommitted_assert_replaces_theta() {
        let params = ClaimGameParams {
            challenge_fee: 1,
            precommit: Some(ChallengeAction::Assert),
            ..ClaimGameParams::new(100, 10, 2, 0)
        };
        let (g, prefs) = build_claim_game(&params).unwrap();
        let sol = solve_spe(&g, &prefs).unwrap();
        let u = is_unique_outcome(&sol);
        assert!(u.unique);
        assert_eq!(u.witness[0].sure_outcome(), Some(&params.single_claimant_outcome()));
    }

    #[test]
    fn unprofitable_work_is_not_done() {
        let (g, prefs) = build_claim_game(&ClaimGameParams::new(10, 10, 2, 5)).unwrap();
        let sol = solve_spe(&g, &prefs).unwrap();
        let u = is_unique_outcome(&sol);
        assert_eq!(u.witness[0].sure_outcome(), Some(&Outcome::new(Allocation::Unpaid)));
    }
}
