//! The simultaneous-report mechanism for Solomon's dilemma.
//!
//! Two agents, `a` and `b`, each know which of them is the true mother. A
//! proposer and a responder report the state; agreement implements the
//! reported allocation, disagreement fines both and lets the proposer send a
//! challenge message. A challenge that matches the responder's report
//! implements that allocation and refunds the responder; otherwise the baby
//! goes to a third party and both fines stand.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game_core::{
    brute_force_spe, is_unique_outcome, profile_from, solve_spe, AgentId, Allocation, GameError, GameTree, Lottery,
    Node, OrdinalPreference, Outcome, PreferenceProfile, Prob,
};
use crate::types::Amount;

pub const AGENT_A: AgentId = AgentId(0);
pub const AGENT_B: AgentId = AgentId(1);

#[derive(Debug, Error)]
pub enum SolomonError {
    #[error("invalid fine regime: {0}")]
    InvalidFineRegime(String),
    #[error("malformed transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Which agent is the true mother.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolomonState {
    Alpha,
    Beta,
}

impl SolomonState {
    pub fn true_mother(self) -> AgentId {
        match self {
            SolomonState::Alpha => AGENT_A,
            SolomonState::Beta => AGENT_B,
        }
    }

    /// Allocation implemented when this state is reported.
    pub fn allocation(self) -> Allocation {
        Allocation::Agent(self.true_mother())
    }

    pub fn label(self) -> &'static str {
        match self {
            SolomonState::Alpha => "alpha",
            SolomonState::Beta => "beta",
        }
    }

    pub fn other(self) -> Self {
        match self {
            SolomonState::Alpha => SolomonState::Beta,
            SolomonState::Beta => SolomonState::Alpha,
        }
    }

    pub const ALL: [SolomonState; 2] = [SolomonState::Alpha, SolomonState::Beta];
}

impl fmt::Display for SolomonState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerSelection {
    /// Each agent proposes with probability one half.
    Random,
    A,
    B,
}

impl ProposerSelection {
    pub const ALL: [ProposerSelection; 3] = [ProposerSelection::A, ProposerSelection::B, ProposerSelection::Random];

    pub fn swapped(self) -> Self {
        match self {
            ProposerSelection::A => ProposerSelection::B,
            ProposerSelection::B => ProposerSelection::A,
            ProposerSelection::Random => ProposerSelection::Random,
        }
    }
}

/// Order in which the stage-one reports are placed in the perfect-information
/// tree. The reports are simultaneous in the mechanism, so both orders are
/// solved and must agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportOrder {
    ProposerFirst,
    ResponderFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolomonConfig {
    pub state: SolomonState,
    pub fine: Amount,
    pub proposer: ProposerSelection,
    pub order: ReportOrder,
}

impl SolomonConfig {
    pub fn new(state: SolomonState, fine: Amount, proposer: ProposerSelection) -> Self {
        SolomonConfig {
            state,
            fine,
            proposer,
            order: ReportOrder::ProposerFirst,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Proposer,
    Responder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Report,
    Challenge,
}

/// One message sent to the mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolomonMessage {
    role: Role,
    claim: SolomonState,
    stage: Stage,
}

impl SolomonMessage {
    pub fn report(role: Role, claim: SolomonState) -> Self {
        SolomonMessage {
            role,
            claim,
            stage: Stage::Report,
        }
    }

    /// Only the proposer may send a challenge message.
    pub fn challenge(role: Role, claim: SolomonState) -> Result<Self, SolomonError> {
        if role != Role::Proposer {
            return Err(SolomonError::Transcript(
                "challenge messages come from the proposer".into(),
            ));
        }
        Ok(SolomonMessage {
            role,
            claim,
            stage: Stage::Challenge,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn claim(&self) -> SolomonState {
        self.claim
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }
}

/// Outcome implemented by the mechanism for a complete transcript:
/// proposer report, responder report and, on disagreement, the challenge.
pub fn sr_outcome(proposer: AgentId, fine: Amount, transcript: &[SolomonMessage]) -> Result<Outcome, SolomonError> {
    let responder = other_agent(proposer);
    let find = |role, stage| transcript.iter().find(|m| m.role == role && m.stage == stage);
    let m_p = find(Role::Proposer, Stage::Report)
        .ok_or_else(|| SolomonError::Transcript("missing proposer report".into()))?;
    let m_r = find(Role::Responder, Stage::Report)
        .ok_or_else(|| SolomonError::Transcript("missing responder report".into()))?;
    let challenge = find(Role::Proposer, Stage::Challenge);
    if m_p.claim == m_r.claim {
        if challenge.is_some() {
            return Err(SolomonError::Transcript("challenge sent without disagreement".into()));
        }
        return Ok(Outcome::new(m_r.claim.allocation()));
    }
    let m_c = challenge.ok_or_else(|| SolomonError::Transcript("disagreement requires a challenge message".into()))?;
    Ok(if m_c.claim == m_r.claim {
        // responder refunded, proposer's fine stands
        Outcome::new(m_r.claim.allocation()).with_fine(proposer, fine)
    } else {
        Outcome::third_party()
            .with_fine(proposer, fine)
            .with_fine(responder, fine)
    })
}

pub fn other_agent(agent: AgentId) -> AgentId {
    if agent == AGENT_A {
        AGENT_B
    } else {
        AGENT_A
    }
}

fn fixed_proposer_game(proposer: AgentId, fine: Amount, order: ReportOrder) -> Node {
    let responder = other_agent(proposer);
    let stage_two = |m_p: SolomonState, m_r: SolomonState| -> Node {
        let reports = [
            SolomonMessage::report(Role::Proposer, m_p),
            SolomonMessage::report(Role::Responder, m_r),
        ];
        if m_p == m_r {
            let o = sr_outcome(proposer, fine, &reports).expect("agreeing transcript");
            return Node::terminal(o);
        }
        Node::decision(
            proposer,
            SolomonState::ALL.map(|m_c| {
                let msg = SolomonMessage::challenge(Role::Proposer, m_c).expect("proposer challenge");
                let o = sr_outcome(proposer, fine, &[reports[0], reports[1], msg]).expect("complete transcript");
                (m_c.label(), Node::terminal(o))
            }),
        )
    };
    match order {
        ReportOrder::ProposerFirst => Node::decision(
            proposer,
            SolomonState::ALL.map(|m_p| {
                (
                    m_p.label(),
                    Node::decision(
                        responder,
                        SolomonState::ALL.map(|m_r| (m_r.label(), stage_two(m_p, m_r))),
                    ),
                )
            }),
        ),
        ReportOrder::ResponderFirst => Node::decision(
            responder,
            SolomonState::ALL.map(|m_r| {
                (
                    m_r.label(),
                    Node::decision(
                        proposer,
                        SolomonState::ALL.map(|m_p| (m_p.label(), stage_two(m_p, m_r))),
                    ),
                )
            }),
        ),
    }
}

/// The mechanism's game form. With a random proposer the root is a chance
/// node whose branch `chance#0` makes `a` the proposer.
pub fn build_solomon_game(config: &SolomonConfig) -> GameTree {
    let root = match config.proposer {
        ProposerSelection::A => fixed_proposer_game(AGENT_A, config.fine, config.order),
        ProposerSelection::B => fixed_proposer_game(AGENT_B, config.fine, config.order),
        ProposerSelection::Random => Node::chance([
            (Prob::half(), fixed_proposer_game(AGENT_A, config.fine, config.order)),
            (Prob::half(), fixed_proposer_game(AGENT_B, config.fine, config.order)),
        ]),
    };
    GameTree::new(root).expect("mechanism tree is well formed")
}

/// Rankings that the mechanism designer may assume.
///
/// With ordinal preferences "the fine is small" is the pair of strict
/// rankings below, not a numeric bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRegime {
    /// The true mother prefers a fined third-party allocation to the rival getting the baby.
    pub mother_prefers_fined_third_party_to_rival: bool,
    /// The rival prefers the true mother getting the baby to a fined third-party allocation.
    /// False models malice towards the true mother.
    pub rival_prefers_mother_to_fined_third_party: bool,
}

impl PreferenceRegime {
    pub const SMALL_FINE: PreferenceRegime = PreferenceRegime {
        mother_prefers_fined_third_party_to_rival: true,
        rival_prefers_mother_to_fined_third_party: true,
    };

    pub const MALICE: PreferenceRegime = PreferenceRegime {
        mother_prefers_fined_third_party_to_rival: true,
        rival_prefers_mother_to_fined_third_party: false,
    };

    pub fn check(&self) -> Result<(), SolomonError> {
        if !self.mother_prefers_fined_third_party_to_rival {
            return Err(SolomonError::InvalidFineRegime(
                "true mother must prefer (C, -F) to the rival's allocation".into(),
            ));
        }
        if !self.rival_prefers_mother_to_fined_third_party {
            return Err(SolomonError::InvalidFineRegime(
                "the other agent must prefer the true mother's allocation to (C, -F)".into(),
            ));
        }
        Ok(())
    }
}

/// All twelve outcomes the mechanism can produce with fine `fine`.
pub fn solomon_outcomes(fine: Amount) -> Vec<Outcome> {
    let mut out = Vec::with_capacity(12);
    for alloc in [
        Allocation::Agent(AGENT_A),
        Allocation::Agent(AGENT_B),
        Allocation::ThirdParty,
    ] {
        for (fa, fb) in [(0, 0), (fine, 0), (0, fine), (fine, fine)] {
            out.push(Outcome::new(alloc).with_fine(AGENT_A, fa).with_fine(AGENT_B, fb));
        }
    }
    out
}

/// Preferences under the small-fine assumptions.
pub fn build_solomon_preferences(state: SolomonState, fine: Amount) -> Result<PreferenceProfile, SolomonError> {
    build_solomon_preferences_with(state, fine, PreferenceRegime::SMALL_FINE)
}

/// Preferences for `regime`; fails with `InvalidFineRegime` unless the
/// regime satisfies both small-fine rankings.
pub fn build_solomon_preferences_with(
    state: SolomonState,
    fine: Amount,
    regime: PreferenceRegime,
) -> Result<PreferenceProfile, SolomonError> {
    regime.check()?;
    regime_preferences(state, fine, regime)
}

/// Preferences for any regime, including ones that break the small-fine
/// assumptions. Used to demonstrate how truthfulness fails.
pub fn regime_preferences(
    state: SolomonState,
    fine: Amount,
    regime: PreferenceRegime,
) -> Result<PreferenceProfile, SolomonError> {
    if fine == 0 {
        return Err(SolomonError::InvalidFineRegime("fine must be positive".into()));
    }
    let mother = state.true_mother();
    let rival = other_agent(mother);
    let outcomes = solomon_outcomes(fine);

    // Lower tier = better. Each agent cares about the allocation and whether
    // they personally are fined.
    let mother_tier = |o: &Outcome| -> u8 {
        let fined = o.fine_on(mother) > 0;
        match (o.allocation(), fined) {
            (Allocation::Agent(x), false) if x == mother => 0,
            (Allocation::Agent(x), true) if x == mother => 1,
            (Allocation::ThirdParty, false) => 2,
            (Allocation::ThirdParty, true) if regime.mother_prefers_fined_third_party_to_rival => 3,
            (Allocation::ThirdParty, true) => 4,
            (_, false) if regime.mother_prefers_fined_third_party_to_rival => 4,
            (_, false) => 3,
            (_, true) => 5,
        }
    };
    let rival_tier = |o: &Outcome| -> u8 {
        let fined = o.fine_on(rival) > 0;
        let own = o.allocation() == Allocation::Agent(rival);
        let third = o.allocation() == Allocation::ThirdParty;
        match (own, third, fined) {
            (true, _, false) => 0,
            (true, _, true) => 1,
            _ if regime.rival_prefers_mother_to_fined_third_party => {
                // indifferent between the mother's allocation and a third party
                if fined {
                    3
                } else {
                    2
                }
            }
            (false, true, false) => 2,
            (false, true, true) => 3,
            (false, false, false) => 4,
            (false, false, true) => 5,
        }
    };
    let pm = OrdinalPreference::from_score(mother, outcomes.clone(), |o| std::cmp::Reverse(mother_tier(o)))?;
    let pr = OrdinalPreference::from_score(rival, outcomes, |o| std::cmp::Reverse(rival_tier(o)))?;
    Ok(profile_from([pm, pr]))
}

/// Result of checking one parameter point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prop1Case {
    pub state: SolomonState,
    pub proposer: ProposerSelection,
    pub fine: Amount,
    pub outcome_set: BTreeSet<Lottery>,
    pub unique: bool,
    pub truthful: bool,
    /// Largest total fine charged by any SPE outcome.
    pub fines_on_path: Amount,
    pub orders_agree: bool,
    pub oracle_agrees: bool,
    pub profile_count: u128,
    pub equilibrium_path: Vec<String>,
    pub violation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub regime: PreferenceRegime,
    pub regime_valid: bool,
    pub cases: Vec<Prop1Case>,
    pub all_truthful: bool,
}

impl Prop1Report {
    pub fn violations(&self) -> impl Iterator<Item = &Prop1Case> {
        self.cases.iter().filter(|c| c.violation.is_some())
    }
}

/// Solves one configuration in both report orders and cross-checks the
/// solver against profile enumeration.
pub fn check_case(
    state: SolomonState,
    proposer: ProposerSelection,
    fine: Amount,
    regime: PreferenceRegime,
) -> Result<Prop1Case, SolomonError> {
    let prefs = regime_preferences(state, fine, regime)?;
    let mut cfg = SolomonConfig::new(state, fine, proposer);
    let game = build_solomon_game(&cfg);
    let sol = solve_spe(&game, &prefs)?;
    let oracle = brute_force_spe(&game, &prefs)?;
    cfg.order = ReportOrder::ResponderFirst;
    let alt_game = build_solomon_game(&cfg);
    let alt = solve_spe(&alt_game, &prefs)?;
    let alt_oracle = brute_force_spe(&alt_game, &prefs)?;

    let oracle_agrees = oracle.outcome_set == sol.outcome_set
        && oracle.profile_count == sol.profile_count
        && alt_oracle.outcome_set == alt.outcome_set
        && alt_oracle.profile_count == alt.profile_count;
    let orders_agree = sol.outcome_set == alt.outcome_set;
    let uniq = is_unique_outcome(&sol);
    let truthful_outcome = Lottery::degenerate(Outcome::new(state.allocation()));
    let truthful = uniq.unique && uniq.witness[0] == truthful_outcome;
    let fines_on_path = sol
        .outcome_set
        .iter()
        .flat_map(|l| l.support().map(|(o, _)| o.total_fines()).collect::<Vec<_>>())
        .max()
        .unwrap_or(0);
    let equilibrium_path: Vec<String> = sol
        .equilibrium_path(&game)
        .into_iter()
        .map(|(node, acts)| format!("{node} -> {}", acts.into_iter().collect::<Vec<_>>().join("|")))
        .collect();

    let mut problems = Vec::new();
    if !uniq.unique {
        problems.push(format!(
            "SPE outcome not unique: {}",
            sol.outcome_set
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(" ; ")
        ));
    } else if !truthful {
        problems.push(format!("SPE outcome `{}` is not truthful", uniq.witness[0]));
    }
    if !orders_agree {
        problems.push("report orders give different outcome sets".into());
    }
    if !oracle_agrees {
        problems.push("solver disagrees with profile enumeration".into());
    }
    let violation = if problems.is_empty() {
        None
    } else {
        Some(format!(
            "{}; path: {}",
            problems.join("; "),
            equilibrium_path.join(", ")
        ))
    };
    Ok(Prop1Case {
        state,
        proposer,
        fine,
        outcome_set: sol.outcome_set,
        unique: uniq.unique,
        truthful,
        fines_on_path,
        orders_agree,
        oracle_agrees,
        profile_count: sol.profile_count,
        equilibrium_path,
        violation,
    })
}

/// Checks every state, proposer selection and fine in `fine_grid`.
pub fn verify_proposition1(fine_grid: &[Amount], regime: PreferenceRegime) -> Result<Prop1Report, SolomonError> {
    let mut cases = Vec::new();
    for state in SolomonState::ALL {
        for proposer in ProposerSelection::ALL {
            for &fine in fine_grid {
                cases.push(check_case(state, proposer, fine, regime)?);
            }
        }
    }
    let all_truthful = cases.iter().all(|c| c.violation.is_none());
    Ok(Prop1Report {
        regime,
        regime_valid: regime.check().is_ok(),
        cases,
        all_truthful,
    })
}
