//! The single-round stage game.
//!
//! A dictator splits a unit sum with a recipient. Participation may be
//! voluntary depending on the scenario, a fair intention fails with
//! probability `eps`, and an observer reassesses the dictator with the
//! social norm. The recipient's reputation never changes in a round.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, ParseError};
use crate::norms::SocialNorm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reputation {
    Good,
    Bad,
}

impl Reputation {
    pub const ALL: [Reputation; 2] = [Reputation::Good, Reputation::Bad];

    pub const fn index(self) -> usize {
        match self {
            Reputation::Good => 0,
            Reputation::Bad => 1,
        }
    }

    pub const fn is_good(self) -> bool {
        matches!(self, Reputation::Good)
    }
}

impl fmt::Display for Reputation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reputation::Good => "G",
            Reputation::Bad => "B",
        })
    }
}

impl FromStr for Reputation {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "G" | "Good" | "good" => Ok(Reputation::Good),
            "B" | "Bad" | "bad" => Ok(Reputation::Bad),
            _ => Err(ParseError::Syntax(s.to_owned())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    /// Equal split.
    Fair,
    /// Keep `1 - p`, offer `p`.
    Unfair,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Fair, Action::Unfair];

    pub const fn index(self) -> usize {
        match self {
            Action::Fair => 0,
            Action::Unfair => 1,
        }
    }

    pub fn is_fair(self) -> bool {
        matches!(self, Action::Fair)
    }

    fn letter(self) -> char {
        match self {
            Action::Fair => 'F',
            Action::Unfair => 'U',
        }
    }
}

/// Intended action toward a good recipient and toward a bad recipient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Strategy {
    pub to_good: Action,
    pub to_bad: Action,
}

impl Strategy {
    pub const UU: Strategy = Strategy::new(Action::Unfair, Action::Unfair);
    pub const UF: Strategy = Strategy::new(Action::Unfair, Action::Fair);
    pub const FU: Strategy = Strategy::new(Action::Fair, Action::Unfair);
    pub const FF: Strategy = Strategy::new(Action::Fair, Action::Fair);

    /// Canonical enumeration order used for every per-strategy array.
    pub const ALL: [Strategy; 4] = [Strategy::UU, Strategy::UF, Strategy::FU, Strategy::FF];

    pub const fn new(to_good: Action, to_bad: Action) -> Self {
        Strategy { to_good, to_bad }
    }

    pub fn index(self) -> usize {
        2 * usize::from(self.to_good.is_fair()) + usize::from(self.to_bad.is_fair())
    }

    pub fn intended(self, recipient: Reputation) -> Action {
        match recipient {
            Reputation::Good => self.to_good,
            Reputation::Bad => self.to_bad,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.to_good.letter(), self.to_bad.letter())
    }
}

impl FromStr for Strategy {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ParseError::Strategy(s.to_owned()))
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Participation regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    /// Both players must play.
    Benchmark,
    /// A good dictator facing a bad recipient abstains with probability `p1`;
    /// both players then receive `sigma`.
    DictatorOptOut { p1: f64, sigma: f64 },
    /// A recipient facing a bad dictator abstains with probability `p2`;
    /// both players then receive nothing.
    RecipientOptOut { p2: f64 },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Benchmark => "benchmark",
            Scenario::DictatorOptOut { .. } => "dictator-opt-out",
            Scenario::RecipientOptOut { .. } => "recipient-opt-out",
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Scenario::Benchmark => Ok(()),
            Scenario::DictatorOptOut { p1, sigma } => {
                check_unit("p1", p1)?;
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(ModelError::InvalidParameter {
                        name: "sigma",
                        value: sigma,
                        reason: "must be finite and non-negative",
                    });
                }
                Ok(())
            }
            Scenario::RecipientOptOut { p2 } => check_unit("p2", p2),
        }
    }

    /// Probability that the round is actually played.
    pub fn participation_prob(&self, dictator: Reputation, recipient: Reputation) -> f64 {
        match *self {
            Scenario::Benchmark => 1.0,
            Scenario::DictatorOptOut { p1, .. } => {
                if dictator.is_good() && !recipient.is_good() {
                    1.0 - p1
                } else {
                    1.0
                }
            }
            Scenario::RecipientOptOut { p2 } => {
                if dictator.is_good() {
                    1.0
                } else {
                    1.0 - p2
                }
            }
        }
    }

    /// Payoff each player receives when the round is not played.
    pub fn abstain_payoff(&self) -> f64 {
        match *self {
            Scenario::DictatorOptOut { sigma, .. } => sigma,
            Scenario::Benchmark | Scenario::RecipientOptOut { .. } => 0.0,
        }
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

/// Population-level parameters shared by every computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Population size.
    pub z: usize,
    /// Probability that a fair intention is executed as an unfair split.
    pub eps: f64,
    /// Share offered by an unfair split.
    pub p: f64,
    /// Selection intensity of the pairwise comparison rule.
    pub beta: f64,
    /// Mutation probability. Cancels from every quantity in the rare-mutation limit.
    pub mu: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            z: 50,
            eps: 0.01,
            p: 0.01,
            beta: 1.0,
            mu: 0.01,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.z < 2 {
            return Err(ModelError::InvalidParameter {
                name: "z",
                value: self.z as f64,
                reason: "population needs at least two players",
            });
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(ModelError::InvalidParameter {
                name: "eps",
                value: self.eps,
                reason: "must lie in [0, 1)",
            });
        }
        if !(0.0..=0.5).contains(&self.p) {
            return Err(ModelError::InvalidParameter {
                name: "p",
                value: self.p,
                reason: "must lie in [0, 0.5]",
            });
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "beta",
                value: self.beta,
                reason: "must be finite and non-negative",
            });
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "mu",
                value: self.mu,
                reason: "must lie in (0, 1]",
            });
        }
        Ok(())
    }
}

/// Realized action distribution as `[P(Fair), P(Unfair)]`.
///
/// Only fair intentions are subject to error.
pub fn realized_action_dist(strategy: Strategy, recipient: Reputation, eps: f64) -> [f64; 2] {
    match strategy.intended(recipient) {
        Action::Fair => [1.0 - eps, eps],
        Action::Unfair => [0.0, 1.0],
    }
}

/// `(dictator, recipient)` payoffs of a played round.
pub fn split_payoffs(action: Action, p: f64) -> (f64, f64) {
    match action {
        Action::Fair => (0.5, 0.5),
        Action::Unfair => (1.0 - p, p),
    }
}

/// Expected result of one round for a fixed ordered pair of players.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageOutcome {
    pub game_prob: f64,
    pub dictator_payoff: f64,
    pub recipient_payoff: f64,
    /// Probability the dictator is assessed good after the round.
    pub to_good: f64,
    /// Probability the dictator is assessed bad after the round.
    pub to_bad: f64,
    /// Probability no game occurs and the dictator keeps its reputation.
    pub unchanged: f64,
}

pub fn stage_outcome(
    scenario: &Scenario,
    params: &ModelParams,
    dictator: Strategy,
    dictator_rep: Reputation,
    recipient_rep: Reputation,
    norm: SocialNorm,
) -> StageOutcome {
    let game_prob = scenario.participation_prob(dictator_rep, recipient_rep);
    let abstain = scenario.abstain_payoff();
    let actions = realized_action_dist(dictator, recipient_rep, params.eps);

    let (mut dictator_payoff, mut recipient_payoff) = (0.0, 0.0);
    let (mut to_good, mut to_bad) = (0.0, 0.0);
    for (a, &prob) in Action::ALL.iter().zip(actions.iter()) {
        if prob == 0.0 {
            continue;
        }
        let (d, r) = split_payoffs(*a, params.p);
        dictator_payoff += prob * d;
        recipient_payoff += prob * r;
        if norm.entry(dictator_rep, *a, recipient_rep) {
            to_good += prob;
        } else {
            to_bad += prob;
        }
    }

    let quit = 1.0 - game_prob;
    StageOutcome {
        game_prob,
        dictator_payoff: game_prob * dictator_payoff + quit * abstain,
        recipient_payoff: game_prob * recipient_payoff + quit * abstain,
        to_good: game_prob * to_good,
        to_bad: game_prob * to_bad,
        unchanged: quit,
    }
}

/// [`stage_outcome`] for every (strategy, dictator reputation, recipient
/// reputation), indexed `[strategy.index()][dictator.index()][recipient.index()]`.
#[derive(Clone, Debug)]
pub struct StageTable {
    table: [[[StageOutcome; 2]; 2]; 4],
}

impl StageTable {
    pub fn new(scenario: &Scenario, params: &ModelParams, norm: SocialNorm) -> Self {
        let table = std::array::from_fn(|s| {
            std::array::from_fn(|d| {
                std::array::from_fn(|r| {
                    stage_outcome(
                        scenario,
                        params,
                        Strategy::ALL[s],
                        Reputation::ALL[d],
                        Reputation::ALL[r],
                        norm,
                    )
                })
            })
        });
        StageTable { table }
    }

    #[inline]
    pub fn get(&self, s: Strategy, dictator: Reputation, recipient: Reputation) -> &StageOutcome {
        &self.table[s.index()][dictator.index()][recipient.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Reputation::{Bad, Good};

    fn params() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn strategy_text_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!(Strategy::ALL.map(|s| s.index()), [0, 1, 2, 3]);
        assert_eq!(Strategy::FU.intended(Good), Action::Fair);
        assert_eq!(Strategy::FU.intended(Bad), Action::Unfair);
        assert!("FX".parse::<Strategy>().is_err());
        for r in Reputation::ALL {
            assert_eq!(r.to_string().parse::<Reputation>().unwrap(), r);
        }
    }

    #[test]
    fn participation_examples() {
        assert_eq!(Scenario::Benchmark.participation_prob(Good, Bad), 1.0);
        let s1 = Scenario::DictatorOptOut { p1: 0.5, sigma: 0.1 };
        assert_eq!(s1.participation_prob(Good, Bad), 0.5);
        assert_eq!(s1.participation_prob(Bad, Bad), 1.0);
        assert_eq!(s1.participation_prob(Good, Good), 1.0);
        let s2 = Scenario::RecipientOptOut { p2: 0.5 };
        assert_eq!(s2.participation_prob(Good, Good), 1.0);
        assert_eq!(s2.participation_prob(Bad, Good), 0.5);
        assert_eq!(s2.participation_prob(Bad, Bad), 0.5);
    }

    #[test]
    fn action_examples() {
        assert_eq!(realized_action_dist(Strategy::FF, Good, 0.01), [0.99, 0.01]);
        assert_eq!(realized_action_dist(Strategy::UU, Bad, 0.3), [0.0, 1.0]);
        assert_eq!(realized_action_dist(Strategy::UF, Bad, 0.0), [1.0, 0.0]);
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_payoffs(Action::Fair, 0.01), (0.5, 0.5));
        assert_eq!(split_payoffs(Action::Unfair, 0.01), (0.99, 0.01));
        assert_eq!(split_payoffs(Action::Unfair, 0.0), (1.0, 0.0));
    }

    #[test]
    fn stage_examples() {
        // f(G,U,G) = 1 keeps an unfair good dictator good.
        let norm = SocialNorm::from_label(0b0100_0000);
        let o = stage_outcome(&Scenario::Benchmark, &params(), Strategy::UU, Good, Good, norm);
        assert_eq!(o.game_prob, 1.0);
        assert_eq!((o.dictator_payoff, o.recipient_payoff), (0.99, 0.01));
        assert_eq!((o.to_good, o.to_bad, o.unchanged), (1.0, 0.0, 0.0));

        let p = ModelParams { eps: 0.0, ..params() };
        let s1 = Scenario::DictatorOptOut { p1: 0.5, sigma: 0.1 };
        for norm in [SocialNorm::from_label(0), SocialNorm::from_label(0b0000_1000)] {
            let o = stage_outcome(&s1, &p, Strategy::FF, Good, Bad, norm);
            assert_eq!(o.game_prob, 0.5);
            assert!((o.dictator_payoff - 0.3).abs() < 1e-15);
            assert_eq!(o.unchanged, 0.5);
            let assessed = if norm.entry(Good, Action::Fair, Bad) { o.to_good } else { o.to_bad };
            assert_eq!(assessed, 0.5);
        }

        let s2 = Scenario::RecipientOptOut { p2: 1.0 };
        for s in Strategy::ALL {
            for r in Reputation::ALL {
                let o = stage_outcome(&s2, &params(), s, Bad, r, SocialNorm::from_label(255));
                assert_eq!(o.game_prob, 0.0);
                assert_eq!((o.dictator_payoff, o.recipient_payoff), (0.0, 0.0));
                assert_eq!(o.unchanged, 1.0);
            }
        }
    }

    fn scenarios() -> [Scenario; 5] {
        [
            Scenario::Benchmark,
            Scenario::DictatorOptOut { p1: 0.5, sigma: 0.1 },
            Scenario::DictatorOptOut { p1: 1.0, sigma: 0.3 },
            Scenario::RecipientOptOut { p2: 0.5 },
            Scenario::RecipientOptOut { p2: 1.0 },
        ]
    }

    #[test]
    fn outcome_is_a_distribution_and_conserves_payoff_exhaustively() {
        for scenario in scenarios() {
            for norm in SocialNorm::all() {
                for s in Strategy::ALL {
                    for d in Reputation::ALL {
                        for r in Reputation::ALL {
                            let o = stage_outcome(&scenario, &params(), s, d, r, norm);
                            for x in [o.to_good, o.to_bad, o.unchanged, o.game_prob] {
                                assert!((0.0..=1.0).contains(&x));
                            }
                            assert!((o.to_good + o.to_bad + o.unchanged - 1.0).abs() < 1e-15);
                            assert_eq!(o.unchanged, 1.0 - o.game_prob);
                            let total = o.game_prob + o.unchanged * 2.0 * scenario.abstain_payoff();
                            assert!((o.dictator_payoff + o.recipient_payoff - total).abs() < 1e-15);
                            if scenario == Scenario::Benchmark {
                                assert!((o.dictator_payoff + o.recipient_payoff - 1.0).abs() < 1e-15);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_quit_probability_is_bit_identical_to_benchmark() {
        let zero = [
            Scenario::DictatorOptOut { p1: 0.0, sigma: 0.1 },
            Scenario::RecipientOptOut { p2: 0.0 },
        ];
        for scenario in zero {
            for norm in SocialNorm::all() {
                for s in Strategy::ALL {
                    for d in Reputation::ALL {
                        for r in Reputation::ALL {
                            let a = stage_outcome(&scenario, &params(), s, d, r, norm);
                            let b = stage_outcome(&Scenario::Benchmark, &params(), s, d, r, norm);
                            assert_eq!(a, b);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(params().validate().is_ok());
        assert!(ModelParams { z: 1, ..params() }.validate().is_err());
        assert!(ModelParams { eps: 1.0, ..params() }.validate().is_err());
        assert!(ModelParams { p: 0.6, ..params() }.validate().is_err());
        assert!(ModelParams { mu: 0.0, ..params() }.validate().is_err());
        assert!(ModelParams { beta: -1.0, ..params() }.validate().is_err());
        assert!(Scenario::RecipientOptOut { p2: 1.5 }.validate().is_err());
        assert!(Scenario::DictatorOptOut { p1: 0.5, sigma: -0.1 }.validate().is_err());
    }
}
