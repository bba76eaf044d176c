//! Agent-based simulation of the same model, used to check the analytical
//! engine.
//!
//! Every replicate owns a ChaCha8 stream derived from `(seed, replicate)`, so
//! results do not depend on how replicates are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::game::{split_payoffs, Action, ModelParams, Reputation, Scenario, Strategy};
use crate::norms::SocialNorm;
use crate::repchain::{Composition, RepState, StateSpace};

/// Random stream of one replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub scenario: Scenario,
    pub norm: SocialNorm,
    pub composition: Composition,
    /// Rounds recorded after the burn-in.
    pub rounds: u64,
    pub burn_in: u64,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.scenario.validate()?;
        if self.composition.z != self.params.z {
            return Err(ModelError::InvalidComposition {
                z: self.composition.z,
                m: self.composition.m,
            });
        }
        Ok(())
    }
}

/// Time averages of a single reputation trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimSummary {
    /// Fraction of recorded rounds ending in each state, indexed like
    /// [`StateSpace`].
    pub occupancy: Vec<f64>,
    /// Mean payoff per selection of the X and Y classes (`None` if empty).
    pub payoff_x: Option<f64>,
    pub payoff_y: Option<f64>,
    pub rounds: u64,
    pub games: u64,
    pub quits: u64,
    /// Sum over rounds of the quit probability given the realized
    /// reputations, and the matching Bernoulli variance.
    pub expected_quits: f64,
    pub quit_variance: f64,
}

impl SimSummary {
    /// Standardized deviation of the realized quit count from its
    /// conditional expectation.
    pub fn quit_z_score(&self) -> f64 {
        if self.quit_variance == 0.0 {
            if self.quits as f64 == self.expected_quits {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.quits as f64 - self.expected_quits) / self.quit_variance.sqrt()
        }
    }
}

struct Population {
    strategy: Vec<Strategy>,
    is_x: Vec<bool>,
    good: Vec<bool>,
    good_x: usize,
    good_y: usize,
}

#[derive(Default)]
struct RoundLog {
    pay: [f64; 2],
    picks: [u64; 2],
    games: u64,
    quits: u64,
    expected_quits: f64,
    quit_variance: f64,
}

impl Population {
    /// Everyone starts bad; the first `m` players are X.
    fn new(comp: &Composition) -> Self {
        let is_x: Vec<bool> = (0..comp.z).map(|k| k < comp.m).collect();
        Population {
            strategy: is_x.iter().map(|&x| if x { comp.x } else { comp.y }).collect(),
            is_x,
            good: vec![false; comp.z],
            good_x: 0,
            good_y: 0,
        }
    }

    fn state(&self) -> RepState {
        RepState {
            i: self.good_x,
            j: self.good_y,
        }
    }

    fn rep(&self, k: usize) -> Reputation {
        if self.good[k] {
            Reputation::Good
        } else {
            Reputation::Bad
        }
    }

    fn set_good(&mut self, k: usize, good: bool) {
        if self.good[k] == good {
            return;
        }
        let counter = if self.is_x[k] { &mut self.good_x } else { &mut self.good_y };
        if good {
            *counter += 1;
        } else {
            *counter -= 1;
        }
        self.good[k] = good;
    }

    fn round<R: Rng>(&mut self, rng: &mut R, cfg: (&Scenario, &ModelParams, SocialNorm), log: &mut RoundLog) {
        let (scenario, params, norm) = cfg;
        let z = self.good.len();
        let d = rng.gen_range(0..z);
        let mut r = rng.gen_range(0..z - 1);
        if r >= d {
            r += 1;
        }
        let (dr, rr) = (self.rep(d), self.rep(r));
        let q = scenario.participation_prob(dr, rr);
        log.expected_quits += 1.0 - q;
        log.quit_variance += q * (1.0 - q);

        let (pd, pr) = if q >= 1.0 || rng.gen::<f64>() < q {
            log.games += 1;
            let mut action = self.strategy[d].intended(rr);
            if action == Action::Fair && rng.gen::<f64>() < params.eps {
                action = Action::Unfair;
            }
            self.set_good(d, norm.entry(dr, action, rr));
            split_payoffs(action, params.p)
        } else {
            log.quits += 1;
            let s = scenario.abstain_payoff();
            (s, s)
        };

        for (k, pay) in [(d, pd), (r, pr)] {
            let c = usize::from(!self.is_x[k]);
            log.pay[c] += pay;
            log.picks[c] += 1;
        }
    }
}

/// Run one reputation trajectory at fixed composition, starting all-bad.
pub fn simulate_reputation(cfg: &SimConfig) -> Result<SimSummary> {
    cfg.validate()?;
    let mut rng = replicate_rng(cfg.seed, 0);
    let mut pop = Population::new(&cfg.composition);
    let space = StateSpace::new(&cfg.composition);
    let game = (&cfg.scenario, &cfg.params, cfg.norm);

    let mut log = RoundLog::default();
    for _ in 0..cfg.burn_in {
        pop.round(&mut rng, game, &mut log);
    }
    let mut log = RoundLog::default();
    let mut counts = vec![0u64; space.len()];
    for _ in 0..cfg.rounds {
        pop.round(&mut rng, game, &mut log);
        counts[space.index(pop.state())] += 1;
    }

    let n = cfg.rounds.max(1) as f64;
    let mean = |c: usize| (log.picks[c] > 0).then(|| log.pay[c] / log.picks[c] as f64);
    Ok(SimSummary {
        occupancy: counts.iter().map(|&c| c as f64 / n).collect(),
        payoff_x: mean(0),
        payoff_y: mean(1),
        rounds: cfg.rounds,
        games: log.games,
        quits: log.quits,
        expected_quits: log.expected_quits,
        quit_variance: log.quit_variance,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixationConfig {
    pub params: ModelParams,
    pub scenario: Scenario,
    pub norm: SocialNorm,
    pub mutant: Strategy,
    pub resident: Strategy,
    pub replicates: u64,
    /// Reputation rounds played between consecutive imitation events; the
    /// class payoffs used by the imitation step are averaged over them.
    pub rounds_per_event: u64,
    pub seed: u64,
}

impl FixationConfig {
    /// `10 Z^2` rounds between imitation events: about `10 Z` assessments
    /// per player, far more than the reputation relaxation time.
    pub fn default_rounds_per_event(z: usize) -> u64 {
        10 * (z * z) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixationEstimate {
    pub replicates: u64,
    pub fixations: u64,
    pub frequency: f64,
    /// Binomial standard error of `frequency`.
    pub std_error: f64,
}

/// Estimate the probability that one mutant takes over a resident population.
///
/// Only imitation events that can change the composition are simulated: an
/// X imitating a Y and a Y imitating an X are equally likely among them, so
/// each event picks a direction by a fair coin and then a uniform member of
/// the imitating class. Reputations are carried over between events.
pub fn simulate_fixation(cfg: &FixationConfig) -> Result<FixationEstimate> {
    cfg.params.validate()?;
    cfg.scenario.validate()?;
    let z = cfg.params.z;
    let comp = Composition::new(z, 1, cfg.mutant, cfg.resident)?;
    let game = (&cfg.scenario, &cfg.params, cfg.norm);
    let rounds = cfg.rounds_per_event.max(1);

    let fixations: u64 = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(cfg.seed, rep);
            let mut pop = Population::new(&comp);
            let mut m = 1usize;
            while m > 0 && m < z {
                let mut log = RoundLog::default();
                for _ in 0..rounds {
                    pop.round(&mut rng, game, &mut log);
                }
                let g = [0, 1].map(|c| log.pay[c] / log.picks[c].max(1) as f64);
                let x_imitates = rng.gen::<bool>();
                let (learner_is_x, gain) = if x_imitates {
                    (true, g[1] - g[0])
                } else {
                    (false, g[0] - g[1])
                };
                let adopt = 1.0 / (1.0 + (-cfg.params.beta * gain).exp());
                if rng.gen::<f64>() < adopt {
                    let pool = if learner_is_x { m } else { z - m };
                    let pick = rng.gen_range(0..pool);
                    let k = (0..z)
                        .filter(|&k| pop.is_x[k] == learner_is_x)
                        .nth(pick)
                        .expect("class member");
                    let good = pop.good[k];
                    pop.set_good(k, false);
                    pop.is_x[k] = !learner_is_x;
                    pop.strategy[k] = if learner_is_x { cfg.resident } else { cfg.mutant };
                    pop.set_good(k, good);
                    m = if learner_is_x { m - 1 } else { m + 1 };
                }
            }
            u64::from(m == z)
        })
        .sum();

    let n = cfg.replicates.max(1) as f64;
    let frequency = fixations as f64 / n;
    Ok(FixationEstimate {
        replicates: cfg.replicates,
        fixations,
        frequency,
        std_error: (frequency * (1.0 - frequency) / n).sqrt(),
    })
}

/// Total variation distance between two distributions on the same support.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
