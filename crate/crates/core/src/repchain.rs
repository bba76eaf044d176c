//! Reputation dynamics for a population with fixed strategies.
//!
//! With `m` players using `X` and `Z - m` using `Y`, the state `(i, j)`
//! counts the good X-players and the good Y-players. Each round one ordered
//! (dictator, recipient) pair is drawn: the dictator uniformly from the
//! population and the recipient uniformly from the remaining `Z - 1`
//! players. Only the dictator's reputation can change, so every transition
//! moves `i` or `j` by at most one.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::game::{ModelParams, Reputation, Scenario, StageTable, Strategy};
use crate::markov::{self, Provenance, SparseStochastic};
use crate::norms::SocialNorm;

/// Tolerance on `|| v P - v ||_1` for an accepted limiting distribution.
pub const STATIONARY_RESIDUAL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub z: usize,
    /// Number of X-players.
    pub m: usize,
    pub x: Strategy,
    pub y: Strategy,
}

impl Composition {
    pub fn new(z: usize, m: usize, x: Strategy, y: Strategy) -> Result<Self> {
        if z < 2 || m > z {
            return Err(ModelError::InvalidComposition { z, m });
        }
        Ok(Composition { z, m, x, y })
    }

    pub fn monomorphic(z: usize, x: Strategy) -> Result<Self> {
        Composition::new(z, z, x, x)
    }

    /// Number of Y-players.
    pub fn n_y(&self) -> usize {
        self.z - self.m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RepState {
    /// Good X-players.
    pub i: usize,
    /// Good Y-players.
    pub j: usize,
}

/// Indexing of the `(m + 1)(Z - m + 1)` reputation states.
///
/// The longer axis is the major one, so that `i +- 1` and `j +- 1` moves stay
/// within a half-bandwidth of `min(m, Z - m) + 1`. The all-bad state is
/// always index 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateSpace {
    m: usize,
    n_y: usize,
    i_major: bool,
}

impl StateSpace {
    pub fn new(comp: &Composition) -> Self {
        StateSpace {
            m: comp.m,
            n_y: comp.n_y(),
            i_major: comp.n_y() <= comp.m,
        }
    }

    pub fn len(&self) -> usize {
        (self.m + 1) * (self.n_y + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, s: RepState) -> usize {
        debug_assert!(s.i <= self.m && s.j <= self.n_y);
        if self.i_major {
            s.i * (self.n_y + 1) + s.j
        } else {
            s.j * (self.m + 1) + s.i
        }
    }

    #[inline]
    pub fn state(&self, idx: usize) -> RepState {
        if self.i_major {
            RepState {
                i: idx / (self.n_y + 1),
                j: idx % (self.n_y + 1),
            }
        } else {
            RepState {
                i: idx % (self.m + 1),
                j: idx / (self.m + 1),
            }
        }
    }

    pub fn states(&self) -> impl Iterator<Item = RepState> + '_ {
        (0..self.len()).map(|k| self.state(k))
    }
}

/// Row-stochastic transition matrix over a [`StateSpace`].
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    pub comp: Composition,
    pub space: StateSpace,
    chain: SparseStochastic,
}

/// The reputation classes of a population: strategy, reputation, head count.
fn classes(comp: &Composition, s: RepState) -> [(Strategy, Reputation, usize); 4] {
    [
        (comp.x, Reputation::Good, s.i),
        (comp.x, Reputation::Bad, comp.m - s.i),
        (comp.y, Reputation::Good, s.j),
        (comp.y, Reputation::Bad, comp.n_y() - s.j),
    ]
}

impl TransitionMatrix {
    pub fn build(
        comp: &Composition,
        params: &ModelParams,
        norm: SocialNorm,
        scenario: &Scenario,
    ) -> Result<Self> {
        if comp.z < 2 || comp.m > comp.z {
            return Err(ModelError::InvalidComposition { z: comp.z, m: comp.m });
        }
        let table = StageTable::new(scenario, params, norm);
        Ok(Self::from_table(comp, &table))
    }

    pub fn from_table(comp: &Composition, table: &StageTable) -> Self {
        let space = StateSpace::new(comp);
        let z = comp.z as f64;
        let others = (comp.z - 1) as f64;

        let rows = space.states().map(|s| {
            let good = s.i + s.j;
            let bad = comp.z - good;
            // [stay, i-1, i+1, j-1, j+1]
            let mut mass = [0.0f64; 5];
            for (k, (strategy, rep, count)) in classes(comp, s).into_iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let pick = count as f64 / z;
                let is_x = k < 2;
                let (r_good, r_bad) = match rep {
                    Reputation::Good => (good - 1, bad),
                    Reputation::Bad => (good, bad - 1),
                };
                for (recipient, n) in [(Reputation::Good, r_good), (Reputation::Bad, r_bad)] {
                    if n == 0 {
                        continue;
                    }
                    let w = pick * n as f64 / others;
                    let o = table.get(strategy, rep, recipient);
                    let (moved, kept) = match rep {
                        Reputation::Good => (o.to_bad, o.to_good + o.unchanged),
                        Reputation::Bad => (o.to_good, o.to_bad + o.unchanged),
                    };
                    let slot = match (is_x, rep) {
                        (true, Reputation::Good) => 1,
                        (true, Reputation::Bad) => 2,
                        (false, Reputation::Good) => 3,
                        (false, Reputation::Bad) => 4,
                    };
                    mass[slot] += w * moved;
                    mass[0] += w * kept;
                }
            }
            let targets = [
                Some(s),
                s.i.checked_sub(1).map(|i| RepState { i, ..s }),
                Some(RepState { i: s.i + 1, ..s }),
                s.j.checked_sub(1).map(|j| RepState { j, ..s }),
                Some(RepState { j: s.j + 1, ..s }),
            ];
            targets
                .into_iter()
                .zip(mass)
                .filter(|&(t, p)| p > 0.0 && t.is_some())
                .map(|(t, p)| (space.index(t.unwrap()), p))
                .collect::<Vec<_>>()
        });

        TransitionMatrix {
            comp: *comp,
            space,
            chain: SparseStochastic::from_rows(rows),
        }
    }

    pub fn chain(&self) -> &SparseStochastic {
        &self.chain
    }

    pub fn get(&self, from: RepState, to: RepState) -> f64 {
        self.chain.get(self.space.index(from), self.space.index(to))
    }

    /// Every positive transition as `(from, to, probability)`.
    pub fn edges(&self) -> impl Iterator<Item = (RepState, RepState, f64)> + '_ {
        (0..self.space.len()).flat_map(move |k| {
            self.chain
                .row(k)
                .map(move |(t, p)| (self.space.state(k), self.space.state(t), p))
        })
    }

    /// Debug dump, one `(i,j) -> (i',j') : prob` line per positive entry.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (from, to, p) in self.edges() {
            writeln!(out, "({},{}) -> ({},{}) : {:e}", from.i, from.j, to.i, to.j, p)?;
        }
        Ok(())
    }
}

/// Long-run weights over the reputation states of one composition.
#[derive(Clone, Debug, PartialEq)]
pub struct ReputationDistribution {
    pub space: StateSpace,
    weights: Vec<f64>,
    pub provenance: Provenance,
}

impl ReputationDistribution {
    pub fn get(&self, s: RepState) -> f64 {
        self.weights[self.space.index(s)]
    }

    /// Weights in [`StateSpace`] index order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (RepState, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, &w)| (self.space.state(k), w))
    }

    /// Marginal over the number of good X-players, `i = 0..=m`.
    pub fn marginal_i(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.space.m + 1];
        for (s, w) in self.iter() {
            out[s.i] += w;
        }
        out
    }
}

/// Limiting distribution of the chain started at `start`.
///
/// Exact elimination when possible; lazy power iteration if the exact
/// result fails the residual check.
pub fn limiting_distribution(p: &TransitionMatrix, start: RepState) -> Result<ReputationDistribution> {
    let start = p.space.index(start);
    let exact = markov::limiting_distribution(p.chain(), start);
    let (weights, provenance) = match exact {
        Ok((w, prov)) if p.chain().residual(&w) < STATIONARY_RESIDUAL => (w, prov),
        _ => {
            let w = markov::iterate_limit(p.chain(), start, 1e-13, 10_000_000)?;
            let residual = p.chain().residual(&w);
            if residual >= STATIONARY_RESIDUAL {
                return Err(ModelError::NoConvergence {
                    iterations: 10_000_000,
                    residual,
                });
            }
            (w, Provenance::Iterated)
        }
    };
    Ok(ReputationDistribution {
        space: p.space,
        weights,
        provenance,
    })
}

pub const ALL_BAD: RepState = RepState { i: 0, j: 0 };

/// Expected per-selection payoff of a focal player with the given strategy
/// and reputation when the rest of the population is `counts` less itself.
///
/// The focal player is dictator or recipient with equal probability and its
/// opponent is uniform over the other `Z - 1` players.
fn focal_payoff(
    comp: &Composition,
    table: &StageTable,
    state: RepState,
    focal: Strategy,
    focal_is_x: bool,
    focal_rep: Reputation,
) -> f64 {
    let others = (comp.z - 1) as f64;
    let mut as_dictator = 0.0;
    let mut as_recipient = 0.0;
    for (k, (strategy, rep, count)) in classes(comp, state).into_iter().enumerate() {
        let own_class = (k < 2) == focal_is_x && rep == focal_rep;
        let n = count - usize::from(own_class);
        if n == 0 {
            continue;
        }
        let w = n as f64 / others;
        as_dictator += w * table.get(focal, focal_rep, rep).dictator_payoff;
        as_recipient += w * table.get(strategy, rep, focal_rep).recipient_payoff;
    }
    0.5 * (as_dictator + as_recipient)
}

/// `pi_X(m, i, j)` or `pi_Y(m, i, j)`: expected payoff of a uniformly chosen
/// member of the class in state `s`.
pub fn class_payoff_in_state(comp: &Composition, table: &StageTable, s: RepState, of_x: bool) -> Result<f64> {
    let (strategy, size, good) = if of_x {
        (comp.x, comp.m, s.i)
    } else {
        (comp.y, comp.n_y(), s.j)
    };
    if size == 0 {
        return Err(ModelError::EmptyClass(strategy, comp.m));
    }
    let pg = good as f64 / size as f64;
    let mut pay = 0.0;
    if good > 0 {
        pay += pg * focal_payoff(comp, table, s, strategy, of_x, Reputation::Good);
    }
    if good < size {
        pay += (1.0 - pg) * focal_payoff(comp, table, s, strategy, of_x, Reputation::Bad);
    }
    Ok(pay)
}

/// Expected payoff of the X class (`of_x`) or Y class under `v`.
pub fn class_payoff(
    comp: &Composition,
    table: &StageTable,
    v: &ReputationDistribution,
    of_x: bool,
) -> Result<f64> {
    v.iter()
        .filter(|&(_, w)| w != 0.0)
        .map(|(s, w)| class_payoff_in_state(comp, table, s, of_x).map(|pi| w * pi))
        .sum()
}

/// `(g_X, g_Y)` for a mixed composition `1 <= m <= Z - 1`.
pub fn expected_payoffs(
    comp: &Composition,
    params: &ModelParams,
    norm: SocialNorm,
    scenario: &Scenario,
    v: &ReputationDistribution,
) -> Result<(f64, f64)> {
    let table = StageTable::new(scenario, params, norm);
    Ok((
        class_payoff(comp, &table, v, true)?,
        class_payoff(comp, &table, v, false)?,
    ))
}

/// Payoffs of the two classes as a function of the number of X-players.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPayoffProfile {
    pub x: Strategy,
    pub y: Strategy,
    /// `g_X(m)` at index `m - 1`, for `m = 1..=Z-1`.
    pub gx: Vec<f64>,
    /// `g_Y(m)` at index `m - 1`.
    pub gy: Vec<f64>,
}

impl PairPayoffProfile {
    pub fn z(&self) -> usize {
        self.gx.len() + 1
    }

    /// The same data seen from the Y side: `m` Y-players among `Z`.
    pub fn swapped(&self) -> PairPayoffProfile {
        PairPayoffProfile {
            x: self.y,
            y: self.x,
            gx: self.gy.iter().rev().copied().collect(),
            gy: self.gx.iter().rev().copied().collect(),
        }
    }
}

fn payoffs_at(comp: &Composition, table: &StageTable) -> Result<(f64, f64)> {
    let p = TransitionMatrix::from_table(comp, table);
    let v = limiting_distribution(&p, ALL_BAD)?;
    Ok((
        class_payoff(comp, table, &v, true)?,
        class_payoff(comp, table, &v, false)?,
    ))
}

pub fn pair_payoff_profile_with_table(
    x: Strategy,
    y: Strategy,
    z: usize,
    table: &StageTable,
) -> Result<PairPayoffProfile> {
    let pairs: Vec<(f64, f64)> = (1..z)
        .into_par_iter()
        .map(|m| {
            let comp = Composition::new(z, m, x, y)?;
            payoffs_at(&comp, table).map_err(|e| ModelError::AtComposition {
                m,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let (gx, gy) = pairs.into_iter().unzip();
    Ok(PairPayoffProfile { x, y, gx, gy })
}

/// Payoff profile of X-mutants against Y-residents for `m = 1..=Z-1`, each
/// point evaluated at the limiting reputation distribution from all-bad.
pub fn pair_payoff_profile(
    x: Strategy,
    y: Strategy,
    params: &ModelParams,
    norm: SocialNorm,
    scenario: &Scenario,
) -> Result<PairPayoffProfile> {
    params.validate()?;
    scenario.validate()?;
    let table = StageTable::new(scenario, params, norm);
    pair_payoff_profile_with_table(x, y, params.z, &table)
}

pub fn monomorphic_distribution_with_table(
    x: Strategy,
    z: usize,
    table: &StageTable,
) -> Result<ReputationDistribution> {
    let comp = Composition::monomorphic(z, x)?;
    limiting_distribution(&TransitionMatrix::from_table(&comp, table), ALL_BAD)
}

/// `v(i | X)` for `i = 0..=Z` in the monomorphic X population.
pub fn monomorphic_distribution(
    x: Strategy,
    params: &ModelParams,
    norm: SocialNorm,
    scenario: &Scenario,
) -> Result<Vec<f64>> {
    let table = StageTable::new(scenario, params, norm);
    Ok(monomorphic_distribution_with_table(x, params.z, &table)?.marginal_i())
}
