//! Strategy dynamics in the rare-mutation limit.
//!
//! Imitation follows the pairwise comparison (Fermi) rule. A single mutant
//! either fixates or goes extinct before the next mutation, so the
//! population moves between the four monomorphic states through an embedded
//! chain whose rates are fixation probabilities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::game::{Action, ModelParams, Scenario, StageTable, Strategy};
use crate::markov;
use crate::norms::SocialNorm;
use crate::repchain::{self, PairPayoffProfile};

/// Fixation probability of a single X-mutant among `Z - 1` Y-residents.
///
/// `gx[m-1]` and `gy[m-1]` are the payoffs with `m` X-players. The ratio of
/// backward to forward transition rates at `m` is `exp(-beta (gX - gY))`,
/// and the products are accumulated in log space.
pub fn fixation_probability(gx: &[f64], gy: &[f64], beta: f64) -> Result<f64> {
    if gx.len() != gy.len() || gx.is_empty() {
        return Err(ModelError::Numerical(format!(
            "payoff profile lengths {} and {} must match and be non-empty",
            gx.len(),
            gy.len()
        )));
    }
    let mut logs = Vec::with_capacity(gx.len());
    let mut acc = 0.0f64;
    for (m, (a, b)) in gx.iter().zip(gy).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(ModelError::Numerical(format!("non-finite payoff at m = {}", m + 1)));
        }
        acc -= beta * (a - b);
        logs.push(acc);
    }
    // rho = 1 / (1 + sum_k exp(logs[k]))
    let top = logs.iter().copied().fold(0.0f64, f64::max);
    let denom = (-top).exp() + logs.iter().map(|l| (l - top).exp()).sum::<f64>();
    Ok((-top).exp() / denom)
}

pub fn fixation_from_profile(profile: &PairPayoffProfile, beta: f64) -> Result<f64> {
    fixation_probability(&profile.gx, &profile.gy, beta)
}

/// `rho[X][Y]`: fixation probability of an X-mutant in a Y population,
/// indexed by [`Strategy::index`]. The diagonal is unused and zero.
pub type FixationMatrix = [[f64; 4]; 4];

/// The embedded chain over monomorphic states: `a_XY = (mu / 4) rho_YX`.
pub fn embedded_matrix(rho: &FixationMatrix, mu: f64) -> [[f64; 4]; 4] {
    let mut a = [[0.0; 4]; 4];
    for x in 0..4 {
        for y in 0..4 {
            if x != y {
                a[x][y] = mu / 4.0 * rho[y][x];
            }
        }
        a[x][x] = 1.0 - (0..4).filter(|&y| y != x).map(|y| a[x][y]).sum::<f64>();
    }
    a
}

/// Stationary distribution `Phi` of the embedded chain.
pub fn embedded_stationary(rho: &FixationMatrix, mu: f64) -> Result<[f64; 4]> {
    let a = embedded_matrix(rho, mu);
    let rows: Vec<Vec<f64>> = a.iter().map(|r| r.to_vec()).collect();
    let phi = markov::gth_dense(&rows)?;
    Ok([phi[0], phi[1], phi[2], phi[3]])
}

fn indicator(a: Action) -> f64 {
    if a.is_fair() {
        1.0
    } else {
        0.0
    }
}

/// Fairness of the monomorphic X population, given `v(i|X)` over `i = 0..=Z`.
pub fn strategy_fairness(x: Strategy, v: &[f64], eps: f64) -> f64 {
    match x {
        Strategy::UU => 0.0,
        Strategy::FF => 1.0 - eps,
        _ => {
            let z = (v.len() - 1) as f64;
            v.iter()
                .enumerate()
                .map(|(i, w)| {
                    let share_good = i as f64 / z;
                    w * (1.0 - eps) * (share_good * indicator(x.to_good) + (1.0 - share_good) * indicator(x.to_bad))
                })
                .sum()
        }
    }
}

/// `F = sum_X Phi_X f_F(X)`.
pub fn fairness_level(phi: &[f64; 4], fairness: &[f64; 4]) -> f64 {
    phi.iter().zip(fairness).map(|(p, f)| p * f).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvasionEdge {
    pub mutant: Strategy,
    pub resident: Strategy,
    pub rho: f64,
    /// `rho > 1/Z`.
    pub favored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvasionGraph {
    pub edges: Vec<InvasionEdge>,
    /// `(X, Y)` where X invades Y favorably and Y does not invade X favorably.
    pub superior: Vec<(Strategy, Strategy)>,
}

impl InvasionGraph {
    pub fn is_favored(&self, mutant: Strategy, resident: Strategy) -> bool {
        self.edges
            .iter()
            .any(|e| e.mutant == mutant && e.resident == resident && e.favored)
    }

    pub fn is_superior(&self, x: Strategy, y: Strategy) -> bool {
        self.superior.contains(&(x, y))
    }
}

pub fn classify_invasions(rho: &FixationMatrix, z: usize) -> InvasionGraph {
    let neutral = 1.0 / z as f64;
    let mut edges = Vec::with_capacity(12);
    let mut superior = Vec::new();
    for x in Strategy::ALL {
        for y in Strategy::ALL {
            if x == y {
                continue;
            }
            let r = rho[x.index()][y.index()];
            edges.push(InvasionEdge {
                mutant: x,
                resident: y,
                rho: r,
                favored: r > neutral,
            });
            if r > neutral && rho[y.index()][x.index()] <= neutral {
                superior.push((x, y));
            }
        }
    }
    InvasionGraph { edges, superior }
}

/// Evolutionary summary of one norm in one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm: SocialNorm,
    pub norm_matrix: String,
    pub scenario: Scenario,
    pub params: ModelParams,
    /// Steady-state strategy frequencies in [`Strategy::ALL`] order.
    pub phi: [f64; 4],
    pub rho: FixationMatrix,
    /// `f_F(X)` in [`Strategy::ALL`] order.
    pub strategy_fairness: [f64; 4],
    pub fairness: f64,
    pub invasions: InvasionGraph,
}

impl NormReport {
    pub fn phi_of(&self, x: Strategy) -> f64 {
        self.phi[x.index()]
    }

    pub fn rho_of(&self, mutant: Strategy, resident: Strategy) -> f64 {
        self.rho[mutant.index()][resident.index()]
    }

    pub fn fairness_of(&self, x: Strategy) -> f64 {
        self.strategy_fairness[x.index()]
    }
}

/// A [`NormReport`] together with the monomorphic reputation distributions
/// `v(i|X)` it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct NormAnalysis {
    pub report: NormReport,
    pub monomorphic: [Vec<f64>; 4],
}

/// The six unordered strategy pairs.
fn pairs() -> Vec<(Strategy, Strategy)> {
    let mut out = Vec::with_capacity(6);
    for (k, &x) in Strategy::ALL.iter().enumerate() {
        for &y in &Strategy::ALL[k + 1..] {
            out.push((x, y));
        }
    }
    out
}

/// Fixation probabilities of every ordered pair; each unordered pair's
/// profile serves both directions.
pub fn fixation_matrix(params: &ModelParams, table: &StageTable) -> Result<FixationMatrix> {
    let results: Vec<(Strategy, Strategy, f64, f64)> = pairs()
        .into_par_iter()
        .map(|(x, y)| {
            let prof = repchain::pair_payoff_profile_with_table(x, y, params.z, table)?;
            let xy = fixation_from_profile(&prof, params.beta)?;
            let yx = fixation_from_profile(&prof.swapped(), params.beta)?;
            Ok((x, y, xy, yx))
        })
        .collect::<Result<_>>()?;
    let mut rho = [[0.0; 4]; 4];
    for (x, y, xy, yx) in results {
        rho[x.index()][y.index()] = xy;
        rho[y.index()][x.index()] = yx;
    }
    Ok(rho)
}

pub fn analyze_norm(norm: SocialNorm, scenario: &Scenario, params: &ModelParams) -> Result<NormAnalysis> {
    params.validate()?;
    scenario.validate()?;
    let table = StageTable::new(scenario, params, norm);
    let rho = fixation_matrix(params, &table)?;

    let monomorphic: Vec<Vec<f64>> = Strategy::ALL
        .par_iter()
        .map(|&x| Ok(repchain::monomorphic_distribution_with_table(x, params.z, &table)?.marginal_i()))
        .collect::<Result<_>>()?;
    let monomorphic: [Vec<f64>; 4] = monomorphic.try_into().expect("four strategies");

    let strategy_fairness: [f64; 4] =
        std::array::from_fn(|k| self::strategy_fairness(Strategy::ALL[k], &monomorphic[k], params.eps));
    let phi = embedded_stationary(&rho, params.mu)?;
    let fairness = fairness_level(&phi, &strategy_fairness);

    Ok(NormAnalysis {
        report: NormReport {
            norm,
            norm_matrix: norm.to_string(),
            scenario: *scenario,
            params: *params,
            phi,
            rho,
            strategy_fairness,
            fairness,
            invasions: classify_invasions(&rho, params.z),
        },
        monomorphic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, Just};
    use proptest::strategy::Strategy as _;
    use proptest::{prop_assert, proptest};

    /// First-step analysis of the birth-death chain solved as a linear
    /// system: `(T+ + T-) x_m - T- x_{m-1} - T+ x_{m+1} = 0` for
    /// `m = 1..Z-1`, `x_0 = 0`, `x_Z = 1`, by the Thomas algorithm.
    fn recurrence_oracle(gx: &[f64], gy: &[f64], beta: f64) -> f64 {
        let z = gx.len() + 1;
        let fermi = |d: f64| 1.0 / (1.0 + (-beta * d).exp());
        let n = z - 1;
        let (mut lower, mut diag, mut upper, mut rhs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let m = k + 1;
            let frac = m as f64 * (z - m) as f64 / (z * (z - 1)) as f64;
            let t_plus = frac * fermi(gx[k] - gy[k]);
            let t_minus = frac * fermi(gy[k] - gx[k]);
            diag[k] = t_plus + t_minus;
            lower[k] = -t_minus;
            upper[k] = -t_plus;
            if m == z - 1 {
                rhs[k] = t_plus;
            }
        }
        for k in 1..n {
            let w = lower[k] / diag[k - 1];
            diag[k] -= w * upper[k - 1];
            rhs[k] -= w * rhs[k - 1];
        }
        let mut x = vec![0.0; n];
        x[n - 1] = rhs[n - 1] / diag[n - 1];
        for k in (0..n - 1).rev() {
            x[k] = (rhs[k] - upper[k] * x[k + 1]) / diag[k];
        }
        x[0]
    }

    #[test]
    fn neutral_and_zero_selection() {
        for z in [3usize, 10, 50] {
            let g = vec![0.37; z - 1];
            assert!((fixation_probability(&g, &g, 1.0).unwrap() - 1.0 / z as f64).abs() < 1e-15);
            let gx: Vec<f64> = (0..z - 1).map(|k| k as f64 * 0.1).collect();
            let gy: Vec<f64> = (0..z - 1).map(|k| 1.0 - k as f64 * 0.02).collect();
            assert_eq!(fixation_probability(&gx, &gy, 0.0).unwrap(), 1.0 / z as f64);
        }
        assert!((fixation_probability(&[0.5; 49], &[0.5; 49], 1.0).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn constant_gap_matches_geometric_series() {
        for &(z, c, beta) in &[(10usize, 0.1f64, 1.0f64), (50, -0.05, 1.0), (50, 0.2, 2.0), (3, 0.7, 0.5)] {
            let gx = vec![0.5 + c; z - 1];
            let gy = vec![0.5; z - 1];
            let oracle = (1.0 - (-beta * c).exp()) / (1.0 - (-beta * c * z as f64).exp());
            let rho = fixation_probability(&gx, &gy, beta).unwrap();
            assert!((rho - oracle).abs() < 1e-13, "z={z} c={c}: {rho} vs {oracle}");
        }
    }

    #[test]
    fn large_selection_does_not_overflow() {
        let gx = vec![0.0; 49];
        let gy = vec![1.0; 49];
        let rho = fixation_probability(&gx, &gy, 1000.0).unwrap();
        assert!(rho >= 0.0 && rho < 1e-300);
        let rho = fixation_probability(&gy, &gx, 1000.0).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        assert!(fixation_probability(&[f64::NAN], &[0.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn closed_form_matches_first_step_recurrence(
            z in prop::sample::select(vec![3usize, 10, 50]),
            seed in prop::collection::vec(-1.0f64..1.0, 98),
            beta in 0.0f64..3.0,
        ) {
            let gx: Vec<f64> = seed[..z - 1].iter().map(|d| 0.5 + 0.5 * d).collect();
            let gy: Vec<f64> = seed[49..49 + z - 1].iter().map(|d| 0.5 - 0.3 * d).collect();
            let rho = fixation_probability(&gx, &gy, beta).unwrap();
            let oracle = recurrence_oracle(&gx, &gy, beta);
            prop_assert!((rho - oracle).abs() <= 1e-9 * oracle.abs().max(1e-300), "{} vs {}", rho, oracle);
        }

        #[test]
        fn stationary_is_invariant_to_mu(entries in prop::collection::vec(1e-6f64..0.9, 16)) {
            let rho: FixationMatrix = std::array::from_fn(|x| std::array::from_fn(|y| if x == y { 0.0 } else { entries[4 * x + y] }));
            let a = embedded_stationary(&rho, 0.01).unwrap();
            let b = embedded_stationary(&rho, 1e-6).unwrap();
            for k in 0..4 {
                prop_assert!((a[k] - b[k]).abs() < 1e-10);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // Phi = Phi A
            let m = embedded_matrix(&rho, 0.01);
            for y in 0..4 {
                let lhs: f64 = (0..4).map(|x| a[x] * m[x][y]).sum();
                prop_assert!((lhs - a[y]).abs() < 1e-14);
            }
        }

        #[test]
        fn fairness_level_ignores_enumeration_order(
            phi_raw in prop::collection::vec(0.0f64..1.0, 4),
            ff in prop::collection::vec(0.0f64..1.0, 4),
            perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let total: f64 = phi_raw.iter().sum::<f64>().max(1e-9);
            let phi: [f64; 4] = std::array::from_fn(|k| phi_raw[k] / total);
            let f: [f64; 4] = std::array::from_fn(|k| ff[k]);
            let phi_p: [f64; 4] = std::array::from_fn(|k| phi[perm[k]]);
            let f_p: [f64; 4] = std::array::from_fn(|k| f[perm[k]]);
            prop_assert!((fairness_level(&phi, &f) - fairness_level(&phi_p, &f_p)).abs() < 1e-14);
        }

        #[test]
        fn payoff_shift_leaves_fixation_unchanged(
            gx in prop::collection::vec(0.0f64..1.0, 9),
            gy in prop::collection::vec(0.0f64..1.0, 9),
            shift in -5.0f64..5.0,
        ) {
            let a = fixation_probability(&gx, &gy, 1.0).unwrap();
            let sx: Vec<f64> = gx.iter().map(|g| g + shift).collect();
            let sy: Vec<f64> = gy.iter().map(|g| g + shift).collect();
            let b = fixation_probability(&sx, &sy, 1.0).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_fixation_gives_uniform_phi() {
        let rho: FixationMatrix = std::array::from_fn(|x| std::array::from_fn(|y| if x == y { 0.0 } else { 0.02 }));
        let phi = embedded_stationary(&rho, 0.01).unwrap();
        for p in phi {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn strategy_fairness_examples() {
        let unit = |z: usize, at: usize| {
            let mut v = vec![0.0; z + 1];
            v[at] = 1.0;
            v
        };
        assert_eq!(strategy_fairness(Strategy::FF, &unit(50, 3), 0.01), 0.99);
        assert_eq!(strategy_fairness(Strategy::UU, &unit(50, 3), 0.01), 0.0);
        assert!((strategy_fairness(Strategy::FU, &unit(50, 50), 0.01) - 0.99).abs() < 1e-15);
        assert!((strategy_fairness(Strategy::UF, &unit(50, 25), 0.01) - 0.495).abs() < 1e-15);
        assert!((strategy_fairness(Strategy::UF, &unit(50, 0), 0.01) - 0.99).abs() < 1e-15);
    }

    #[test]
    fn fairness_level_examples() {
        let ff = [0.0, 0.4, 0.7, 0.99];
        assert_eq!(fairness_level(&[1.0, 0.0, 0.0, 0.0], &ff), 0.0);
        assert_eq!(fairness_level(&[0.0, 0.0, 0.0, 1.0], &ff), 0.99);
    }

    #[test]
    fn neutral_fixation_has_no_favored_edges() {
        let z = 50;
        let rho: FixationMatrix = std::array::from_fn(|x| std::array::from_fn(|y| if x == y { 0.0 } else { 1.0 / z as f64 }));
        let g = classify_invasions(&rho, z);
        assert_eq!(g.edges.len(), 12);
        assert!(g.edges.iter().all(|e| !e.favored));
        assert!(g.superior.is_empty());
    }

    #[test]
    fn superiority_needs_one_sided_advantage() {
        let z = 10;
        let mut rho = [[0.1; 4]; 4];
        rho[Strategy::FU.index()][Strategy::UU.index()] = 0.3;
        rho[Strategy::UU.index()][Strategy::FU.index()] = 0.01;
        rho[Strategy::UF.index()][Strategy::FF.index()] = 0.3;
        rho[Strategy::FF.index()][Strategy::UF.index()] = 0.2;
        let g = classify_invasions(&rho, z);
        assert!(g.is_superior(Strategy::FU, Strategy::UU));
        assert!(!g.is_superior(Strategy::UU, Strategy::FU));
        assert!(g.is_favored(Strategy::UF, Strategy::FF) && g.is_favored(Strategy::FF, Strategy::UF));
        assert!(!g.is_superior(Strategy::UF, Strategy::FF));
        // exactly 1/Z is not favored
        assert!(!g.is_favored(Strategy::UU, Strategy::UF));
    }

    #[test]
    fn behaviourally_identical_pair_is_neutral() {
        // Under the all-good norm with eps = 0, FU and FF never meet a bad
        // recipient once everyone is good, but start all-bad; check the
        // cleaner case of UU against itself relabelled through the profile.
        let params = ModelParams { z: 12, ..ModelParams::default() };
        let table = StageTable::new(&Scenario::Benchmark, &params, SocialNorm::from_label(113));
        let prof = repchain::pair_payoff_profile_with_table(Strategy::UU, Strategy::UU, 12, &table).unwrap();
        let rho = fixation_from_profile(&prof, params.beta).unwrap();
        assert!((rho - 1.0 / 12.0).abs() < 1e-12);
    }
}
