//! Sweeps over norms and parameters, and their tabular output.
//!
//! Every CSV starts with `# schema=1` followed by one `# key=value` line per
//! effective parameter, then a column header. Rows are keyed (by norm label,
//! or by grid value then norm label) and always written in key order.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, ParseError, Result};
use crate::evolution::{analyze_norm, fixation_probability, NormAnalysis};
use crate::game::{ModelParams, Scenario, Strategy};
use crate::mc::{self, FixationConfig, SimConfig};
use crate::norms::{NormPattern, SocialNorm};
use crate::repchain::{self, Composition, TransitionMatrix, ALL_BAD};

pub const SCHEMA: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.55;

/// Which norms a sweep covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NormSelection {
    All,
    List(Vec<SocialNorm>),
    Pattern(NormPattern),
}

impl NormSelection {
    /// The selected norms in ascending label order, without duplicates.
    pub fn norms(&self) -> Vec<SocialNorm> {
        let mut out: Vec<SocialNorm> = match self {
            NormSelection::All => SocialNorm::all().collect(),
            NormSelection::List(v) => v.clone(),
            NormSelection::Pattern(p) => p.norms(),
        };
        out.sort();
        out.dedup();
        out
    }
}

/// Splits on commas that are not inside brackets.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (k, c) in s.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..k]);
                start = k + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

impl FromStr for NormSelection {
    type Err = ParseError;

    /// `all`, a single pattern such as `[1,0,*,*;*,1,*,1]`, or a
    /// comma-separated list of labels and matrices.
    fn from_str(s: &str) -> Result<Self, ParseError> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("all") {
            return Ok(NormSelection::All);
        }
        if t.contains('*') {
            return t.parse().map(NormSelection::Pattern);
        }
        split_top_level(t)
            .into_iter()
            .map(|item| item.trim().parse::<SocialNorm>())
            .collect::<Result<Vec<_>, _>>()
            .map(NormSelection::List)
    }
}

impl fmt::Display for NormSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormSelection::All => f.write_str("all"),
            NormSelection::Pattern(p) => write!(f, "{p}"),
            NormSelection::List(v) => {
                let labels: Vec<String> = v.iter().map(|n| n.label().to_string()).collect();
                f.write_str(&labels.join(" "))
            }
        }
    }
}

/// Parameter a grid runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAxis {
    P1,
    P2,
    Beta,
}

impl GridAxis {
    /// The grid axis natural to a scenario.
    pub fn for_scenario(scenario: &Scenario) -> GridAxis {
        match scenario {
            Scenario::DictatorOptOut { .. } => GridAxis::P1,
            Scenario::RecipientOptOut { .. } => GridAxis::P2,
            Scenario::Benchmark => GridAxis::Beta,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridAxis::P1 => "p1",
            GridAxis::P2 => "p2",
            GridAxis::Beta => "beta",
        }
    }

    /// Parameters with this axis set to `value`.
    pub fn apply(self, value: f64, scenario: &Scenario, params: &ModelParams) -> Result<(Scenario, ModelParams)> {
        let mut params = *params;
        let scenario = match (self, *scenario) {
            (GridAxis::P1, Scenario::DictatorOptOut { sigma, .. }) => Scenario::DictatorOptOut { p1: value, sigma },
            (GridAxis::P2, Scenario::RecipientOptOut { .. }) => Scenario::RecipientOptOut { p2: value },
            (GridAxis::Beta, s) => {
                params.beta = value;
                s
            }
            _ => {
                return Err(ModelError::InvalidParameter {
                    name: "grid",
                    value,
                    reason: "grid axis does not belong to the scenario",
                })
            }
        };
        scenario.validate()?;
        params.validate()?;
        Ok((scenario, params))
    }
}

/// An ascending, non-empty list of grid values.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(Vec<f64>);

impl Grid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(ModelError::InvalidParameter {
                name: "grid",
                value: f64::NAN,
                reason: "grid is empty",
            });
        }
        if let Some(w) = values.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(ModelError::InvalidParameter {
                name: "grid",
                value: w[1],
                reason: "grid must be strictly ascending",
            });
        }
        Ok(Grid(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Rounds away the representation noise of `start + k * step`.
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl FromStr for Grid {
    type Err = ParseError;

    /// `start:step:end` (end included when hit) or a comma-separated list.
    fn from_str(s: &str) -> Result<Self, ParseError> {
        let bad = || ParseError::Syntax(s.to_owned());
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [start, step, end] = parts[..] else {
                return Err(bad());
            };
            let (start, step, end) = (num(start)?, num(step)?, num(end)?);
            if !(step > 0.0) || end < start {
                return Err(bad());
            }
            let n = ((end - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| tidy(start + k as f64 * step)).collect()
        } else {
            s.split(',').map(num).collect::<Result<_, _>>()?
        };
        Grid::new(values).map_err(|_| bad())
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v: Vec<String> = self.0.iter().map(f64::to_string).collect();
        f.write_str(&v.join(" "))
    }
}

/// `# schema=1` and `# key=value` lines for a run.
pub fn header(command: &str, scenario: &Scenario, params: &ModelParams, extra: &[(&str, String)]) -> String {
    let mut h = format!("# schema={SCHEMA}\n# command={command}\n# scenario={}\n", scenario.name());
    match *scenario {
        Scenario::Benchmark => {}
        Scenario::DictatorOptOut { p1, sigma } => {
            let _ = writeln!(h, "# p1={p1}\n# sigma={sigma}");
        }
        Scenario::RecipientOptOut { p2 } => {
            let _ = writeln!(h, "# p2={p2}");
        }
    }
    let _ = writeln!(
        h,
        "# z={}\n# eps={}\n# p={}\n# beta={}\n# mu={}",
        params.z, params.eps, params.p, params.beta, params.mu
    );
    for (k, v) in extra {
        let _ = writeln!(h, "# {k}={v}");
    }
    h
}

fn strategy_columns(prefix: &str) -> String {
    Strategy::ALL.map(|s| format!("{prefix}_{s}")).join(",")
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// One row of a norm sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub norm: SocialNorm,
    pub phi: [f64; 4],
    pub strategy_fairness: [f64; 4],
    pub fairness: f64,
    pub high: bool,
}

impl NormRow {
    pub fn columns() -> String {
        format!(
            "norm,entries,{},{},fairness,high",
            strategy_columns("phi"),
            strategy_columns("ff")
        )
    }

    pub fn key(&self) -> u8 {
        self.norm.label()
    }

    pub fn to_csv(&self) -> String {
        let entries: String = self.norm.entries().iter().map(|&e| if e { '1' } else { '0' }).collect();
        format!(
            "{},{},{},{},{},{}",
            self.norm.label(),
            entries,
            join(&self.phi),
            join(&self.strategy_fairness),
            self.fairness,
            u8::from(self.high)
        )
    }
}

pub fn norm_row(norm: SocialNorm, scenario: &Scenario, params: &ModelParams, threshold: f64) -> Result<NormRow> {
    let r = analyze_norm(norm, scenario, params)?.report;
    Ok(NormRow {
        norm,
        phi: r.phi,
        strategy_fairness: r.strategy_fairness,
        fairness: r.fairness,
        high: r.fairness > threshold,
    })
}

/// One row per norm, in label order.
pub fn sweep_norms(
    norms: &[SocialNorm],
    scenario: &Scenario,
    params: &ModelParams,
    threshold: f64,
) -> Result<Vec<NormRow>> {
    let mut rows: Vec<NormRow> = norms
        .par_iter()
        .map(|&n| norm_row(n, scenario, params, threshold))
        .collect::<Result<_>>()?;
    rows.sort_by_key(NormRow::key);
    Ok(rows)
}

/// One row of a parameter sweep. `focus` is the strategy whose abundance
/// drives fairness in the scenario: FU when recipients opt out, UF when
/// dictators do, and the most abundant strategy in the benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub value: f64,
    pub norm: SocialNorm,
    pub fairness: f64,
    pub focus: Strategy,
    pub phi_focus: f64,
    pub ff_focus: f64,
}

impl ParamRow {
    pub fn columns(axis: GridAxis) -> String {
        format!("{},norm,fairness,focus,phi_focus,ff_focus", axis.name())
    }

    /// Sort key: grid value, then label.
    pub fn key(&self) -> (u64, u8) {
        (self.value.to_bits(), self.norm.label())
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.value,
            self.norm.label(),
            self.fairness,
            self.focus,
            self.phi_focus,
            self.ff_focus
        )
    }
}

pub fn param_row(
    axis: GridAxis,
    value: f64,
    norm: SocialNorm,
    scenario: &Scenario,
    params: &ModelParams,
) -> Result<ParamRow> {
    let (scenario, params) = axis.apply(value, scenario, params)?;
    let r = analyze_norm(norm, &scenario, &params)?.report;
    let focus = match scenario {
        Scenario::RecipientOptOut { .. } => Strategy::FU,
        Scenario::DictatorOptOut { .. } => Strategy::UF,
        Scenario::Benchmark => Strategy::ALL
            .into_iter()
            .fold(Strategy::UU, |best, s| if r.phi_of(s) > r.phi_of(best) { s } else { best }),
    };
    Ok(ParamRow {
        value,
        norm,
        fairness: r.fairness,
        focus,
        phi_focus: r.phi_of(focus),
        ff_focus: r.fairness_of(focus),
    })
}

/// One row per (grid value, norm), ordered by grid value then label.
pub fn sweep_param(
    axis: GridAxis,
    grid: &Grid,
    norms: &[SocialNorm],
    scenario: &Scenario,
    params: &ModelParams,
) -> Result<Vec<ParamRow>> {
    let tasks: Vec<(f64, SocialNorm)> = grid
        .values()
        .iter()
        .flat_map(|&v| norms.iter().map(move |&n| (v, n)))
        .collect();
    let mut rows: Vec<ParamRow> = tasks
        .par_iter()
        .map(|&(v, n)| param_row(axis, v, n, scenario, params))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.norm.cmp(&b.norm)));
    Ok(rows)
}

/// JSON form of a norm analysis.
pub fn detail_json(analysis: &NormAnalysis) -> String {
    serde_json::to_string_pretty(&analysis.report).expect("report serializes") + "\n"
}

/// Columns `i, v_UU, v_UF, v_FU, v_FF` of the monomorphic reputation
/// distributions.
pub fn monomorphic_csv(analysis: &NormAnalysis) -> String {
    let mut out = format!("i,{}\n", strategy_columns("v"));
    let z = analysis.report.params.z;
    for i in 0..=z {
        let row: Vec<f64> = analysis.monomorphic.iter().map(|v| v[i]).collect();
        let _ = writeln!(out, "{i},{}", join(&row));
    }
    out
}

/// A fixed (norm, scenario, composition) case compared against simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub name: String,
    pub norm: SocialNorm,
    pub scenario: Scenario,
    pub composition: Composition,
}

/// Ten cases at population size `z` spanning the three scenarios, mixed
/// and monomorphic compositions.
pub fn oracle_panel(z: usize) -> Result<Vec<OracleCase>> {
    use Strategy as S;
    let s1 = Scenario::DictatorOptOut { p1: 0.5, sigma: 0.1 };
    let s2 = Scenario::RecipientOptOut { p2: 0.5 };
    let spec: [(u8, Scenario, usize, Strategy, Strategy); 10] = [
        (165, Scenario::Benchmark, 1, S::FU, S::UU),
        (133, Scenario::Benchmark, z / 2, S::FU, S::UF),
        (101, Scenario::Benchmark, 1, S::FF, S::UF),
        (229, s1, 1, S::UF, S::UU),
        (101, s1, z / 2, S::UF, S::FU),
        (69, s1, 1, S::FF, S::UF),
        (133, s2, 1, S::FU, S::UU),
        (165, s2, z / 2, S::FU, S::FF),
        (181, s2, 1, S::UF, S::FU),
        (149, s2, z - 1, S::UU, S::FU),
    ];
    spec.into_iter()
        .map(|(label, scenario, m, x, y)| {
            let norm = SocialNorm::from_label(label);
            Ok(OracleCase {
                name: format!("{}:{}:{}{}x{}", label, scenario.name(), x, m, y),
                norm,
                scenario,
                composition: Composition::new(z, m, x, y)?,
            })
        })
        .collect()
}

/// A single pass/fail comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub case: String,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(case: &str, metric: &str, value: f64, tolerance: f64) -> Self {
        Check {
            case: case.to_owned(),
            metric: metric.to_owned(),
            value,
            tolerance,
            passed: value < tolerance,
        }
    }

    pub fn columns() -> &'static str {
        "case,metric,value,tolerance,passed"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.case,
            self.metric,
            self.value,
            self.tolerance,
            u8::from(self.passed)
        )
    }
}

/// Effort of a validation run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationBudget {
    pub rounds: u64,
    pub burn_in: u64,
    pub replicates: u64,
    pub rounds_per_event: u64,
    pub seed: u64,
}

impl ValidationBudget {
    pub fn standard(z: usize, seed: u64) -> Self {
        ValidationBudget {
            rounds: 1_000_000,
            burn_in: 100_000,
            replicates: 10_000,
            rounds_per_event: FixationConfig::default_rounds_per_event(z),
            seed,
        }
    }
}

/// Compares one case against simulation: occupancy (total variation below
/// 0.02), class payoffs (below 0.01), the quit rate (|z| below 3) and the
/// fixation probability of one X-mutant among Y (below 3 standard errors).
pub fn check_case(case: &OracleCase, params: &ModelParams, budget: &ValidationBudget) -> Result<Vec<Check>> {
    let comp = case.composition;
    let params = ModelParams { z: comp.z, ..*params };
    let p = TransitionMatrix::build(&comp, &params, case.norm, &case.scenario)?;
    let v = repchain::limiting_distribution(&p, ALL_BAD)?;

    let sim = mc::simulate_reputation(&SimConfig {
        params,
        scenario: case.scenario,
        norm: case.norm,
        composition: comp,
        rounds: budget.rounds,
        burn_in: budget.burn_in,
        seed: budget.seed,
    })?;

    let mut checks = vec![Check::new(
        &case.name,
        "occupancy_tv",
        mc::total_variation(&sim.occupancy, v.weights()),
        0.02,
    )];
    let (gx, gy) = {
        let table = crate::game::StageTable::new(&case.scenario, &params, case.norm);
        let gx = (comp.m > 0).then(|| repchain::class_payoff(&comp, &table, &v, true)).transpose()?;
        let gy = (comp.m < comp.z).then(|| repchain::class_payoff(&comp, &table, &v, false)).transpose()?;
        (gx, gy)
    };
    for (metric, analytic, empirical) in [("payoff_x", gx, sim.payoff_x), ("payoff_y", gy, sim.payoff_y)] {
        if let (Some(a), Some(e)) = (analytic, empirical) {
            checks.push(Check::new(&case.name, metric, (a - e).abs(), 0.01));
        }
    }
    checks.push(Check::new(&case.name, "quit_rate_z", sim.quit_z_score().abs(), 3.0));

    if comp.x != comp.y {
        let prof = repchain::pair_payoff_profile(comp.x, comp.y, &params, case.norm, &case.scenario)?;
        let rho = fixation_probability(&prof.gx, &prof.gy, params.beta)?;
        let est = mc::simulate_fixation(&FixationConfig {
            params,
            scenario: case.scenario,
            norm: case.norm,
            mutant: comp.x,
            resident: comp.y,
            replicates: budget.replicates,
            rounds_per_event: budget.rounds_per_event,
            seed: budget.seed,
        })?;
        let se = est.std_error.max(1.0 / budget.replicates.max(1) as f64);
        checks.push(Check::new(&case.name, "fixation_se", (est.frequency - rho).abs() / se, 3.0));
    }
    Ok(checks)
}

/// Runs [`check_case`] over the panel, in panel order.
pub fn validate(panel: &[OracleCase], params: &ModelParams, budget: &ValidationBudget) -> Result<Vec<Check>> {
    let per_case: Vec<Vec<Check>> = panel
        .par_iter()
        .map(|c| check_case(c, params, budget))
        .collect::<Result<_>>()?;
    Ok(per_case.into_iter().flatten().collect())
}
