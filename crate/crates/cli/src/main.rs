use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fairdg::sweep::{self, Check, NormRow, ParamRow, ValidationBudget};
use fairdg::{analyze_norm, SocialNorm};

mod output;
mod settings;

use output::KeyedTable;
use settings::{CommonArgs, Defaults, Settings};

#[derive(Parser)]
#[command(name = "fairdg", version, about = "Fairness under social norms in the evolutionary dictator game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One row per norm: strategy frequencies, strategy fairness and fairness level
    SweepNorms(CommonArgs),
    /// Full report of one norm as JSON, plus its monomorphic reputation distributions
    NormDetail(CommonArgs),
    /// Fairness of each norm along a grid of p1, p2 or beta
    SweepParam(CommonArgs),
    /// Compare the analytical engine with simulation on a fixed panel
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Recorded rounds per reputation trajectory
        #[arg(long, default_value_t = 1_000_000)]
        rounds: u64,
        /// Fixation replicates per case
        #[arg(long, default_value_t = 10_000)]
        replicates: u64,
    },
}

enum Outcome {
    Done,
    ChecksFailed,
}

fn sweep_norms(args: &CommonArgs) -> Result<Outcome> {
    let s = Settings::resolve(args, Defaults { z: 50, norms: "all" })?;
    let extra = [("norms", s.norms.to_string()), ("threshold", s.threshold.to_string())];
    let table = KeyedTable {
        header: format!(
            "{}{}\n",
            sweep::header("sweep-norms", &s.scenario, &s.params, &extra),
            NormRow::columns()
        ),
        keys: s.norms.norms(),
        key_of: |row| row.split(',').next()?.parse().ok().map(SocialNorm::from_label),
    };
    s.pool()?.install(|| {
        table.run(s.out.as_deref(), |&n| {
            Ok(sweep::norm_row(n, &s.scenario, &s.params, s.threshold)?.to_csv())
        })
    })?;
    Ok(Outcome::Done)
}

fn sweep_param(args: &CommonArgs) -> Result<Outcome> {
    let s = Settings::resolve(args, Defaults { z: 50, norms: "all" })?;
    let Some(grid) = &s.grid else {
        bail!("sweep-param needs --grid");
    };
    // Fail early on an axis that does not fit the scenario.
    s.axis.apply(grid.values()[0], &s.scenario, &s.params)?;
    let extra = [
        ("norms", s.norms.to_string()),
        ("axis", s.axis.name().to_owned()),
        ("grid", grid.to_string()),
    ];
    let keys: Vec<(u64, SocialNorm)> = grid
        .values()
        .iter()
        .flat_map(|v| s.norms.norms().into_iter().map(move |n| (v.to_bits(), n)))
        .collect();
    let table = KeyedTable {
        header: format!(
            "{}{}\n",
            sweep::header("sweep-param", &s.scenario, &s.params, &extra),
            ParamRow::columns(s.axis)
        ),
        keys,
        key_of: |row| {
            let mut f = row.split(',');
            let v: f64 = f.next()?.parse().ok()?;
            let n: u8 = f.next()?.parse().ok()?;
            Some((v.to_bits(), SocialNorm::from_label(n)))
        },
    };
    s.pool()?.install(|| {
        table.run(s.out.as_deref(), |&(v, n)| {
            Ok(sweep::param_row(s.axis, f64::from_bits(v), n, &s.scenario, &s.params)?.to_csv())
        })
    })?;
    Ok(Outcome::Done)
}

fn norm_detail(args: &CommonArgs) -> Result<Outcome> {
    if args.norms.is_none() {
        bail!("norm-detail needs --norms with a single norm");
    }
    let s = Settings::resolve(args, Defaults { z: 50, norms: "all" })?;
    let [norm] = s.norms.norms()[..] else {
        bail!("norm-detail takes exactly one norm, got {}", s.norms);
    };
    let analysis = s.pool()?.install(|| analyze_norm(norm, &s.scenario, &s.params))?;
    let json = sweep::detail_json(&analysis);
    let csv = format!(
        "{}{}",
        sweep::header("norm-detail", &s.scenario, &s.params, &[("norm", norm.label().to_string())]),
        sweep::monomorphic_csv(&analysis)
    );
    match &s.out {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(json.as_bytes())?;
        }
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write(&dir.join(format!("norm_{}.json", norm.label())), &json)?;
            write(&dir.join(format!("norm_{}_monomorphic.csv", norm.label())), &csv)?;
        }
    }
    Ok(Outcome::Done)
}

fn validate(args: &CommonArgs, rounds: u64, replicates: u64) -> Result<Outcome> {
    let s = Settings::resolve(args, Defaults { z: 10, norms: "all" })?;
    let z = s.params.z;
    let budget = ValidationBudget {
        rounds,
        replicates,
        ..ValidationBudget::standard(z, s.seed)
    };
    let panel = sweep::oracle_panel(z)?;
    let checks = s.pool()?.install(|| sweep::validate(&panel, &s.params, &budget))?;

    let extra = [
        ("seed", s.seed.to_string()),
        ("rounds", rounds.to_string()),
        ("replicates", replicates.to_string()),
    ];
    let mut csv = format!(
        "{}{}\n",
        sweep::header("validate", &s.scenario, &s.params, &extra),
        Check::columns()
    );
    for c in &checks {
        csv.push_str(&c.to_csv());
        csv.push('\n');
    }
    match &s.out {
        None => std::io::stdout().lock().write_all(csv.as_bytes())?,
        Some(path) => write(path, &csv)?,
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        eprintln!("{failed} of {} checks failed", checks.len());
        return Ok(Outcome::ChecksFailed);
    }
    Ok(Outcome::Done)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SweepNorms(a) => sweep_norms(a),
        Command::NormDetail(a) => norm_detail(a),
        Command::SweepParam(a) => sweep_param(a),
        Command::Validate {
            common,
            rounds,
            replicates,
        } => validate(common, *rounds, *replicates),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
