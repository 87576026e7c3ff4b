use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use steermap::dimbound::{self, CorrelatorTable, DataMatrix, DataScenario};
use steermap::ensemble::Ensemble;
use steermap::lhs_sdp::{self, LhsConfig};
use steermap::linalg::Tolerances;
use steermap::scenarios::{self, NoisySingletModel, Scenario, SweepConfig, SweepCriterion};
use steermap::separability::{ccnr_with, ppt_with, swap_witness_with, Criterion, LocalBasis};
use steermap::steering_map::{build_sigma_with, named_zset, ZSet};
use steermap::{Error, Result};

const EXIT_INVALID: u8 = 2;
const EXIT_UNDECIDED: u8 = 3;

/// Certify quantum steering from ensembles or correlator tables.
#[derive(Parser)]
#[command(name = "steermap", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Defaults file with `key = value` lines (tolerances, lhs_tol, sweep_points, bisection_tolerance).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact local-hidden-state test of an ensemble.
    CheckLhs {
        #[arg(long)]
        ensemble: PathBuf,
        /// Steerable iff the optimal margin is below -tol (at least 1e-8).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Map an ensemble to a bipartite operator and test it for entanglement.
    Map {
        #[arg(long)]
        ensemble: PathBuf,
        /// Built-in name (`cube`, `square`, `mub:<d>`) or a Z-set JSON file.
        #[arg(long)]
        zset: String,
        #[arg(long)]
        criterion: Criterion,
    },
    /// Determinant test on a two-outcome correlator table.
    Dimbound {
        #[arg(long)]
        correlators: PathBuf,
        #[arg(long = "dA")]
        d_a: usize,
        #[arg(long = "dB")]
        d_b: usize,
        /// Alice's operator basis does not contain the identity.
        #[arg(long)]
        no_identity_span: bool,
    },
    /// All criteria on the lossy noisy-singlet model.
    Vienna {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        lambda: f64,
    },
    /// Sweep a scenario parameter and locate detection thresholds.
    Sweep {
        #[arg(long, default_value = "werner")]
        scenario: String,
        #[arg(long, default_value_t = 3)]
        settings: usize,
        /// Comma-separated list of ppt, ccnr, swap, lhs, dimbound.
        #[arg(long, value_delimiter = ',', default_value = "ppt,lhs,dimbound")]
        criteria: Vec<SweepCriterion>,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long)]
        points: Option<usize>,
        /// Fixed λ for the vienna scenario (swept parameter is p).
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
}

struct Settings {
    tol: Tolerances,
    lhs: LhsConfig,
    sweep: SweepConfig,
}

fn load_settings(config: Option<&Path>) -> Result<Settings> {
    let mut tol = Tolerances::default();
    let mut lhs = LhsConfig::default();
    let mut sweep = SweepConfig::default();
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("{}:{}: expected key = value", path.display(), lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let number = || -> Result<f64> {
                value
                    .parse()
                    .map_err(|_| Error::validation(format!("{}:{}: `{value}` is not a number", path.display(), lineno + 1)))
            };
            match key {
                "lhs_tol" => lhs.tol = number()?,
                "lhs_max_iterations" => lhs.max_iterations = number()? as usize,
                "sweep_points" => sweep.points = number()? as usize,
                "bisection_tolerance" => sweep.tolerance = number()?,
                _ => tol.set(key, value)?,
            }
        }
    }
    if let Ok(spec) = std::env::var(steermap::linalg::tolerance::ENV_VAR) {
        tol.apply_overrides(&spec)?;
    }
    sweep.tol = tol;
    sweep.lhs = lhs;
    Ok(Settings { tol, lhs, sweep })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn load_zset(spec: &str) -> Result<ZSet> {
    let path = Path::new(spec);
    if path.is_file() {
        read_json(path)
    } else {
        named_zset(spec)
    }
}

enum Outcome {
    Done,
    Undecided,
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    let s = load_settings(cli.global.config.as_deref())?;
    match cli.command {
        Command::CheckLhs { ensemble, tol } => {
            let e: Ensemble = read_json(&ensemble)?;
            let mut cfg = s.lhs;
            if let Some(t) = tol {
                cfg.tol = t;
            }
            emit(&lhs_sdp::decide_with(&e, &cfg, &s.tol)?)?;
        }
        Command::Map {
            ensemble,
            zset,
            criterion,
        } => {
            let e: Ensemble = read_json(&ensemble)?;
            let z = load_zset(&zset)?;
            let verdict = match criterion {
                Criterion::Swap => swap_witness_with(&z, &e, &s.tol)?,
                Criterion::Ppt => ppt_with(&build_sigma_with(&z, &e, &s.tol)?, &s.tol),
                Criterion::Ccnr => {
                    let sigma = build_sigma_with(&z, &e, &s.tol)?;
                    let (ba, bb) = (LocalBasis::gell_mann(sigma.dim_a), LocalBasis::gell_mann(sigma.dim_b));
                    ccnr_with(&sigma, &ba, &bb, &s.tol)?
                }
            };
            emit(&verdict)?;
        }
        Command::Dimbound {
            correlators,
            d_a,
            d_b,
            no_identity_span,
        } => {
            let t: CorrelatorTable = read_json(&correlators)?;
            let d: DataMatrix = if t.n_a() == 3 && t.n_b() == 3 && d_a == 2 {
                dimbound::data_matrix(&t, &DataScenario::Cube3x2)?
            } else if d_a == 2 && t.n_a() == t.n_b() && t.n_b() <= 3 {
                let axes: Vec<usize> = if t.n_b() == 2 { vec![1, 3] } else { (1..=t.n_b()).collect() };
                let zset = steermap::steering_map::pauli_sign_zset(&axes)?;
                let basis = dimbound::pauli_basis(&axes)?;
                dimbound::data_matrix(&t, &DataScenario::Custom { zset, basis })?
            } else {
                return Err(Error::validation(
                    "built-in data matrices cover dA = 2 with nA = nB ≤ 3; use the library for custom Z-sets",
                ));
            };
            emit(&dimbound::verdict_with(&d, d_a, d_b, !no_identity_span, &s.tol)?)?;
        }
        Command::Vienna { p, lambda } => {
            let model = NoisySingletModel::new(p, lambda)?;
            let report = scenarios::vienna_report(&model, &s.sweep)?;
            emit(&report)?;
            if report.any_undecided() {
                return Ok(Outcome::Undecided);
            }
        }
        Command::Sweep {
            scenario,
            settings,
            criteria,
            from,
            to,
            points,
            lambda,
        } => {
            let sc = match scenario.as_str() {
                "werner" => Scenario::werner(settings)?,
                "vienna" => {
                    NoisySingletModel::new(0.0, lambda)?;
                    Scenario::Vienna { lambda }
                }
                other => return Err(Error::validation(format!("unknown scenario `{other}` (werner, vienna)"))),
            };
            let mut cfg = s.sweep;
            if let Some(n) = points {
                cfg.points = n;
            }
            let report = scenarios::sweep(&sc, from, to, &criteria, &cfg)?;
            emit(&report)?;
            if report.any_undecided() {
                return Ok(Outcome::Undecided);
            }
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Undecided) => ExitCode::from(EXIT_UNDECIDED),
        Err(e @ Error::Undecided { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_UNDECIDED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
