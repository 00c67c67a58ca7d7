//! `rankone`: exact analysis reports on rank-one cutting-and-stacking
//! constructions described by small text configs.
//!
//! Reports are JSON on stdout (CSV for the decay sweep); all rationals and
//! big integers appear as decimal strings. Exit status: 0 when the requested
//! check succeeds or verifies, 1 when a checked criterion is violated, 2 on
//! any error.

// Errors carry exact arbitrary-precision context values by design.
#![allow(clippy::result_large_err)]

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rankone::arith::parse_rat;
use rankone::sidon::{verify_sidon_stage, SamplePlan};
use rankone::{
    approximate_report, decay_sweep, r_truncated, return_spectrum, skyscraper_check, CellSet,
    Construction, Int, IntervalSet, Rat,
};

#[derive(Parser)]
#[command(
    name = "rankone",
    version,
    about = "Exact reports on rank-one cutting-and-stacking constructions"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Io {
    /// Construction config file
    config: PathBuf,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a config; report derived stage data
    Validate {
        #[command(flatten)]
        io: Io,
    },
    /// Certify single-column self-overlap at one stage
    SidonCheck {
        #[command(flatten)]
        io: Io,
        /// Stage to certify
        #[arg(long)]
        stage: u32,
        /// Tower stage the engine enumerates at
        #[arg(long)]
        resolution: u32,
        /// Unresolved-mass tolerance per engine call
        #[arg(long, default_value = "0")]
        tol: String,
    },
    /// Sweep image overlap over planned powers; CSV rows n,resolved,unresolved
    Decay {
        #[command(flatten)]
        io: Io,
        /// Moving set (towerJ, columnJ.C, levelJ.L, or an interval lo,hi)
        #[arg(long = "A")]
        a: String,
        /// Stationary set, same forms as --A
        #[arg(long = "B")]
        b: String,
        /// Power plan, e.g. exh:10 or exh:32,windows:3,per:5
        #[arg(long)]
        plan: String,
        /// Unresolved-mass tolerance per power
        #[arg(long, default_value = "0")]
        tol: String,
    },
    /// Truncated metric report against a second construction
    Metric {
        #[command(flatten)]
        io: Io,
        /// Config file of the comparison construction
        #[arg(long)]
        other: PathBuf,
        /// Reference-family truncation depth
        #[arg(short = 'K')]
        truncation: u32,
        /// Power plan, e.g. exh:32,windows:3,per:5
        #[arg(long)]
        plan: String,
        /// Total-error gate; the default accepts any truncation error
        #[arg(long, default_value = "1000000")]
        tol: String,
    },
    /// First-return spectrum of a tower base through a deeper stage
    Kakutani {
        #[command(flatten)]
        io: Io,
        /// Stage whose base is induced on
        #[arg(long)]
        stage: u32,
        /// Stage the returns are resolved through
        #[arg(long)]
        depth: u32,
        /// Interval "a,b" the swept pieces must avoid
        #[arg(long)]
        avoid: Option<String>,
        /// Return-time floor the spectrum must exceed
        #[arg(long, default_value = "0")]
        threshold: String,
        /// Tolerated overlap mass for the avoidance verdict
        #[arg(long, default_value = "0")]
        tol: String,
    },
    /// Extend a prefix by geometric spacers; report the distance back
    Approximate {
        #[command(flatten)]
        io: Io,
        /// Stage the extension starts to differ at
        #[arg(long)]
        prefix: u32,
        /// Spacer growth factor for the generated stages
        #[arg(long, default_value_t = 10)]
        growth: u32,
        /// Reference-family truncation depth
        #[arg(short = 'K')]
        truncation: u32,
        /// Power plan for the metric
        #[arg(long, default_value = "exh:32,windows:4,per:3")]
        plan: String,
        /// Total-error gate; the default accepts any truncation error
        #[arg(long, default_value = "1000000")]
        tol: String,
    },
}

/// A finished report: the bytes to emit and whether the checked criterion
/// (if any) held.
struct Report {
    body: String,
    ok: bool,
}

#[derive(Serialize)]
struct ValidateReport {
    stages: u32,
    base_height: String,
    cuts: Vec<u32>,
    heights: Vec<String>,
    widths: Vec<String>,
    tower_measures: Vec<String>,
    normalized: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (io, result) = dispatch(cli.command);
    match result {
        Ok(report) => {
            let written = match &io.out {
                Some(path) => fs::write(path, &report.body)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => {
                    print!("{}", report.body);
                    Ok(())
                }
            };
            match written {
                Ok(()) if report.ok => ExitCode::from(0),
                Ok(()) => ExitCode::from(1),
                Err(message) => {
                    eprintln!("error: {message}");
                    ExitCode::from(2)
                }
            }
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Cmd) -> (Io, Result<Report, String>) {
    match cmd {
        Cmd::Validate { io } => {
            let r = (|| {
                let text = fs::read_to_string(&io.config)
                    .map_err(|e| format!("cannot read {}: {e}", io.config.display()))?;
                let doc = config::ConfigDoc::parse(&text).map_err(str_of)?;
                let c = doc.expand().map_err(str_of)?;
                validate_report(&c, doc.render())
            })();
            (io, r)
        }
        Cmd::SidonCheck {
            io,
            stage,
            resolution,
            tol,
        } => {
            let r = (|| {
                let c = load(&io.config)?;
                let tol = rat_flag(&tol)?;
                let cert = verify_sidon_stage(&c, stage, resolution, &tol).map_err(str_of)?;
                Ok(Report {
                    ok: cert.verdict.is_verified(),
                    body: json(&cert)?,
                })
            })();
            (io, r)
        }
        Cmd::Decay {
            io,
            a,
            b,
            plan,
            tol,
        } => {
            let r = (|| {
                let c = load(&io.config)?;
                let a = parse_set(&c, &a)?;
                let b = parse_set(&c, &b)?;
                let powers = parse_plan(&plan)?.powers(&c).map_err(str_of)?;
                let tol = rat_flag(&tol)?;
                let rows = decay_sweep(&c, &a, &b, &powers, &tol).map_err(str_of)?;
                let mut body = String::from("n,resolved,unresolved\n");
                for (n, est) in &rows {
                    body.push_str(&format!("{n},{},{}\n", est.resolved, est.unresolved_bound));
                }
                Ok(Report { body, ok: true })
            })();
            (io, r)
        }
        Cmd::Metric {
            io,
            other,
            truncation,
            plan,
            tol,
        } => {
            let r = (|| {
                let c = load(&io.config)?;
                let other = load(&other)?;
                let plan = parse_plan(&plan)?;
                let tol = rat_flag(&tol)?;
                let report = r_truncated(&c, &other, truncation, &plan, &tol).map_err(str_of)?;
                Ok(Report {
                    body: json(&report)?,
                    ok: true,
                })
            })();
            (io, r)
        }
        Cmd::Kakutani {
            io,
            stage,
            depth,
            avoid,
            threshold,
            tol,
        } => {
            let r = (|| {
                let c = load(&io.config)?;
                match avoid {
                    None => {
                        let spectrum = return_spectrum(&c, stage, depth).map_err(str_of)?;
                        Ok(Report {
                            body: json(&spectrum)?,
                            ok: true,
                        })
                    }
                    Some(text) => {
                        let a = interval_set(&c, &text)?;
                        let threshold = threshold
                            .parse::<Int>()
                            .map_err(|_| format!("cannot parse threshold '{threshold}'"))?;
                        let tol = rat_flag(&tol)?;
                        let report = skyscraper_check(&c, stage, depth, &threshold, &a, &tol)
                            .map_err(str_of)?;
                        Ok(Report {
                            ok: report.avoidance_within_tol,
                            body: json(&report)?,
                        })
                    }
                }
            })();
            (io, r)
        }
        Cmd::Approximate {
            io,
            prefix,
            growth,
            truncation,
            plan,
            tol,
        } => {
            let r = (|| {
                let c = load(&io.config)?;
                let plan = parse_plan(&plan)?;
                let tol = rat_flag(&tol)?;
                let report = approximate_report(&c, prefix, growth, truncation, &plan, &tol)
                    .map_err(str_of)?;
                Ok(Report {
                    ok: report.bounds.iter().all(|b| b.within_column_bound),
                    body: json(&report)?,
                })
            })();
            (io, r)
        }
    }
}

fn str_of(e: rankone::Error) -> String {
    e.to_string()
}

fn load(path: &Path) -> Result<Construction, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    config::parse_config(&text).map_err(str_of)
}

fn rat_flag(text: &str) -> Result<Rat, String> {
    parse_rat(text).map_err(str_of)
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| format!("cannot serialize report: {e}"))
}

fn validate_report(c: &Construction, normalized: String) -> Result<Report, String> {
    let towers = 1..=c.max_stage();
    let report = ValidateReport {
        stages: c.stage_count(),
        base_height: c.base_height().to_string(),
        cuts: (1..=c.stage_count())
            .map(|j| c.stage_params(j).unwrap().cuts() as u32)
            .collect(),
        heights: towers.clone().map(|j| c.height(j).to_string()).collect(),
        widths: towers.clone().map(|j| c.width(j).to_string()).collect(),
        tower_measures: towers.map(|j| c.tower_measure(j).to_string()).collect(),
        normalized,
    };
    Ok(Report {
        body: json(&report)?,
        ok: true,
    })
}

/// Power plans: comma-joined `exh:<n>`, `windows:<stage>`, `per:<n>` in any
/// order; omitted parts default to 0, 0 and 3.
fn parse_plan(text: &str) -> Result<SamplePlan, String> {
    let mut plan = SamplePlan {
        exhaustive: 0,
        window_stage_bound: 0,
        per_window: 3,
    };
    for part in text.split(',') {
        let (key, value) = part
            .split_once(':')
            .ok_or_else(|| format!("plan part '{part}' is not key:value"))?;
        let number = value
            .parse::<u64>()
            .map_err(|_| format!("plan value '{value}' is not an integer"))?;
        match key {
            "exh" => plan.exhaustive = number,
            "windows" => {
                plan.window_stage_bound = u32::try_from(number)
                    .map_err(|_| format!("window stage bound '{value}' too large"))?
            }
            "per" => plan.per_window = number,
            other => return Err(format!("unknown plan key '{other}'")),
        }
    }
    Ok(plan)
}

/// Set atoms: `tower<j>`, `column<j>.<c>`, `level<j>.<l>`, or a half-open
/// interval `<lo>,<hi>` with rational endpoints.
fn parse_set(c: &Construction, text: &str) -> Result<CellSet, String> {
    if let Some(rest) = text.strip_prefix("tower") {
        let j = rest
            .parse::<u32>()
            .map_err(|_| format!("cannot parse tower stage '{rest}'"))?;
        return CellSet::tower(c, j).map_err(str_of);
    }
    if let Some(rest) = text.strip_prefix("column") {
        let (j, col) = dotted(rest)?;
        let col = col
            .parse::<u32>()
            .map_err(|_| format!("cannot parse column index '{col}'"))?;
        return CellSet::column(c, j, col).map_err(str_of);
    }
    if let Some(rest) = text.strip_prefix("level") {
        let (j, level) = dotted(rest)?;
        let level = level
            .parse::<Int>()
            .map_err(|_| format!("cannot parse level index '{level}'"))?;
        return CellSet::level(c, j, &level).map_err(str_of);
    }
    interval_set(c, text)
}

fn dotted(text: &str) -> Result<(u32, &str), String> {
    let (j, rest) = text
        .split_once('.')
        .ok_or_else(|| format!("expected <stage>.<index>, got '{text}'"))?;
    let j = j
        .parse::<u32>()
        .map_err(|_| format!("cannot parse stage '{j}'"))?;
    Ok((j, rest))
}

/// Addresses the interval [lo, hi) in the deepest tower; any part outside
/// the realized space is dropped with a warning on stderr.
fn interval_set(c: &Construction, text: &str) -> Result<CellSet, String> {
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| format!("expected an interval lo,hi, got '{text}'"))?;
    let lo = rat_flag(lo.trim())?;
    let hi = rat_flag(hi.trim())?;
    if lo >= hi {
        return Err(format!("empty interval {lo},{hi}"));
    }
    let (cells, unaddressed) =
        CellSet::from_intervals(c, &IntervalSet::interval(lo, hi), c.max_stage())
            .map_err(str_of)?;
    if unaddressed > Rat::from_integer(Int::from(0)) {
        eprintln!("note: interval mass {unaddressed} lies outside the realized space");
    }
    Ok(cells)
}
