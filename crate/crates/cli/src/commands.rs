use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use kolmo_core::counterexample::{bad_psi_level, juxtaposition, LinearCandidate};
use kolmo_core::exact::{format_rational, parse_rational, precision_from_env, to_decimal, BigFloat, Round};
use kolmo_core::outer::{DEFAULT_CUBE_LIMIT, DEFAULT_GRID};
use kolmo_core::town::default_epsilon;
use kolmo_core::verify::ConvergenceReport;
use kolmo_core::{
    build_with_audit, check_convergence, check_criterion, check_cube_separation, decompose as run_decompose, Embedding,
    OuterOptions, PiecewiseLinear, RefineOptions, RefinementState, TargetFunction, Verdict, VerificationReport,
    Weighting,
};

use crate::svg;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Args)]
pub struct BuildArgs {
    /// Dimension of the cube.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Family shift, a rational such as 1/5. Defaults to 1/(2n+1).
    #[arg(long)]
    epsilon: Option<String>,
    /// Number of refinement levels after the root.
    #[arg(long)]
    levels: usize,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

/// Written next to the state files of a build.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct BuildManifest {
    pub n: usize,
    pub epsilon: String,
    pub levels: usize,
    /// The construction uses no randomness; rerunning reproduces every file.
    pub deterministic: bool,
    pub version: String,
    pub states: Vec<String>,
    pub audit: String,
}

fn state_file_name(level: usize) -> String {
    format!("state_{level:02}.json")
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

pub fn build(a: BuildArgs) -> Result<()> {
    let epsilon = match &a.epsilon {
        Some(s) => parse_rational(s)?,
        None => default_epsilon(a.n),
    };
    kolmo_core::town::validate_parameters(a.n, &epsilon)?;
    let (states, audits) = build_with_audit(a.n, epsilon.clone(), a.levels, &RefineOptions::default())?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", a.out.display())))?;

    let mut names = Vec::with_capacity(states.len());
    for s in &states {
        let name = state_file_name(s.level);
        write(&a.out.join(&name), &(s.to_json()? + "\n"))?;
        names.push(name);
        println!(
            "level {:>2}: {:>5} towns, max diameter {}",
            s.level,
            s.towns.len(),
            to_decimal(&s.max_diameter(), 6)
        );
    }
    let mut audit = String::new();
    for la in &audits {
        audit.push_str(&la.to_json_lines()?);
    }
    write(&a.out.join("audit.jsonl"), &audit)?;
    let manifest = BuildManifest {
        n: a.n,
        epsilon: format_rational(&epsilon),
        levels: a.levels,
        deterministic: true,
        version: env!("CARGO_PKG_VERSION").to_string(),
        states: names,
        audit: "audit.jsonl".into(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&a.out.join("manifest.json"), &(json + "\n"))
}

/// Expands directories into their `state_*.json` files and loads every state,
/// sorted by level.
fn load_states(paths: &[PathBuf]) -> Result<Vec<RefinementState>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|f| {
                    f.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("state_") && n.ends_with(".json"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage("no state files given".into()));
    }
    let mut states = Vec::with_capacity(files.len());
    for f in &files {
        let text = fs::read_to_string(f).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", f.display())))?;
        let state =
            RefinementState::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", f.display())))?;
        states.push(state);
    }
    states.sort_by_key(|s| s.level);
    Ok(states)
}

#[derive(Args)]
pub struct VerifyArgs {
    /// State files or build directories.
    #[arg(required = true)]
    states: Vec<PathBuf>,
    /// Also check that cube images of every level separate under the deepest ψ.
    #[arg(long)]
    cubes: bool,
    /// Write the per-level reports as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn consecutive(states: &[RefinementState]) -> bool {
    states.windows(2).all(|w| w[1].level == w[0].level + 1)
}

fn print_convergence(c: &ConvergenceReport, first: usize) {
    println!("sup |psi_(j+1) - psi_j|:");
    for (k, d) in c.sup_diffs.iter().enumerate() {
        let ratio = k
            .checked_sub(1)
            .and_then(|i| c.ratios[i].as_ref())
            .map(|r| format!("  ratio {}", to_decimal(r, 4)))
            .unwrap_or_default();
        println!("  j = {:>2}: {}{ratio}", first + k, to_decimal(d, 8));
    }
}

pub fn verify(a: VerifyArgs) -> Result<()> {
    let states = load_states(&a.states)?;
    let reports: Vec<VerificationReport> = states.iter().map(check_criterion).collect();
    println!("level  towns  max_diameter  min_coverage  max_family_gaps  lipschitz  result");
    for (s, r) in states.iter().zip(&reports) {
        println!(
            "{:>5}  {:>5}  {:>12}  {:>12}  {:>15}  {:>9}  {}",
            r.level,
            s.towns.len(),
            to_decimal(&r.max_diameter, 6),
            r.min_coverage,
            r.max_family_gaps,
            to_decimal(&r.lipschitz, 6),
            if r.passed() { "pass" } else { "FAIL" }
        );
        for f in &r.failures {
            println!("       level {}: {:?}: {}", r.level, f.item, f.detail);
        }
    }
    let mut failed = reports.iter().any(|r| !r.passed());

    let convergence = (states.len() > 1 && consecutive(&states)).then(|| check_convergence(&states));
    if let Some(c) = &convergence {
        print_convergence(c, states[0].level);
    }

    if a.cubes {
        let deepest = states.last().expect("at least one state");
        let prec = precision_from_env();
        let mut e = Embedding::from_state(deepest, prec)?;
        if let Some(tail) = convergence.as_ref().and_then(|c| c.tail_estimate(3)) {
            e = e.with_tail_bound(BigFloat::from_rational(&tail, prec, Round::Up));
        }
        println!("cube images under psi_{} (tail bound {}):", deepest.level, e.tail_bound().to_decimal_string(4));
        for s in &states {
            let sep = check_cube_separation(&e, s, DEFAULT_CUBE_LIMIT)?;
            let gap = sep.min_gap.as_ref().map(|g| g.to_decimal_string(4)).unwrap_or_else(|| "none".into());
            println!("  level {:>2}: {:>8} images, min gap {gap}, {}", s.level, sep.images, sep.verdict);
            failed |= sep.verdict != Verdict::Pass;
        }
    }

    if let Some(path) = &a.json {
        write(path, &(serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n"))?;
    }
    if failed {
        Err(CliError::Check("verification failed".into()))
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ExportFormat {
    Csv,
    Svg,
    Knots,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Plot {
    /// Bars of every shifted family, one block per level.
    Towns,
    /// Graph of ψ over [-1, 1].
    Graph,
}

#[derive(Args)]
pub struct ExportArgs {
    /// State files or build directories.
    #[arg(required = true)]
    states: Vec<PathBuf>,
    #[arg(long, value_enum)]
    format: ExportFormat,
    /// Samples over the domain for CSV output.
    #[arg(long, default_value_t = 1001)]
    samples: usize,
    /// Decimal places in CSV output.
    #[arg(long, default_value_t = 12)]
    digits: usize,
    #[arg(long, value_enum, default_value = "towns")]
    plot: Plot,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn single(states: &[RefinementState], what: &str) -> Result<PiecewiseLinear<kolmo_core::Rational>> {
    match states {
        [s] => Ok(PiecewiseLinear::from_state(s)),
        _ => Err(CliError::Usage(format!("{what} export takes exactly one state, got {}", states.len()))),
    }
}

pub fn export(a: ExportArgs) -> Result<()> {
    let states = load_states(&a.states)?;
    let text = match a.format {
        ExportFormat::Csv => single(&states, "csv")?.to_csv(a.samples, a.digits),
        ExportFormat::Knots => {
            let dump = single(&states, "knot")?.to_knot_dump();
            serde_json::to_string_pretty(&dump).expect("knots serialize") + "\n"
        }
        ExportFormat::Svg => match a.plot {
            Plot::Towns => svg::town_bars(&states),
            Plot::Graph => svg::graph(states.last().expect("at least one state")),
        },
    };
    emit(a.out.as_deref(), &text)
}

#[derive(Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    /// Residual divided by n+1; each round contracts.
    Kolmogorov,
    /// Residual shared by all 2n+1 families; constants are exact in one round.
    Partition,
}

#[derive(Args)]
pub struct DecomposeArgs {
    /// const:c, sum, product or runge2d.
    function: String,
    /// State files or a build directory; the deepest level is the inner function.
    #[arg(required = true)]
    states: Vec<PathBuf>,
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    /// Points per axis of the error grid.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, value_enum, default_value = "kolmogorov")]
    weighting: WeightingArg,
    /// Use this level in every round instead of selecting by oscillation.
    #[arg(long)]
    level: Option<usize>,
    /// Error-per-round CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Outer functions as JSON knot lists.
    #[arg(long)]
    chi: Option<PathBuf>,
}

pub fn decompose(a: DecomposeArgs) -> Result<()> {
    let f: TargetFunction = a.function.parse()?;
    if a.grid < 2 {
        return Err(CliError::Usage("grid needs at least 2 points per axis".into()));
    }
    let states = load_states(&a.states)?;
    if !consecutive(&states) {
        return Err(CliError::Usage("state files must form consecutive levels".into()));
    }
    let e = Embedding::from_state(states.last().expect("at least one state"), precision_from_env())?;
    let weighting = match a.weighting {
        WeightingArg::Partition => Weighting::Partition,
        WeightingArg::Kolmogorov => Weighting::Kolmogorov,
    };
    let opts =
        OuterOptions { weighting, grid: a.grid, cube_limit: DEFAULT_CUBE_LIMIT, pinned_level: a.level };
    let d = run_decompose(&f, &e, &states, a.rounds, &opts)?;
    emit(a.out.as_deref(), &d.to_csv(12))?;
    if let Some(path) = &a.chi {
        let json = serde_json::to_string_pretty(&d.state.to_knot_dumps()).expect("knots serialize");
        write(path, &(json + "\n"))?;
    }
    Ok(())
}

#[derive(Args)]
pub struct CounterexampleArgs {
    #[arg(long, default_value_t = 10)]
    gamma: u32,
    #[arg(long, default_value = "1/50")]
    epsilon: String,
    /// Deepest grid level to check.
    #[arg(long, default_value_t = 2)]
    k_max: u32,
    /// Also write the staircase ψ^{p,q}_k at this level.
    #[arg(long)]
    staircase: Option<u32>,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    q: usize,
    /// Staircase CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn counterexample(a: CounterexampleArgs) -> Result<()> {
    let c = LinearCandidate::new(a.gamma, parse_rational(&a.epsilon)?)?;
    let j = juxtaposition(&c, a.k_max)?;
    println!("{j}");
    if let Some(k) = a.staircase {
        if k == 0 {
            return Err(CliError::Usage("staircase level must be at least 1".into()));
        }
        let f = bad_psi_level(&c, k, a.p, a.q)?;
        let mut csv = String::from("x,psi,x_exact,psi_exact\n");
        for (x, y) in f.knots() {
            csv.push_str(&format!("{:.12},{:.12},{x},{y}\n", x.to_f64(), y.to_f64()));
        }
        emit(a.out.as_deref(), &csv)?;
    }
    if j.holds() {
        Ok(())
    } else {
        Err(CliError::Check("the juxtaposition did not hold".into()))
    }
}

