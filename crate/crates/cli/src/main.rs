//! `qdisc`: solve, simulate and tabulate adaptive discrimination strategies.
//!
//! Exit codes: 0 success, 2 bad input (flags, config, policy file),
//! 3 infeasible problem, 4 solver did not converge, 5 simulation disagrees
//! with the solver, 1 anything else.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qdisc_core::analytic::{goal_angles, lower_bound, n_goal_analytic};
use qdisc_core::baselines::{eta_fixed, eta_ratio, optimize_fixed, FixedSettings};
use qdisc_core::config::{parse_angle, preset, preset_names, ProblemConfig};
use qdisc_core::export::{histogram_rows, num, value_rows, write_table, TableMeta, HISTOGRAM_HEADER, VALUE_HEADER};
use qdisc_core::io::Artifact;
use qdisc_core::problem::ProblemSpec;
use qdisc_core::simulator::{consumption_consistency, Lookup, Runner, SamplingMode};
use qdisc_core::solver::{solve_goac, solve_goal, GoacArms, Solution};

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Core(#[from] qdisc_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("solver stopped after {0} iterations without converging (files were still written)")]
    NotConverged(usize),
    #[error("{0}")]
    Inconsistent(String),
}

impl Failure {
    fn code(&self) -> u8 {
        use qdisc_core::Error as E;
        match self {
            Failure::Usage(_) => 2,
            Failure::NotConverged(_) => 4,
            Failure::Inconsistent(_) => 5,
            Failure::Core(e) => match e {
                E::Config(_) | E::Format(_) | E::Domain(_) | E::Json(_) => 2,
                E::Infeasible(_) | E::RunawayTrial { .. } => 3,
                E::NonProgress(_) => 4,
                E::SearchFailureAt { .. } | E::SearchFailure { .. } => 4,
                _ => 1,
            },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "qdisc", version, about = "Minimum-consumption discrimination of two qubit states")]
struct Cli {
    /// Worker threads for solves and simulations (default: all cores).
    #[arg(long, global = true, env = "QDISC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Shipped preset: fig1, fig1c, fig2c (alias fig2) or fig3.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Config file (`.toml` or `.json`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the number of prior-grid points.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Override the number of angle-grid points over [0, π].
    #[arg(long)]
    theta_points: Option<usize>,
}

impl Source {
    fn given(&self) -> bool {
        self.preset.is_some() || self.config.is_some()
    }

    fn load(&self) -> Outcome<ProblemConfig> {
        let mut cfg = match (&self.preset, &self.config) {
            (Some(name), _) => preset(name)?,
            (None, Some(path)) => ProblemConfig::load(path)?,
            (None, None) => return Err(Failure::Usage("give --preset or --config".into())),
        };
        if let Some(n) = self.grid_points {
            cfg.grid.points = n;
        }
        if let Some(n) = self.theta_points {
            cfg.theta.points = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Adaptive local measurements (projective and three-outcome).
    Goal,
    /// Adaptive projective one-copy or collective two-copy measurements.
    Goac,
    /// Adaptive projective one-copy measurements only.
    Projective,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineFamily {
    Gofl,
    Gofc,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal adaptive strategy and write policy, report and value table.
    Solve {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "goal")]
        mode: Mode,
        /// Priors to print (default: the config's `at` list).
        #[arg(long, num_args = 1..)]
        at: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a saved policy against randomly drawn true states.
    Simulate {
        #[arg(long)]
        policy: PathBuf,
        /// Config the policy must have been solved for.
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        q0: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 20240501)]
        seed: u64,
        #[arg(long, value_enum, default_value = "outcome")]
        sampling: Sampling,
        #[arg(long, value_enum, default_value = "lookahead")]
        lookup: LookupArg,
        /// Also write the outcome traces of the first N trials as JSON lines.
        #[arg(long)]
        trace: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare simulated means with the solver's values; exit 5 on disagreement.
    Check {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, num_args = 1.., default_values_t = [0.5])]
        q0: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 20240501)]
        seed: u64,
        /// Allowance on top of three standard errors, in copies.
        #[arg(long, default_value_t = 0.02)]
        slack: f64,
        #[arg(long, value_enum, default_value = "lookahead")]
        lookup: LookupArg,
    },
    /// Best repeated fixed measurement from the local or collective family.
    Baseline {
        #[arg(value_enum)]
        family: BaselineFamily,
        #[command(flatten)]
        source: Source,
        #[arg(long, num_args = 1..)]
        at: Vec<f64>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Asymptotic copies-per-log-error ratios, swept over the mixing weight.
    Eta {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        /// Mixing weights (default: the config's sweep list).
        #[arg(long, num_args = 1..)]
        s: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form adaptive local consumption for pure states at ±x/2.
    Analytic {
        /// Angle between the states, e.g. `pi/6` or `30deg`.
        #[arg(long)]
        x: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, num_args = 1.., default_values_t = [0.5])]
        q: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the shipped presets, or print one as TOML or JSON.
    Preset {
        name: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sampling {
    Outcome,
    Component,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LookupArg {
    Nearest,
    Lookahead,
}

impl From<LookupArg> for Lookup {
    fn from(l: LookupArg) -> Self {
        match l {
            LookupArg::Nearest => Lookup::Nearest,
            LookupArg::Lookahead => Lookup::Lookahead,
        }
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Goal => "goal",
        Mode::Goac => "goac",
        Mode::Projective => "projective",
    }
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Standard output, or a file when `out` is given.
fn sink(out: &Option<PathBuf>) -> Outcome<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn check_prior(name: &str, q: f64) -> Outcome {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} must lie in [0, 1], got {q}")))
    }
}

fn cmd_solve(source: &Source, mode: Mode, at: &[f64], out: &Path) -> Outcome {
    let cfg = source.load()?;
    let problem = cfg.build_problem()?;
    let grid = cfg.q_grid()?;
    let solution: Solution = match mode {
        Mode::Goal => solve_goal(&problem, grid, cfg.theta_grid()?, cfg.solver)?,
        Mode::Goac => solve_goac(&problem, grid, &cfg.goac_arms(), cfg.solver)?,
        Mode::Projective => {
            solve_goac(&problem, grid, &GoacArms::projective_only(cfg.arms.local_step_deg), cfg.solver)?
        }
    };
    let stem = format!("{}_{}", if cfg.name.is_empty() { "run" } else { &cfg.name }, mode_name(mode));
    std::fs::create_dir_all(out)?;
    let artifact = Artifact::from_solution(&cfg, &solution);
    artifact.write(&out.join(format!("{stem}.policy")))?;
    artifact.write_sidecar(&out.join(format!("{stem}.policy.json")))?;
    serde_json::to_writer_pretty(create(&out.join(format!("{stem}_report.json")))?, &solution.report)
        .map_err(qdisc_core::Error::from)?;
    write_table(
        create(&out.join(format!("{stem}_values.csv")))?,
        &TableMeta::for_config(&cfg),
        &VALUE_HEADER,
        value_rows(&solution.value, &solution.policy),
    )?;

    let r = &solution.report;
    println!(
        "{} on {}: {} iterations, converged = {}, {:.1} s",
        mode_name(mode).to_uppercase(),
        if cfg.name.is_empty() { "config" } else { &cfg.name },
        r.iterations,
        r.converged,
        r.wall_time_secs
    );
    let queries = if at.is_empty() { &cfg.at[..] } else { at };
    for &q in queries {
        check_prior("at", q)?;
        println!("N({q}) = {:.4}", solution.value.eval(q));
    }
    if mode == Mode::Goac {
        let t: Vec<String> = solution.policy.arm_transitions_merged(0.5).iter().map(|q| format!("{q:.5}")).collect();
        println!("arm transitions: [{}]", t.join(", "));
    }
    println!("wrote {}/{stem}.*", out.display());
    if r.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(r.iterations))
    }
}

fn load_policy(path: &Path, source: &Source) -> Outcome<Artifact> {
    let artifact = Artifact::read(path)?;
    if source.given() {
        artifact.ensure_config(&source.load()?)?;
    }
    Ok(artifact)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    policy: &Path,
    source: &Source,
    q0: f64,
    trials: u64,
    seed: u64,
    sampling: Sampling,
    lookup: LookupArg,
    trace: Option<u64>,
    out: &Path,
) -> Outcome {
    check_prior("q0", q0)?;
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let artifact = load_policy(policy, source)?;
    let cfg = &artifact.header.config;
    let problem = cfg.build_problem()?;
    let mode = match sampling {
        Sampling::Outcome => SamplingMode::Outcome,
        Sampling::Component => SamplingMode::Component,
    };
    let mut runner = Runner::new(&artifact.policy, &problem, mode)?;
    if lookup == LookupArg::Lookahead {
        runner = runner.with_lookahead(&artifact.value)?;
    }
    let summary = runner.monte_carlo(q0, trials, seed)?;

    let stem = policy.file_stem().and_then(|s| s.to_str()).unwrap_or("policy");
    let stem = format!("{stem}_q{q0}_seed{seed}");
    std::fs::create_dir_all(out)?;
    serde_json::to_writer_pretty(create(&out.join(format!("{stem}_summary.json")))?, &summary)
        .map_err(qdisc_core::Error::from)?;
    write_table(
        create(&out.join(format!("{stem}_histogram.csv")))?,
        &TableMeta::for_config(cfg),
        &HISTOGRAM_HEADER,
        histogram_rows(&summary),
    )?;
    if let Some(n) = trace {
        let mut w = create(&out.join(format!("{stem}_trace.jsonl")))?;
        for trial in 0..n.min(trials) {
            let rec = runner.run_trial(q0, seed, trial, true)?;
            serde_json::to_writer(&mut w, &rec).map_err(qdisc_core::Error::from)?;
            writeln!(w)?;
        }
        w.flush()?;
    }

    let se = summary.stderr_copies.map_or("n/a".to_string(), |s| format!("{s:.4}"));
    println!("trials = {trials}, mean copies = {:.4} (stderr {se})", summary.mean_copies);
    println!("solver value = {:.4}", artifact.value.eval(q0));
    println!("errors = {} ({:.3e}, target {})", summary.errors, summary.empirical_error, problem.epsilon);
    println!("wrote {}/{stem}_*", out.display());
    Ok(())
}

fn cmd_check(policy: &Path, q0: &[f64], trials: u64, seed: u64, slack: f64, lookup: LookupArg) -> Outcome {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    for &q in q0 {
        check_prior("q0", q)?;
    }
    let artifact = Artifact::read(policy)?;
    let problem = artifact.header.config.build_problem()?;
    let report =
        consumption_consistency(&artifact.policy, &artifact.value, &problem, q0, trials, seed, slack, lookup.into())?;
    println!("q0,expected,simulated,stderr,residual,allowed,passes");
    for r in &report.rows {
        println!("{},{},{},{},{},{},{}", r.q0, r.expected, r.simulated, r.stderr, r.residual, r.allowed, r.passes);
    }
    if report.passes() {
        Ok(())
    } else {
        Err(Failure::Inconsistent("simulated consumption disagrees with the solver value".into()))
    }
}

fn cmd_baseline(family: BaselineFamily, source: &Source, at: &[f64], out: &Option<PathBuf>) -> Outcome {
    let cfg = source.load()?;
    let problem = cfg.build_problem()?;
    let grid = cfg.q_grid()?;
    let (label, fam) = match family {
        BaselineFamily::Gofl => ("gofl", cfg.local_family()),
        BaselineFamily::Gofc => ("gofc", cfg.collective_family()),
    };
    let queries = if at.is_empty() { &cfg.at[..] } else { at };
    let mut rows = Vec::new();
    for &q in queries {
        check_prior("at", q)?;
        let r = optimize_fixed(&problem, &fam, grid.clone(), q, FixedSettings::default())?;
        rows.push(vec![label.into(), num(q), num(r.best_theta.to_degrees()), num(r.consumption)]);
    }
    write_table(sink(out)?, &TableMeta::for_config(&cfg), &["family", "q", "theta_deg", "copies"], rows)?;
    Ok(())
}

fn cmd_eta(source: &Source, q: f64, s: &[f64], out: &Option<PathBuf>) -> Outcome {
    let cfg = source.load()?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Failure::Usage(format!("--q must lie in (0, 1), got {q}")));
    }
    let weights: Vec<f64> = match (s.is_empty(), &cfg.sweep, cfg.problem) {
        (false, _, _) => s.to_vec(),
        (true, Some(sweep), _) => sweep.s.clone(),
        (true, None, ProblemSpec::Mixture { s, .. }) => vec![s],
        (true, None, _) => return Err(Failure::Usage("eta needs the mixture family".into())),
    };
    let local = cfg.local_family().measurements();
    let mut both = local.clone();
    both.extend(cfg.collective_family().measurements());
    let mut rows = Vec::new();
    for w in weights {
        let p = cfg.with_mixing(w)?.build_problem()?;
        let col = eta_ratio(q, &p.rho0, &p.rho1, &both)?.value;
        let goal = eta_ratio(q, &p.rho0, &p.rho1, &local)?.value;
        let gofl = eta_fixed(q, &p.rho0, &p.rho1, &local)?.value;
        rows.push(vec![num(w), num(q), num(col), num(goal), num(gofl)]);
    }
    write_table(sink(out)?, &TableMeta::for_config(&cfg), &["s", "q", "eta_collective", "eta_goal", "eta_gofl"], rows)?;
    Ok(())
}

fn cmd_analytic(x: &str, eps: f64, qs: &[f64], out: &Option<PathBuf>) -> Outcome {
    let x = parse_angle(x)?;
    let mut rows = Vec::new();
    for &q in qs {
        check_prior("q", q)?;
        let case = goal_angles(q, x, eps).map(|a| a.case_number().to_string()).unwrap_or_default();
        rows.push(vec![num(q), num(x), num(eps), case, num(n_goal_analytic(q, x, eps)?), num(lower_bound(q, x)?)]);
    }
    // Tables without a config carry the hash of the flag values instead.
    let meta = TableMeta {
        tool_version: qdisc_core::config::TOOL_VERSION.into(),
        config_hash: sha256_hex(&format!("analytic x={x} eps={eps}")),
        grid_points: 0,
        theta_points: 0,
    };
    write_table(sink(out)?, &meta, &["q", "x", "eps", "case", "n_goal", "lower_bound"], rows)?;
    Ok(())
}

fn sha256_hex(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn cmd_preset(name: &Option<String>, json: bool) -> Outcome {
    match name {
        None => {
            for n in preset_names() {
                println!("{n}");
            }
        }
        Some(n) => {
            let cfg = preset(n)?;
            print!("{}", if json { cfg.to_json_string()? + "\n" } else { cfg.to_toml_string()? });
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot set up {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Solve { source, mode, at, out } => cmd_solve(source, *mode, at, out),
        Command::Simulate { policy, source, q0, trials, seed, sampling, lookup, trace, out } => {
            cmd_simulate(policy, source, *q0, *trials, *seed, *sampling, *lookup, *trace, out)
        }
        Command::Check { policy, q0, trials, seed, slack, lookup } => {
            cmd_check(policy, q0, *trials, *seed, *slack, *lookup)
        }
        Command::Baseline { family, source, at, out } => cmd_baseline(*family, source, at, out),
        Command::Eta { source, q, s, out } => cmd_eta(source, *q, s, out),
        Command::Analytic { x, eps, q, out } => cmd_analytic(x, *eps, q, out),
        Command::Preset { name, json } => cmd_preset(name, *json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qdisc: {e}");
            ExitCode::from(e.code())
        }
    }
}
