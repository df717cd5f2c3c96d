//! `semidet`: capacity regions, outer bounds and coding simulations for
//! state-dependent semideterministic broadcast channels.
//!
//! Exit codes: 0 success, 2 bad input (parse errors, invalid arguments),
//! 3 size guard exceeded, 4 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semidet::binary::{self, BinaryExampleParams, DEFAULT_ALPHA_SAMPLES};
use semidet::capacity::{bound_triple, inner_region};
use semidet::channel::{joint_from_policy, AuxPolicy, SemiDetChannel};
use semidet::outer::{causal_outer_search, outer_region_estimate};
use semidet::prob::AxisName::{S, U, Y, Z};
use semidet::prob::JointDist;
use semidet::region::{fmt9, ConvexRegion2D};
use semidet::search::SearchConfig;
use semidet::sim::{run_trials, SimConfig};
use semidet::specfile::{aux_policy_to_toml, parse_channel, parse_policy, parse_semidet_channel, PolicySpec};
use semidet::support::reduce_support;
use semidet::Error;

#[derive(Parser, Debug)]
#[command(name = "semidet", version, about = "Rate regions of state-dependent semideterministic broadcast channels")]
struct Cli {
    /// Worker threads (0 = one per core). Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity region of a semideterministic channel (noncausal state).
    RegionInner(RegionArgs),
    /// Search-based estimate of the general outer bound.
    RegionOuter(RegionArgs),
    /// Outer region with causal state knowledge (strategy letters).
    RegionCausal(RegionArgs),
    /// Closed-form regions of the binary example and an SVG overlay.
    ExampleFigure1(FigureArgs),
    /// Monte Carlo run of the binned coding scheme.
    Simulate(SimArgs),
    /// Shrink the auxiliary alphabet of a policy to |X||S|+1 letters.
    ReduceSupport(ReduceArgs),
}

#[derive(Args, Debug)]
struct RegionArgs {
    /// Channel spec file (TOML)
    #[arg(long)]
    channel: PathBuf,
    /// Number of weight directions
    #[arg(long, default_value_t = 64)]
    sweeps: usize,
    /// Random restarts per direction
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    /// Local refinement passes per restart
    #[arg(long, default_value_t = 200)]
    local_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Search over deterministic x = g(y, u, s) maps (region-inner only)
    #[arg(long)]
    selection_mode: bool,
    /// Write the vertex CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RegionArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            weight_sweep_count: self.sweeps,
            random_restarts: self.restarts,
            local_steps: self.local_steps,
            seed: self.seed,
            selection_mode: self.selection_mode,
            ..SearchConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct FigureArgs {
    #[arg(long, default_value_t = 0.2)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA_SAMPLES)]
    alpha_samples: usize,
    /// Skip the causal curve (needed when sigma != 0.5)
    #[arg(long)]
    no_causal: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    channel: PathBuf,
    /// Selection-form policy file (p_yu_given_s and g)
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    n: usize,
    /// R_y
    #[arg(long)]
    ry: f64,
    /// R_z
    #[arg(long)]
    rz: f64,
    /// Cover rate for the y-bins
    #[arg(long)]
    cry: f64,
    /// Cover rate for the u-bins
    #[arg(long)]
    crz: f64,
    /// Typicality slack
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    /// Semideterministic channel spec file
    #[arg(long)]
    channel: PathBuf,
    /// Policy to reduce
    #[arg(long, conflicts_with = "random_u", required_unless_present = "random_u")]
    policy: Option<PathBuf>,
    /// Reduce a random policy with this many auxiliary letters instead
    #[arg(long)]
    random_u: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the reduced policy (TOML) here
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Guard(_) => 3,
            Error::Numerical(_) => 4,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn region_summary(region: &ConvexRegion2D) -> String {
    let mut out = String::new();
    writeln!(out, "vertices = {}", region.vertices().len()).unwrap();
    writeln!(out, "area = {}", fmt9(region.area())).unwrap();
    writeln!(out, "max_r_y = {}", fmt9(region.max_along(1.0, 0.0))).unwrap();
    writeln!(out, "max_r_z = {}", fmt9(region.max_along(0.0, 1.0))).unwrap();
    writeln!(out, "max_sum_rate = {}", fmt9(region.max_along(1.0, 1.0))).unwrap();
    out
}

fn emit_region(region: &ConvexRegion2D, out: &Option<PathBuf>, header: &str) -> Result<String, Failure> {
    let mut text = String::from(header);
    text.push_str(&region_summary(region));
    match out {
        Some(path) => write(path, &region.to_csv())?,
        None => {
            text.push('\n');
            text.push_str(&region.to_csv());
        }
    }
    Ok(text)
}

fn region_inner(args: &RegionArgs) -> Result<String, Failure> {
    let ch = parse_semidet_channel(&read(&args.channel)?)?;
    let region = inner_region(&ch, &args.config())?;
    emit_region(&region, &args.out, "")
}

fn region_outer(args: &RegionArgs) -> Result<String, Failure> {
    let ch = parse_channel(&read(&args.channel)?)?.to_general();
    let est = outer_region_estimate(&ch, &args.config())?;
    emit_region(&est.region, &args.out, &format!("estimate = {}\n", est.estimate))
}

fn region_causal(args: &RegionArgs) -> Result<String, Failure> {
    let ch = parse_channel(&read(&args.channel)?)?.to_general();
    let out = causal_outer_search(&ch, &args.config())?;
    emit_region(&out.region, &args.out, &format!("strategies = {}\n", out.strategies.len()))
}

fn example_figure1(args: &FigureArgs) -> Result<String, Failure> {
    let params = BinaryExampleParams::new(args.sigma, args.p)?;
    let with_causal = !args.no_causal;
    if with_causal && args.sigma != 0.5 {
        return Err(Failure {
            code: 2,
            message: format!(
                "the causal curve is only known for sigma = 0.5 (got {}); pass --no-causal to omit it",
                args.sigma
            ),
        });
    }
    let fig = binary::figure1(params, args.alpha_samples, with_causal)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_failure(&args.out_dir, e))?;
    let mut text = String::new();
    let mut put = |name: &str, body: &str| -> Result<(), Failure> {
        let path = args.out_dir.join(name);
        write(&path, body)?;
        writeln!(text, "wrote = \"{}\"", path.display()).unwrap();
        Ok(())
    };
    put("noncausal.csv", &fig.noncausal_csv)?;
    if let Some(c) = &fig.causal_csv {
        put("causal.csv", c)?;
    }
    put("figure1.svg", &fig.svg)?;

    let noncausal = binary::noncausal_region(args.p, args.alpha_samples)?;
    writeln!(text, "noncausal_max_r_y = {}", fmt9(noncausal.max_along(1.0, 0.0))).unwrap();
    writeln!(text, "noncausal_max_r_z = {}", fmt9(noncausal.max_along(0.0, 1.0))).unwrap();
    let nc_half = noncausal.height_at(0.5).unwrap_or(0.0);
    writeln!(text, "noncausal_r_z_at_half = {}", fmt9(nc_half)).unwrap();
    if with_causal {
        let causal = binary::causal_region(args.p)?;
        let c_half = causal.height_at(0.5).unwrap_or(0.0);
        writeln!(text, "causal_max_r_z = {}", fmt9(causal.max_along(0.0, 1.0))).unwrap();
        writeln!(text, "causal_r_z_at_half = {}", fmt9(c_half)).unwrap();
        writeln!(text, "gap_at_half = {}", fmt9(nc_half - c_half)).unwrap();
    }
    Ok(text)
}

fn simulate(args: &SimArgs) -> Result<String, Failure> {
    let ch = parse_semidet_channel(&read(&args.channel)?)?;
    let pol = match parse_policy(&read(&args.policy)?, ch.x_size(), ch.y_size(), ch.s_size())? {
        PolicySpec::Selection(p) => p,
        PolicySpec::Aux(_) => {
            return Err(Error::Parse {
                field: "p_yu_given_s".into(),
                index: None,
                message: "simulate needs a selection-form policy (p_yu_given_s and g)".into(),
            }
            .into())
        }
    };
    let cfg = SimConfig {
        n: args.n,
        rate_y: args.ry,
        rate_z: args.rz,
        cover_rate_y: args.cry,
        cover_rate_z: args.crz,
        epsilon: args.eps,
        trials: args.trials,
        seed: args.seed,
    };
    Ok(run_trials(&ch, &pol, &cfg)?.to_text())
}

fn quantities(j: &JointDist) -> Result<[f64; 3], Error> {
    let a = j.conditional_entropy(&[Y], &[S])?;
    let i_uz = j.mutual_info(&[U], &[Z])?;
    Ok([
        a,
        i_uz - j.mutual_info(&[U], &[S])?,
        a + i_uz - j.mutual_info(&[U], &[S, Y])?,
    ])
}

fn support_size(j: &JointDist) -> Result<usize, Error> {
    Ok(j.marginalize(&[U])?.mass().iter().filter(|&&m| m > 0.0).count())
}

fn reduce(args: &ReduceArgs) -> Result<String, Failure> {
    let ch: SemiDetChannel = parse_semidet_channel(&read(&args.channel)?)?;
    let pol = match (&args.policy, args.random_u) {
        (Some(path), _) => match parse_policy(&read(path)?, ch.x_size(), ch.y_size(), ch.s_size())? {
            PolicySpec::Aux(p) => p,
            PolicySpec::Selection(p) => {
                p.validate(&ch)?;
                p.to_aux(ch.x_size())
            }
        },
        (None, Some(u)) => AuxPolicy::random(ch.x_size(), ch.s_size(), u, args.seed)?,
        (None, None) => unreachable!("clap requires one of --policy and --random-u"),
    };
    let before = joint_from_policy(&ch, &pol)?;
    let after = reduce_support(&before)?;
    let reduced = AuxPolicy::from_joint(&after)?;
    // the triple of the written policy, not just of the reduced joint
    let t = bound_triple(&ch, &reduced)?;
    let q0 = quantities(&before)?;
    let q1 = quantities(&after)?;

    let mut text = String::new();
    writeln!(text, "support_before = {}", support_size(&before)?).unwrap();
    writeln!(text, "support_after = {}", support_size(&after)?).unwrap();
    writeln!(text, "support_cap = {}", ch.u_cap()).unwrap();
    for (name, (x, y)) in ["h_y_given_s", "b", "c"].iter().zip(q0.iter().zip(q1)) {
        writeln!(text, "{name}_before = {}", fmt9(*x)).unwrap();
        writeln!(text, "{name}_after = {}", fmt9(y)).unwrap();
    }
    writeln!(
        text,
        "max_abs_change = {:e}",
        q0.iter().zip(q1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    )
    .unwrap();
    writeln!(text, "reduced_triple = ({}, {}, {})", fmt9(t.a), fmt9(t.b), fmt9(t.c)).unwrap();
    if let Some(path) = &args.out {
        write(path, &aux_policy_to_toml(&reduced))?;
    }
    Ok(text)
}

fn run(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::RegionInner(a) => region_inner(a),
        Command::RegionOuter(a) => {
            if a.selection_mode {
                return Err(Failure {
                    code: 2,
                    message: "--selection-mode applies to region-inner only".into(),
                });
            }
            region_outer(a)
        }
        Command::RegionCausal(a) => region_causal(a),
        Command::ExampleFigure1(a) => example_figure1(a),
        Command::Simulate(a) => simulate(a),
        Command::ReduceSupport(a) => reduce(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(4);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
