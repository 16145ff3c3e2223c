use std::path::PathBuf;

use canard_core::analysis::{Direction, SectionVar};
use canard_core::{Model, Param, VdpParams};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Experiments on the delayed van der Pol system
/// x' = x - x^3/3 + y + J (x - x(t - tau)), y' = eps (a - x).
///
/// Flags may also come from a `key=value` file given with `--config`
/// (keys are long flag names without dashes). The command line wins over the
/// file, the file wins over the defaults shown below.
#[derive(Debug, Parser)]
#[command(name = "canard", version, propagate_version = true)]
pub struct Cli {
    /// key=value file with default flag values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the delayed system and write the trajectory
    Simulate(SimulateArgs),
    /// Integrate the fast subsystem with y frozen
    FastSim(FastSimArgs),
    /// Rightmost characteristic roots of a fast equilibrium
    Roots(RootsArgs),
    /// Way-in/way-out rate integrals along the branches
    Rates(RatesArgs),
    /// Delay at which the canard stability condition first fails
    TauStar(TauStarArgs),
    /// Saddle-to-branch connections of the fast subsystem on a (tau, y) grid
    Connection(ConnectionArgs),
    /// Bisect the canard explosion in tau or a
    BisectCanard(BisectArgs),
    /// Steady-cycle amplitude and period over a parameter range
    Sweep(SweepArgs),
    /// Integrate the first-order small-delay ODE
    OdeApprox(OdeArgs),
    /// Label the long-run regime and write the return map
    Classify(ClassifyArgs),
    /// Small-delay normal-form coefficients and genericity checks
    Coeffs(CoeffsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::FastSim(_) => "fast-sim",
            Command::Roots(_) => "roots",
            Command::Rates(_) => "rates",
            Command::TauStar(_) => "tau-star",
            Command::Connection(_) => "connection",
            Command::BisectCanard(_) => "bisect-canard",
            Command::Sweep(_) => "sweep",
            Command::OdeApprox(_) => "ode-approx",
            Command::Classify(_) => "classify",
            Command::Coeffs(_) => "coeffs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Dde,
    Ode,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Dde => Model::Dde,
            ModelArg::Ode => Model::SmallDelayOde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    Tau,
    A,
}

impl From<ParamArg> for Param {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Tau => Param::Tau,
            ParamArg::A => Param::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimeArg {
    Physical,
    Rescaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SectionVarArg {
    X,
    Y,
}

impl From<SectionVarArg> for SectionVar {
    fn from(v: SectionVarArg) -> Self {
        match v {
            SectionVarArg::X => SectionVar::X,
            SectionVarArg::Y => SectionVar::Y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Up,
    Down,
    Both,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Up => Direction::Up,
            DirectionArg::Down => Direction::Down,
            DirectionArg::Both => Direction::Both,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Delayed self-coupling strength
    #[arg(long = "J", default_value_t = 2.0)]
    pub j: f64,
    /// Delay
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    /// Slow-nullcline position
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Time-scale ratio
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
}

impl ModelArgs {
    pub fn params(&self) -> VdpParams {
        VdpParams::new(self.j, self.tau, self.a, self.eps)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output file (stdout when absent)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    /// Step; defaults to min(tau/8, eps/50, 1e-3) shrunk to divide tau
    #[arg(long)]
    pub h: Option<f64>,
    /// x(0); defaults to a + 0.01
    #[arg(long)]
    pub x0: Option<f64>,
    /// y(0); defaults to a^3/3 - a
    #[arg(long)]
    pub y0: Option<f64>,
    /// Constant x on [-tau, 0); defaults to x(0)
    #[arg(long)]
    pub x_past: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct FastSimArgs {
    #[arg(long = "J", default_value_t = 2.0)]
    pub j: f64,
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    /// Frozen slow variable
    #[arg(long, default_value_t = 0.0)]
    pub y: f64,
    #[arg(long, default_value_t = 0.01)]
    pub x0: f64,
    /// Constant x on [-tau, 0); defaults to x(0)
    #[arg(long)]
    pub x_past: Option<f64>,
    #[arg(long, default_value_t = 50.0)]
    pub t_end: f64,
    /// Step; defaults to min(tau/8, 1e-3) shrunk to divide tau
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct RootsArgs {
    #[arg(long = "J", default_value_t = 2.0)]
    pub j: f64,
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    /// Fast equilibrium x*
    #[arg(long, default_value_t = 1.0)]
    pub x_star: f64,
    /// Number of roots (conjugate pairs count once)
    #[arg(long, default_value_t = 5)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct RatesArgs {
    #[arg(long = "J", default_value_t = 2.0)]
    pub j: f64,
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Interior points of the y* grid
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct TauStarArgs {
    #[arg(long = "J", default_value_t = 2.0)]
    pub j: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Bracket end where the condition holds
    #[arg(long, default_value_t = 0.3)]
    pub lo: f64,
    /// Bracket end where the condition fails
    #[arg(long, default_value_t = 0.4)]
    pub hi: f64,
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// Final bracket width
    #[arg(long, default_value_t = 1e-3)]
    pub width: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct ConnectionArgs {
    #[arg(long = "J", default_value_t = 2.0)]
    pub j: f64,
    /// Comma-separated delays
    #[arg(long, default_value = "0.1,0.2,0.3,0.4")]
    pub taus: String,
    /// Comma-separated frozen y values
    #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6")]
    pub ys: String,
    #[arg(long, default_value_t = 200.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CycleArgs {
    /// Discarded transient; defaults to 50 / eps
    #[arg(long)]
    pub transient: Option<f64>,
    /// Measurement window; defaults to 20 / eps
    #[arg(long)]
    pub window: Option<f64>,
    /// Largest step; the default is used when absent
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct BisectArgs {
    #[command(flatten)]
    pub model_params: ModelArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::Dde)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = ParamArg::Tau)]
    pub param: ParamArg,
    #[arg(long, default_value_t = 0.01)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.12)]
    pub hi: f64,
    /// Target bracket width
    #[arg(long, default_value_t = 1e-9)]
    pub width: f64,
    #[arg(long, default_value_t = 1.0)]
    pub small_amp: f64,
    #[arg(long, default_value_t = 3.0)]
    pub large_amp: f64,
    #[command(flatten)]
    pub cycle: CycleArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model_params: ModelArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::Dde)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = ParamArg::Tau)]
    pub param: ParamArg,
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    #[arg(long, default_value_t = 0.2)]
    pub to: f64,
    /// Number of grid points, ends included
    #[arg(long, default_value_t = 21)]
    pub n: usize,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub cycle: CycleArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct OdeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    /// Step; defaults to min(eps (1 - J tau) / 50, 1e-3)
    #[arg(long)]
    pub h: Option<f64>,
    /// x(0); defaults to a + 0.01
    #[arg(long)]
    pub x0: Option<f64>,
    /// y(0); defaults to a^3/3 - a
    #[arg(long)]
    pub y0: Option<f64>,
    /// Physical time t or rescaled time t / (1 - J tau)
    #[arg(long, value_enum, default_value_t = TimeArg::Physical)]
    pub time: TimeArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub cycle: CycleArgs,
    #[arg(long, value_enum, default_value_t = SectionVarArg::X)]
    pub section_var: SectionVarArg,
    /// Section level; defaults to a for x and a^3/3 - a for y
    #[arg(long)]
    pub section_level: Option<f64>,
    #[arg(long, value_enum, default_value_t = DirectionArg::Up)]
    pub direction: DirectionArg,
    /// Also write the section return map as CSV
    #[arg(long, value_name = "FILE")]
    pub return_map: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct CoeffsArgs {
    #[arg(long = "J", default_value_t = 2.0)]
    pub j: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Also report the leading-order canard delay for this a
    #[arg(long)]
    pub a: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}
