//! Command-line front end: `test` runs the shape-restriction test on a CSV
//! dataset, `simulate` drives the Monte Carlo designs, and `project`
//! computes cone projections of grid values.

mod io;
mod shapes;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use shapetest_core::cones::ConeError;
use shapetest_core::grid::{FunctionGrid, Grid};
use shapetest_core::mc::{run_study, BasisSpec, Design};
use shapetest_core::qp::QpSettings;
use shapetest_core::sieve::SieveBasis;
use shapetest_core::testing::{run_test, TestConfig, TestError};

use io::CliError;

#[derive(Parser)]
#[command(
    name = "shapetest",
    about = "Test shape restrictions on regression functions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a shape restriction on a CSV dataset (header `y,z1,...,zd`)
    Test(TestArgs),
    /// Monte Carlo studies of the test's size and power
    Simulate(SimulateArgs),
    /// Project grid values onto a shape-restricted cone
    Project(ProjectArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Lower grid bound, once per covariate dimension
    #[arg(long = "grid-lo", value_name = "LO")]
    grid_lo: Vec<f64>,
    /// Upper grid bound, once per covariate dimension
    #[arg(long = "grid-hi", value_name = "HI")]
    grid_hi: Vec<f64>,
    /// Number of grid points, once per covariate dimension
    #[arg(long = "grid-n", value_name = "N")]
    grid_n: Vec<usize>,
}

impl GridArgs {
    fn is_empty(&self) -> bool {
        self.grid_lo.is_empty() && self.grid_hi.is_empty() && self.grid_n.is_empty()
    }

    fn build(&self) -> Result<Arc<Grid>, CliError> {
        if self.grid_lo.len() != self.grid_hi.len() || self.grid_lo.len() != self.grid_n.len() {
            return Err(CliError::input(
                "--grid-lo, --grid-hi and --grid-n must be given once per dimension",
            ));
        }
        let bounds: Vec<(f64, f64)> = self
            .grid_lo
            .iter()
            .zip(&self.grid_hi)
            .map(|(&lo, &hi)| (lo, hi))
            .collect();
        Grid::new(&bounds, &self.grid_n).map_err(CliError::from_display)
    }

    /// Data-derived default: the central 90% of each covariate's range.
    fn build_or_default(&self, z_ranges: &[(f64, f64)]) -> Result<Arc<Grid>, CliError> {
        if !self.is_empty() {
            let grid = self.build()?;
            if grid.dims() != z_ranges.len() {
                return Err(CliError::input(format!(
                    "grid has {} dimensions but the data has {} covariates",
                    grid.dims(),
                    z_ranges.len()
                )));
            }
            return Ok(grid);
        }
        let bounds: Vec<(f64, f64)> = z_ranges
            .iter()
            .map(|&(lo, hi)| {
                let trim = 0.05 * (hi - lo);
                (lo + trim, hi - trim)
            })
            .collect();
        let per_dim = match z_ranges.len() {
            1 => 37,
            2 => 17,
            _ => 9,
        };
        Grid::new(&bounds, &vec![per_dim; z_ranges.len()]).map_err(CliError::from_display)
    }
}

#[derive(Args)]
struct EstimationArgs {
    /// Interior knots per covariate dimension
    #[arg(long, default_value_t = 3)]
    knots: usize,
    /// B-spline order (4 = cubic, 3 = quadratic)
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Significance level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Tuning quantile level (default 0.01 / log n)
    #[arg(long)]
    gamma: Option<f64>,
    /// Bootstrap draw count
    #[arg(short = 'B', long = "B", default_value_t = 200)]
    bootstrap: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed tuning parameter overriding the data-driven choice
    #[arg(long)]
    kappa: Option<f64>,
}

impl EstimationArgs {
    fn config(&self, cone: shapetest_core::cones::ConeSpec, grid: Arc<Grid>) -> TestConfig {
        let mut config = TestConfig::new(cone, grid, self.bootstrap, self.seed);
        config.alpha = self.alpha;
        config.gamma_n = self.gamma;
        config.kappa_override = self.kappa;
        config
    }
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV with header `y,z1,...,zd`
    #[arg(long)]
    input: PathBuf,
    /// Shape restriction (see `--help` of `project` for the closed set)
    #[arg(long)]
    shape: String,
    #[command(flatten)]
    estimation: EstimationArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DesignName {
    Mc1,
    Mc2,
    Slutsky,
}

#[derive(Args)]
struct SimulateArgs {
    /// Which simulation design family to draw from
    #[arg(long, value_enum)]
    design: DesignName,
    /// Null preset: 1, 2 or 3 (design-specific parameter triple)
    #[arg(long)]
    null: Option<usize>,
    /// Alternative strengths; one study per value
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// Steeper log term in the bivariate design
    #[arg(long, default_value_t = false)]
    steep_log: bool,
    /// Sample size per replication
    #[arg(long)]
    n: usize,
    /// Monte Carlo replications
    #[arg(long)]
    reps: usize,
    /// Shape restriction override (defaults to the design's own)
    #[arg(long)]
    shape: Option<String>,
    #[command(flatten)]
    estimation: EstimationArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the CSV rows here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    /// Input CSV with a single `value` column in row-major grid order
    #[arg(long)]
    input: PathBuf,
    /// Shape restriction: monotone, decreasing, convex, concave,
    /// supermodular, nonneg, or `+`-joined combinations of the linear ones
    #[arg(long)]
    shape: String,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the projected values here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Project(args) => cmd_project(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn cmd_test(args: TestArgs) -> Result<(), CliError> {
    let dataset = io::read_dataset(&args.input)?;
    let dims = dataset.dims();
    let cone = shapes::parse(&args.shape, dims)?;
    let ranges = io::column_ranges(dataset.z());
    let grid = args.grid.build_or_default(&ranges)?;
    let basis = SieveBasis::from_data(dataset.z(), args.estimation.knots, args.estimation.order)
        .map_err(CliError::from_display)?;
    let config = args.estimation.config(cone, grid);
    let report = run_test(&dataset, basis, &config).map_err(classify_test_error)?;

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::input(format!("serializing report: {e}")))?;
    match &args.output {
        Some(path) => {
            std::fs::write(path, json + "\n")
                .map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
        }
        None => println!("{json}"),
    }
    eprintln!(
        "{}: statistic={:.6} critical_value={:.6} p_value={:.4} reject={} \
         (alpha={}, B={}, k_n={}, n={})",
        report.shape,
        report.statistic,
        report.critical_value,
        report.p_value,
        report.reject,
        report.alpha,
        report.b,
        report.k_n,
        report.n
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.null.is_some() && !args.delta.is_empty() {
        return Err(CliError::input("choose either --null or --delta, not both"));
    }
    let n = args.n;
    if args.reps == 0 {
        return Err(CliError::input("--reps must be positive"));
    }
    let designs: Vec<Design> = if args.delta.is_empty() {
        let which = args.null.unwrap_or(1);
        if !(1..=3).contains(&which) {
            return Err(CliError::input("--null must be 1, 2 or 3"));
        }
        vec![match args.design {
            DesignName::Mc1 => Design::mc1_null(which, n),
            DesignName::Mc2 => {
                let mut d = Design::mc2_null(which, n);
                if args.steep_log {
                    if let shapetest_core::mc::DesignKind::Mc2 { steep_log, .. } = &mut d.kind {
                        *steep_log = true;
                    }
                }
                d
            }
            DesignName::Slutsky => Design::slutsky_null(which, n),
        }]
    } else {
        args.delta
            .iter()
            .map(|&delta| match args.design {
                DesignName::Mc1 => Design::mc1_alternative(delta, n),
                DesignName::Mc2 => Design::mc2_alternative(delta, args.steep_log, n),
                DesignName::Slutsky => Design::slutsky_alternative(delta, n),
            })
            .collect()
    };

    let basis = BasisSpec {
        order: args.estimation.order,
        interior_knots: args.estimation.knots,
    };
    let mut rows = Vec::with_capacity(designs.len());
    for design in &designs {
        let cone = match &args.shape {
            Some(spec) => {
                if design.is_demand() {
                    return Err(CliError::input(
                        "--shape cannot override the Slutsky designs",
                    ));
                }
                shapes::parse(spec, design.dims())?
            }
            None => design.default_cone(),
        };
        let grid = if args.grid.is_empty() {
            design.default_grid()
        } else {
            args.grid.build()?
        };
        let config = args.estimation.config(cone, grid);
        let result = run_study(design, &basis, &config, args.reps, args.estimation.seed);
        rows.push(io::StudyRow::from(&result));
    }
    io::write_study_rows(&rows, args.output.as_deref())
}

fn cmd_project(args: ProjectArgs) -> Result<(), CliError> {
    let values = io::read_values(&args.input)?;
    let grid = if args.grid.is_empty() {
        // default: unit interval with one point per value
        Grid::new(&[(0.0, 1.0)], &[values.len()]).map_err(CliError::from_display)?
    } else {
        args.grid.build()?
    };
    if grid.len() != values.len() {
        return Err(CliError::input(format!(
            "{} values for a grid with {} points",
            values.len(),
            grid.len()
        )));
    }
    let cone = shapes::parse(&args.shape, grid.dims())?;
    let f = FunctionGrid::scalar(grid, values).map_err(CliError::from_display)?;
    let projected = shapetest_core::cones::project(&cone, &f, &QpSettings::default())
        .map_err(classify_cone_error)?;
    let distance = f
        .sub(&projected)
        .map_err(CliError::from_display)?
        .l2_norm();
    io::write_values(projected.values(), args.output.as_deref())?;
    eprintln!("projection distance: {distance:.12}");
    Ok(())
}

fn classify_test_error(err: TestError) -> CliError {
    match err {
        TestError::Cone(cone) => classify_cone_error(cone),
        other => CliError::input(other.to_string()),
    }
}

fn classify_cone_error(err: ConeError) -> CliError {
    match err {
        ConeError::SolverFailure { .. } => CliError::numerical(err.to_string()),
        other => CliError::input(other.to_string()),
    }
}
