use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use oubstop::csv_io::{
    format_decimal, read_boundary_csv, write_boundary_csv, write_report_csv, CheckRow,
};
use oubstop::{
    formula_value, perturbation_test, picard_solve, simulate_stopped_payoff, value,
    BoundarySolution, CanonicalReduction, McConfig, OubParams, SolverConfig, TimeGrid,
    ValueSurfaceQuery,
};

/// Optimal stopping boundaries and values for an Ornstein-Uhlenbeck bridge.
#[derive(Parser, Debug)]
#[command(name = "oubstop", version, about, allow_negative_numbers = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Mean-reversion slope.
    #[arg(long, global = true, default_value_t = 1.0)]
    alpha: f64,
    /// Volatility.
    #[arg(long, global = true, default_value_t = 1.0)]
    gamma: f64,
    /// Pinning point at the horizon.
    #[arg(long, global = true, default_value_t = 0.0)]
    z: f64,
    /// Pulling level.
    #[arg(long, global = true, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    horizon: f64,
    /// Number of mesh intervals.
    #[arg(long, global = true, default_value_t = 500)]
    n: usize,
    /// Sup-norm tolerance of the Picard iteration.
    #[arg(long, global = true, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, global = true, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,
    /// Monte Carlo paths.
    #[arg(long, global = true, default_value_t = 100_000)]
    paths: usize,
    /// Output file (directory for `figures`). Standard output if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the stopping boundary and write it as `t,beta` rows.
    #[command(allow_negative_numbers = true)]
    Solve,
    /// Evaluate the value function at a point or on a grid.
    #[command(allow_negative_numbers = true)]
    Value {
        #[arg(long, required_unless_present = "grid")]
        t: Option<f64>,
        #[arg(long, required_unless_present = "grid")]
        x: Option<f64>,
        /// Emit a k-by-k surface over t in [0, 0.99T] and x in z +- 3 gamma sqrt(T).
        #[arg(long, conflicts_with_all = ["t", "x"])]
        grid: Option<usize>,
    },
    /// Monte Carlo and consistency checks on a solved or supplied boundary.
    #[command(allow_negative_numbers = true)]
    Verify {
        /// Boundary CSV to check instead of solving.
        #[arg(long)]
        boundary: Option<PathBuf>,
        /// Starting position at time 0.
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
    },
    /// Write the datasets behind the boundary figures into a directory.
    #[command(allow_negative_numbers = true)]
    Figures,
}

impl Common {
    fn params(&self) -> Result<OubParams> {
        OubParams::general(self.alpha, self.gamma, self.z, self.theta, self.horizon)
            .context("invalid process parameters")
    }

    fn solver(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            eps: self.eps,
            max_iter: self.max_iter,
            ..SolverConfig::default().with_n(self.n)
        };
        cfg.validate().context("invalid solver settings")?;
        Ok(cfg)
    }

    fn mc(&self) -> Result<McConfig> {
        let cfg = McConfig {
            paths: self.paths,
            seed: self.seed,
            ..McConfig::default()
        };
        cfg.validate().context("invalid Monte Carlo settings")?;
        Ok(cfg)
    }
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn original_rows<'a>(
    red: &'a CanonicalReduction,
    sol: &'a BoundarySolution,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    sol.grid
        .nodes()
        .iter()
        .zip(&sol.beta)
        .map(move |(&t, &b)| red.from_canonical(t, b))
}

fn solve_canonical(red: &CanonicalReduction, cfg: &SolverConfig) -> Result<BoundarySolution> {
    Ok(picard_solve(&red.canonical, cfg)?)
}

fn cmd_solve(common: &Common) -> Result<()> {
    let params = common.params()?;
    let cfg = common.solver()?;
    let red = params.reduce_to_canonical();
    match picard_solve(&red.canonical, &cfg) {
        Ok(sol) => {
            write_boundary_csv(open_out(common.out.as_deref())?, original_rows(&red, &sol))?;
            eprintln!(
                "iterations: {}, residual: {:e}",
                sol.iterations, sol.final_residual
            );
            Ok(())
        }
        Err(oubstop::Error::NonConvergence {
            iterations,
            residual,
            partial,
        }) => {
            let target = common.out.as_ref().map(|p| {
                let mut name = p.clone().into_os_string();
                name.push(".partial");
                PathBuf::from(name)
            });
            write_boundary_csv(open_out(target.as_deref())?, original_rows(&red, &partial))?;
            if let Some(path) = &target {
                eprintln!("partial boundary written to {}", path.display());
            }
            bail!("no convergence after {iterations} iterations (residual {residual:e})")
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_value(common: &Common, t: Option<f64>, x: Option<f64>, grid: Option<usize>) -> Result<()> {
    let params = common.params()?;
    let cfg = common.solver()?;
    let points: Vec<(f64, f64)> = match grid {
        Some(k) => {
            if k < 2 {
                bail!("--grid needs at least 2 points per axis, got {k}");
            }
            let spread = 3.0 * common.gamma * common.horizon.sqrt();
            let step = |i: usize| i as f64 / (k - 1) as f64;
            (0..k)
                .flat_map(|i| {
                    (0..k).map(move |j| {
                        (
                            0.99 * common.horizon * step(i),
                            common.z - spread + 2.0 * spread * step(j),
                        )
                    })
                })
                .collect()
        }
        None => vec![(t.unwrap(), x.unwrap())],
    };
    for &(t, x) in &points {
        if !(t >= 0.0 && t < common.horizon) || !x.is_finite() {
            bail!("(t, x) = ({t}, {x}) needs 0 <= t < horizon and finite x");
        }
    }
    let red = params.reduce_to_canonical();
    let sol = solve_canonical(&red, &cfg)?;
    let mut out = open_out(common.out.as_deref())?;
    writeln!(out, "t,x,V")?;
    for (t, x) in points {
        let (tc, xc) = red.to_canonical(t, x);
        let v = value(&red.canonical, &sol, &ValueSurfaceQuery::new(tc, xc))?;
        let v = red.level_from_canonical(v);
        writeln!(
            out,
            "{},{},{}",
            format_decimal(t),
            format_decimal(x),
            format_decimal(v)
        )?;
    }
    out.flush()?;
    Ok(())
}

fn load_boundary(path: &Path, red: &CanonicalReduction) -> Result<BoundarySolution> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let rows = read_boundary_csv(BufReader::new(file))
        .with_context(|| format!("cannot parse {}", path.display()))?;
    let (ts, bs): (Vec<f64>, Vec<f64>) = rows
        .into_iter()
        .map(|(t, b)| red.to_canonical(t, b))
        .unzip();
    let grid = TimeGrid::from_nodes(ts).context("boundary file times are not a valid mesh")?;
    Ok(BoundarySolution::from_values(grid, bs)?)
}

/// `statistic / se` with the zero-noise case resolved by sign.
fn in_se(statistic: f64, se: f64) -> f64 {
    if se > 0.0 {
        statistic / se
    } else if statistic > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn cmd_verify(common: &Common, boundary: Option<&Path>, x0: f64) -> Result<bool> {
    let params = common.params()?;
    let cfg = common.solver()?;
    let mc = common.mc()?;
    let red = params.reduce_to_canonical();
    let sol = match boundary {
        Some(path) => load_boundary(path, &red)?,
        None => solve_canonical(&red, &cfg)?,
    };
    let p = red.canonical;
    let (_, x0c) = red.to_canonical(0.0, x0);
    let mut rows = Vec::new();

    let v = value(&p, &sol, &ValueSurfaceQuery::new(0.0, x0c))?;
    let est = simulate_stopped_payoff(&p, &sol, 0.0, x0c, &mc)?;
    let stat = in_se((est.mean - v).abs(), est.std_error);
    rows.push(CheckRow {
        check: "mc_consistency".into(),
        statistic: stat,
        threshold: 3.0,
        passed: stat <= 3.0,
    });

    let delta = 0.25 * p.gamma;
    let report = perturbation_test(&p, &sol, &[delta, -delta], 0.0, x0c, &mc)?;
    for (name, entry) in ["perturbation_plus", "perturbation_minus"]
        .iter()
        .zip(&report.entries)
    {
        let stat = in_se(entry.diff_vs_zero.mean, entry.diff_vs_zero.std_error);
        rows.push(CheckRow {
            check: (*name).into(),
            statistic: stat,
            threshold: 3.0,
            passed: stat <= 3.0,
        });
    }

    let pin = (sol.terminal() - p.z).abs();
    rows.push(CheckRow {
        check: "terminal_pinning".into(),
        statistic: pin,
        threshold: 0.0,
        passed: pin == 0.0,
    });

    let mut worst: f64 = 0.0;
    for (&t, &b) in sol.grid.nodes().iter().zip(&sol.beta) {
        if t <= 0.95 {
            let v = formula_value(&p, &sol, &ValueSurfaceQuery::new(t, b))?;
            worst = worst.max((v - b).abs());
        }
    }
    rows.push(CheckRow {
        check: "value_matching".into(),
        statistic: worst,
        threshold: 5e-3,
        passed: worst < 5e-3,
    });

    write_report_csv(open_out(common.out.as_deref())?, &rows)?;
    Ok(rows.iter().all(|r| r.passed))
}

fn column_label(prefix: &str, v: f64) -> String {
    format!("{prefix}={v}")
}

/// Boundaries on a shared mesh, one column per parameter set.
fn write_columns(
    path: &Path,
    labels: &[String],
    sols: &[BoundarySolution],
    extra: Option<(&str, &dyn Fn(f64) -> f64)>,
) -> Result<()> {
    let mut out = open_out(Some(path))?;
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().cloned());
    if let Some((name, _)) = extra {
        header.push(name.to_string());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, &t) in sols[0].grid.nodes().iter().enumerate() {
        let mut row = vec![format_decimal(t)];
        row.extend(sols.iter().map(|s| format_decimal(s.beta[i])));
        if let Some((_, f)) = extra {
            row.push(format_decimal(f(t)));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

const FIG_Z: [f64; 3] = [0.0, -5.0, 5.0];
const FIG1_ALPHA: [f64; 6] = [-5.0, -1.0, -0.01, 0.01, 1.0, 5.0];
const FIG2_GAMMA: [f64; 3] = [0.5, 1.0, 2.0];
const FIG3_N: [usize; 3] = [10, 100, 500];
const BB_CONSTANT: f64 = 0.8399;

fn cmd_figures(common: &Common) -> Result<()> {
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("figures"));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let cfg = common.solver()?;
    let mut manifest = vec![
        "Reconstructed boundary datasets; parameter sweeps are chosen, not read off the original plots.".to_string(),
    ];

    for z in FIG_Z {
        let sols = FIG1_ALPHA
            .iter()
            .map(|&a| Ok(picard_solve(&OubParams::new(a, 1.0, z)?, &cfg)?))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<_> = FIG1_ALPHA
            .iter()
            .map(|&a| column_label("alpha", a))
            .collect();
        let name = format!("fig1_z{z}.csv");
        let bb = move |t: f64| z + BB_CONSTANT * (1.0 - t).sqrt();
        write_columns(
            &dir.join(&name),
            &labels,
            &sols,
            Some(("bb_reference", &bb)),
        )?;
        manifest.push(format!(
            "{name}: gamma=1, z={z}, N={}, columns alpha in {FIG1_ALPHA:?}",
            cfg.n
        ));
    }

    for z in FIG_Z {
        let sols = FIG2_GAMMA
            .iter()
            .map(|&g| Ok(picard_solve(&OubParams::new(1.0, g, z)?, &cfg)?))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<_> = FIG2_GAMMA
            .iter()
            .map(|&g| column_label("gamma", g))
            .collect();
        let name = format!("fig2_z{z}.csv");
        write_columns(&dir.join(&name), &labels, &sols, None)?;
        manifest.push(format!(
            "{name}: alpha=1, z={z}, N={}, columns gamma in {FIG2_GAMMA:?}",
            cfg.n
        ));
    }

    for z in FIG_Z {
        let params = OubParams::new(1.0, 1.0, z)?;
        let name = format!("fig3_z{z}.csv");
        let mut out = open_out(Some(&dir.join(&name)))?;
        writeln!(out, "n,t,beta_minus_z")?;
        for n in FIG3_N {
            let sol = picard_solve(&params, &SolverConfig { n, ..cfg })?;
            for (&t, &b) in sol.grid.nodes().iter().zip(&sol.beta) {
                writeln!(out, "{n},{},{}", format_decimal(t), format_decimal(b - z))?;
            }
        }
        out.flush()?;
        manifest.push(format!(
            "{name}: alpha=1, gamma=1, z={z}, long format over N in {FIG3_N:?}"
        ));
    }

    fs::write(dir.join("MANIFEST.txt"), manifest.join("\n") + "\n")?;
    eprintln!("wrote {} datasets to {}", manifest.len() - 1, dir.display());
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("OUBSTOP_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("OUBSTOP_THREADS must be a positive integer, got `{raw}`"))?;
        if n == 0 {
            bail!("OUBSTOP_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure worker threads")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_threads()?;
    let common = &cli.common;
    // Validate everything up front so bad flags fail before any solve.
    common.params()?;
    common.solver()?;
    common.mc()?;
    match cli.command {
        Command::Solve => cmd_solve(common)?,
        Command::Value { t, x, grid } => cmd_value(common, t, x, grid)?,
        Command::Verify { boundary, x0 } => {
            if !cmd_verify(common, boundary.as_deref(), x0)? {
                eprintln!("verification failed");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Figures => cmd_figures(common)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
