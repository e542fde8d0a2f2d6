//! `qsq`: runs squeezing experiments on the symmetric SU(3) irreps and
//! writes CSV tables.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qutrit_squeeze::evolution::{
    default_window, find_minimum, initial_point, scaling_study, squeezing_curve, time_grid, CurveOptions, SqueezingCurve,
    DEFAULT_LAMBDAS, DEFAULT_STEPS,
};
use qutrit_squeeze::irrep::IrrepSpace;
use qutrit_squeeze::kernel::WignerKernel;
use qutrit_squeeze::semiclassical::{
    semiclassical_curve_with_kernel, wigner_slice, Backend, SemiclassicalOptions, SliceEvolution,
};
use qutrit_squeeze::squeezing::isotropy_samples;
use qutrit_squeeze::Error as CoreError;
use thiserror::Error;

use output::{num, Table};

#[derive(Debug, Parser)]
#[command(name = "qsq", version, about = "Squeezing of qutrit ensembles in symmetric SU(3) irreps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with code 3 when an optimizer or quadrature flag is raised.
    #[arg(long)]
    strict: bool,
    /// Leave the timestamp out of the header.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Variance of the tangent observables on a coherent state over random directions.
    Isotropy {
        #[arg(long, default_value_t = 20)]
        lambda: u32,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Least variance along the exact evolution.
    Exact {
        #[arg(long, default_value_t = 20)]
        lambda: u32,
        /// End of the time window (default 0.05 (20/λ)^(9/11)).
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        /// Start each direction search from the previous optimum.
        #[arg(long)]
        warm_start: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Least phase-space variance along the classical transport.
    Semiclassical {
        #[arg(long, default_value_t = 20)]
        lambda: u32,
        #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
        backend: BackendArg,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        /// Gauss nodes per polar angle (default grows with λ).
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Wigner function on the α1 = β1 = 0 slice.
    WignerSlice {
        #[arg(long, default_value_t = 20)]
        lambda: u32,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, value_enum, default_value_t = EvolutionArg::Quantum)]
        evolution: EvolutionArg,
        /// Initial Wigner function transported by the classical evolution.
        #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
        backend: BackendArg,
        /// Points per slice axis.
        #[arg(long, default_value_t = 48)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Minimum location and depth over several λ with power-law fits.
    Scaling {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDAS.to_vec())]
        lambdas: Vec<u32>,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    Gauss,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => Backend::ExactKernel,
            BackendArg::Gauss => Backend::GaussianApprox,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EvolutionArg {
    Quantum,
    Classical,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Flagged(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Core(CoreError::InvalidArgument(_)) => 2,
            CliError::Core(_) | CliError::Flagged(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn positive_lambda(lambda: u32) -> Result<()> {
    if lambda == 0 {
        return Err(CliError::Validation("--lambda must be at least 1".into()));
    }
    Ok(())
}

fn window(lambda: u32, t_max: Option<f64>, steps: usize) -> Result<f64> {
    let t = t_max.unwrap_or_else(|| default_window(lambda));
    if !(t.is_finite() && t > 0.0) {
        return Err(CliError::Validation(format!("--t-max must be positive, got {t}")));
    }
    if steps == 0 {
        return Err(CliError::Validation("--steps must be at least 1".into()));
    }
    Ok(t)
}

/// Reports raised flags on stderr; escalates them under `--strict`.
fn flag(common: &Common, message: String) -> Result<()> {
    if common.strict {
        Err(CliError::Flagged(message))
    } else {
        eprintln!("warning: {message}");
        Ok(())
    }
}

fn curve_rows(table: &mut Table, curve: &SqueezingCurve, extra: Option<&str>) {
    for i in 0..curve.len() {
        let d = curve.best_directions[i];
        let mut fields = vec![num(curve.times[i]), num(curve.min_variances[i]), num(d.alpha3), num(d.beta3), num(d.chi)];
        if let Some(e) = extra {
            fields.push(e.to_string());
        }
        table.row(&fields);
    }
    if let Ok((t, v)) = find_minimum(&curve.times, &curve.min_variances) {
        table.footer("t_min", num(t));
        table.footer("min_variance", num(v));
    }
}

fn run(command: &Command) -> Result<(Table, Option<PathBuf>)> {
    match command {
        Command::Isotropy { lambda, samples, seed, common } => {
            positive_lambda(*lambda)?;
            if *samples == 0 {
                return Err(CliError::Validation("--samples must be at least 1".into()));
            }
            let omega = initial_point();
            let space = IrrepSpace::new(*lambda)?;
            let rows = isotropy_samples(&space, omega, *samples, *seed)?;
            let mut table = Table::new(
                "isotropy",
                &[
                    ("lambda", lambda.to_string()),
                    ("samples", samples.to_string()),
                    ("seed", seed.to_string()),
                    ("coherent_state", format!("({}, {}, {}, {})", num(omega.alpha1), num(omega.beta1), num(omega.alpha2), num(omega.beta2))),
                ],
                !common.no_timestamp,
                &["sample", "alpha3", "beta3", "chi", "variance"],
            );
            let mut worst: f64 = 0.0;
            for (k, (d, v)) in rows.iter().enumerate() {
                worst = worst.max((v - *lambda as f64).abs());
                table.row(&[k.to_string(), num(d.alpha3), num(d.beta3), num(d.chi), num(*v)]);
            }
            table.footer("max_deviation", num(worst));
            Ok((table, common.out.clone()))
        }
        Command::Exact { lambda, t_max, steps, warm_start, common } => {
            positive_lambda(*lambda)?;
            let t_max = window(*lambda, *t_max, *steps)?;
            let opts = CurveOptions {
                warm_start: *warm_start,
                ..CurveOptions::default()
            };
            let curve = squeezing_curve(*lambda, t_max, *steps, &opts)?;
            let mut table = Table::new(
                "exact",
                &[
                    ("lambda", lambda.to_string()),
                    ("t_max", num(t_max)),
                    ("steps", steps.to_string()),
                    ("warm_start", warm_start.to_string()),
                ],
                !common.no_timestamp,
                &["t", "min_variance", "alpha3", "beta3", "chi"],
            );
            curve_rows(&mut table, &curve, None);
            let degraded = curve.degraded.iter().filter(|d| **d).count();
            if degraded > 0 {
                flag(common, format!("direction search did not converge at {degraded} time samples"))?;
            }
            Ok((table, common.out.clone()))
        }
        Command::Semiclassical { lambda, backend, t_max, steps, grid, common } => {
            positive_lambda(*lambda)?;
            let t_max = window(*lambda, *t_max, *steps)?;
            let opts = match grid {
                Some(n) if *n < 4 => return Err(CliError::Validation("--grid must be at least 4".into())),
                Some(n) => SemiclassicalOptions::with_grid(*n),
                None => SemiclassicalOptions::for_lambda(*lambda),
            };
            let backend = Backend::from(*backend);
            let kernel = WignerKernel::new(*lambda)?;
            let times = time_grid(t_max, *steps)?;
            let sc = semiclassical_curve_with_kernel(&kernel, backend, &times, &opts)?;
            let mut table = Table::new(
                "semiclassical",
                &[
                    ("lambda", lambda.to_string()),
                    ("backend", backend.to_string()),
                    ("t_max", num(t_max)),
                    ("steps", steps.to_string()),
                    ("grid", format!("{:?}", opts.resolution)),
                ],
                !common.no_timestamp,
                &["t", "min_variance", "alpha3", "beta3", "chi", "backend"],
            );
            curve_rows(&mut table, &sc.curve, Some(backend.name()));
            let drift = sc.normalization.iter().map(|n| (n - sc.normalization[0]).abs()).fold(0.0, f64::max);
            table.footer("normalization", num(sc.normalization[0]));
            table.footer("normalization_drift", num(drift));
            if drift > 1e-6 {
                flag(common, format!("phase-space normalization drifts by {drift:e}"))?;
            }
            let degraded = sc.curve.degraded.iter().filter(|d| **d).count();
            if degraded > 0 {
                flag(common, format!("direction search did not converge at {degraded} time samples"))?;
            }
            Ok((table, common.out.clone()))
        }
        Command::WignerSlice { lambda, t, evolution, backend, grid, common } => {
            positive_lambda(*lambda)?;
            if !t.is_finite() {
                return Err(CliError::Validation("--t must be finite".into()));
            }
            if *grid < 2 {
                return Err(CliError::Validation("--grid must be at least 2".into()));
            }
            let evolution = match evolution {
                EvolutionArg::Quantum => SliceEvolution::Quantum,
                EvolutionArg::Classical => SliceEvolution::Classical((*backend).into()),
            };
            let kernel = Arc::new(WignerKernel::new(*lambda)?);
            let slice = wigner_slice(&kernel, evolution, *t, *grid)?;
            let mut config = vec![
                ("lambda", lambda.to_string()),
                ("t", num(*t)),
                ("evolution", evolution.name().to_string()),
                ("grid", grid.to_string()),
            ];
            if let SliceEvolution::Classical(b) = evolution {
                config.push(("backend", b.to_string()));
            }
            let mut table = Table::new("wigner-slice", &config, !common.no_timestamp, &["alpha2", "beta2", "W"]);
            for p in &slice {
                table.row(&[num(p.alpha2), num(p.beta2), num(p.value)]);
            }
            let lowest = slice.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
            table.footer("min_W", num(lowest));
            Ok((table, common.out.clone()))
        }
        Command::Scaling { lambdas, steps, common } => {
            if *steps < 2 {
                return Err(CliError::Validation("--steps must be at least 2".into()));
            }
            let mut table = Table::new(
                "scaling",
                &[
                    ("lambdas", lambdas.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")),
                    ("steps", steps.to_string()),
                ],
                !common.no_timestamp,
                &["lambda", "t_min", "min_variance", "ratio"],
            );
            match scaling_study(lambdas, *steps, &CurveOptions::default()) {
                Ok(study) => {
                    for r in &study.rows {
                        table.row(&[r.lambda.to_string(), num(r.t_min), num(r.v_min), num(r.ratio)]);
                    }
                    table.footer("exponent_t", num(study.exponent_t));
                    table.footer("exponent_v", num(study.exponent_v));
                    Ok((table, common.out.clone()))
                }
                Err(CoreError::Scaling { lambda, partial, source }) => {
                    for r in &partial {
                        table.row(&[r.lambda.to_string(), num(r.t_min), num(r.v_min), num(r.ratio)]);
                    }
                    table.footer("failed_lambda", lambda.to_string());
                    table.write(common.out.as_ref())?;
                    Err(CliError::Core(*source))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Isotropy { common, .. }
        | Command::Exact { common, .. }
        | Command::Semiclassical { common, .. }
        | Command::WignerSlice { common, .. }
        | Command::Scaling { common, .. } => common,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = common(&cli.command).threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli.command).and_then(|(table, out)| Ok(table.write(out.as_ref())?)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
