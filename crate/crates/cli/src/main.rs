//! `semirate`: command-line front end for Fisher information, rate constants,
//! risk sweeps and log-log fits.
//!
//! Results are printed to stdout as JSON (CSV for `sweep`). With `--out DIR`
//! they are also written to `DIR/<command>.json` (`DIR/sweep.csv` and
//! `DIR/sweep.dat` for sweeps). Exit codes: 0 success, 2 invalid input,
//! 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use semirate::asymptotics::{laplace_kl, mc_kl, verify_risk_bound};
use semirate::fisher::{alternate_gaussian_pair, check_fisher_conditions, fisher_analytic, fisher_mc, DEFAULT_PD_TOL};
use semirate::risk::floor_trace;
use semirate::sweep::{
    compare_constants, fit_loglog, parse_csv, rows_for_regime, rows_to_csv, rows_to_dat, run_sweep, SweepConfig,
    DEFAULT_CONSTANT_TOL,
};
use semirate::{
    Error, FisherPair, LossSpec, Mat, McConfig, ModelKind, ModelSpec, ParamDomain, RateConstants, RegimeSpec, RiskSetup,
};

#[derive(Parser, Debug)]
#[command(name = "semirate", version, about = "Learning-rate experiments for Bayes-mixture predictors")]
struct Cli {
    /// Base seed for every Monte Carlo stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, default_value = "mixture")]
    model: ModelKind,
    /// Parameter value, comma separated for the Gaussian model (`mu,sigma`).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    theta: Vec<f64>,
    /// Parameter box as `lo:hi`, one per coordinate, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    domain: Vec<String>,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec, Error> {
        if self.domain.is_empty() {
            return Ok(ModelSpec::with_default_domain(self.model));
        }
        let bounds = self
            .domain
            .iter()
            .map(|s| {
                let bad = || Error::InvalidConfig(format!("domain entry {s:?} is not lo:hi"));
                let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
                Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
            })
            .collect::<Result<Vec<(f64, f64)>, Error>>()?;
        ModelSpec::new(self.model, ParamDomain::new(bounds)?)
    }

    fn setup(&self) -> Result<RiskSetup, Error> {
        RiskSetup::new(self.spec()?, self.theta.clone())
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum LossArg {
    Log,
    ZeroOne,
    Square,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fisher information pair at theta, with the positivity/ordering check.
    Fisher {
        #[command(flatten)]
        model: ModelArgs,
        /// Also estimate both matrices from this many Monte Carlo samples.
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Leading constants K1, K2, K3.
    Constants {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Gaussian model: use `I_X = diag(1/(σ²+1), 2/(σ²+1))` instead of the derived matrix.
        #[arg(long)]
        alternate: bool,
    },
    /// Run a sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Log-log fit of one regime's rows from a sweep CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        regime: String,
        #[arg(long, default_value = "mixture")]
        model: ModelKind,
        /// Compare the implied constant with the analytic one at this theta.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_CONSTANT_TOL)]
        tolerance: f64,
    },
    /// Closed-form and Monte Carlo KL between the data law and the Bayes mixture.
    Kl {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
    /// Compare excess risk with the mutual-information bound.
    VerifyBound {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "sl")]
        regime: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "log")]
        loss: LossArg,
        #[arg(long)]
        range_bound: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
    },
    /// Minimum predictive probability of the oracle 0-1 label, per n.
    Floor {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        reps: usize,
    },
}

fn mat_json(m: &Mat) -> Value {
    let d = m.dim();
    json!((0..d).map(|i| (0..d).map(|j| m.get(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn pair_json(p: &FisherPair) -> Value {
    json!({ "i_xy": mat_json(&p.i_xy), "i_x": mat_json(&p.i_x) })
}

fn fisher_pair(model: &ModelSpec, theta: &[f64], alternate: bool) -> Result<FisherPair, Error> {
    let theta = model.theta(theta.to_vec())?;
    if alternate {
        if model.kind() != ModelKind::Gaussian {
            return Err(Error::InvalidConfig("--alternate applies to the gaussian model only".into()));
        }
        return Ok(alternate_gaussian_pair(theta.values()[1]));
    }
    fisher_analytic(model, &theta)
}

enum Output {
    Json(Value),
    Sweep(String, String),
}

fn run(cli: &Cli) -> Result<Output, Error> {
    let seed = cli.seed;
    let out = match &cli.command {
        Command::Fisher { model, mc } => {
            let spec = model.spec()?;
            let pair = fisher_pair(&spec, &model.theta, false)?;
            let report = check_fisher_conditions(&pair, DEFAULT_PD_TOL)?;
            let mut v = json!({
                "model": spec.kind(),
                "theta": model.theta,
                "i_xy": mat_json(&pair.i_xy),
                "i_x": mat_json(&pair.i_x),
                "conditions": report,
            });
            if let Some(samples) = mc {
                let est = fisher_mc(&spec, &spec.theta(model.theta.clone())?, *samples, seed)?;
                v["mc"] = json!({
                    "samples": est.samples,
                    "seed": seed,
                    "estimate": pair_json(&est.estimate),
                    "se": pair_json(&est.se),
                });
            }
            Output::Json(v)
        }
        Command::Constants { model, alpha, beta, alternate } => {
            let spec = model.spec()?;
            let pair = fisher_pair(&spec, &model.theta, *alternate)?;
            let c = RateConstants::compute(&pair, *alpha, *beta)?;
            Output::Json(json!({
                "model": spec.kind(),
                "theta": model.theta,
                "alpha": alpha,
                "alternate": alternate,
                "k1": c.k1,
                "k2": c.k2,
                "k3": c.k3,
                "beta": c.beta,
            }))
        }
        Command::Sweep { config } => {
            let config = SweepConfig::load(config)?;
            let rows = run_sweep(&config)?;
            let csv = rows_to_csv(&rows);
            let dat = rows_to_dat(&rows);
            if let Some(p) = &config.output.csv {
                fs::write(p, &csv)?;
            }
            if let Some(p) = &config.output.dat {
                fs::write(p, &dat)?;
            }
            Output::Sweep(csv, dat)
        }
        Command::Fit { input, regime, model, theta, beta, tolerance } => {
            let all = parse_csv(&fs::read_to_string(input)?)?;
            let regime_spec: RegimeSpec = regime.parse()?;
            let rows = rows_for_regime(&all, &regime_spec.id());
            let fit = fit_loglog(&rows)?;
            let mut v = json!({ "regime": regime_spec.id(), "rows": rows.len(), "fit": fit });
            if !theta.is_empty() {
                let model = ModelSpec::with_default_domain(*model);
                let pair = fisher_pair(&model, theta, false)?;
                let alpha = match regime_spec {
                    RegimeSpec::SslLinear { alpha } => alpha,
                    _ => 0.0,
                };
                let constants = RateConstants::compute(&pair, alpha, *beta)?;
                v["comparison"] = json!(compare_constants(&fit, &constants, &regime_spec, *tolerance));
            }
            Output::Json(v)
        }
        Command::Kl { model, n, m, reps } => {
            let setup = model.setup()?;
            let pair = fisher_analytic(&setup.model, &setup.theta0)?;
            let q = setup.prior.log_density(&setup.model, setup.theta0.values()).exp();
            let laplace = laplace_kl(&pair, *n, *m, q)?;
            let mc = mc_kl(&setup, *n, *m, &McConfig::new(*reps, seed))?;
            Output::Json(json!({
                "model": setup.model.kind(),
                "theta": model.theta,
                "n": n,
                "m": m,
                "laplace": laplace.value,
                "mc_mean": mc.mean,
                "mc_se": mc.se,
                "reps": mc.reps,
                "seed": seed,
                "difference": mc.mean - laplace.value,
            }))
        }
        Command::VerifyBound { model, regime, n, loss, range_bound, reps } => {
            let setup = model.setup()?;
            let regime: RegimeSpec = regime.parse()?;
            let spec = match (loss, range_bound) {
                (LossArg::Log, None) => LossSpec::log(),
                (LossArg::ZeroOne, None) => LossSpec::zero_one(),
                (LossArg::Square, a) => LossSpec::square(a.unwrap_or(1.0))?,
                (_, Some(_)) => {
                    return Err(Error::InvalidConfig("--range-bound only applies to the square loss".into()))
                }
            };
            let report = verify_risk_bound(&setup, regime, *n, &spec, &McConfig::new(*reps, seed))?;
            Output::Json(json!({ "loss": spec.name(), "report": report }))
        }
        Command::Floor { model, n, reps } => {
            let setup = model.setup()?;
            let trace = floor_trace(&setup, n, *reps, seed)?;
            Output::Json(json!({ "model": setup.model.kind(), "theta": model.theta, "seed": seed, "floor": trace }))
        }
    };
    Ok(out)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Fisher { .. } => "fisher",
        Command::Constants { .. } => "constants",
        Command::Sweep { .. } => "sweep",
        Command::Fit { .. } => "fit",
        Command::Kl { .. } => "kl",
        Command::VerifyBound { .. } => "verify-bound",
        Command::Floor { .. } => "floor",
    }
}

fn emit(cli: &Cli, output: Output) -> Result<(), Error> {
    let dir = cli.out.as_deref();
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let write = |dir: Option<&Path>, name: String, text: &str| -> Result<(), Error> {
        if let Some(d) = dir {
            fs::write(d.join(name), text)?;
        }
        Ok(())
    };
    match output {
        Output::Json(v) => {
            let text = serde_json::to_string_pretty(&v)? + "\n";
            print!("{text}");
            write(dir, format!("{}.json", command_name(&cli.command)), &text)
        }
        Output::Sweep(csv, dat) => {
            print!("{csv}");
            write(dir, "sweep.csv".into(), &csv)?;
            write(dir, "sweep.dat".into(), &dat)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli).and_then(|o| emit(&cli, o)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
