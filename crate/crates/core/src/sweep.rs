//! Config-driven sweeps over `(regime, n)` cells, CSV emission and log-log fits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fisher::fisher_analytic;
use crate::loss::{LossKind, LossSpec};
use crate::model::{ModelKind, ModelSpec, ParamDomain};
use crate::quadrature::{Grid, GridConfig, Prior};
use crate::rates::{leading_risk, RateConstants, RegimeSpec};
use crate::risk::{excess_risk, excess_risk_kl_form, McConfig, RiskSetup, MIN_REPS};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "regime,n,m,reps,seed,risk_mean,risk_se,kl_mean,kl_se,leading_pred";
pub const DEFAULT_CONSTANT_TOL: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossId {
    Log,
    ZeroOne,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub kind: LossId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_bound: Option<f64>,
}

impl LossConfig {
    pub fn spec(&self) -> Result<LossSpec> {
        match (self.kind, self.range_bound) {
            (LossId::Log, None) => Ok(LossSpec::log()),
            (LossId::ZeroOne, None) => Ok(LossSpec::zero_one()),
            (LossId::Square, a) => LossSpec::square(a.unwrap_or(1.0)),
            (_, Some(_)) => Err(Error::InvalidConfig("range_bound only applies to the square loss".into())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    #[default]
    Uniform,
    TruncatedGaussian {
        center: Vec<f64>,
        scale: Vec<f64>,
    },
    PointMass {
        theta: Vec<f64>,
    },
}

impl PriorConfig {
    pub fn build(&self, model: &ModelSpec, grid: &GridConfig) -> Result<Prior> {
        match self {
            PriorConfig::Uniform => Ok(Prior::Uniform),
            PriorConfig::TruncatedGaussian { center, scale } => {
                Prior::truncated_gaussian(&Grid::for_model(model, grid)?, center, scale)
            }
            PriorConfig::PointMass { theta } => Ok(Prior::PointMass(model.theta(theta.clone())?)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dat: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelKind,
    /// Parameter box; the model default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<(f64, f64)>>,
    pub theta0: Vec<f64>,
    pub loss: LossConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    pub regimes: Vec<RegimeSpec>,
    pub n_values: Vec<usize>,
    pub mc: McConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub output: OutputPaths,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: SweepConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.len() < 2 {
            return Err(Error::InvalidConfig("n_values needs at least 2 entries".into()));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("n_values must be strictly increasing".into()));
        }
        if self.mc.reps < MIN_REPS {
            return Err(Error::InvalidConfig(format!("mc.reps must be at least {MIN_REPS}")));
        }
        if self.regimes.is_empty() {
            return Err(Error::InvalidConfig("regimes must not be empty".into()));
        }
        for r in &self.regimes {
            r.validate()?;
        }
        self.loss.spec()?;
        let setup = self.setup()?;
        Grid::for_model(&setup.model, &setup.grid)?;
        Ok(())
    }

    pub fn model(&self) -> Result<ModelSpec> {
        match &self.domain {
            None => Ok(ModelSpec::with_default_domain(self.model)),
            Some(b) => ModelSpec::new(self.model, ParamDomain::new(b.clone())?),
        }
    }

    pub fn grid_config(&self) -> GridConfig {
        self.grid.clone().unwrap_or_else(|| GridConfig::default_for(self.model))
    }

    pub fn setup(&self) -> Result<RiskSetup> {
        let model = self.model()?;
        let grid = self.grid_config();
        let prior = self.prior.build(&model, &grid)?;
        Ok(RiskSetup::new(model, self.theta0.clone())?.with_grid(grid).with_prior(prior))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub regime: String,
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    pub seed: u64,
    pub risk_mean: f64,
    pub risk_se: f64,
    pub kl_mean: Option<f64>,
    pub kl_se: Option<f64>,
    pub leading_pred: Option<f64>,
}

/// Rate constants at `theta0` with the loss's `β`; `None` when `β` is unknown.
pub fn sweep_constants(setup: &RiskSetup, regime: &RegimeSpec, spec: &LossSpec) -> Result<Option<RateConstants>> {
    let Some(beta) = spec.beta() else { return Ok(None) };
    let pair = fisher_analytic(&setup.model, &setup.theta0)?;
    let alpha = match regime {
        RegimeSpec::SslLinear { alpha } => *alpha,
        _ => 0.0,
    };
    Ok(Some(RateConstants::compute(&pair, alpha, beta)?))
}

/// Runs every cell sequentially, regimes outermost. All cells share the
/// configured seed, so cells at equal `n` see the same labeled samples.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let setup = config.setup()?;
    let spec = config.loss.spec()?;
    let mut rows = Vec::with_capacity(config.regimes.len() * config.n_values.len());
    for regime in &config.regimes {
        let constants = sweep_constants(&setup, regime, &spec)?;
        for &n in &config.n_values {
            let cell = |e: Error| Error::Cell { cell: format!("regime={regime} n={n}"), source: Box::new(e) };
            let (est, kl) = if spec.kind == LossKind::SelfInformation {
                let e = excess_risk_kl_form(&setup, *regime, n, &config.mc).map_err(cell)?;
                (e.clone(), Some(e))
            } else {
                (excess_risk(&setup, *regime, n, &spec, &config.mc).map_err(cell)?, None)
            };
            rows.push(SweepRow {
                regime: regime.id(),
                n,
                m: est.m,
                reps: est.replications,
                seed: est.seed,
                risk_mean: est.mean,
                risk_se: est.std_error,
                kl_mean: kl.as_ref().map(|k| k.mean),
                kl_se: kl.as_ref().map(|k| k.std_error),
                leading_pred: constants.as_ref().map(|c| leading_risk(regime, n, c)),
            });
        }
    }
    Ok(rows)
}

/// Runs the sweep and writes the configured output files.
pub fn run_sweep_to_files(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let rows = run_sweep(config)?;
    if let Some(path) = &config.output.csv {
        fs::write(path, rows_to_csv(&rows))?;
    }
    if let Some(path) = &config.output.dat {
        fs::write(path, rows_to_dat(&rows))?;
    }
    Ok(rows)
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.regime.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.reps.to_string(),
            r.seed.to_string(),
            fmt_float(r.risk_mean),
            fmt_float(r.risk_se),
            fmt_opt(r.kl_mean),
            fmt_opt(r.kl_se),
            fmt_opt(r.leading_pred),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Csv { line: 1, msg: e.to_string() })?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Csv { line: 1, msg: format!("expected header {CSV_HEADER}") });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Csv { line, msg: e.to_string() })?;
        if record.len() != 10 {
            return Err(Error::Csv { line, msg: format!("expected 10 fields, got {}", record.len()) });
        }
        let bad = |field: &str| Error::Csv { line, msg: format!("cannot parse {field}") };
        let int = |k: usize, name: &str| record[k].parse::<usize>().map_err(|_| bad(name));
        let float = |k: usize, name: &str| record[k].parse::<f64>().map_err(|_| bad(name));
        let opt = |k: usize, name: &str| -> Result<Option<f64>> {
            if record[k].is_empty() {
                Ok(None)
            } else {
                float(k, name).map(Some)
            }
        };
        rows.push(SweepRow {
            regime: record[0].to_string(),
            n: int(1, "n")?,
            m: int(2, "m")?,
            reps: int(3, "reps")?,
            seed: record[4].parse::<u64>().map_err(|_| bad("seed"))?,
            risk_mean: float(5, "risk_mean")?,
            risk_se: float(6, "risk_se")?,
            kl_mean: opt(7, "kl_mean")?,
            kl_se: opt(8, "kl_se")?,
            leading_pred: opt(9, "leading_pred")?,
        });
    }
    Ok(rows)
}

/// Whitespace-separated plot data: `regime n log10_n log10_risk log10_leading`.
/// Non-positive values are written as `nan`.
pub fn rows_to_dat(rows: &[SweepRow]) -> String {
    let lg = |x: f64| if x > 0.0 { format!("{:.10}", x.log10()) } else { "nan".to_string() };
    let mut out = Vec::new();
    writeln!(out, "# regime n log10_n log10_risk log10_leading").expect("in-memory write");
    for r in rows {
        writeln!(
            out,
            "{} {} {} {} {}",
            r.regime,
            r.n,
            lg(r.n as f64),
            lg(r.risk_mean),
            r.leading_pred.map_or_else(|| "nan".to_string(), lg)
        )
        .expect("in-memory write");
    }
    String::from_utf8(out).expect("ascii output")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Mean over rows of `2 · risk · n^{-slope_target}`, comparable to `K`.
    pub implied_constant: f64,
    pub slope_target: f64,
}

/// Ordinary least squares of `ln risk` on `ln n` for the rows of one regime.
pub fn fit_loglog(rows: &[SweepRow]) -> Result<FitResult> {
    if rows.len() < 3 {
        return Err(Error::InvalidConfig(format!("fit needs at least 3 rows, got {}", rows.len())));
    }
    let regime: RegimeSpec = rows[0].regime.parse()?;
    if rows.iter().any(|r| r.regime != rows[0].regime) {
        return Err(Error::InvalidConfig("fit rows must share one regime".into()));
    }
    if let Some(r) = rows.iter().find(|r| !(r.risk_mean > 0.0)) {
        return Err(Error::Domain(format!("nonpositive risk mean {} at n={}", r.risk_mean, r.n)));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.risk_mean.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidConfig("fit needs distinct n values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    let slope_target = regime.slope_target();
    let implied_constant = rows.iter().map(|r| implied_constant_at(r, slope_target)).sum::<f64>() / k;
    Ok(FitResult { slope, intercept, r_squared, implied_constant, slope_target })
}

/// `2 · risk · n^{-slope_target}` for one row.
pub fn implied_constant_at(row: &SweepRow, slope_target: f64) -> f64 {
    2.0 * row.risk_mean * (row.n as f64).powf(-slope_target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantComparison {
    pub implied_constant: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn compare_constants(
    fit: &FitResult,
    constants: &RateConstants,
    regime: &RegimeSpec,
    tolerance: f64,
) -> ConstantComparison {
    let predicted = constants.for_regime(regime);
    let ratio = fit.implied_constant / predicted;
    ConstantComparison {
        implied_constant: fit.implied_constant,
        predicted,
        ratio,
        tolerance,
        pass: (ratio - 1.0).abs() <= tolerance,
    }
}

/// Rows of `rows` belonging to `regime`, in input order.
pub fn rows_for_regime(rows: &[SweepRow], regime: &str) -> Vec<SweepRow> {
    rows.iter().filter(|r| r.regime == regime).cloned().collect::<Vec<_>>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(c: f64, exponent: f64) -> Vec<SweepRow> {
        [25, 50, 100, 200, 400]
            .iter()
            .map(|&n| SweepRow {
                regime: "sl".into(),
                n,
                m: 0,
                reps: 100,
                seed: 1,
                risk_mean: c / (n as f64).powf(exponent),
                risk_se: 0.0,
                kl_mean: None,
                kl_se: None,
                leading_pred: None,
            })
            .collect()
    }

    fn config_json() -> String {
        r#"{
            "model": "mixture",
            "theta0": [0.5],
            "loss": {"kind": "log"},
            "regimes": [{"kind": "sl"}, {"kind": "ssl_linear", "alpha": 1.0}, {"kind": "ssl_super", "gamma": 0.5}],
            "n_values": [25, 50, 100, 200, 400],
            "mc": {"reps": 100, "seed": 7}
        }"#
        .to_string()
    }

    #[test]
    fn exact_power_laws() {
        let f = fit_loglog(&synthetic(0.3, 1.0)).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.implied_constant - 0.6).abs() < 1e-12);
        let f = fit_loglog(&synthetic(0.3, 1.5)).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
    }

    #[test]
    fn exact_leading_risk_gives_unit_ratio() {
        let k = RateConstants { k1: 0.5, k2: 2.0 / 3.0, k3: 2.0, beta: 1.0 };
        let f = fit_loglog(&synthetic(k.k2 / 2.0, 1.0)).unwrap();
        let c = compare_constants(&f, &k, &RegimeSpec::Sl, DEFAULT_CONSTANT_TOL);
        assert!((c.ratio - 1.0).abs() < 1e-12 && c.pass);
    }

    #[test]
    fn fit_errors() {
        let mut rows = synthetic(1.0, 1.0);
        rows[2].risk_mean = 0.0;
        assert!(fit_loglog(&rows).is_err());
        assert!(fit_loglog(&synthetic(1.0, 1.0)[..2]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = synthetic(0.1234567890123, 1.0);
        rows[0].kl_mean = Some(1.0 / 3.0);
        rows[0].kl_se = Some(f64::MIN_POSITIVE);
        rows[1].leading_pred = Some(std::f64::consts::PI * 1e-7);
        let text = rows_to_csv(&rows);
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(parse_csv(&text).unwrap(), rows);
        assert_eq!(rows_to_csv(&parse_csv(&text).unwrap()), text);
    }

    #[test]
    fn regime_ids_survive_csv_quoting() {
        let mut rows = synthetic(1.0, 1.0);
        rows[0].regime = "ssl_linear(1)".into();
        assert_eq!(parse_csv(&rows_to_csv(&rows)).unwrap(), rows);
    }

    #[test]
    fn bad_csv_reports_line() {
        let text = format!("{CSV_HEADER}\nsl,25,0,100,1,x,0,,,\n");
        assert!(matches!(parse_csv(&text), Err(Error::Csv { line: 2, .. })));
        assert!(parse_csv("a,b\n").is_err());
    }

    #[test]
    fn config_parsing_and_validation() {
        let c = SweepConfig::from_json(&config_json()).unwrap();
        assert_eq!(c.regimes.len(), 3);
        let ms: Vec<usize> = c.regimes.iter().map(|r| r.unlabeled_count(100)).collect();
        assert_eq!(ms, vec![0, 100, 1000]);

        let typo = config_json().replace("\"theta0\"", "\"thetta0\"");
        assert!(SweepConfig::from_json(&typo).is_err());
        let extra = config_json().replace("\"seed\": 7", "\"seed\": 7, \"threads\": 2");
        assert!(SweepConfig::from_json(&extra).is_err());
        let unsorted = config_json().replace("[25, 50, 100, 200, 400]", "[50, 25]");
        assert!(SweepConfig::from_json(&unsorted).is_err());
        let few = config_json().replace("\"reps\": 100", "\"reps\": 99");
        assert!(SweepConfig::from_json(&few).is_err());
        let outside = config_json().replace("[0.5]", "[1.5]");
        assert!(SweepConfig::from_json(&outside).is_err());
    }

    #[test]
    fn small_sweep_shape_and_determinism() {
        let mut c = SweepConfig::from_json(&config_json()).unwrap();
        c.n_values = vec![5, 10];
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[2].regime, "ssl_linear(1)");
        let ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
        assert_eq!(ms, vec![0, 0, 5, 10, 11, 32]);
        assert!(rows.iter().all(|r| r.kl_mean == Some(r.risk_mean)));
        assert_eq!(rows_to_csv(&rows), rows_to_csv(&run_sweep(&c).unwrap()));
    }

    #[test]
    fn dat_has_log_columns() {
        let dat = rows_to_dat(&synthetic(1.0, 1.0));
        let line = dat.lines().nth(1).unwrap();
        let cols: Vec<&str> = line.split(' ').collect();
        assert_eq!(cols[0], "sl");
        assert!((cols[2].parse::<f64>().unwrap() - 25f64.log10()).abs() < 1e-9);
        assert_eq!(cols[4], "nan");
    }
}
