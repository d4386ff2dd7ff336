//! Command-line front end: a JSON experiment description in, a JSON or CSV
//! report out.
//!
//! Exit codes: 0 when every verdict passes, 2 when a verdict fails, 1 on
//! invalid input or a numerical error (reported on stderr with the stage).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::examples::{
    example1_compare, example2_compare, example3_f, example3_schedule, example3_sweep,
    example3_witness_points, Comparison, Example3Row, RadiusRule,
};
use crate::factorization::{
    symbol_from_factors, CanonicalFactorization, FactorizationMethod,
};
use crate::laurent::MatrixLaurentSeries;
use crate::linalg::{CMat, Cx, C64};
use crate::modelspace::{BlaschkeProduct, ZeroSequence};
use crate::params::NumericParams;
use crate::verify::{bo_report, szego_sweep, DeterminantReport, SzegoSweep};

pub const SCHEMA_VERSION: u32 = 1;
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyBo,
    Szego,
    Examples,
    Factorize,
}

/// Row-major `m x m` block of `{re, im}` pairs.
pub type BlockSpec = Vec<Vec<Cx>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub n_min: i64,
    pub coefficients: Vec<BlockSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolSpec {
    /// Laurent coefficients `a_{n_min}, a_{n_min+1}, ...`.
    Terms {
        block_size: usize,
        n_min: i64,
        coefficients: Vec<BlockSpec>,
    },
    /// Product of the listed factors, left to right.
    Factors {
        block_size: usize,
        factors: Vec<FactorSpec>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorName {
    OneMinusInvJ,
    OneMinusInvJSquared,
    Example3,
}

fn default_radius() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZerosSpec {
    Explicit {
        values: Vec<Cx>,
    },
    Generator {
        name: GeneratorName,
        count: usize,
        #[serde(default)]
        radii: Option<RadiusRule>,
    },
    /// Uniform in the disk of the given radius, drawn from `seed`.
    Random {
        count: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
}

fn default_v() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamplesSpec {
    #[serde(default = "default_v")]
    pub v: f64,
    /// `N` values for the two closed-form examples.
    #[serde(default)]
    pub n_list: Vec<u64>,
    /// Range for checking the step constraint on `f`.
    pub n_max: u64,
    /// Witness subsequences `N = 2*3^k`, `4*3^k` for `k <= k_max`.
    pub k_max: u32,
    #[serde(default)]
    pub radii: RadiusRule,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default)]
    pub symbol: Option<SymbolSpec>,
    #[serde(default)]
    pub zeros: Option<ZerosSpec>,
    /// `N` values for `szego`.
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub examples: Option<ExamplesSpec>,
    #[serde(default)]
    pub method: FactorizationMethod,
    #[serde(default)]
    pub params: NumericParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Parser)]
#[command(name = "mstoep", version, about = "Toeplitz determinants on model spaces")]
pub struct Args {
    /// Experiment description (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for parallel stages.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Convergence and verdict tolerance (overrides `params.tol`).
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Seed for randomized zero sets (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

fn block_from_spec(spec: &BlockSpec, m: usize) -> Result<CMat> {
    if spec.len() != m || spec.iter().any(|row| row.len() != m) {
        return Err(Error::InvalidArgument(format!(
            "coefficient block is not {m} x {m}"
        )));
    }
    Ok(CMat::from_fn(m, m, |r, c| spec[r][c].into()))
}

fn series_from_spec(m: usize, n_min: i64, coeffs: &[BlockSpec]) -> Result<MatrixLaurentSeries> {
    if m == 0 {
        return Err(Error::InvalidArgument("block_size must be positive".into()));
    }
    let blocks = coeffs
        .iter()
        .map(|b| block_from_spec(b, m))
        .collect::<Result<Vec<_>>>()?;
    MatrixLaurentSeries::new(m, n_min, blocks)
}

impl SymbolSpec {
    pub fn build(&self) -> Result<MatrixLaurentSeries> {
        match self {
            SymbolSpec::Terms {
                block_size,
                n_min,
                coefficients,
            } => series_from_spec(*block_size, *n_min, coefficients),
            SymbolSpec::Factors { block_size, factors } => {
                let fs = factors
                    .iter()
                    .map(|f| series_from_spec(*block_size, f.n_min, &f.coefficients))
                    .collect::<Result<Vec<_>>>()?;
                symbol_from_factors(&fs)
            }
        }
    }
}

impl ZerosSpec {
    /// The zero sequence; random zeros are drawn from `seed`.
    pub fn sequence(&self, seed: u64) -> ZeroSequence {
        match self {
            ZerosSpec::Explicit { values } => {
                ZeroSequence::Explicit(values.iter().map(|&z| z.into()).collect())
            }
            ZerosSpec::Generator { name, radii, .. } => match name {
                GeneratorName::OneMinusInvJ => ZeroSequence::OneMinusInvJ,
                GeneratorName::OneMinusInvJSquared => ZeroSequence::OneMinusInvJSquared,
                GeneratorName::Example3 => ZeroSequence::Example3 {
                    radii: radii.unwrap_or_default(),
                },
            },
            ZerosSpec::Random { count, radius } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                ZeroSequence::Explicit(
                    (0..*count)
                        .map(|_| {
                            let r = radius * rng.gen::<f64>().sqrt();
                            C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
                        })
                        .collect(),
                )
            }
        }
    }

    pub fn count(&self) -> usize {
        match self {
            ZerosSpec::Explicit { values } => values.len(),
            ZerosSpec::Generator { count, .. } | ZerosSpec::Random { count, .. } => *count,
        }
    }

    pub fn blaschke(&self, seed: u64) -> Result<BlaschkeProduct> {
        self.sequence(seed).blaschke(self.count())
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the schema version and the fields each command needs.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "command {:?} requires `{what}`",
                    self.command
                )))
            }
        };
        match self.command {
            Command::VerifyBo => {
                need(self.symbol.is_some(), "symbol")?;
                need(self.zeros.is_some(), "zeros")
            }
            Command::Szego => {
                need(self.symbol.is_some(), "symbol")?;
                need(self.zeros.is_some(), "zeros")
            }
            Command::Examples => need(self.examples.is_some(), "examples"),
            Command::Factorize => need(self.symbol.is_some(), "symbol"),
        }
    }

    fn apply_flags(&mut self, args: &Args) {
        if let Some(tol) = args.tol {
            self.params.tol = tol;
        }
        if let Some(seed) = args.seed {
            self.seed = seed;
        }
        if let Some(format) = args.format {
            self.output.format = format;
        }
        if let Some(out) = &args.out {
            self.output.path = Some(out.clone());
        }
    }
}

/// Serialized factor coefficients.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub n_min: i64,
    /// Row-major blocks.
    pub coefficients: Vec<BlockSpec>,
}

impl From<&MatrixLaurentSeries> for SeriesRecord {
    fn from(s: &MatrixLaurentSeries) -> Self {
        let m = s.block_size();
        SeriesRecord {
            n_min: s.n_min(),
            coefficients: s
                .terms()
                .map(|(_, blk)| {
                    (0..m)
                        .map(|r| (0..m).map(|c| blk[(r, c)].into()).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizeReport {
    pub w_minus: SeriesRecord,
    pub w_plus: SeriesRecord,
    pub v_plus: SeriesRecord,
    pub v_minus: SeriesRecord,
    pub b: SeriesRecord,
    pub c: SeriesRecord,
    pub right_residual: f64,
    pub left_residual: f64,
    pub bc_tail: f64,
    pub method: FactorizationMethod,
    pub verdict: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExamplesReport {
    pub v: f64,
    pub example1: Vec<Comparison>,
    pub example2: Vec<Comparison>,
    pub steps_hold: bool,
    pub n_max: u64,
    pub witness_fractions_exact: bool,
    pub example3: Vec<Example3Row>,
    /// Largest successive error ratio `err(N') / err(N)` in examples 1 and 2.
    pub worst_error_ratio: Option<f64>,
    pub verdict: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    VerifyBo(Box<DeterminantReport>),
    Szego(Box<SzegoSweep>),
    Examples(Box<ExamplesReport>),
    Factorize(Box<FactorizeReport>),
}

impl Report {
    pub fn verdict(&self) -> bool {
        match self {
            Report::VerifyBo(r) => r.verdict,
            Report::Szego(r) => r.verdict,
            Report::Examples(r) => r.verdict,
            Report::Factorize(r) => r.verdict,
        }
    }
}

/// The report file: resolved config, library version and results.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub schema_version: u32,
    pub library_version: String,
    pub config: ExperimentConfig,
    pub verdict: bool,
    pub report: Report,
}

fn examples_report(spec: &ExamplesSpec) -> Result<ExamplesReport> {
    let example1 = spec
        .n_list
        .iter()
        .map(|&n| example1_compare(spec.v, n))
        .collect::<Result<Vec<_>>>()
        .stage("example 1")?;
    let example2 = spec
        .n_list
        .iter()
        .map(|&n| example2_compare(spec.v, n))
        .collect::<Result<Vec<_>>>()
        .stage("example 2")?;
    let sched = example3_schedule(spec.n_max, spec.radii).stage("example 3 schedule")?;
    let steps_hold = sched.monotone_steps_hold();
    let witness_fractions_exact = (0..=spec.k_max).all(|k| {
        let p = 3u64.pow(k);
        2 * example3_f(2 * p) == 2 * p && 4 * example3_f(4 * p) == 4 * p
    });
    let example3 = example3_sweep(spec.v, spec.radii, &example3_witness_points(spec.k_max))
        .stage("example 3 sweep")?;
    let ratios: Vec<f64> = [&example1, &example2]
        .iter()
        .flat_map(|rows| rows.windows(2).map(|w| w[1].rel_err / w[0].rel_err))
        .collect();
    let worst_error_ratio = ratios.iter().copied().reduce(f64::max);
    let verdict =
        steps_hold && witness_fractions_exact && worst_error_ratio.is_none_or(|r| r < 1.0);
    Ok(ExamplesReport {
        v: spec.v,
        example1,
        example2,
        steps_hold,
        n_max: spec.n_max,
        witness_fractions_exact,
        example3,
        worst_error_ratio,
        verdict,
    })
}

/// Runs a validated config.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Report> {
    let params = &cfg.params;
    match cfg.command {
        Command::VerifyBo => {
            let a = cfg.symbol.as_ref().unwrap().build().stage("symbol")?;
            let u = cfg.zeros.as_ref().unwrap().blaschke(cfg.seed).stage("zeros")?;
            Ok(Report::VerifyBo(Box::new(bo_report(&a, &u, params)?)))
        }
        Command::Szego => {
            let a = cfg.symbol.as_ref().unwrap().build().stage("symbol")?;
            let zeros = cfg.zeros.as_ref().unwrap();
            let seq = zeros.sequence(cfg.seed);
            zeros.blaschke(cfg.seed).stage("zeros")?;
            let n_list = cfg
                .n_list
                .clone()
                .unwrap_or_else(|| (1..=zeros.count()).collect());
            Ok(Report::Szego(Box::new(szego_sweep(&a, &seq, &n_list, params)?)))
        }
        Command::Examples => Ok(Report::Examples(Box::new(examples_report(
            cfg.examples.as_ref().unwrap(),
        )?))),
        Command::Factorize => {
            let a = cfg.symbol.as_ref().unwrap().build().stage("symbol")?;
            let f = CanonicalFactorization::compute(&a, cfg.method, params)
                .stage("factorization")?;
            Ok(Report::Factorize(Box::new(FactorizeReport {
                w_minus: (&f.w_minus).into(),
                w_plus: (&f.w_plus).into(),
                v_plus: (&f.v_plus).into(),
                v_minus: (&f.v_minus).into(),
                b: (&f.b).into(),
                c: (&f.c).into(),
                right_residual: f.right_residual,
                left_residual: f.left_residual,
                bc_tail: f.bc_tail,
                method: f.method,
                verdict: f.right_residual < params.tol && f.left_residual < params.tol,
            })))
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:e}"))
}

/// CSV rendering of a report.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::new();
    match report {
        Report::VerifyBo(r) => {
            out.push_str("quantity,log_abs,arg,re,im\n");
            for (name, d) in [
                ("lhs", r.lhs),
                ("rhs", r.rhs),
                ("mean_product", r.mean_product),
                ("factor_product", r.factor_product),
                ("restricted_det", r.qu_det.sandwich),
                ("fredholm_det", r.fredholm.value),
                ("resolvent_det", r.resolvent_det),
            ] {
                let z = d.to_complex();
                let _ = writeln!(out, "{name},{:e},{:e},{:e},{:e}", d.log_abs, d.arg, z.re, z.im);
            }
            out.push_str("\ncheck,value,tolerance,pass\n");
            for c in &r.checks {
                let _ = writeln!(out, "{},{:e},{:e},{}", c.name, c.value, c.tolerance, c.pass);
            }
        }
        Report::Szego(s) => {
            out.push_str("n,d_n_log_abs,d_n_arg,d_n_re,d_n_im,error\n");
            for row in &s.rows {
                let z = row.d_n.to_complex();
                let _ = writeln!(
                    out,
                    "{},{:e},{:e},{:e},{:e},{:e}",
                    row.n, row.d_n.log_abs, row.d_n.arg, z.re, z.im, row.error
                );
            }
        }
        Report::Examples(e) => {
            out.push_str("example,n,measured,predicted,rel_err\n");
            for (name, rows) in [("example1", &e.example1), ("example2", &e.example2)] {
                for row in rows.iter() {
                    let (m, p) = row.normalized(e.v);
                    let _ = writeln!(out, "{name},{},{m:e},{p:e},{:e}", row.n, row.rel_err);
                }
            }
            for row in &e.example3 {
                // f(N)/N is 1/2 on N = 2*3^k and 1/4 on N = 4*3^k.
                let name = if 2 * row.f == row.n { "example3_half" } else { "example3_quarter" };
                let _ = writeln!(
                    out,
                    "{name},{},{:e},{:e},{:e}",
                    row.n,
                    row.root,
                    row.predicted_root,
                    (row.root / row.predicted_root - 1.0).abs()
                );
            }
        }
        Report::Factorize(f) => {
            out.push_str("factor,index,row,col,re,im\n");
            for (name, s) in [
                ("w_minus", &f.w_minus),
                ("w_plus", &f.w_plus),
                ("v_plus", &f.v_plus),
                ("v_minus", &f.v_minus),
                ("b", &f.b),
                ("c", &f.c),
            ] {
                for (k, blk) in s.coefficients.iter().enumerate() {
                    for (r, row) in blk.iter().enumerate() {
                        for (c, z) in row.iter().enumerate() {
                            let _ = writeln!(
                                out,
                                "{name},{},{r},{c},{:e},{:e}",
                                s.n_min + k as i64,
                                z.re,
                                z.im
                            );
                        }
                    }
                }
            }
            let _ = writeln!(
                out,
                "\nright_residual,{}\nleft_residual,{}",
                opt(Some(f.right_residual)),
                opt(Some(f.left_residual))
            );
        }
    }
    out
}

/// Runs a config and renders the report; returns the rendered text and the verdict.
pub fn render(cfg: &ExperimentConfig) -> Result<(String, bool)> {
    let report = run_config(cfg)?;
    let verdict = report.verdict();
    let text = match cfg.output.format {
        Format::Csv => to_csv(&report),
        Format::Json => {
            let env = Envelope {
                schema_version: SCHEMA_VERSION,
                library_version: LIBRARY_VERSION.to_string(),
                config: cfg.clone(),
                verdict,
                report,
            };
            let mut s = serde_json::to_string_pretty(&env)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    Ok((text, verdict))
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

/// Entry point behind the binary; returns the process exit code.
pub fn main_with_args(args: Args) -> i32 {
    if let Some(n) = args.threads {
        // A second initialization (tests calling this twice) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = load(&args.config).stage("config").and_then(|mut cfg| {
        cfg.apply_flags(&args);
        let (text, verdict) = render(&cfg)?;
        match &cfg.output.path {
            Some(p) => std::fs::write(p, text)
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))
                .stage("output")?,
            None => print!("{text}"),
        }
        Ok(verdict)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const VERIFY: &str = r#"{
        "schema_version": 1,
        "command": "verify-bo",
        "symbol": {"kind": "terms", "block_size": 1, "n_min": -1,
                   "coefficients": [[[{"re": -0.3333333333333333, "im": 0}]],
                                    [[{"re": 1.1666666666666667, "im": 0}]],
                                    [[{"re": -0.5, "im": 0}]]]},
        "zeros": {"kind": "explicit", "values": [{"re": 0.4, "im": 0.0}]}
    }"#;

    #[test]
    fn parses_and_runs_verify() {
        let cfg = ExperimentConfig::from_json(VERIFY).unwrap();
        let (text, verdict) = render(&cfg).unwrap();
        assert!(verdict);
        assert!(text.contains("\"library_version\""));
        assert!(text.contains("\"log_abs\""));
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = VERIFY.replace("\"seed\"", "\"x\"").replace("\"command\"", "\"colour\": 1, \"command\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let bad = VERIFY.replace("\"schema_version\": 1", "\"schema_version\": 9");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn missing_zeros_rejected() {
        let bad = r#"{"schema_version": 1, "command": "verify-bo",
            "symbol": {"kind": "terms", "block_size": 1, "n_min": 0,
                       "coefficients": [[[{"re": 1, "im": 0}]]]}}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
    }

    #[test]
    fn random_zeros_are_seeded() {
        let z = ZerosSpec::Random {
            count: 4,
            radius: 0.5,
        };
        assert_eq!(z.sequence(3), z.sequence(3));
        assert_ne!(z.sequence(3), z.sequence(4));
        assert!(z.blaschke(3).unwrap().max_modulus() <= 0.5);
    }

    #[test]
    fn factor_symbol_matches_product() {
        let spec = SymbolSpec::Factors {
            block_size: 1,
            factors: vec![
                FactorSpec {
                    n_min: -1,
                    coefficients: vec![vec![vec![Cx { re: -0.25, im: 0.0 }]], vec![vec![Cx { re: 1.0, im: 0.0 }]]],
                },
                FactorSpec {
                    n_min: 0,
                    coefficients: vec![vec![vec![Cx { re: 1.0, im: 0.0 }]], vec![vec![Cx { re: -0.5, im: 0.0 }]]],
                },
            ],
        };
        let a = spec.build().unwrap();
        assert_eq!(a.n_min(), -1);
        assert!((a.scalar_coeff(0) - C64::new(1.125, 0.0)).norm() < 1e-15);
    }
}
