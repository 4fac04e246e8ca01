//! `leo-meta` command-line front end.
//!
//! Every subcommand writes one CSV table (header row first, `.` decimal
//! separator, shortest round-trip float formatting) to stdout or `--output`,
//! and diagnostics to stderr. Exit codes: 0 success, 1 usage, 2 numerical
//! failure, 3 comparison-gate failure.
//!
//! Column layouts:
//!
//! | command    | columns |
//! |------------|---------|
//! | `moments`  | `altitude_km,m1,m2,variance[,sim_m1,sim_m2,sim_se1,sim_se2]` |
//! | `meta`     | `altitude_km,x,meta_ccdf[,empirical_ccdf]` |
//! | `simulate` | `altitude_km,theta,mode,seed,realizations,m1_hat,m1_se,m2_hat,m2_se,variance_hat,empty_fraction` |
//! | `compare`  | `altitude_km,quantity,analytic,simulated,se,abs_diff,z_score` |

use crate::analytic::{self, QuadratureRules, DEFAULT_QUAD_ORDER};
use crate::geometry::EARTH_RADIUS_M;
use crate::simulator::{self, CoverageMode, EstimateOptions, SimulationEstimate};
use crate::{Error, SystemConfig};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_GATE: i32 = 3;

/// Gate for analytic-vs-simulation agreement, in standard errors.
pub const GATE_SIGMAS: f64 = 3.0;

pub const MOMENTS_HEADER: &[&str] = &["altitude_km", "m1", "m2", "variance"];
pub const MOMENTS_SIM_HEADER: &[&str] = &["sim_m1", "sim_m2", "sim_se1", "sim_se2"];
pub const META_HEADER: &[&str] = &["altitude_km", "x", "meta_ccdf"];
pub const META_SIM_HEADER: &[&str] = &["empirical_ccdf"];
pub const SIMULATE_HEADER: &[&str] = &[
    "altitude_km",
    "theta",
    "mode",
    "seed",
    "realizations",
    "m1_hat",
    "m1_se",
    "m2_hat",
    "m2_se",
    "variance_hat",
    "empty_fraction",
];
pub const COMPARE_HEADER: &[&str] = &[
    "altitude_km",
    "quantity",
    "analytic",
    "simulated",
    "se",
    "abs_diff",
    "z_score",
];

const RANGE_HELP: &str = "Values in km: a number, a range start:stop:step (both ends \
included when step divides the span), or a comma-separated list of either";

#[derive(Debug, Parser)]
#[command(
    name = "leo-meta",
    version,
    about = "Coverage moments and SIR meta distribution of Poisson LEO constellations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep altitude and tabulate M1, M2 and the variance of P_s(θ)
    Moments(MomentsArgs),
    /// Beta-approximated CCDF of P_s(θ) over a reliability grid, per altitude
    Meta(MetaArgs),
    /// Monte Carlo estimates of M1 and M2 with standard errors
    Simulate(SimulateArgs),
    /// Analytic moments next to simulation, with a 3-sigma agreement gate for M = 1
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Satellite density per square meter of the orbit sphere
    #[arg(long, default_value_t = 1e-12)]
    lambda: f64,
    /// Orbit altitudes; see the range syntax below
    #[arg(long = "alt-km", help = RANGE_HELP)]
    alt_km: Option<String>,
    #[arg(long = "earth-radius-km", default_value_t = EARTH_RADIUS_M / 1e3)]
    earth_radius_km: f64,
    /// Path-loss exponent
    #[arg(long, default_value_t = 3.5)]
    alpha: f64,
    /// Nakagami fading parameter (integer, 1 = Rayleigh)
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// SIR threshold, linear
    #[arg(long, conflicts_with = "theta_db")]
    theta: Option<f64>,
    /// SIR threshold in dB
    #[arg(long = "theta-db", allow_hyphen_values = true)]
    theta_db: Option<f64>,
    /// Outer Gauss-Chebyshev order (serving distance)
    #[arg(long = "quad-k", default_value_t = DEFAULT_QUAD_ORDER)]
    quad_k: usize,
    /// Inner Gauss-Chebyshev order (interference field)
    #[arg(long = "quad-n", default_value_t = DEFAULT_QUAD_ORDER)]
    quad_n: usize,
    /// Master seed of the simulator
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = simulator::DEFAULT_REALIZATIONS)]
    realizations: usize,
    /// exact-m1 | fading-mc | lemma1 (default: exact-m1 for m = 1, else fading-mc)
    #[arg(long)]
    mode: Option<String>,
    /// Fading draws per realization in fading-mc mode
    #[arg(long = "fading-draws", default_value_t = simulator::DEFAULT_FADING_DRAWS)]
    fading_draws: usize,
    /// Write CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MomentsArgs {
    #[command(flatten)]
    common: Common,
    /// Append simulated moments and their standard errors
    #[arg(long = "with-sim")]
    with_sim: bool,
}

#[derive(Debug, Args)]
struct MetaArgs {
    #[command(flatten)]
    common: Common,
    /// Reliability levels x, same syntax as --alt-km (unitless)
    #[arg(long = "x-grid", default_value = "0.01:0.99:0.01")]
    x_grid: String,
    /// Append the empirical CCDF from simulation
    #[arg(long = "with-sim")]
    with_sim: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
    Io(io::Error),
    Gate(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Lib(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_NUMERICAL,
            CliError::Gate(_) => EXIT_GATE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Gate(m) => write!(f, "comparison gate failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// `10^{dB/10}`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Parses `v`, `start:stop:step`, or comma-separated lists of those.
pub fn parse_values(spec: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(format!("empty item in {spec:?}"));
        }
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("not a number: {s:?}"))
        };
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [start, stop, step] => {
                let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
                if step <= 0.0 {
                    return Err(format!("range step must be positive in {item:?}"));
                }
                if stop < start {
                    return Err(format!("empty range {item:?}"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                for i in 0..count {
                    let v = start + i as f64 * step;
                    // strip accumulated binary noise such as 0.060000000000000005
                    out.push((v * 1e12).round() / 1e12);
                }
            }
            _ => return Err(format!("malformed value or range {item:?}")),
        }
    }
    if out.is_empty() {
        return Err("empty sweep".into());
    }
    Ok(out)
}

struct Setup {
    base: SystemConfig,
    theta: f64,
    altitudes_km: Vec<f64>,
    rules: QuadratureRules,
    mode: CoverageMode,
}

impl Common {
    fn setup(&self, default_theta: f64, default_alt: &str) -> CliResult<Setup> {
        let theta = match (self.theta, self.theta_db) {
            (Some(t), _) => t,
            (None, Some(db)) => db_to_linear(db),
            (None, None) => default_theta,
        };
        let altitudes_km = parse_values(self.alt_km.as_deref().unwrap_or(default_alt))
            .map_err(|e| CliError::Usage(format!("--alt-km: {e}")))?;
        if self.quad_k == 0 || self.quad_n == 0 {
            return Err(CliError::Usage("quadrature orders must be positive".into()));
        }
        let base = SystemConfig {
            earth_radius: self.earth_radius_km * 1e3,
            altitude: altitudes_km[0] * 1e3,
            density: self.lambda,
            path_loss_exponent: self.alpha,
            nakagami_m: self.m,
            sir_threshold: theta,
        };
        for &alt in &altitudes_km {
            base.with_altitude(alt * 1e3).validate()?;
        }
        let mode = match &self.mode {
            Some(s) => s.parse::<CoverageMode>()?,
            None => CoverageMode::default_for(self.m),
        };
        Ok(Setup {
            base,
            theta,
            altitudes_km,
            rules: QuadratureRules::new(self.quad_k, self.quad_n)?,
            mode,
        })
    }

    fn estimate_options(&self, mode: CoverageMode) -> CliResult<EstimateOptions> {
        if self.realizations == 0 {
            return Err(CliError::Usage("--realizations must be at least 1".into()));
        }
        Ok(EstimateOptions::new(self.seed, mode)
            .realizations(self.realizations)
            .fading_draws(self.fading_draws))
    }

    fn check_mode(&self, setup: &Setup) -> CliResult<()> {
        if setup.mode == CoverageMode::ExactM1 && self.m != 1 {
            return Err(Error::ModeMismatch {
                mode: setup.mode.name(),
                m: self.m,
            }
            .into());
        }
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn simulate_at(setup: &Setup, alt_km: f64, opts: &EstimateOptions) -> CliResult<SimulationEstimate> {
    let config = setup.base.with_altitude(alt_km * 1e3);
    Ok(simulator::estimate(setup.theta, &config, opts)?)
}

fn cmd_moments(args: &MomentsArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let c = &args.common;
    let setup = c.setup(0.1, "200:1500:50")?;
    let opts = if args.with_sim {
        c.check_mode(&setup)?;
        writeln!(err, "seed: {}", c.seed)?;
        Some(c.estimate_options(setup.mode)?)
    } else {
        None
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = MOMENTS_HEADER.to_vec();
    if opts.is_some() {
        header.extend_from_slice(MOMENTS_SIM_HEADER);
    }
    w.write_record(&header)?;
    for &alt in &setup.altitudes_km {
        let config = setup.base.with_altitude(alt * 1e3);
        let geo = config.derive()?;
        let md = analytic::meta_distribution(setup.theta, &config, &geo, &setup.rules)?;
        let mut row = vec![
            fmt(alt),
            fmt(md.m1.value),
            fmt(md.m2.value),
            fmt(md.variance()),
        ];
        if let Some(opts) = &opts {
            let est = simulate_at(&setup, alt, opts)?;
            row.extend([est.m1_hat, est.m2_hat, est.m1_se, est.m2_se].map(fmt));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_meta(args: &MetaArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let c = &args.common;
    let setup = c.setup(1.0, "200,400,800")?;
    let xs = parse_values(&args.x_grid).map_err(|e| CliError::Usage(format!("--x-grid: {e}")))?;
    if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(CliError::Usage("--x-grid values must lie in [0, 1]".into()));
    }
    let opts = if args.with_sim {
        c.check_mode(&setup)?;
        writeln!(err, "seed: {}", c.seed)?;
        let mut o = c.estimate_options(setup.mode)?;
        o.ccdf_grid = xs.clone();
        Some(o)
    } else {
        None
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = META_HEADER.to_vec();
    if opts.is_some() {
        header.extend_from_slice(META_SIM_HEADER);
    }
    w.write_record(&header)?;
    for &alt in &setup.altitudes_km {
        let config = setup.base.with_altitude(alt * 1e3);
        let geo = config.derive()?;
        let md = analytic::meta_distribution(setup.theta, &config, &geo, &setup.rules)?;
        if !md.fit.valid {
            writeln!(
                err,
                "warning: altitude {alt} km: moments m1={} m2={} admit no beta fit ({:?}); analytic column left empty",
                md.m1.value, md.m2.value, md.fit.issue
            )?;
        }
        let empirical = match &opts {
            Some(o) => Some(simulate_at(&setup, alt, o)?.empirical_ccdf),
            None => None,
        };
        for (i, &x) in xs.iter().enumerate() {
            let analytic_cell = if md.fit.valid {
                fmt(md.ccdf(x)?)
            } else {
                String::new()
            };
            let mut row = vec![fmt(alt), fmt(x), analytic_cell];
            if let Some(e) = &empirical {
                row.push(fmt(e[i].1));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let c = &args.common;
    let setup = c.setup(1.0, "200")?;
    c.check_mode(&setup)?;
    let opts = c.estimate_options(setup.mode)?;
    writeln!(err, "seed: {}", c.seed)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SIMULATE_HEADER)?;
    for &alt in &setup.altitudes_km {
        let est = simulate_at(&setup, alt, &opts)?;
        w.write_record([
            fmt(alt),
            fmt(setup.theta),
            setup.mode.name().to_string(),
            c.seed.to_string(),
            est.realizations.to_string(),
            fmt(est.m1_hat),
            fmt(est.m1_se),
            fmt(est.m2_hat),
            fmt(est.m2_se),
            fmt(est.variance_hat()),
            fmt(est.empty_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_compare(args: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let c = &args.common;
    let setup = c.setup(1.0, "200,400,800")?;
    c.check_mode(&setup)?;
    let opts = c.estimate_options(setup.mode)?;
    writeln!(err, "seed: {}", c.seed)?;
    // Lemma 1 is exact only for Rayleigh fading; otherwise report without gating
    let gated = c.m == 1;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARE_HEADER)?;
    let mut diffs = Vec::new();
    let mut failures = Vec::new();
    for &alt in &setup.altitudes_km {
        let config = setup.base.with_altitude(alt * 1e3);
        let geo = config.derive()?;
        let (m1, m2) = analytic::first_two_moments(setup.theta, &config, &geo, &setup.rules)?;
        let est = simulate_at(&setup, alt, &opts)?;
        for (name, a, s, se) in [
            ("m1", m1.value, est.m1_hat, est.m1_se),
            ("m2", m2.value, est.m2_hat, est.m2_se),
        ] {
            let diff = (a - s).abs();
            let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            diffs.push(diff);
            if gated && z > GATE_SIGMAS {
                failures.push(format!("{name} at {alt} km: |Δ|={diff:e}, z={z:.2}"));
            }
            w.write_record([fmt(alt), name.to_string(), fmt(a), fmt(s), fmt(se), fmt(diff), fmt(z)])?;
        }
    }
    w.flush()?;
    let max = diffs.iter().copied().fold(0.0, f64::max);
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let gate = if !gated {
        "not applied (m > 1)"
    } else if failures.is_empty() {
        "pass"
    } else {
        "FAIL"
    };
    writeln!(err, "summary: max |Δ| = {max:e}, mean |Δ| = {mean:e}, gate {gate}")?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Gate(failures.join("; ")))
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };

    let output = match &cli.command {
        Command::Moments(a) => &a.common.output,
        Command::Meta(a) => &a.common.output,
        Command::Simulate(a) => &a.common.output,
        Command::Compare(a) => &a.common.output,
    };
    let mut file;
    let out: &mut dyn Write = match output {
        Some(path) => match File::create(path) {
            Ok(f) => {
                file = BufWriter::new(f);
                &mut file
            }
            Err(e) => {
                let _ = writeln!(stderr, "cannot create {}: {e}", path.display());
                return EXIT_USAGE;
            }
        },
        None => stdout,
    };

    let result = match &cli.command {
        Command::Moments(a) => cmd_moments(a, out, stderr),
        Command::Meta(a) => cmd_meta(a, out, stderr),
        Command::Simulate(a) => cmd_simulate(a, out, stderr),
        Command::Compare(a) => cmd_compare(a, out, stderr),
    };
    let flushed = out.flush();
    match result.and(flushed.map_err(CliError::from)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("leo-meta").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_values("200:1500:50").unwrap().len(), 27);
        assert_eq!(parse_values("200").unwrap(), vec![200.0]);
        assert_eq!(parse_values("200,400,800").unwrap(), vec![200.0, 400.0, 800.0]);
        let xs = parse_values("0.01:0.99:0.01").unwrap();
        assert_eq!(xs.len(), 99);
        assert_eq!(xs[5], 0.06);
        assert_eq!(xs[98], 0.99);
        assert_eq!(parse_values("0:1:0.3").unwrap(), vec![0.0, 0.3, 0.6, 0.9]);
        assert!(parse_values("").is_err());
        assert!(parse_values("5:1:1").is_err());
        assert!(parse_values("1:5:0").is_err());
        assert!(parse_values("1:5").is_err());
        assert!(parse_values("abc").is_err());
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_linear(-10.0) - 0.1).abs() < 1e-15);
        assert_eq!(db_to_linear(0.0), 1.0);
    }

    #[test]
    fn theta_db_equals_linear() {
        let base = ["moments", "--alt-km", "300", "--quad-k", "64", "--quad-n", "64"];
        let (c1, a, _) = run_capture(&[&base[..], &["--theta-db", "0"]].concat());
        let (c2, b, _) = run_capture(&[&base[..], &["--theta", "1"]].concat());
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(a, b);
        let (c3, x, _) = run_capture(&[&base[..], &["--theta-db", "-10"]].concat());
        let (_, y, _) = run_capture(&[&base[..], &["--theta", "0.1"]].concat());
        assert_eq!(c3, 0);
        assert_eq!(x, y);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_capture(&["simulate", "--realizations", "0"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["compare", "--alt-km", ""]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["moments", "--theta", "1", "--theta-db", "0"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["simulate", "--m", "3", "--mode", "exact-m1"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["simulate", "--mode", "bogus"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["moments", "--alpha", "1.5", "--alt-km", "200"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }
}
