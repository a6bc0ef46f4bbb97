//! Command-line driver.
//!
//! Settings come from built-in defaults, then an optional `key = value`
//! config file, then `--set key=value` pairs, then the dedicated flags. Every
//! run writes `results.csv` and a `manifest.txt` that is itself a valid
//! config file, so `pinch-uplink <command> --config manifest.txt` repeats
//! the run.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::experiments::{run_sweep, Method, SweepKind, SweepResult, SweepSpec};
use crate::fp::Mode;
use crate::position::{GdOptions, PositionObjectiveKind};
use crate::scenario::{dbm_to_watts, SystemParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const RESULTS_HEADER: &str = "sweep_value,method,mean_sum_rate_bits,std_err,realizations,seed";
pub const CONVERGENCE_HEADER: &str = "iteration,method,n_waveguides,mean_sum_rate_bits";

/// Every key accepted in config files and `--set`.
pub const KEYS: &[&str] = &[
    "fc_hz",
    "n_eff",
    "sigma2_dbm",
    "d_m",
    "dx_m",
    "dy_m",
    "x0_m",
    "n_waveguides",
    "n_users",
    "pmax_dbm",
    "pmax_grid_dbm",
    "user_grid",
    "realizations",
    "master_seed",
    "mode",
    "modes",
    "tol",
    "max_iters",
    "gd_l0",
    "gd_lmin",
    "gd_shrink",
    "gd_max_sweeps",
    "multistart",
    "threads",
    "out_dir",
    "position_objective",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value `{value}` for key `{key}`")]
    BadValue { key: String, value: String },
    #[error("value out of range for key `{0}`")]
    OutOfRange(&'static str),
    #[error("line {line} of {path}: expected `key = value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("cannot read config `{path}` (key `config`): {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pinch-uplink", version, about = "Pinching-antenna uplink sum-rate optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize one seeded instance.
    Single(Flags),
    /// Sum-rate against the power budget.
    SweepPmax(Flags),
    /// Sum-rate against the number of users.
    SweepUsers(Flags),
    /// Averaged optimizer traces.
    Convergence(Flags),
}

#[derive(Debug, Clone, Default, clap::Args)]
struct Flags {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Waveguide count (comma list for `convergence`).
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long = "pmax-dbm")]
    pmax_dbm: Option<String>,
    /// `sic`, `nsic` or a comma list of both.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    realizations: Option<String>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (SweepKind, Flags) {
        match self {
            Command::Single(f) => (SweepKind::Single, f),
            Command::SweepPmax(f) => (SweepKind::PmaxSweep, f),
            Command::SweepUsers(f) => (SweepKind::UserSweep, f),
            Command::Convergence(f) => (SweepKind::Convergence, f),
        }
    }
}

pub fn command_name(kind: SweepKind) -> &'static str {
    match kind {
        SweepKind::Single => "single",
        SweepKind::PmaxSweep => "sweep-pmax",
        SweepKind::UserSweep => "sweep-users",
        SweepKind::Convergence => "convergence",
    }
}

/// Unresolved `key -> value` settings, later sources overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        let key = if key == "mode" { "modes" } else { key };
        self.0.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        raw.merge_text(text, path)?;
        Ok(raw)
    }

    fn merge_text(&mut self, text: &str, path: &Path) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: path.to_path_buf(),
                line: i + 1,
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: SweepKind,
    pub fc_hz: f64,
    pub n_eff: f64,
    pub sigma2_dbm: f64,
    pub d_m: f64,
    pub dx_m: f64,
    pub dy_m: f64,
    pub x0_m: f64,
    pub n_waveguides: Vec<usize>,
    pub n_users: usize,
    pub pmax_dbm: f64,
    pub pmax_grid_dbm: Vec<f64>,
    pub user_grid: Vec<usize>,
    pub realizations: usize,
    pub master_seed: u64,
    pub modes: Vec<Mode>,
    pub tol: f64,
    pub max_iters: usize,
    pub gd: GdOptions,
    pub multistart: usize,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub position_objective: PositionObjectiveKind,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn resolve(kind: SweepKind, raw: &RawConfig) -> Result<Self, ConfigError> {
        let d = SweepSpec::new(kind);
        let p = d.params;
        let one = |key: &str| -> Option<&str> { raw.get(key) };
        fn or<T: FromStr>(raw: Option<&str>, key: &str, default: T) -> Result<T, ConfigError> {
            raw.map_or(Ok(default), |v| parse_value(key, v))
        }
        fn or_list<T: FromStr>(raw: Option<&str>, key: &str, default: Vec<T>) -> Result<Vec<T>, ConfigError> {
            raw.map_or(Ok(default), |v| parse_list(key, v))
        }
        let default_modes = vec![Mode::Sic, Mode::Nsic];

        let out_dir = one("out_dir")
            .filter(|s| !s.is_empty())
            .ok_or(ConfigError::MissingKey("out_dir"))?;

        let cfg = RunConfig {
            kind,
            fc_hz: or(one("fc_hz"), "fc_hz", p.carrier_hz)?,
            n_eff: or(one("n_eff"), "n_eff", p.n_eff)?,
            sigma2_dbm: or(one("sigma2_dbm"), "sigma2_dbm", -90.0)?,
            d_m: or(one("d_m"), "d_m", p.height)?,
            dx_m: or(one("dx_m"), "dx_m", p.half_x)?,
            dy_m: or(one("dy_m"), "dy_m", p.half_y)?,
            x0_m: or(one("x0_m"), "x0_m", p.feed_x)?,
            n_waveguides: or_list(one("n_waveguides"), "n_waveguides", d.n_waveguides.clone())?,
            n_users: or(one("n_users"), "n_users", 4)?,
            pmax_dbm: or(one("pmax_dbm"), "pmax_dbm", 10.0)?,
            pmax_grid_dbm: or_list(
                one("pmax_grid_dbm"),
                "pmax_grid_dbm",
                crate::experiments::default_pmax_grid(),
            )?,
            user_grid: or_list(one("user_grid"), "user_grid", (1..=8).collect())?,
            realizations: or(one("realizations"), "realizations", d.realizations)?,
            master_seed: or(one("master_seed"), "master_seed", d.master_seed)?,
            modes: or_list(one("modes"), "modes", default_modes)?,
            tol: or(one("tol"), "tol", d.bcd.tol)?,
            max_iters: or(one("max_iters"), "max_iters", d.bcd.max_iters)?,
            gd: GdOptions {
                l0: or(one("gd_l0"), "gd_l0", d.bcd.gd.l0)?,
                l_min: or(one("gd_lmin"), "gd_lmin", d.bcd.gd.l_min)?,
                shrink: or(one("gd_shrink"), "gd_shrink", d.bcd.gd.shrink)?,
                max_sweeps: or(one("gd_max_sweeps"), "gd_max_sweeps", d.bcd.gd.max_sweeps)?,
            },
            multistart: or(one("multistart"), "multistart", d.multistart)?,
            threads: or(one("threads"), "threads", 0)?,
            out_dir: PathBuf::from(out_dir),
            position_objective: or(
                one("position_objective"),
                "position_objective",
                d.bcd.position_objective,
            )?,
        };
        cfg.spec()?;
        Ok(cfg)
    }

    pub fn params(&self) -> SystemParams {
        SystemParams {
            carrier_hz: self.fc_hz,
            n_eff: self.n_eff,
            noise_power: dbm_to_watts(self.sigma2_dbm),
            height: self.d_m,
            half_x: self.dx_m,
            half_y: self.dy_m,
            feed_x: self.x0_m,
        }
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut modes = self.modes.clone();
        modes.sort();
        modes.dedup();
        let mut out: Vec<Method> = modes.iter().map(|&m| Method::pass(m)).collect();
        if self.kind != SweepKind::Convergence {
            out.extend(modes.iter().map(|&m| Method::ula(m)));
        }
        out
    }

    /// Builds and validates the experiment description.
    pub fn spec(&self) -> Result<SweepSpec, ConfigError> {
        let mut spec = SweepSpec::new(self.kind);
        spec.params = self.params();
        spec.n_waveguides = self.n_waveguides.clone();
        spec.n_users = match self.kind {
            SweepKind::UserSweep => self.user_grid.clone(),
            _ => vec![self.n_users],
        };
        spec.pmax_dbm = match self.kind {
            SweepKind::PmaxSweep => self.pmax_grid_dbm.clone(),
            _ => vec![self.pmax_dbm],
        };
        spec.realizations = self.realizations;
        spec.master_seed = self.master_seed;
        spec.methods = self.methods();
        spec.bcd.tol = self.tol;
        spec.bcd.max_iters = self.max_iters;
        spec.bcd.gd = self.gd;
        spec.bcd.position_objective = self.position_objective;
        spec.multistart = self.multistart;
        spec.validate().map_err(|e| match e {
            Error::InvalidParameter(key) => ConfigError::OutOfRange(key),
            _ => ConfigError::OutOfRange("config"),
        })?;
        Ok(spec)
    }

    /// `key = value` lines that resolve back to this configuration.
    pub fn to_config_text(&self) -> String {
        let modes: Vec<&str> = self.modes.iter().map(|m| m.as_str()).collect();
        let lines: Vec<(&str, String)> = vec![
            ("fc_hz", self.fc_hz.to_string()),
            ("n_eff", self.n_eff.to_string()),
            ("sigma2_dbm", self.sigma2_dbm.to_string()),
            ("d_m", self.d_m.to_string()),
            ("dx_m", self.dx_m.to_string()),
            ("dy_m", self.dy_m.to_string()),
            ("x0_m", self.x0_m.to_string()),
            ("n_waveguides", join(&self.n_waveguides)),
            ("n_users", self.n_users.to_string()),
            ("pmax_dbm", self.pmax_dbm.to_string()),
            ("pmax_grid_dbm", join(&self.pmax_grid_dbm)),
            ("user_grid", join(&self.user_grid)),
            ("realizations", self.realizations.to_string()),
            ("master_seed", self.master_seed.to_string()),
            ("modes", modes.join(",")),
            ("tol", self.tol.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("gd_l0", self.gd.l0.to_string()),
            ("gd_lmin", self.gd.l_min.to_string()),
            ("gd_shrink", self.gd.shrink.to_string()),
            ("gd_max_sweeps", self.gd.max_sweeps.to_string()),
            ("multistart", self.multistart.to_string()),
            ("position_objective", self.position_objective.as_str().to_string()),
            ("threads", self.threads.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ];
        lines.into_iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }
}

/// Resolved configuration plus the facts needed to audit a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub realizations_per_method: Vec<(Method, usize)>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# pinch-uplink {}", self.version);
        let _ = writeln!(s, "# command: {}", command_name(self.config.kind));
        let _ = writeln!(
            s,
            "# rerun: pinch-uplink {} --config manifest.txt",
            command_name(self.config.kind)
        );
        let _ = writeln!(s, "# wall_time_s: {:.3}", self.wall_time_s);
        let _ = writeln!(
            s,
            "# units: optimizer works in nats, results.csv reports bits per channel use"
        );
        let _ = writeln!(s, "# initial powers: p_max for every user");
        for (method, count) in &self.realizations_per_method {
            let _ = writeln!(s, "# realizations {method}: {count}");
        }
        s.push_str(&self.config.to_config_text());
        s
    }
}

/// Rounds to 12 significant digits and prints the shortest form.
pub fn fmt_num(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    rounded.to_string()
}

pub fn results_csv(result: &SweepResult) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_num(r.sweep_value),
            r.method,
            fmt_num(r.mean_bits),
            fmt_num(r.std_err),
            r.realizations,
            r.seed
        );
    }
    s
}

pub fn convergence_csv(result: &SweepResult) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    for r in &result.convergence {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.iteration,
            r.method,
            r.n_waveguides,
            fmt_num(r.mean_bits)
        );
    }
    s
}

fn gather(kind: SweepKind, flags: &Flags) -> Result<RawConfig, ConfigError> {
    let mut raw = match &flags.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for pair in &flags.set {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::BadValue {
            key: "set".into(),
            value: pair.clone(),
        })?;
        raw.set(k, v)?;
    }
    let m_key = if kind == SweepKind::UserSweep {
        "user_grid"
    } else {
        "n_users"
    };
    let p_key = if kind == SweepKind::PmaxSweep {
        "pmax_grid_dbm"
    } else {
        "pmax_dbm"
    };
    let flagged = [
        ("master_seed", flags.seed.clone()),
        ("n_waveguides", flags.n.clone()),
        (m_key, flags.m.clone()),
        (p_key, flags.pmax_dbm.clone()),
        ("modes", flags.mode.clone()),
        ("realizations", flags.realizations.clone()),
        ("threads", flags.threads.clone()),
        ("out_dir", flags.out_dir.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in flagged {
        if let Some(v) = v {
            raw.set(k, &v)?;
        }
    }
    Ok(raw)
}

/// Runs a resolved configuration and writes its outputs.
pub fn execute(cfg: &RunConfig) -> Result<SweepResult, CliError> {
    let spec = cfg.spec()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    let result = pool.install(|| run_sweep(&spec)).map_err(|e| {
        CliError::Config(ConfigError::OutOfRange(match e {
            Error::InvalidParameter(k) => k,
            _ => "config",
        }))
    })?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let io = |context: String| move |source| CliError::Io { context, source };
    fs::create_dir_all(&cfg.out_dir).map_err(io(format!("creating {}", cfg.out_dir.display())))?;
    let csv = match cfg.kind {
        SweepKind::Convergence => convergence_csv(&result),
        _ => results_csv(&result),
    };
    let csv_path = cfg.out_dir.join("results.csv");
    fs::write(&csv_path, csv).map_err(io(format!("writing {}", csv_path.display())))?;
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s,
        realizations_per_method: spec.methods.iter().map(|&m| (m, spec.realizations)).collect(),
    };
    let manifest_path = cfg.out_dir.join("manifest.txt");
    fs::write(&manifest_path, manifest.render()).map_err(io(format!("writing {}", manifest_path.display())))?;
    Ok(result)
}

fn summary(cfg: &RunConfig, result: &SweepResult) -> String {
    let mut s = String::new();
    if cfg.kind == SweepKind::Convergence {
        for r in result.convergence.iter().filter(|r| r.iteration == 0) {
            let last = result.mean_trace(r.method, r.n_waveguides);
            let _ = writeln!(
                s,
                "{} N={}: {} -> {} bits/s/Hz over {} iterations",
                r.method,
                r.n_waveguides,
                fmt_num(r.mean_bits),
                fmt_num(*last.last().unwrap_or(&r.mean_bits)),
                last.len().saturating_sub(1)
            );
        }
    } else {
        for r in &result.rows {
            let _ = writeln!(
                s,
                "{} {}: {} ± {} bits/s/Hz",
                fmt_num(r.sweep_value),
                r.method,
                fmt_num(r.mean_bits),
                fmt_num(r.std_err)
            );
        }
    }
    let _ = writeln!(s, "wrote {}", cfg.out_dir.display());
    s
}

/// Entry point shared by the binary and the tests. Returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (kind, flags) = cli.command.split();
    let outcome = gather(kind, &flags)
        .and_then(|raw| RunConfig::resolve(kind, &raw))
        .map_err(CliError::from)
        .and_then(|cfg| execute(&cfg).map(|res| (cfg, res)));
    match outcome {
        Ok((cfg, res)) => {
            print!("{}", summary(&cfg, &res));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
