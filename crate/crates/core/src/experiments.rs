//! Seeded Monte-Carlo sweeps comparing the optimized pinching array with a
//! fixed ULA.
//!
//! Realization `r` always draws its scenario from stream `r` of the master
//! seed, and every method and sweep point of that realization reuses the
//! same draw. Results therefore do not depend on scheduling, and method
//! comparisons are paired.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bcd::{optimize, optimize_baseline, BcdOptions, BcdResult};
use crate::error::{Error, Result};
use crate::fp::Mode;
use crate::position::{GdOptions, PositionObjectiveKind};
use crate::scenario::{dbm_to_watts, realization_rng, sample_from_rng, sample_layout, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    PassSic,
    PassNsic,
    UlaSic,
    UlaNsic,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::PassSic, Method::PassNsic, Method::UlaSic, Method::UlaNsic];

    pub fn pass(mode: Mode) -> Self {
        match mode {
            Mode::Sic => Method::PassSic,
            Mode::Nsic => Method::PassNsic,
        }
    }

    pub fn ula(mode: Mode) -> Self {
        match mode {
            Mode::Sic => Method::UlaSic,
            Mode::Nsic => Method::UlaNsic,
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            Method::PassSic | Method::UlaSic => Mode::Sic,
            Method::PassNsic | Method::UlaNsic => Mode::Nsic,
        }
    }

    pub fn is_pass(self) -> bool {
        matches!(self, Method::PassSic | Method::PassNsic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::PassSic => "pass-sic",
            Method::PassNsic => "pass-nsic",
            Method::UlaSic => "ula-sic",
            Method::UlaNsic => "ula-nsic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Sum-rate against the power budget.
    PmaxSweep,
    /// Sum-rate against the number of users.
    UserSweep,
    /// Averaged optimizer traces, per method and array size.
    Convergence,
    /// One realization at a single operating point.
    Single,
}

/// Tolerances and step sizes handed to every optimizer run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub gd: GdOptions,
    pub position_objective: PositionObjectiveKind,
}

impl Default for BcdSettings {
    fn default() -> Self {
        let d = BcdOptions::default();
        Self {
            tol: d.tol,
            max_iters: d.max_iters,
            gd: d.gd,
            position_objective: d.position_objective,
        }
    }
}

impl BcdSettings {
    pub fn options(&self, mode: Mode) -> BcdOptions {
        BcdOptions {
            mode,
            tol: self.tol,
            max_iters: self.max_iters,
            gd: self.gd,
            optimize_positions: true,
            position_objective: self.position_objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub params: SystemParams,
    /// Array sizes. Only [`SweepKind::Convergence`] accepts more than one.
    pub n_waveguides: Vec<usize>,
    /// User counts. Only [`SweepKind::UserSweep`] accepts more than one.
    pub n_users: Vec<usize>,
    /// Power budgets (dBm). Only [`SweepKind::PmaxSweep`] accepts more than one.
    pub pmax_dbm: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub bcd: BcdSettings,
    /// Random initial layouts tried per pinching run; the best final rate
    /// is kept.
    pub multistart: usize,
}

impl SweepSpec {
    /// Defaults for `kind`: N = 4, M = 4, 10 dBm, 200 realizations, all
    /// four methods, and the default sweep grid along the swept axis.
    pub fn new(kind: SweepKind) -> Self {
        let mut spec = Self {
            kind,
            params: SystemParams::default(),
            n_waveguides: vec![4],
            n_users: vec![4],
            pmax_dbm: vec![10.0],
            realizations: 200,
            master_seed: 1,
            methods: Method::ALL.to_vec(),
            bcd: BcdSettings::default(),
            multistart: 1,
        };
        match kind {
            SweepKind::PmaxSweep => spec.pmax_dbm = default_pmax_grid(),
            SweepKind::UserSweep => spec.n_users = (1..=8).collect(),
            SweepKind::Convergence => spec.methods = vec![Method::PassSic, Method::PassNsic],
            SweepKind::Single => spec.realizations = 1,
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.realizations == 0 {
            return Err(Error::InvalidParameter("realizations"));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("modes"));
        }
        if self.multistart == 0 {
            return Err(Error::InvalidParameter("multistart"));
        }
        let single = |len: usize, swept: bool| if swept { len >= 1 } else { len == 1 };
        if !single(self.n_waveguides.len(), self.kind == SweepKind::Convergence) || self.n_waveguides.contains(&0) {
            return Err(Error::InvalidParameter("n_waveguides"));
        }
        if !single(self.n_users.len(), self.kind == SweepKind::UserSweep) || self.n_users.contains(&0) {
            return Err(Error::InvalidParameter(if self.kind == SweepKind::UserSweep {
                "user_grid"
            } else {
                "n_users"
            }));
        }
        if !single(self.pmax_dbm.len(), self.kind == SweepKind::PmaxSweep)
            || self.pmax_dbm.iter().any(|p| !p.is_finite())
        {
            return Err(Error::InvalidParameter(if self.kind == SweepKind::PmaxSweep {
                "pmax_grid_dbm"
            } else {
                "pmax_dbm"
            }));
        }
        self.bcd.options(Mode::Sic).validate()
    }
}

/// -10 to 20 dBm in 5 dB steps.
pub fn default_pmax_grid() -> Vec<f64> {
    (0..7).map(|k| -10.0 + 5.0 * k as f64).collect()
}

/// Aggregate of one (sweep value, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub method: Method,
    pub mean_bits: f64,
    pub std_err: f64,
    pub realizations: usize,
    pub seed: u64,
    /// Final sum-rate (bits) of each realization, in realization order.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub iteration: usize,
    pub method: Method,
    pub n_waveguides: usize,
    pub mean_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub convergence: Vec<ConvergenceRow>,
}

impl SweepResult {
    pub fn row(&self, sweep_value: f64, method: Method) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.sweep_value == sweep_value)
    }

    /// Mean trace of `method` at array size `n`, indexed by iteration.
    pub fn mean_trace(&self, method: Method, n: usize) -> Vec<f64> {
        self.convergence
            .iter()
            .filter(|r| r.method == method && r.n_waveguides == n)
            .map(|r| r.mean_bits)
            .collect()
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_std_err(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs one method on one scenario and returns the optimizer result with
/// the best final rate over the given starting layouts.
fn run_method(
    spec: &SweepSpec,
    method: Method,
    users: &crate::scenario::UserSet,
    starts: &[crate::scenario::PinchLayout],
) -> BcdResult {
    let opts = spec.bcd.options(method.mode());
    if !method.is_pass() {
        return optimize_baseline(&spec.params, users, starts[0].n_waveguides(), &opts);
    }
    starts
        .iter()
        .map(|l| optimize(&spec.params, users, l, &opts))
        .reduce(|best, r| if r.final_rate() > best.final_rate() { r } else { best })
        .expect("at least one start")
}

/// Scenario of realization `r`: the largest user set of the sweep (smaller
/// counts use a prefix) and `multistart` initial layouts.
fn draw(spec: &SweepSpec, r: usize, n: usize) -> (crate::scenario::UserSet, Vec<crate::scenario::PinchLayout>) {
    let m_max = *spec.n_users.iter().max().expect("validated");
    let mut rng = realization_rng(spec.master_seed, r as u64);
    let (users, first) = sample_from_rng(&mut rng, &spec.params, m_max, n, 1.0);
    let mut starts = vec![first];
    for _ in 1..spec.multistart {
        starts.push(sample_layout(&mut rng, &spec.params, n));
    }
    (users, starts)
}

/// Runs a sweep. Realizations are spread over the current rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    if spec.kind == SweepKind::Convergence {
        return run_convergence(spec);
    }
    let n = spec.n_waveguides[0];
    // (sweep value, user count, budget in W) per point
    let points: Vec<(f64, usize, f64)> = match spec.kind {
        SweepKind::UserSweep => spec
            .n_users
            .iter()
            .map(|&m| (m as f64, m, dbm_to_watts(spec.pmax_dbm[0])))
            .collect(),
        _ => spec
            .pmax_dbm
            .iter()
            .map(|&p| (p, spec.n_users[0], dbm_to_watts(p)))
            .collect(),
    };

    // finals[r][point][method]
    let finals: Vec<Vec<Vec<f64>>> = (0..spec.realizations)
        .into_par_iter()
        .map(|r| {
            let (all_users, starts) = draw(spec, r, n);
            points
                .iter()
                .map(|&(_, m, p_max)| {
                    let users = all_users.truncated(m).with_p_max(p_max);
                    spec.methods
                        .iter()
                        .map(|&method| run_method(spec, method, &users, &starts).final_rate() / LN_2)
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(points.len() * spec.methods.len());
    for (pi, &(value, _, _)) in points.iter().enumerate() {
        for (mi, &method) in spec.methods.iter().enumerate() {
            let samples: Vec<f64> = finals.iter().map(|f| f[pi][mi]).collect();
            let (mean_bits, std_err) = mean_and_std_err(&samples);
            rows.push(SweepRow {
                sweep_value: value,
                method,
                mean_bits,
                std_err,
                realizations: spec.realizations,
                seed: spec.master_seed,
                samples,
            });
        }
    }
    Ok(SweepResult {
        rows,
        convergence: Vec::new(),
    })
}

/// Averages full optimizer traces. Shorter traces are padded with their
/// final value before averaging.
pub fn run_convergence(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let m = spec.n_users[0];
    let p_max = dbm_to_watts(spec.pmax_dbm[0]);
    let mut convergence = Vec::new();
    for &n in &spec.n_waveguides {
        // traces[r][method]
        let traces: Vec<Vec<Vec<f64>>> = (0..spec.realizations)
            .into_par_iter()
            .map(|r| {
                let (users, starts) = draw(spec, r, n);
                let users = users.truncated(m).with_p_max(p_max);
                spec.methods
                    .iter()
                    .map(|&method| run_method(spec, method, &users, &starts).trace)
                    .collect()
            })
            .collect();
        for (mi, &method) in spec.methods.iter().enumerate() {
            let len = traces.iter().map(|t| t[mi].len()).max().unwrap_or(0);
            for it in 0..len {
                let sum: f64 = traces
                    .iter()
                    .map(|t| {
                        let tr = &t[mi];
                        tr[it.min(tr.len() - 1)]
                    })
                    .sum();
                convergence.push(ConvergenceRow {
                    iteration: it,
                    method,
                    n_waveguides: n,
                    mean_bits: sum / spec.realizations as f64 / LN_2,
                });
            }
        }
    }
    Ok(SweepResult {
        rows: Vec::new(),
        convergence,
    })
}
