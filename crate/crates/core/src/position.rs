//! Antenna-position block of the alternating optimization.
//!
//! With `alpha`, `beta` and the powers frozen, the position-dependent part of
//! the quadratic-transform surrogate is
//!
//! ```text
//! f(x) = sum_m [ w_m Re(beta_m^H g_m(x)) - sum_{i in S_m} p_i |beta_m^H g_i(x)|^2 ],
//! w_m  = 2 sqrt(1 + alpha_m) sqrt(p_m),
//! ```
//!
//! where only row `n` of the channel matrix depends on `x_n`. Each antenna is
//! moved in turn by gradient ascent with a backtracking step that accepts a
//! (box-projected) trial point only if it strictly improves the objective.
//!
//! At high SINR the frozen surrogate has a curvature in `x` of roughly
//! `k^2 * alpha`, so no step above a few picometres improves it. The line
//! search can instead climb the surrogate with `alpha`, `beta` re-optimized
//! at each trial ([`TightObjective`]), which equals the sum-rate; its
//! gradient is the frozen surrogate's gradient at the tight point.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{effective_channels, free_space_coeff, pinch_positions, EffectiveChannel};
use crate::error::{Error, Result};
use crate::fp::{AuxState, Mode};
use crate::scenario::{PinchLayout, SystemParams, UserSet};

/// Step-size schedule of the per-antenna line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdOptions {
    /// Initial step (m per unit gradient).
    pub l0: f64,
    /// Smallest step tried before giving up on an antenna.
    pub l_min: f64,
    /// Divisor applied to the step after each rejected trial.
    pub shrink: f64,
    pub max_sweeps: usize,
}

impl Default for GdOptions {
    fn default() -> Self {
        Self {
            l0: 1.0,
            l_min: 1e-6,
            shrink: 3.0,
            max_sweeps: 50,
        }
    }
}

impl GdOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_min > 0.0 && self.l_min.is_finite()) {
            return Err(Error::InvalidParameter("gd_lmin"));
        }
        if !(self.l0 > self.l_min && self.l0.is_finite()) {
            return Err(Error::InvalidParameter("gd_l0"));
        }
        if !(self.shrink > 1.0 && self.shrink.is_finite()) {
            return Err(Error::InvalidParameter("gd_shrink"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("gd_max_sweeps"));
        }
        Ok(())
    }
}

/// Frozen variables of the position subproblem.
#[derive(Debug, Clone)]
pub struct PositionObjectiveContext<'a> {
    pub params: &'a SystemParams,
    pub users: &'a UserSet,
    pub powers: &'a [f64],
    pub beta: &'a [DVector<Complex64>],
    pub mode: Mode,
    /// `2 sqrt(1 + alpha_m) sqrt(p_m)`.
    weights: Vec<f64>,
}

impl<'a> PositionObjectiveContext<'a> {
    pub fn new(params: &'a SystemParams, users: &'a UserSet, powers: &'a [f64], aux: &'a AuxState, mode: Mode) -> Self {
        let weights = aux
            .alpha
            .iter()
            .zip(powers)
            .map(|(a, p)| 2.0 * (1.0 + a).sqrt() * p.sqrt())
            .collect();
        Self {
            params,
            users,
            powers,
            beta: &aux.beta,
            mode,
            weights,
        }
    }

    fn value_at(&self, g: &EffectiveChannel) -> f64 {
        let m_users = g.n_users();
        let mut total = 0.0;
        for m in 0..m_users {
            let b = &self.beta[m];
            total += self.weights[m] * b.dotc(&g.0.column(m)).re;
            for i in (0..m_users).filter(|&i| self.mode.in_covariance(m, i)) {
                total -= self.powers[i] * b.dotc(&g.0.column(i)).norm_sqr();
            }
        }
        total
    }
}

/// `C_{m,n} = e^{-j phi_n} e^{-j k r} / r`, so that `g_m[n] = sqrt(eta) C_{m,n}`.
pub fn coupling_coeff(params: &SystemParams, layout: &PinchLayout, user: [f64; 2], n: usize) -> Complex64 {
    let antenna = pinch_positions(params, layout)[n];
    let r = crate::channel::distance(user, antenna);
    crate::channel::guided_phase(params, layout.x[n]) * free_space_coeff(params, r) / params.eta().sqrt()
}

/// The position-dependent part of the surrogate. Differs from
/// [`crate::fp::surrogate_f2`] by a layout-independent constant.
pub fn position_objective(ctx: &PositionObjectiveContext<'_>, layout: &PinchLayout) -> f64 {
    ctx.value_at(&effective_channels(ctx.params, layout, ctx.users))
}

/// Analytic `df/dx_n`.
pub fn position_gradient(ctx: &PositionObjectiveContext<'_>, layout: &PinchLayout, n: usize) -> f64 {
    let params = ctx.params;
    let g = effective_channels(params, layout, ctx.users);
    let antenna = pinch_positions(params, layout)[n];
    let (k, kg) = (params.wavenumber(), params.guided_wavenumber());
    let m_users = g.n_users();

    // d g_i[n] / d x_n = g_i[n] (-j k_g - (j k + 1/r) (x_n - x_i) / r)
    let dg: Vec<Complex64> = ctx
        .users
        .positions
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let r = crate::channel::distance(u, antenna);
            let dr = (antenna[0] - u[0]) / r;
            g.0[(n, i)] * (Complex64::new(0.0, -kg) - Complex64::new(1.0 / r, k) * dr)
        })
        .collect();

    let mut grad = 0.0;
    for m in 0..m_users {
        let b = &ctx.beta[m];
        let bn = b[n].conj();
        grad += ctx.weights[m] * (bn * dg[m]).re;
        for i in (0..m_users).filter(|&i| ctx.mode.in_covariance(m, i)) {
            let inner = b.dotc(&g.0.column(i));
            grad -= 2.0 * ctx.powers[i] * (inner.conj() * bn * dg[i]).re;
        }
    }
    grad
}

/// Which function the per-antenna line search climbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionObjectiveKind {
    /// The surrogate with `alpha` and `beta` frozen at the start of the pass.
    FrozenSurrogate,
    /// The surrogate with `alpha` and `beta` re-optimized at every trial
    /// point, which is the sum-rate itself.
    TightSurrogate,
}

impl PositionObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionObjectiveKind::FrozenSurrogate => "frozen",
            PositionObjectiveKind::TightSurrogate => "tight",
        }
    }
}

impl std::str::FromStr for PositionObjectiveKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "frozen" => Ok(PositionObjectiveKind::FrozenSurrogate),
            "tight" => Ok(PositionObjectiveKind::TightSurrogate),
            other => Err(format!(
                "unknown position objective `{other}` (expected frozen or tight)"
            )),
        }
    }
}

/// A function of the layout that can be climbed one antenna at a time.
pub trait CoordinateObjective {
    fn value(&self, layout: &PinchLayout) -> f64;
    fn partial(&self, layout: &PinchLayout, n: usize) -> f64;
}

impl CoordinateObjective for PositionObjectiveContext<'_> {
    fn value(&self, layout: &PinchLayout) -> f64 {
        position_objective(self, layout)
    }

    fn partial(&self, layout: &PinchLayout, n: usize) -> f64 {
        position_gradient(self, layout, n)
    }
}

/// Sum-rate as a function of the layout with the powers fixed.
///
/// At the optimal auxiliaries the surrogate touches the rate, so the
/// surrogate's position gradient there is the rate gradient.
#[derive(Debug, Clone)]
pub struct TightObjective<'a> {
    pub params: &'a SystemParams,
    pub users: &'a UserSet,
    pub powers: &'a [f64],
    pub mode: Mode,
}

impl CoordinateObjective for TightObjective<'_> {
    fn value(&self, layout: &PinchLayout) -> f64 {
        let g = effective_channels(self.params, layout, self.users);
        crate::rates::sum_rate(&g, self.powers, self.params.noise_power, self.mode).sum_nats
    }

    fn partial(&self, layout: &PinchLayout, n: usize) -> f64 {
        let g = effective_channels(self.params, layout, self.users);
        let aux = AuxState::optimal(&g, self.powers, self.params.noise_power, self.mode);
        let ctx = PositionObjectiveContext::new(self.params, self.users, self.powers, &aux, self.mode);
        position_gradient(&ctx, layout, n)
    }
}

/// Result of a position pass: the final layout and the objective after
/// each sweep (entry 0 is the starting value).
#[derive(Debug, Clone)]
pub struct PositionOutcome {
    pub layout: PinchLayout,
    pub trace: Vec<f64>,
}

/// Cyclic per-antenna gradient ascent with backtracking on the frozen
/// surrogate.
pub fn optimize_positions(ctx: &PositionObjectiveContext<'_>, layout: &PinchLayout, opts: &GdOptions) -> PinchLayout {
    optimize_positions_traced(ctx, layout, opts).layout
}

pub fn optimize_positions_traced(
    ctx: &PositionObjectiveContext<'_>,
    layout: &PinchLayout,
    opts: &GdOptions,
) -> PositionOutcome {
    coordinate_ascent(ctx, layout, opts, ctx.params.half_x)
}

/// Antennas are visited in index order. Each gets the trial points
/// `clamp(x + l * df/dx)` for `l = l0, l0/shrink, ...` down to `l_min`; the
/// first trial that strictly improves the objective is kept, otherwise the
/// antenna stays put. Sweeps repeat until nothing moves or `max_sweeps`.
pub fn coordinate_ascent(
    objective: &impl CoordinateObjective,
    layout: &PinchLayout,
    opts: &GdOptions,
    bound: f64,
) -> PositionOutcome {
    let mut layout = layout.clone();
    let mut current = objective.value(&layout);
    let mut trace = vec![current];

    for _ in 0..opts.max_sweeps {
        let mut moved = false;
        for n in 0..layout.n_waveguides() {
            let grad = objective.partial(&layout, n);
            if grad == 0.0 || !grad.is_finite() {
                continue;
            }
            let start = layout.x[n];
            let mut step = opts.l0;
            while step >= opts.l_min {
                let trial = (start + step * grad).clamp(-bound, bound);
                if trial != start {
                    layout.x[n] = trial;
                    let value = objective.value(&layout);
                    if value > current {
                        current = value;
                        moved = true;
                        break;
                    }
                    layout.x[n] = start;
                }
                step /= opts.shrink;
            }
        }
        trace.push(current);
        if !moved {
            break;
        }
    }
    PositionOutcome { layout, trace }
}
