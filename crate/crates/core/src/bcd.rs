//! Block coordinate ascent over `(alpha, beta, positions, powers)`.
//!
//! Every pass refreshes `alpha` and `beta` at their closed-form optima
//! (making the surrogate tight), moves the antennas, then re-solves the
//! powers. Each block can only raise the surrogate and the surrogate never
//! exceeds the true rate, so the recorded sum-rate is nondecreasing. With
//! [`PositionObjectiveKind::TightSurrogate`] the antenna block carries
//! `alpha` and `beta` along, and they are re-tightened before the powers.

use crate::channel::{effective_channels, fixed_array_channels, EffectiveChannel};
use crate::error::{Error, Result};
use crate::fp::{update_powers, AuxState, Mode};
use crate::position::{
    coordinate_ascent, optimize_positions, GdOptions, PositionObjectiveContext, PositionObjectiveKind, TightObjective,
};
use crate::rates::sum_rate;
use crate::scenario::{PinchLayout, SystemParams, UserSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    pub mode: Mode,
    /// Relative sum-rate improvement below which the loop stops.
    pub tol: f64,
    pub max_iters: usize,
    pub gd: GdOptions,
    /// `false` keeps the antennas where they are (power control only).
    pub optimize_positions: bool,
    pub position_objective: PositionObjectiveKind,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Sic,
            tol: 1e-4,
            max_iters: 100,
            gd: GdOptions::default(),
            optimize_positions: true,
            position_objective: PositionObjectiveKind::TightSurrogate,
        }
    }
}

impl BcdOptions {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter("tol"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters"));
        }
        self.gd.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdResult {
    pub layout: PinchLayout,
    pub powers: Vec<f64>,
    /// Sum-rate (nats) before the first pass and after every pass.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl BcdResult {
    pub fn final_rate(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial rate")
    }
}

/// Antenna array the loop optimizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    /// One movable pinching antenna per waveguide.
    Pinching,
    /// Conventional antennas at `x = 0` on the waveguide grid, no guided
    /// phase.
    FixedUla,
}

fn channels(params: &SystemParams, users: &UserSet, layout: &PinchLayout, kind: ArrayKind) -> EffectiveChannel {
    match kind {
        ArrayKind::Pinching => effective_channels(params, layout, users),
        ArrayKind::FixedUla => fixed_array_channels(params, &ula_layout(params, layout.n_waveguides()), users),
    }
}

/// Positions of the conventional uniform linear array used as baseline.
pub fn ula_layout(params: &SystemParams, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|i| [0.0, params.waveguide_y(i, n), params.height]).collect()
}

fn run(params: &SystemParams, users: &UserSet, layout0: &PinchLayout, kind: ArrayKind, opts: &BcdOptions) -> BcdResult {
    let sigma2 = params.noise_power;
    let mode = opts.mode;
    let move_antennas = opts.optimize_positions && kind == ArrayKind::Pinching;

    let mut layout = layout0.clone();
    let mut powers = vec![users.p_max; users.len()];
    let mut g = channels(params, users, &layout, kind);
    let mut trace = vec![sum_rate(&g, &powers, sigma2, mode).sum_nats];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let mut aux = AuxState::optimal(&g, &powers, sigma2, mode);
        if move_antennas {
            match opts.position_objective {
                PositionObjectiveKind::FrozenSurrogate => {
                    let ctx = PositionObjectiveContext::new(params, users, &powers, &aux, mode);
                    layout = optimize_positions(&ctx, &layout, &opts.gd);
                    g = channels(params, users, &layout, kind);
                }
                PositionObjectiveKind::TightSurrogate => {
                    let objective = TightObjective {
                        params,
                        users,
                        powers: &powers,
                        mode,
                    };
                    layout = coordinate_ascent(&objective, &layout, &opts.gd, params.half_x).layout;
                    g = channels(params, users, &layout, kind);
                    aux = AuxState::optimal(&g, &powers, sigma2, mode);
                }
            }
        }
        powers = update_powers(&g, &aux.alpha, &aux.beta, users.p_max, mode);
        let rate = sum_rate(&g, &powers, sigma2, mode).sum_nats;
        let prev = *trace.last().unwrap();
        trace.push(rate);
        if (rate - prev).abs() / prev.max(1e-12) < opts.tol {
            converged = true;
            break;
        }
    }

    BcdResult {
        layout,
        powers,
        trace,
        iterations,
        converged,
    }
}

/// Jointly optimizes antenna positions and powers starting from `layout0`
/// with every user at full power.
pub fn optimize(params: &SystemParams, users: &UserSet, layout0: &PinchLayout, opts: &BcdOptions) -> BcdResult {
    run(params, users, layout0, ArrayKind::Pinching, opts)
}

/// Power-only optimization on the fixed ULA with `n` antennas.
pub fn optimize_baseline(params: &SystemParams, users: &UserSet, n: usize, opts: &BcdOptions) -> BcdResult {
    let opts = BcdOptions {
        optimize_positions: false,
        ..*opts
    };
    run(
        params,
        users,
        &PinchLayout::new(vec![0.0; n]),
        ArrayKind::FixedUla,
        &opts,
    )
}

/// Channels seen by the baseline array.
pub fn baseline_channels(params: &SystemParams, users: &UserSet, n: usize) -> EffectiveChannel {
    fixed_array_channels(params, &ula_layout(params, n), users)
}
