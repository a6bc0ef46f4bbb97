//! Line-of-sight channels between users and pinching antennas.
//!
//! The free-space channel to antenna `n` is `sqrt(eta) e^{-j k r} / r` with
//! `r` the full 3-D distance. A pinching antenna additionally sees the
//! in-waveguide phase `e^{-j k_g (x_n - x_0)}` accumulated from the feed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::scenario::{PinchLayout, SystemParams, UserSet};

/// Effective channels `G` (N x M). Column `m` is user `m`'s channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel(pub DMatrix<Complex64>);

impl EffectiveChannel {
    pub fn n_antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.0.ncols()
    }

    pub fn column(&self, m: usize) -> DVector<Complex64> {
        self.0.column(m).into_owned()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }
}

/// Euclidean distance between a ground user and an antenna.
pub fn distance(user: [f64; 2], antenna: [f64; 3]) -> f64 {
    let dx = user[0] - antenna[0];
    let dy = user[1] - antenna[1];
    (dx * dx + dy * dy + antenna[2] * antenna[2]).sqrt()
}

/// 3-D positions of the pinching antennas.
pub fn pinch_positions(params: &SystemParams, layout: &PinchLayout) -> Vec<[f64; 3]> {
    let n = layout.n_waveguides();
    layout
        .x
        .iter()
        .enumerate()
        .map(|(i, &x)| [x, params.waveguide_y(i, n), params.height])
        .collect()
}

/// Spherical-wave coefficient `sqrt(eta) e^{-j k r} / r`.
pub fn free_space_coeff(params: &SystemParams, r: f64) -> Complex64 {
    Complex64::from_polar(params.eta().sqrt() / r, -params.wavenumber() * r)
}

/// Free-space channel from a user to each antenna position.
pub fn spatial_channel(params: &SystemParams, antennas: &[[f64; 3]], user: [f64; 2]) -> DVector<Complex64> {
    DVector::from_iterator(
        antennas.len(),
        antennas.iter().map(|&a| free_space_coeff(params, distance(user, a))),
    )
}

/// Free-space channel from `user` to the pinching antennas of `layout`.
pub fn channel_vector(params: &SystemParams, layout: &PinchLayout, user: [f64; 2]) -> DVector<Complex64> {
    spatial_channel(params, &pinch_positions(params, layout), user)
}

/// In-waveguide phase factor of a single antenna at `x`.
pub fn guided_phase(params: &SystemParams, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, -params.guided_wavenumber() * (x - params.feed_x))
}

pub fn phase_vector(params: &SystemParams, layout: &PinchLayout) -> DVector<Complex64> {
    DVector::from_iterator(layout.n_waveguides(), layout.x.iter().map(|&x| guided_phase(params, x)))
}

/// Channel coefficient between a user and antenna `n` of a pinching layout,
/// including the guided phase.
pub fn pinch_entry(params: &SystemParams, layout: &PinchLayout, user: [f64; 2], n: usize) -> Complex64 {
    let x = layout.x[n];
    let antenna = [x, params.waveguide_y(n, layout.n_waveguides()), params.height];
    guided_phase(params, x) * free_space_coeff(params, distance(user, antenna))
}

/// `G` with columns `phi .* h_m`.
pub fn effective_channels(params: &SystemParams, layout: &PinchLayout, users: &UserSet) -> EffectiveChannel {
    let antennas = pinch_positions(params, layout);
    let phi = phase_vector(params, layout);
    let mut g = DMatrix::zeros(antennas.len(), users.len());
    for (m, &u) in users.positions.iter().enumerate() {
        let h = spatial_channel(params, &antennas, u);
        g.set_column(m, &h.component_mul(&phi));
    }
    EffectiveChannel(g)
}

/// Channels of a conventional fixed array: free-space propagation only.
pub fn fixed_array_channels(params: &SystemParams, antennas: &[[f64; 3]], users: &UserSet) -> EffectiveChannel {
    let mut g = DMatrix::zeros(antennas.len(), users.len());
    for (m, &u) in users.positions.iter().enumerate() {
        g.set_column(m, &spatial_channel(params, antennas, u));
    }
    EffectiveChannel(g)
}
