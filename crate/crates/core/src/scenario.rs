//! System geometry, physical constants and seeded scenario generation.
//!
//! Waveguides run parallel to the x-axis at height `d`. Waveguide `n`
//! (1-based) sits at `y = -D_y + n * D_y / N` and carries exactly one
//! pinching antenna whose x-coordinate is the optimization variable. Users
//! lie in the `z = 0` plane inside `[-D_x, D_x] x [-D_y, D_y]`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Physical and geometric parameters shared by every scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Carrier frequency (Hz).
    pub carrier_hz: f64,
    /// Effective refractive index of the dielectric waveguides.
    pub n_eff: f64,
    /// Receiver noise power (W).
    pub noise_power: f64,
    /// Waveguide height above the user plane (m).
    pub height: f64,
    /// Half-extent of the service region along x (m).
    pub half_x: f64,
    /// Half-extent of the service region along y (m).
    pub half_y: f64,
    /// x-coordinate of the feed point, must be negative (m).
    pub feed_x: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        default_params()
    }
}

/// 28 GHz, 30 m x 40 m region, 5 m waveguide height, n_eff = 1.4,
/// noise at -90 dBm and the feed at x = -1 m.
pub fn default_params() -> SystemParams {
    SystemParams {
        carrier_hz: 28e9,
        n_eff: 1.4,
        noise_power: dbm_to_watts(-90.0),
        height: 5.0,
        half_x: 15.0,
        half_y: 20.0,
        feed_x: -1.0,
    }
}

impl SystemParams {
    /// Free-space wavelength `c / f_c`.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// In-waveguide wavelength `lambda / n_eff`.
    pub fn guided_wavelength(&self) -> f64 {
        self.wavelength() / self.n_eff
    }

    /// Free-space path-gain constant `(lambda / 4 pi)^2`.
    pub fn eta(&self) -> f64 {
        let r = self.wavelength() / (4.0 * PI);
        r * r
    }

    /// Free-space wavenumber `2 pi / lambda`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    /// In-waveguide wavenumber `2 pi / lambda_g`.
    pub fn guided_wavenumber(&self) -> f64 {
        2.0 * PI / self.guided_wavelength()
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool); 7] = [
            ("fc_hz", self.carrier_hz > 0.0 && self.carrier_hz.is_finite()),
            ("n_eff", self.n_eff >= 1.0 && self.n_eff.is_finite()),
            ("sigma2_dbm", self.noise_power > 0.0 && self.noise_power.is_finite()),
            ("d_m", self.height > 0.0 && self.height.is_finite()),
            ("dx_m", self.half_x > 0.0 && self.half_x.is_finite()),
            ("dy_m", self.half_y > 0.0 && self.half_y.is_finite()),
            ("x0_m", self.feed_x < 0.0 && self.feed_x.is_finite()),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::InvalidParameter(name));
            }
        }
        Ok(())
    }

    /// y-coordinate of waveguide `n` (0-based index, so the formula's
    /// 1-based `n` is `index + 1`).
    pub fn waveguide_y(&self, index: usize, n_waveguides: usize) -> f64 {
        -self.half_y + (index as f64 + 1.0) * self.half_y / n_waveguides as f64
    }
}

/// User positions in the `z = 0` plane and the common per-user power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    pub positions: Vec<[f64; 2]>,
    pub p_max: f64,
}

impl UserSet {
    pub fn new(positions: Vec<[f64; 2]>, p_max: f64) -> Self {
        Self { positions, p_max }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// The first `m` users under the same budget.
    pub fn truncated(&self, m: usize) -> Self {
        Self {
            positions: self.positions[..m.min(self.len())].to_vec(),
            p_max: self.p_max,
        }
    }

    pub fn with_p_max(&self, p_max: f64) -> Self {
        Self {
            positions: self.positions.clone(),
            p_max,
        }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidParameter("n_users"));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::InvalidParameter("p_max"));
        }
        for &[x, y] in &self.positions {
            if !(x.abs() <= params.half_x && y.abs() <= params.half_y) {
                return Err(Error::InvalidParameter("user position"));
            }
        }
        Ok(())
    }
}

/// One pinching-antenna x-coordinate per waveguide.
#[derive(Debug, Clone, PartialEq)]
pub struct PinchLayout {
    pub x: Vec<f64>,
}

impl PinchLayout {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x }
    }

    pub fn n_waveguides(&self) -> usize {
        self.x.len()
    }

    pub fn is_feasible(&self, params: &SystemParams) -> bool {
        !self.x.is_empty() && self.x.iter().all(|x| x.abs() <= params.half_x)
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if self.is_feasible(params) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("layout"))
        }
    }
}

/// Per-user transmit powers (W).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAlloc(pub Vec<f64>);

impl PowerAlloc {
    pub fn full(m: usize, p_max: f64) -> Self {
        Self(vec![p_max; m])
    }

    pub fn is_feasible(&self, p_max: f64) -> bool {
        self.0.iter().all(|&p| (0.0..=p_max).contains(&p))
    }
}

impl std::ops::Deref for PowerAlloc {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Generator for realization `index` of a run seeded with `master_seed`.
///
/// Each realization gets its own ChaCha stream, so realizations can be
/// drawn in any order or concurrently without changing their content.
pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Draws a uniformly random layout from `rng`.
pub fn sample_layout<R: Rng + ?Sized>(rng: &mut R, params: &SystemParams, n: usize) -> PinchLayout {
    PinchLayout::new((0..n).map(|_| rng.gen_range(-params.half_x..=params.half_x)).collect())
}

/// Draws a layout followed by `m` users from `rng`.
///
/// The layout comes first, so for a fixed generator state the layout does
/// not depend on `m` and the users for `m` are a prefix of those for `m + 1`.
pub fn sample_from_rng<R: Rng + ?Sized>(
    rng: &mut R,
    params: &SystemParams,
    m: usize,
    n: usize,
    p_max: f64,
) -> (UserSet, PinchLayout) {
    let layout = sample_layout(rng, params, n);
    let positions = (0..m)
        .map(|_| {
            [
                rng.gen_range(-params.half_x..=params.half_x),
                rng.gen_range(-params.half_y..=params.half_y),
            ]
        })
        .collect();
    (UserSet::new(positions, p_max), layout)
}

/// Random scenario for `seed`: users uniform over the service region and
/// antennas uniform along their waveguides.
pub fn sample_scenario(seed: u64, params: &SystemParams, m: usize, n: usize, p_max: f64) -> (UserSet, PinchLayout) {
    sample_from_rng(&mut realization_rng(seed, 0), params, m, n, p_max)
}
