//! Fractional-programming surrogates for the MMSE sum-rate.
//!
//! The sum-rate is lifted twice. First the Lagrangian dual transform
//! introduces `alpha` (one SINR proxy per user):
//!
//! ```text
//! F1 = sum_m ln(1 + a_m) - a_m + (1 + a_m) A_m,
//! A_m = p_m g_m^H D_m^{-1} g_m,
//! ```
//!
//! then the quadratic transform introduces one receive vector `beta_m` per
//! user to remove the matrix inverse:
//!
//! ```text
//! F2 = sum_m ln(1 + a_m) - a_m
//!      + 2 sqrt(1 + a_m) Re(beta_m^H g_m sqrt(p_m)) - beta_m^H D_m beta_m.
//! ```
//!
//! `D_m = sigma2 I + sum_{i in S_m} p_i g_i g_i^H`. With SIC, `S_m = {m..M}`;
//! without SIC, `S_m` holds every user. Both transforms are tight at their
//! closed-form optima, so `F2(alpha*, beta*) = F1(alpha*) = R`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::EffectiveChannel;
use crate::rates::{hermitian_solve, interference_matrix, inverse_quad_form, mmse_sinr};

/// Receiver combining rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// MMSE with successive interference cancellation, decoding users in
    /// index order.
    Sic,
    /// MMSE without cancellation.
    Nsic,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Sic, Mode::Nsic];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sic => "sic",
            Mode::Nsic => "nsic",
        }
    }

    /// Whether user `i` interferes with the detection of user `m`.
    pub fn interferes(self, m: usize, i: usize) -> bool {
        match self {
            Mode::Sic => i > m,
            Mode::Nsic => i != m,
        }
    }

    /// Whether user `i` appears in `D_m`.
    pub fn in_covariance(self, m: usize, i: usize) -> bool {
        match self {
            Mode::Sic => i >= m,
            Mode::Nsic => true,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sic" => Ok(Mode::Sic),
            "nsic" => Ok(Mode::Nsic),
            other => Err(format!("unknown mode `{other}` (expected sic or nsic)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Auxiliary variables of the two transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxState {
    pub alpha: Vec<f64>,
    pub beta: Vec<DVector<Complex64>>,
}

impl AuxState {
    /// The jointly optimal `(alpha, beta)` for fixed channels and powers.
    pub fn optimal(g: &EffectiveChannel, p: &[f64], sigma2: f64, mode: Mode) -> Self {
        let alpha = update_alpha(g, p, sigma2, mode);
        let beta = update_beta(g, p, &alpha, sigma2, mode);
        Self { alpha, beta }
    }
}

fn covariance(g: &EffectiveChannel, p: &[f64], sigma2: f64, mode: Mode, m: usize) -> nalgebra::DMatrix<Complex64> {
    interference_matrix(g, p, sigma2, |i| mode.in_covariance(m, i))
}

/// Optimal `alpha`: the MMSE SINR of each user. Users with zero power get
/// exactly zero.
pub fn update_alpha(g: &EffectiveChannel, p: &[f64], sigma2: f64, mode: Mode) -> Vec<f64> {
    mmse_sinr(g, p, sigma2, mode)
}

/// `A_m = p_m g_m^H D_m^{-1} g_m`, the fraction in `F1`.
pub fn fraction_terms(g: &EffectiveChannel, p: &[f64], sigma2: f64, mode: Mode) -> Vec<f64> {
    (0..g.n_users())
        .map(|m| {
            if p[m] == 0.0 {
                return 0.0;
            }
            p[m] * inverse_quad_form(&covariance(g, p, sigma2, mode, m), &g.column(m))
        })
        .collect()
}

/// Optimal `alpha` through the stationarity condition `A_m / (1 - A_m)`.
/// Algebraically equal to [`update_alpha`] by the Woodbury identity.
pub fn update_alpha_ratio(g: &EffectiveChannel, p: &[f64], sigma2: f64, mode: Mode) -> Vec<f64> {
    fraction_terms(g, p, sigma2, mode)
        .into_iter()
        .map(|a| a / (1.0 - a))
        .collect()
}

pub fn surrogate_f1(alpha: &[f64], g: &EffectiveChannel, p: &[f64], sigma2: f64, mode: Mode) -> f64 {
    let frac = fraction_terms(g, p, sigma2, mode);
    alpha
        .iter()
        .zip(frac)
        .map(|(&a, f)| a.ln_1p() - a + (1.0 + a) * f)
        .sum()
}

/// Optimal `beta_m = sqrt(1 + alpha_m) sqrt(p_m) D_m^{-1} g_m`.
pub fn update_beta(g: &EffectiveChannel, p: &[f64], alpha: &[f64], sigma2: f64, mode: Mode) -> Vec<DVector<Complex64>> {
    (0..g.n_users())
        .map(|m| {
            let scale = ((1.0 + alpha[m]) * p[m]).sqrt();
            if scale == 0.0 {
                return DVector::zeros(g.n_antennas());
            }
            let d = covariance(g, p, sigma2, mode, m);
            hermitian_solve(&d, &g.column(m)).expect("D_m is positive definite") * Complex64::from(scale)
        })
        .collect()
}

pub fn surrogate_f2(
    alpha: &[f64],
    beta: &[DVector<Complex64>],
    g: &EffectiveChannel,
    p: &[f64],
    sigma2: f64,
    mode: Mode,
) -> f64 {
    let m_users = g.n_users();
    let mut total = 0.0;
    for m in 0..m_users {
        let b = &beta[m];
        let gm = g.0.column(m);
        total += alpha[m].ln_1p() - alpha[m];
        total += 2.0 * (1.0 + alpha[m]).sqrt() * p[m].sqrt() * b.dotc(&gm).re;
        // beta_m^H D_m beta_m expanded without forming D_m
        let mut quad = sigma2 * b.norm_squared();
        for i in (0..m_users).filter(|&i| mode.in_covariance(m, i)) {
            quad += p[i] * b.dotc(&g.0.column(i)).norm_sqr();
        }
        total -= quad;
    }
    total
}

/// Minimizer of `p B - 2 re_a sqrt(p)` over `[0, p_max]`.
pub fn closed_form_power(re_a: f64, b: f64, p_max: f64) -> f64 {
    if re_a <= 0.0 {
        0.0
    } else if b <= 0.0 {
        p_max
    } else {
        (re_a / b).powi(2).min(p_max)
    }
}

/// Coefficients `(Re a_m, B_m)` of the per-user power subproblem.
pub fn power_coefficients(
    g: &EffectiveChannel,
    alpha: &[f64],
    beta: &[DVector<Complex64>],
    mode: Mode,
) -> Vec<(f64, f64)> {
    let m_users = g.n_users();
    (0..m_users)
        .map(|m| {
            let gm = g.0.column(m);
            let re_a = (1.0 + alpha[m]).sqrt() * beta[m].dotc(&gm).re;
            // user m appears in D_k for every k whose covariance set holds m
            let b: f64 = (0..m_users)
                .filter(|&k| mode.in_covariance(k, m))
                .map(|k| beta[k].dotc(&gm).norm_sqr())
                .sum();
            (re_a, b)
        })
        .collect()
}

/// Exact maximization of `F2` over the powers with `alpha`, `beta` fixed.
pub fn update_powers(
    g: &EffectiveChannel,
    alpha: &[f64],
    beta: &[DVector<Complex64>],
    p_max: f64,
    mode: Mode,
) -> Vec<f64> {
    power_coefficients(g, alpha, beta, mode)
        .into_iter()
        .map(|(re_a, b)| closed_form_power(re_a, b, p_max))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::sum_rate;
    use crate::testutil::{random_channel, random_powers, small_rng};
    use nalgebra::DMatrix;
    use rand::Rng;

    const S2: f64 = 1e-12;

    #[test]
    fn single_user_alpha() {
        let mut rng = small_rng(1);
        let g = random_channel(&mut rng, 3, 1);
        for mode in Mode::ALL {
            let a = update_alpha(&g, &[0.01], S2, mode);
            let want = 0.01 * g.column(0).norm_squared() / S2;
            assert!((a[0] / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_is_sinr_of_rate() {
        let mut rng = small_rng(2);
        for _ in 0..200 {
            let (n, m) = (rng.gen_range(1..5), rng.gen_range(1..6));
            let g = random_channel(&mut rng, n, m);
            let p = random_powers(&mut rng, m, 0.01);
            for mode in Mode::ALL {
                let a = update_alpha(&g, &p, S2, mode);
                let r = sum_rate(&g, &p, S2, mode);
                for (ai, ri) in a.iter().zip(&r.per_user) {
                    assert!((ri.exp_m1() - ai).abs() <= 1e-9 * ai.max(1.0));
                }
            }
        }
    }

    #[test]
    fn ratio_and_woodbury_forms_agree() {
        let mut rng = small_rng(3);
        for _ in 0..200 {
            let (n, m) = (rng.gen_range(1..5), rng.gen_range(1..6));
            let g = random_channel(&mut rng, n, m);
            let p = random_powers(&mut rng, m, 0.01);
            for mode in Mode::ALL {
                let a = update_alpha(&g, &p, S2, mode);
                let b = update_alpha_ratio(&g, &p, S2, mode);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() <= 1e-6 * x.max(1.0), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn f1_is_tight_and_concave_at_optimum() {
        let mut rng = small_rng(4);
        for _ in 0..200 {
            let (n, m) = (rng.gen_range(1..5), rng.gen_range(1..6));
            let g = random_channel(&mut rng, n, m);
            let p = random_powers(&mut rng, m, 0.01);
            for mode in Mode::ALL {
                let alpha = update_alpha(&g, &p, S2, mode);
                let f1 = surrogate_f1(&alpha, &g, &p, S2, mode);
                let r = sum_rate(&g, &p, S2, mode).sum_nats;
                assert!((f1 - r).abs() < 1e-9, "{f1} vs {r}");
                let mut bumped = alpha.clone();
                bumped[rng.gen_range(0..m)] += 0.1;
                assert!(surrogate_f1(&bumped, &g, &p, S2, mode) < f1);
            }
        }
    }

    #[test]
    fn f1_without_power_is_nonpositive() {
        let mut rng = small_rng(5);
        let g = random_channel(&mut rng, 3, 3);
        let alpha = [0.5, 2.0, 7.0];
        let f1 = surrogate_f1(&alpha, &g, &[0.0; 3], S2, Mode::Sic);
        let want: f64 = alpha.iter().map(|a| a.ln_1p() - a).sum();
        assert_eq!(f1, want);
        assert!(f1 <= 0.0);
    }

    #[test]
    fn scalar_beta() {
        let g = EffectiveChannel(DMatrix::from_element(1, 1, Complex64::new(3e-5, -4e-5)));
        let (p, alpha) = (0.02, 1.7);
        let beta = update_beta(&g, &[p], &[alpha], S2, Mode::Sic);
        let gs = g.0[(0, 0)];
        let want = gs * (1.0f64 + alpha).sqrt() * p.sqrt() / (p * gs.norm_sqr() + S2);
        assert!((beta[0][0] - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn f2_tightness_chain() {
        let mut rng = small_rng(6);
        for _ in 0..200 {
            let (n, m) = (rng.gen_range(1..5), rng.gen_range(1..6));
            let g = random_channel(&mut rng, n, m);
            let p = random_powers(&mut rng, m, 0.01);
            for mode in Mode::ALL {
                let aux = AuxState::optimal(&g, &p, S2, mode);
                let f1 = surrogate_f1(&aux.alpha, &g, &p, S2, mode);
                let f2 = surrogate_f2(&aux.alpha, &aux.beta, &g, &p, S2, mode);
                let r = sum_rate(&g, &p, S2, mode).sum_nats;
                assert!((f2 - f1).abs() < 1e-9 && (f2 - r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn beta_rotates_with_global_phase() {
        let mut rng = small_rng(7);
        let g = random_channel(&mut rng, 3, 4);
        let p = random_powers(&mut rng, 4, 0.01);
        let rot = Complex64::from_polar(1.0, 1.234);
        let gr = EffectiveChannel(g.0.map(|z| z * rot));
        for mode in Mode::ALL {
            let a = AuxState::optimal(&g, &p, S2, mode);
            let b = AuxState::optimal(&gr, &p, S2, mode);
            for (x, y) in a.beta.iter().zip(&b.beta) {
                assert!((x * rot - y).norm() <= 1e-9 * x.norm());
            }
            let fa = surrogate_f2(&a.alpha, &a.beta, &g, &p, S2, mode);
            let fb = surrogate_f2(&b.alpha, &b.beta, &gr, &p, S2, mode);
            assert!((fa - fb).abs() < 1e-12 * fa.max(1.0));
        }
    }

    #[test]
    fn f2_with_zero_beta() {
        let mut rng = small_rng(8);
        let g = random_channel(&mut rng, 2, 3);
        let alpha = [0.3, 1.0, 4.0];
        let beta = vec![DVector::zeros(2); 3];
        let f2 = surrogate_f2(&alpha, &beta, &g, &[0.01; 3], S2, Mode::Nsic);
        let want: f64 = alpha.iter().map(|a| a.ln_1p() - a).sum();
        assert_eq!(f2, want);
    }

    #[test]
    fn f2_concave_in_beta() {
        let mut rng = small_rng(9);
        let g = random_channel(&mut rng, 3, 3);
        let p = random_powers(&mut rng, 3, 0.01);
        for mode in Mode::ALL {
            let aux = AuxState::optimal(&g, &p, S2, mode);
            let best = surrogate_f2(&aux.alpha, &aux.beta, &g, &p, S2, mode);
            for _ in 0..100 {
                let beta: Vec<_> = aux
                    .beta
                    .iter()
                    .map(|b| {
                        b.map(|z| {
                            z + z.norm().max(1.0)
                                * 0.05
                                * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                        })
                    })
                    .collect();
                assert!(surrogate_f2(&aux.alpha, &beta, &g, &p, S2, mode) <= best);
            }
        }
    }

    #[test]
    fn closed_form_guards() {
        assert_eq!(closed_form_power(0.5, 1.0, 1.0), 0.25);
        assert_eq!(closed_form_power(0.0, 1.0, 1.0), 0.0);
        assert_eq!(closed_form_power(-0.3, 1.0, 1.0), 0.0);
        assert_eq!(closed_form_power(0.3, 0.0, 2.0), 2.0);
        assert_eq!(closed_form_power(5.0, 1.0, 2.0), 2.0);
    }

    #[test]
    fn power_update_matches_grid_search() {
        let mut rng = small_rng(10);
        let grid = 1_000_000;
        for _ in 0..5 {
            let g = random_channel(&mut rng, 3, 3);
            let p = random_powers(&mut rng, 3, 0.01);
            for mode in Mode::ALL {
                let aux = AuxState::optimal(&g, &p, S2, mode);
                let p_max = 0.01;
                let new = update_powers(&g, &aux.alpha, &aux.beta, p_max, mode);
                for (m, (re_a, b)) in power_coefficients(&g, &aux.alpha, &aux.beta, mode)
                    .into_iter()
                    .enumerate()
                {
                    let f3 = |x: f64| x * b - 2.0 * re_a * x.sqrt();
                    let step = p_max / grid as f64;
                    let best = (0..=grid)
                        .map(|k| k as f64 * step)
                        .min_by(|x, y| f3(*x).total_cmp(&f3(*y)))
                        .unwrap();
                    assert!((best - new[m]).abs() <= step, "{best} vs {}", new[m]);
                }
            }
        }
    }

    #[test]
    fn power_coefficient_matches_expansion() {
        // the interference part of -F2 is linear in each p_k; its slope is B_k
        let mut rng = small_rng(11);
        for _ in 0..50 {
            let (n, m) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let g = random_channel(&mut rng, n, m);
            let p = random_powers(&mut rng, m, 0.01);
            for mode in Mode::ALL {
                let aux = AuxState::optimal(&g, &p, S2, mode);
                let penalty = |p: &[f64]| -> f64 {
                    (0..m)
                        .map(|j| {
                            let d = covariance(&g, p, S2, mode, j);
                            (aux.beta[j].adjoint() * d * &aux.beta[j])[(0, 0)].re
                        })
                        .sum()
                };
                let coeffs = power_coefficients(&g, &aux.alpha, &aux.beta, mode);
                for k in 0..m {
                    let mut hi = p.clone();
                    hi[k] += 1.0;
                    let slope = penalty(&hi) - penalty(&p);
                    let b = coeffs[k].1;
                    assert!((slope - b).abs() <= 1e-12 * b.max(1e-30) + 1e-12, "{slope} vs {b}");
                }
            }
        }
    }

    #[test]
    fn every_block_update_ascends_f2() {
        let mut rng = small_rng(12);
        for _ in 0..200 {
            let (n, m) = (rng.gen_range(1..5), rng.gen_range(1..6));
            let g = random_channel(&mut rng, n, m);
            let p = random_powers(&mut rng, m, 0.01);
            for mode in Mode::ALL {
                let alpha0: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..100.0)).collect();
                let beta0 = update_beta(&g, &random_powers(&mut rng, m, 0.01), &alpha0, S2, mode);
                let f0 = surrogate_f2(&alpha0, &beta0, &g, &p, S2, mode);
                let beta1 = update_beta(&g, &p, &alpha0, S2, mode);
                let f1 = surrogate_f2(&alpha0, &beta1, &g, &p, S2, mode);
                assert!(f1 >= f0 - 1e-10);
                let p2 = update_powers(&g, &alpha0, &beta1, 0.01, mode);
                let f2 = surrogate_f2(&alpha0, &beta1, &g, &p2, S2, mode);
                assert!(f2 >= f1 - 1e-10);
                assert!(p2.iter().all(|&x| (0.0..=0.01).contains(&x)));
                let alpha3 = update_alpha(&g, &p2, S2, mode);
                let beta3 = update_beta(&g, &p2, &alpha3, S2, mode);
                let f3 = surrogate_f2(&alpha3, &beta3, &g, &p2, S2, mode);
                assert!(f3 >= f2 - 1e-10);
            }
        }
    }
}
