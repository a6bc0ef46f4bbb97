//! Uplink sum-rates under MMSE combining with and without SIC.
//!
//! Rates are in nats internally; [`RateReport::sum_bits`] converts at the
//! output boundary. Users are decoded in index order under SIC, so user `m`
//! only sees users `m+1..M` as interference. Without SIC every other user
//! interferes.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::EffectiveChannel;
use crate::error::{Error, Result};
use crate::fp::Mode;

/// Solves `A x = b` for Hermitian positive definite `A` by Cholesky
/// factorization. Only the lower triangle of `A` is read.
pub fn hermitian_solve(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let l = cholesky_lower(a)?;
    let n = b.len();
    // forward substitution L y = b, then back substitution L^H x = y
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)].conj() * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    Ok(y)
}

/// Lower-triangular `L` with `A = L L^H`.
fn cholesky_lower(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::from(d);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// `sigma2 I + sum_{i : include(i)} p_i g_i g_i^H`.
pub fn interference_matrix(
    g: &EffectiveChannel,
    p: &[f64],
    sigma2: f64,
    include: impl Fn(usize) -> bool,
) -> DMatrix<Complex64> {
    let n = g.n_antennas();
    let mut q = DMatrix::<Complex64>::identity(n, n) * Complex64::from(sigma2);
    for i in (0..g.n_users()).filter(|&i| include(i)) {
        if p[i] == 0.0 {
            continue;
        }
        let col = g.0.column(i);
        q += (col * col.adjoint()) * Complex64::from(p[i]);
    }
    q
}

/// `Re(v^H Q^{-1} v)`; the imaginary part is rounding noise for Hermitian `Q`.
pub(crate) fn inverse_quad_form(q: &DMatrix<Complex64>, v: &DVector<Complex64>) -> f64 {
    let x = hermitian_solve(q, v).expect("interference-plus-noise matrix must be positive definite");
    v.dotc(&x).re
}

/// Per-user MMSE SINR with the interferer set chosen by `mode`.
pub fn mmse_sinr(g: &EffectiveChannel, p: &[f64], sigma2: f64, mode: Mode) -> Vec<f64> {
    (0..g.n_users())
        .map(|m| {
            if p[m] == 0.0 {
                return 0.0;
            }
            let q = interference_matrix(g, p, sigma2, |i| mode.interferes(m, i));
            p[m] * inverse_quad_form(&q, &g.column(m))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Per-user rate (nats per channel use).
    pub per_user: Vec<f64>,
    pub sum_nats: f64,
}

impl RateReport {
    fn from_sinr(sinr: &[f64]) -> Self {
        let per_user: Vec<f64> = sinr.iter().map(|s| s.ln_1p()).collect();
        let sum_nats = per_user.iter().sum();
        Self { per_user, sum_nats }
    }

    pub fn sum_bits(&self) -> f64 {
        self.sum_nats / LN_2
    }
}

pub fn sum_rate(g: &EffectiveChannel, p: &[f64], sigma2: f64, mode: Mode) -> RateReport {
    RateReport::from_sinr(&mmse_sinr(g, p, sigma2, mode))
}

pub fn sum_rate_sic(g: &EffectiveChannel, p: &[f64], sigma2: f64) -> RateReport {
    sum_rate(g, p, sigma2, Mode::Sic)
}

pub fn sum_rate_nsic(g: &EffectiveChannel, p: &[f64], sigma2: f64) -> RateReport {
    sum_rate(g, p, sigma2, Mode::Nsic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_channel, random_powers, small_rng};
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// log det of a Hermitian PD matrix by Gaussian elimination with partial
    /// pivoting, independent of the Cholesky path.
    fn logdet_gauss(mut a: DMatrix<Complex64>) -> f64 {
        let n = a.nrows();
        let mut acc = 0.0;
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
                .unwrap();
            a.swap_rows(k, piv);
            let d = a[(k, k)];
            acc += d.norm().ln();
            for i in k + 1..n {
                let f = a[(i, k)] / d;
                for j in k..n {
                    let t = a[(k, j)];
                    a[(i, j)] -= f * t;
                }
            }
        }
        acc
    }

    fn logdet_identity(g: &EffectiveChannel, p: &[f64], sigma2: f64) -> f64 {
        let q = interference_matrix(g, p, sigma2, |_| true) / Complex64::from(sigma2);
        logdet_gauss(q)
    }

    #[test]
    fn solve_scaled_identity_and_diagonal() {
        let s2 = 1e-12;
        let a = DMatrix::<Complex64>::identity(3, 3) * c(s2, 0.0);
        let b = DVector::from_vec(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0)]);
        let x = hermitian_solve(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - b[i] / s2).norm() < 1e-9 * (b[i] / s2).norm());
        }
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]));
        let x = hermitian_solve(&a, &DVector::from_vec(vec![c(2.0, 0.0), c(2.0, 0.0)])).unwrap();
        assert!((x[0] - c(2.0, 0.0)).norm() < 1e-15 && (x[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn solve_random_pd_residual() {
        let mut rng = small_rng(1);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let b0 = DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let a = &b0 * b0.adjoint() + DMatrix::identity(n, n) * c(0.1, 0.0);
            let b = DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let x = hermitian_solve(&a, &b).unwrap();
            assert!((&a * &x - &b).norm() < 1e-10 * b.norm());
        }
    }

    #[test]
    fn solve_rejects_indefinite_and_mismatched() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        let b = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(hermitian_solve(&a, &b), Err(Error::NotPositiveDefinite)));
        let b3 = DVector::from_vec(vec![c(1.0, 0.0); 3]);
        assert!(matches!(hermitian_solve(&a, &b3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn interference_matrix_cases() {
        let mut rng = small_rng(2);
        let g = random_channel(&mut rng, 2, 2);
        let s2 = 1e-12;
        let id = DMatrix::<Complex64>::identity(2, 2) * c(s2, 0.0);
        assert_eq!(interference_matrix(&g, &[1.0, 1.0], s2, |_| false), id);
        assert_eq!(interference_matrix(&g, &[0.0, 0.0], s2, |_| true), id);
        let p = [0.3, 0.7];
        let q = interference_matrix(&g, &p, s2, |_| true);
        for r in 0..2 {
            for k in 0..2 {
                let mut want = if r == k { c(s2, 0.0) } else { c(0.0, 0.0) };
                for (i, &pi) in p.iter().enumerate() {
                    want += g.0[(r, i)] * g.0[(k, i)].conj() * pi;
                }
                assert!((q[(r, k)] - want).norm() <= 1e-15 * want.norm());
                assert_eq!(q[(r, k)], q[(k, r)].conj());
            }
        }
    }

    #[test]
    fn single_user_rate() {
        let mut rng = small_rng(3);
        let g = random_channel(&mut rng, 3, 1);
        let (p, s2) = (0.01, 1e-12);
        let want = (1.0 + p * g.column(0).norm_squared() / s2).ln();
        let sic = sum_rate_sic(&g, &[p], s2).sum_nats;
        assert!((sic - want).abs() < 1e-9);
        assert!((sum_rate_nsic(&g, &[p], s2).sum_nats - sic).abs() < 1e-12);
    }

    #[test]
    fn zero_power_gives_zero_rate() {
        let mut rng = small_rng(4);
        let g = random_channel(&mut rng, 3, 3);
        assert_eq!(sum_rate_sic(&g, &[0.0; 3], 1e-12).sum_nats, 0.0);
        assert_eq!(sum_rate_nsic(&g, &[0.0; 3], 1e-12).sum_nats, 0.0);
    }

    #[test]
    fn sic_matches_log_det() {
        let mut rng = small_rng(5);
        for _ in 0..500 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(1..=6);
            let g = random_channel(&mut rng, n, m);
            let p = random_powers(&mut rng, m, 0.01);
            let sic = sum_rate_sic(&g, &p, 1e-12).sum_nats;
            let want = logdet_identity(&g, &p, 1e-12);
            assert!((sic - want).abs() < 1e-9, "{sic} vs {want}");
        }
    }

    #[test]
    fn orthogonal_users_do_not_interfere() {
        // columns of a scaled DFT matrix are mutually orthogonal
        let n = 4;
        let g = DMatrix::from_fn(n, 3, |r, k| {
            Complex64::from_polar(
                1e-4 * (k as f64 + 1.0),
                2.0 * std::f64::consts::PI * (r * k) as f64 / n as f64,
            )
        });
        let g = EffectiveChannel(g);
        let p = [0.01, 0.002, 0.03];
        let sic = sum_rate_sic(&g, &p, 1e-12).sum_nats;
        let nsic = sum_rate_nsic(&g, &p, 1e-12).sum_nats;
        assert!((sic - nsic).abs() < 1e-9);
    }

    #[test]
    fn report_totals_and_units() {
        let mut rng = small_rng(6);
        let g = random_channel(&mut rng, 4, 4);
        let r = sum_rate_sic(&g, &[0.01; 4], 1e-12);
        assert!(r.per_user.iter().all(|&x| x >= 0.0));
        let total: f64 = r.per_user.iter().sum();
        assert!((total - r.sum_nats).abs() <= 1e-12 * r.sum_nats);
        assert!((r.sum_bits() * LN_2 - r.sum_nats).abs() < 1e-12);
    }

    #[test]
    fn sic_rate_nondecreasing_in_own_power() {
        let mut rng = small_rng(7);
        for _ in 0..100 {
            let g = random_channel(&mut rng, 3, 3);
            let mut p = random_powers(&mut rng, 3, 0.01);
            let m = rng.gen_range(0..3);
            let before = sum_rate_sic(&g, &p, 1e-12).per_user[m];
            p[m] *= 1.5;
            let after = sum_rate_sic(&g, &p, 1e-12).per_user[m];
            assert!(after >= before);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::seq::SliceRandom;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn sic_dominates_nsic(seed in any::<u64>(), n in 1usize..6, m in 1usize..6) {
                let mut rng = small_rng(seed);
                let g = random_channel(&mut rng, n, m);
                let p = random_powers(&mut rng, m, 0.01);
                let sic = sum_rate_sic(&g, &p, 1e-12).sum_nats;
                let nsic = sum_rate_nsic(&g, &p, 1e-12).sum_nats;
                prop_assert!(sic >= nsic - 1e-12);
            }

            #[test]
            fn sic_independent_of_decoding_order(seed in any::<u64>(), n in 1usize..6, m in 1usize..6) {
                let mut rng = small_rng(seed);
                let g = random_channel(&mut rng, n, m);
                let p = random_powers(&mut rng, m, 0.01);
                let base = sum_rate_sic(&g, &p, 1e-12).sum_nats;
                let mut order: Vec<usize> = (0..m).collect();
                order.shuffle(&mut rng);
                let gp = EffectiveChannel(DMatrix::from_fn(n, m, |r, k| g.0[(r, order[k])]));
                let pp: Vec<f64> = order.iter().map(|&k| p[k]).collect();
                prop_assert!((sum_rate_sic(&gp, &pp, 1e-12).sum_nats - base).abs() < 1e-9);
            }

            #[test]
            fn rates_invariant_to_global_phase(seed in any::<u64>(), theta in 0.0f64..6.3) {
                let mut rng = small_rng(seed);
                let g = random_channel(&mut rng, 3, 4);
                let p = random_powers(&mut rng, 4, 0.01);
                let rot = EffectiveChannel(g.0.map(|z| z * Complex64::from_polar(1.0, theta)));
                for mode in [Mode::Sic, Mode::Nsic] {
                    let a = sum_rate(&g, &p, 1e-12, mode).sum_nats;
                    let b = sum_rate(&rot, &p, 1e-12, mode).sum_nats;
                    prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
                }
            }
        }
    }
}
