//! Closed-form scalar functions of the model: the modified Bessel function
//! `K₀`, the Green's function of `−Δ + λ` on the plane, the boundary
//! coefficient `θ_λ` and the threshold frequency `ω_α`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant, 0.57721566490153286061.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Above this argument `K₀` underflows and is reported as zero.
pub const K0_UNDERFLOW: f64 = 700.0;

/// Chebyshev coefficients of `√z·eᶻ·K₀(z)` on `z ∈ [2, ∞)` in the variable
/// `s = 4/z − 1`. The leading coefficient is already halved. Generated from a
/// 50-digit Chebyshev interpolant on 120 nodes; the neglected tail is below
/// 1e-18.
const K0E_CHEB: [f64; 26] = [
    1.220_151_541_032_977_7,
    -0.031_448_101_311_964_5,
    0.001_569_883_885_730_053_3,
    -0.000_128_495_495_816_278_02,
    1.394_981_371_887_65e-5,
    -1.831_755_522_719_119_5e-6,
    2.766_813_639_445_015e-7,
    -4.660_489_897_687_948e-8,
    8.574_034_017_414_225e-9,
    -1.697_534_509_389_061_4e-9,
    3.577_397_281_400_328_3e-10,
    -7.957_489_244_477_396e-11,
    1.855_949_114_954_926_4e-11,
    -4.514_597_883_374_519e-12,
    1.140_340_588_207_344_1e-12,
    -2.980_096_923_148_178_4e-13,
    8.032_890_775_068_375e-14,
    -2.227_513_326_746_296_5e-14,
    6.340_076_476_276_646e-15,
    -1.848_593_377_920_907e-15,
    5.512_055_999_404_333_5e-16,
    -1.678_231_125_754_900_6e-16,
    5.210_391_777_643_554_3e-17,
    -1.647_580_593_984_263_2e-17,
    5.300_433_771_177_335_4e-18,
    -1.733_171_200_582_100_1e-18,
];

/// Modified Bessel function of the second kind of order zero.
///
/// Power series up to `z = 2`, Chebyshev expansion of the exponentially
/// scaled function beyond. Relative error is below 1e-14 on
/// `[1e-8, 700]`; arguments above 700 return 0.
pub fn bessel_k0(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("K0 requires z > 0, got {z}")));
    }
    Ok(k0_unchecked(z))
}

pub(crate) fn k0_unchecked(z: f64) -> f64 {
    if z <= 2.0 {
        k0_series(z)
    } else if z > K0_UNDERFLOW {
        0.0
    } else {
        k0e_chebyshev(z) * (-z).exp() / z.sqrt()
    }
}

fn k0_series(z: f64) -> f64 {
    let y = 0.25 * z * z;
    let log_term = (0.5 * z).ln() + EULER_GAMMA;
    // term = y^k / (k!)^2, harmonic = H_k
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= y / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
        if term * harmonic < 1e-18 * tail.abs().max(1e-300) {
            break;
        }
    }
    tail - log_term * i0
}

fn k0e_chebyshev(z: f64) -> f64 {
    let s = 4.0 / z - 1.0;
    let two_s = 2.0 * s;
    let (mut b0, mut b1) = (0.0, 0.0);
    for &c in K0E_CHEB[1..].iter().rev() {
        let b2 = b1;
        b1 = b0;
        b0 = two_s * b1 - b2 + c;
    }
    s * b0 - b1 + K0E_CHEB[0]
}

/// `θ_λ = (log(√λ/2) + γ) / 2π`.
pub fn theta(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!(
            "theta requires lambda > 0, got {lambda}"
        )));
    }
    Ok(theta_unchecked(lambda))
}

pub(crate) fn theta_unchecked(lambda: f64) -> f64 {
    ((0.5 * lambda.sqrt()).ln() + EULER_GAMMA) / (2.0 * PI)
}

/// `ω_α = 4·exp(−4πα − 2γ)`, minus the negative eigenvalue of the point
/// interaction operator. Satisfies `α + θ(ω_α) = 0`.
pub fn omega_alpha(alpha: f64) -> f64 {
    4.0 * (-4.0 * PI * alpha - 2.0 * EULER_GAMMA).exp()
}

/// Green's function of `−Δ + λ` on the plane, `K₀(√λ r) / 2π`.
pub fn green_value(lambda: f64, r: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!(
            "green_value requires lambda > 0, got {lambda}"
        )));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain(format!(
            "green_value requires r > 0 (logarithmic singularity at the origin), got {r}"
        )));
    }
    Ok(green_unchecked(lambda, r))
}

pub(crate) fn green_unchecked(lambda: f64, r: f64) -> f64 {
    k0_unchecked(lambda.sqrt() * r) / (2.0 * PI)
}

/// `∫ 𝒢_λ² dx = 1/(4πλ)` over the plane.
pub fn green_l2_norm_sq(lambda: f64) -> f64 {
    1.0 / (4.0 * PI * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `eᶻ K₀(z) = ∫₀^∞ exp(−z(cosh t − 1)) dt`, by the trapezoid rule, which
    /// converges geometrically for this analytic integrand.
    fn k0_scaled_by_quadrature(z: f64) -> f64 {
        let h: f64 = 0.02;
        let mut sum = 0.5;
        let mut t = h;
        loop {
            let e = z * (t.cosh() - 1.0);
            if e > 800.0 {
                break;
            }
            sum += (-e).exp();
            t += h;
        }
        sum * h
    }

    #[test]
    fn k0_at_one() {
        let k = bessel_k0(1.0).unwrap();
        assert!((k / 0.421_024_438_240_708_34 - 1.0).abs() < 1e-14, "{k}");
    }

    #[test]
    fn k0_matches_integral_representation() {
        let mut z = 1e-8;
        while z <= 700.0 {
            let oracle = k0_scaled_by_quadrature(z);
            let ours = k0_unchecked(z) * z.exp();
            assert!(
                (ours / oracle - 1.0).abs() < 1e-12,
                "z={z}: {ours} vs {oracle}"
            );
            z *= 1.37;
        }
        for z in [1.999, 2.0, 2.001, 699.0, 700.0] {
            let oracle = k0_scaled_by_quadrature(z);
            let ours = k0_unchecked(z) * z.exp();
            assert!((ours / oracle - 1.0).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn k0_small_argument_limit() {
        for z in [1e-4, 1e-6, 1e-8] {
            let rest = bessel_k0(z).unwrap() + (0.5 * z).ln() + EULER_GAMMA;
            assert!(rest.abs() < z, "z={z}: {rest}");
        }
    }

    #[test]
    fn k0_decay_and_underflow() {
        assert!(bessel_k0(10.0).unwrap() < (-10.0f64).exp());
        assert_eq!(bessel_k0(700.5).unwrap(), 0.0);
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k0(-1.0).is_err());
        assert!(bessel_k0(f64::NAN).is_err());
    }

    #[test]
    fn theta_values() {
        assert!((theta(4.0).unwrap() - EULER_GAMMA / (2.0 * PI)).abs() < 1e-16);
        let e2 = 4.0 * std::f64::consts::E.powi(2);
        assert!((theta(e2).unwrap() - (1.0 + EULER_GAMMA) / (2.0 * PI)).abs() < 1e-15);
        assert!(theta(0.0).is_err());
        assert!(theta(-2.0).is_err());
    }

    #[test]
    fn theta_is_increasing() {
        let mut prev = theta(1e-6).unwrap();
        let mut lambda = 1e-6;
        while lambda < 1e6 {
            lambda *= 1.1;
            let t = theta(lambda).unwrap();
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn omega_alpha_cancels_theta() {
        for alpha in [-1.0, 0.0, 1.0] {
            assert!((alpha + theta(omega_alpha(alpha)).unwrap()).abs() < 1e-15);
        }
        for k in 0..=600 {
            let alpha = -3.0 + 0.01 * k as f64;
            assert!((alpha + theta(omega_alpha(alpha)).unwrap()).abs() <= 1e-14);
        }
    }

    #[test]
    fn omega_alpha_at_zero_and_monotone() {
        // 4 exp(-2γ) evaluated with γ to 20 digits
        assert!((omega_alpha(0.0) - 1.260_947_006_748_773_6).abs() < 1e-15);
        assert!(omega_alpha(-0.5) > omega_alpha(0.0));
        assert!(omega_alpha(0.0) > omega_alpha(0.5));
    }

    #[test]
    fn green_function_values() {
        let g = green_value(1.0, 1.0).unwrap();
        assert!((g - 0.421_024_438_240_708_34 / (2.0 * PI)).abs() < 1e-16);
        assert!(green_value(1.0, 0.0).is_err());
        assert!(green_value(0.0, 1.0).is_err());
    }

    #[test]
    fn green_function_matches_theta_near_origin() {
        for lambda in [0.3, 1.0, 7.0] {
            for r in [1e-3, 1e-5, 1e-7] {
                let rest =
                    green_value(lambda, r).unwrap() + theta(lambda).unwrap() + r.ln() / (2.0 * PI);
                assert!(
                    rest.abs() < 10.0 * lambda * r * r * (1.0 - r.ln()),
                    "{lambda} {r} {rest}"
                );
            }
        }
    }

    #[test]
    fn green_function_is_positive_and_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 1..4000 {
            let r = 1e-3 * i as f64 * (1.0 + 0.001 * i as f64);
            let g = green_value(2.5, r).unwrap();
            if g == 0.0 {
                break;
            }
            assert!(g > 0.0 && g < prev, "r={r}");
            prev = g;
        }
    }
}
