//! Closed forms and brute-force integrals shared by the integration tests.
//! Nothing here calls the library's quadrature.
#![allow(dead_code)]

use std::f64::consts::PI;

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Centred Gaussian with diagonal covariance T.
pub fn gaussian_density(t: [f64; 3], v: [f64; 3]) -> f64 {
    let det: f64 = t.iter().product();
    let q: f64 = (0..3).map(|i| v[i] * v[i] / t[i]).sum();
    (2.0 * PI).powf(-1.5) / det.sqrt() * (-0.5 * q).exp()
}

pub fn fisher(t: [f64; 3]) -> f64 {
    t.iter().map(|x| 1.0 / x).sum()
}

pub fn fisher_rel(t: [f64; 3]) -> f64 {
    t.iter().map(|x| (x - 1.0).powi(2) / x).sum()
}

pub fn entropy_rel(t: [f64; 3]) -> f64 {
    0.5 * t.iter().map(|x| x - 1.0 - x.ln()).sum::<f64>()
}

/// E|v|⁴ for N(0, diag T).
pub fn fourth(t: [f64; 3]) -> f64 {
    let s: f64 = t.iter().sum();
    let sq: f64 = t.iter().map(|x| x * x).sum();
    2.0 * sq + s * s
}

/// ‖f‖_{L²}.
pub fn l2(t: [f64; 3]) -> f64 {
    let det: f64 = t.iter().product();
    ((4.0 * PI).powf(-1.5) / det.sqrt()).sqrt()
}

/// ‖|·|² f‖_{L²}: f² is (4π)^{-3/2} det^{-1/2} times N(0, T/2).
pub fn l2_weighted(t: [f64; 3]) -> f64 {
    let half = t.map(|x| 0.5 * x);
    (l2(t).powi(2) * fourth(half)).sqrt()
}

/// D at γ = 0 for a centred diagonal Gaussian.
pub fn dissipation_gamma0(t: [f64; 3]) -> f64 {
    let mut d = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            d += (t[i] - t[j]).powi(2) / (t[i] * t[j]);
        }
    }
    2.0 * d
}

/// Composite Simpson rule on [a, b] with n (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let x = a + k as f64 * h;
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Radial Maxwellian profile (2π)^{-3/2} e^{-r²/2}.
pub fn maxwell_radial(r: f64) -> f64 {
    (2.0 * PI).powf(-1.5) * (-0.5 * r * r).exp()
}

/// ∫ M(w) |v − w|^{-1} dw = erf(|v|/√2)/|v|.
pub fn maxwell_potential(r: f64) -> f64 {
    if r < 1e-8 {
        (2.0 / PI).sqrt()
    } else {
        libm::erf(r / 2f64.sqrt()) / r
    }
}

/// ∫∫ M(v) M(w) |v − w|^{-1} |v|^k dv dw, by a radial integral.
pub fn maxwell_pair_moment_gamma1(k: i32) -> f64 {
    simpson(
        |r| 4.0 * PI * r.powi(2 + k) * maxwell_radial(r) * maxwell_potential(r),
        0.0,
        14.0,
        4000,
    )
}

/// Fermi-Dirac profile a e^{-b r²}/(1 + ε a e^{-b r²}) integrated against
/// 4π r^{2+k} by Simpson's rule.
pub fn fermi_radial_moment(k: i32, a: f64, b: f64, eps: f64) -> f64 {
    simpson(
        |r| {
            let g = a * (-b * r * r).exp();
            4.0 * PI * r.powi(2 + k) * g / (1.0 + eps * g)
        },
        0.0,
        16.0,
        8000,
    )
}

/// Deterministic pseudo-random points in a box, for sample sets that must
/// not depend on the library's RNG use.
pub fn lcg_points(seed: u64, n: usize, half_width: f64) -> Vec<[f64; 3]> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    (0..n).map(|_| [next() * half_width, next() * half_width, next() * half_width]).collect()
}
