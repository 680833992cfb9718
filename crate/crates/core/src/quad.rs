//! Numerical integration over R³ and R³×R³.
//!
//! Two rule families are provided: tensor Gauss-Hermite rules (for smooth,
//! Gaussian-dominated integrands) and uniform cell-centred grid rules (for
//! [`GridDistribution`](crate::dist::GridDistribution) data). Pair integrals
//! may carry the singular factor |v − w|^(−γ), γ ∈ [0, 1]; coincident nodes
//! are then treated according to a [`DiagonalRule`].

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Gauss-Hermite nodes and weights for ∫ e^{−x²} g(x) dx.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // ascending order
    x.reverse();
    w.reverse();
    (x, w)
}

/// Gauss-Legendre nodes and weights on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let xm = 0.5 * (b + a);
    let xl = 0.5 * (b - a);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = xm - xl * z;
        x[n - 1 - i] = xm + xl * z;
        w[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleKind {
    TensorGauss { nodes_per_axis: usize },
    UniformGrid { half_width: f64, nodes_per_axis: usize },
}

/// A positive-weight cubature rule on R³.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    kind: RuleKind,
    /// Per-axis length scale of the rule (standard deviation of the
    /// reference Gaussian, or the grid spacing).
    scale: Vec3,
}

impl QuadratureRule {
    /// Tensor Gauss-Hermite rule adapted to a reference Gaussian with the
    /// given centre and per-axis standard deviations.
    pub fn tensor_gauss(n: usize, center: Vec3, scale: Vec3) -> Self {
        let (x, w) = gauss_hermite(n);
        let axis: Vec<Vec<(f64, f64)>> = (0..3)
            .map(|d| {
                x.iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| {
                        let s = std::f64::consts::SQRT_2 * scale[d];
                        (center[d] + s * xi, s * wi * (xi * xi).exp())
                    })
                    .collect()
            })
            .collect();
        let mut nodes = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for a in &axis[0] {
            for b in &axis[1] {
                for c in &axis[2] {
                    nodes.push([a.0, b.0, c.0]);
                    weights.push(a.1 * b.1 * c.1);
                }
            }
        }
        Self {
            nodes,
            weights,
            kind: RuleKind::TensorGauss { nodes_per_axis: n },
            scale,
        }
    }

    /// The rule turned about `center` by the orthogonal `frame`, so that its
    /// axes follow the columns of `frame`.
    pub fn rotated(mut self, center: Vec3, frame: &nalgebra::Matrix3<f64>) -> Self {
        for v in &mut self.nodes {
            let d = nalgebra::Vector3::new(v[0] - center[0], v[1] - center[1], v[2] - center[2]);
            let r = frame * d;
            *v = [center[0] + r[0], center[1] + r[1], center[2] + r[2]];
        }
        self
    }

    /// Cell-centre rule on [−L, L]³ with `n` cells per axis; node order is
    /// x-major (index = (i·n + j)·n + k).
    pub fn uniform_grid(half_width: f64, n: usize) -> Self {
        let h = 2.0 * half_width / n as f64;
        let coord: Vec<f64> = (0..n).map(|i| -half_width + (i as f64 + 0.5) * h).collect();
        let mut nodes = Vec::with_capacity(n * n * n);
        for &a in &coord {
            for &b in &coord {
                for &c in &coord {
                    nodes.push([a, b, c]);
                }
            }
        }
        let weights = vec![h * h * h; nodes.len()];
        Self {
            nodes,
            weights,
            kind: RuleKind::UniformGrid {
                half_width,
                nodes_per_axis: n,
            },
            scale: [h; 3],
        }
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn scale(&self) -> Vec3 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes_per_axis(&self) -> usize {
        match self.kind {
            RuleKind::TensorGauss { nodes_per_axis } | RuleKind::UniformGrid { nodes_per_axis, .. } => nodes_per_axis,
        }
    }

    /// True when node `idx` lies on the outermost layer of the tensor lattice.
    pub fn on_outer_shell(&self, idx: usize) -> bool {
        let n = self.nodes_per_axis();
        [idx / (n * n), (idx / n) % n, idx % n].iter().any(|&c| c == 0 || c + 1 == n)
    }

    /// Dump the node/weight table as CSV (x, y, z, weight).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["x", "y", "z", "weight"])?;
        for (n, w) in self.nodes.iter().zip(&self.weights) {
            wtr.write_record(&[
                format!("{:.17e}", n[0]),
                format!("{:.17e}", n[1]),
                format!("{:.17e}", n[2]),
                format!("{:.17e}", w),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Σ w_k g(node_k) with compensated summation in node order.
pub fn single_integral<G: Fn(&Vec3) -> f64>(g: G, rule: &QuadratureRule) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (index, (node, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let value = g(node);
        if !value.is_finite() {
            return Err(Error::NonFinite { index, node: *node });
        }
        acc.add(w * value);
    }
    Ok(acc.value())
}

/// Treatment of |v − w|^(−γ) on coincident nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalRule {
    /// Exact average of |u|^(−γ) over the cell (cube of side h) on uniform
    /// grids; falls back to the ball-equivalent value on other rules.
    ExactCellAverage,
    /// Average over the ball with the same volume as the cell.
    BallEquivalent,
    /// Drop coincident pairs when γ > 0.
    SkipDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularKernelPolicy {
    gamma: f64,
    diagonal: DiagonalRule,
}

impl SingularKernelPolicy {
    pub fn new(gamma: f64, diagonal: DiagonalRule) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { gamma, diagonal })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn diagonal(&self) -> DiagonalRule {
        self.diagonal
    }

    /// Replacement value of |v − w|^(−γ) on a coincident pair whose cell has
    /// volume `volume` (or side `side` on uniform grids).
    pub fn diagonal_value(&self, volume: f64, side: Option<f64>) -> f64 {
        let g = self.gamma;
        if g == 0.0 {
            // The kernel is identically 1; every policy keeps the pair.
            return 1.0;
        }
        match (self.diagonal, side) {
            (DiagonalRule::SkipDiagonal, _) => 0.0,
            (DiagonalRule::ExactCellAverage, Some(h)) => cube_average_inverse_power(g, h),
            _ => ball_average_inverse_power(g, volume),
        }
    }
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Precondition(format!(
            "gamma = {gamma} outside the hard-potential range [0, 1]"
        )));
    }
    Ok(())
}

/// Mean of |u|^(−γ) over the ball of the given volume: (3/(3−γ)) r^(−γ).
pub fn ball_average_inverse_power(gamma: f64, volume: f64) -> f64 {
    let r_eq = (3.0 * volume / (4.0 * PI)).cbrt();
    3.0 / (3.0 - gamma) * r_eq.powf(-gamma)
}

/// Mean of |u|^(−γ) over the cube [−h/2, h/2]³.
///
/// The unit octant splits into three pyramids with apex at the origin;
/// on each, u = t (1, s₁, s₂) and the radial factor integrates in closed
/// form, leaving a smooth integral over the unit square.
pub fn cube_average_inverse_power(gamma: f64, h: f64) -> f64 {
    let (s, w) = gauss_legendre(32, 0.0, 1.0);
    let mut acc = CompensatedSum::new();
    for (a, wa) in s.iter().zip(&w) {
        for (b, wb) in s.iter().zip(&w) {
            acc.add(wa * wb * (1.0 + a * a + b * b).powf(-0.5 * gamma));
        }
    }
    (0.5 * h).powf(-gamma) * 3.0 * acc.value() / (3.0 - gamma)
}

fn diagonal_volume(rule: &QuadratureRule, k: usize) -> (f64, Option<f64>) {
    match rule.kind {
        RuleKind::UniformGrid { .. } => (rule.weights[k], Some(rule.scale[0])),
        RuleKind::TensorGauss { .. } => (rule.weights[k], None),
    }
}

/// |z|^(−γ) from |z|², with fast paths for γ ∈ {1/2, 1}.
#[inline]
pub fn inverse_power(r2: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        1.0 / r2.sqrt()
    } else if gamma == 0.5 {
        1.0 / r2.sqrt().sqrt()
    } else if gamma == 0.0 {
        1.0
    } else {
        r2.powf(-0.5 * gamma)
    }
}

#[inline]
pub fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

/// Σ_k Σ_l w_k w'_l G(v_k, w_l) K(v_k, w_l), with K = |v − w|^(−γ) when a
/// policy is given and K = 1 otherwise.
///
/// The outer index is processed in parallel; each outer row is summed with
/// compensation and rows are reduced in index order, so the result does not
/// depend on the worker count.
pub fn pair_integral<G>(
    g: G,
    rule_v: &QuadratureRule,
    rule_w: &QuadratureRule,
    policy: Option<SingularKernelPolicy>,
) -> Result<f64>
where
    G: Fn(&Vec3, &Vec3) -> f64 + Sync,
{
    let rows: Vec<Result<f64>> = (0..rule_v.len())
        .into_par_iter()
        .map(|k| {
            let v = &rule_v.nodes[k];
            let mut acc = CompensatedSum::new();
            for (l, w) in rule_w.nodes.iter().enumerate() {
                let r2 = dist2(v, w);
                let kernel = match policy {
                    Some(p) if p.gamma > 0.0 => {
                        if r2 == 0.0 {
                            let (vol, side) = diagonal_volume(rule_w, l);
                            p.diagonal_value(vol, side)
                        } else {
                            inverse_power(r2, p.gamma)
                        }
                    }
                    Some(p) if r2 == 0.0 => p.diagonal_value(0.0, None),
                    _ => 1.0,
                };
                if kernel == 0.0 {
                    continue;
                }
                let value = g(v, w);
                if !value.is_finite() {
                    return Err(if r2 == 0.0 {
                        Error::UndeclaredSingularity
                    } else {
                        Error::NonFinite { index: l, node: *w }
                    });
                }
                acc.add(rule_w.weights[l] * kernel * value);
            }
            Ok(rule_v.weights[k] * acc.value())
        })
        .collect();
    let mut acc = CompensatedSum::new();
    for r in rows {
        acc.add(r?);
    }
    Ok(acc.value())
}

/// Lower approximation of sup g over a finite candidate set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupEstimate {
    pub value: f64,
    pub argmax: Vec3,
}

pub fn sup_over_candidates<G: Fn(&Vec3) -> f64>(g: G, candidates: &[Vec3]) -> Result<SupEstimate> {
    let mut best: Option<SupEstimate> = None;
    for c in candidates {
        let value = g(c);
        if value.is_nan() {
            return Err(Error::Evaluation {
                at: *c,
                reason: "NaN while searching for the supremum".into(),
            });
        }
        if best.map_or(true, |b| value > b.value) {
            best = Some(SupEstimate { value, argmax: *c });
        }
    }
    best.ok_or_else(|| Error::Precondition("empty candidate set".into()))
}

/// 5×5×5 lattice on [−5, 5]³ (contains the origin).
pub fn default_candidates() -> Vec<Vec3> {
    let axis = [-5.0, -2.5, 0.0, 2.5, 5.0];
    let mut out = Vec::with_capacity(125);
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Splitting |z|^(−γ) = F(|z|) + N(|z|) |z|^(−γ) in the manner of Ewald
/// sums: F(r) = r^(−γ) P(γ/2, r²/ρ²) is smooth (even and analytic in z),
/// N = Q(γ/2, r²/ρ²) decays like e^(−r²/ρ²). P and Q are the regularised
/// incomplete gamma functions.
#[derive(Debug, Clone)]
pub struct KernelSplit {
    gamma: f64,
    rho: f64,
    /// φ(x) = x^(−a) P(a, x) on a uniform grid in x ∈ [0, X_MAX]
    table: Vec<f64>,
}

impl KernelSplit {
    pub const X_MAX: f64 = 36.0;
    const CELLS: usize = 1 << 14;

    pub fn new(gamma: f64, rho: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Precondition(format!("split radius {rho} must be positive")));
        }
        let a = 0.5 * gamma;
        let inv_gamma = 1.0 / libm::tgamma(a + 1.0);
        let h = Self::X_MAX / Self::CELLS as f64;
        let table = (0..=Self::CELLS + 2)
            .map(|k| {
                // e^(−x) Σ xⁿ / Γ(a + n + 1)
                let x = k as f64 * h;
                let mut term = inv_gamma;
                let mut sum = term;
                let mut n = 0.0;
                while term > 1e-18 * sum {
                    n += 1.0;
                    term *= x / (a + n);
                    sum += term;
                }
                (-x).exp() * sum
            })
            .collect();
        Ok(Self { gamma, rho, table })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Support radius of the near part.
    pub fn near_radius(&self) -> f64 {
        self.rho * Self::X_MAX.sqrt()
    }

    fn phi(&self, x: f64) -> f64 {
        let h = Self::X_MAX / Self::CELLS as f64;
        let s = x / h;
        let k = (s.floor() as usize).clamp(1, Self::CELLS) - 1;
        let t = s - (k + 1) as f64;
        let p = &self.table[k..k + 4];
        // cubic Lagrange through k−1, k, k+1, k+2 (t measured from k)
        let (tm, t0, t1, t2) = (t + 1.0, t, t - 1.0, t - 2.0);
        -p[0] * t0 * t1 * t2 / 6.0 + p[1] * tm * t1 * t2 / 2.0 - p[2] * tm * t0 * t2 / 2.0 + p[3] * tm * t0 * t1 / 6.0
    }

    /// Smooth far-field kernel F(r) from r².
    #[inline]
    pub fn far(&self, r2: f64) -> f64 {
        let x = r2 / (self.rho * self.rho);
        if x >= Self::X_MAX {
            inverse_power(r2, self.gamma)
        } else {
            self.rho.powf(-self.gamma) * self.phi(x)
        }
    }

    /// Near-field factor Q(γ/2, r²/ρ²), to be multiplied by r^(−γ).
    #[inline]
    pub fn near_factor(&self, r2: f64) -> f64 {
        let x = r2 / (self.rho * self.rho);
        if x >= Self::X_MAX {
            0.0
        } else {
            1.0 - x.powf(0.5 * self.gamma) * self.phi(x)
        }
    }
}

/// Product rule for ∫_{|z| ≤ R} g(z) |z|^(−γ) dz in spherical coordinates.
///
/// The radial variable is r = R u², which turns r^(2−γ) dr into the
/// polynomial-like weight 2 R^(3−γ) u^(5−2γ) du, so Gauss-Legendre in u
/// converges quickly even though the kernel is singular at z = 0.
#[derive(Debug, Clone)]
pub struct SphericalRule {
    gamma: f64,
    /// offsets on the unit ball and weights for R = 1
    offsets: Vec<Vec3>,
    weights: Vec<f64>,
}

impl SphericalRule {
    pub fn new(gamma: f64, n_radial: usize, n_polar: usize, n_azimuth: usize) -> Result<Self> {
        check_gamma(gamma)?;
        let (u, wu) = gauss_legendre(n_radial, 0.0, 1.0);
        let (ct, wct) = gauss_legendre(n_polar, -1.0, 1.0);
        let dphi = 2.0 * PI / n_azimuth as f64;
        let mut offsets = Vec::with_capacity(n_radial * n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(offsets.capacity());
        for (ui, wui) in u.iter().zip(&wu) {
            let r = ui * ui;
            let radial = 2.0 * ui.powf(5.0 - 2.0 * gamma) * wui;
            for (c, wc) in ct.iter().zip(&wct) {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for k in 0..n_azimuth {
                    let phi = (k as f64 + 0.5) * dphi;
                    offsets.push([r * s * phi.cos(), r * s * phi.sin(), r * c]);
                    weights.push(radial * wc * dphi);
                }
            }
        }
        Ok(Self {
            gamma,
            offsets,
            weights,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// ∫_{|w − v| ≤ R} g(w) |w − v|^(−γ) dw.
    pub fn integrate_around<G: Fn(&Vec3) -> f64>(&self, v: &Vec3, radius: f64, g: G) -> f64 {
        let scale = radius.powf(3.0 - self.gamma);
        let mut acc = CompensatedSum::new();
        for (o, w) in self.offsets.iter().zip(&self.weights) {
            let p = [v[0] + radius * o[0], v[1] + radius * o[1], v[2] + radius * o[2]];
            acc.add(w * g(&p));
        }
        scale * acc.value()
    }
}
