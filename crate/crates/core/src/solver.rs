//! Spatially homogeneous Landau and Landau-Fermi-Dirac evolution on a
//! cell-centre velocity grid.
//!
//! The time stepper uses the entropic weak form: with s = h'(f) the entropy
//! variable (ln f, or ln f − ln(1 − εf)), G = D s the discrete gradient and
//! w = f (or f(1 − εf)),
//!
//!   J_k = w_k Σ_l h³ a(v_k − v_l) w_l (G_k − G_l),   Q = −Dᵀ J.
//!
//! D is exact on quadratics, so mass, momentum and energy are conserved to
//! rounding, and dH/dt = −⟨G, J⟩ = −D exactly before time discretization.
//! Convolutions are zero-padded FFTs over the whole lattice, so no kernel
//! truncation is needed. Time integration is second-order
//! Runge-Kutta-Chebyshev with the stage count set from a power-iteration
//! estimate of the stiffness.

use nalgebra::{Matrix5, Vector5};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conv::{Convolver, KernelHat};
use crate::decay::{Trajectory, TrajectorySample};
use crate::dist::{occupation, GridDistribution};
use crate::error::{Error, Result};
use crate::quad::{check_gamma, Vec3};

/// Time step selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DtPolicy {
    /// Local error control in the norm |e_k| / (atol + rtol |f_k|), step
    /// capped at dt_max; the stage count follows the stiffness.
    Adaptive { rtol: f64, atol: f64, dt_max: f64 },
    /// Fixed step; the stage count follows the stiffness.
    Fixed { dt: f64 },
    /// Two-stage steps with dt = factor · β(2) / ρ.
    Cfl { factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub gamma: f64,
    /// 0 selects the classical operator.
    pub epsilon: f64,
    pub half_width: f64,
    pub nodes: usize,
    pub dt: DtPolicy,
    pub t_end: f64,
    pub sample_interval: f64,
    /// Lower bound applied inside logarithms only.
    pub floor: f64,
    /// Abort when min f < −abort_fraction · max f.
    pub abort_fraction: f64,
    /// Evolve only the nodes with |v| ≤ half_width.
    pub ball_mask: bool,
    pub max_stages: usize,
    /// Steps between stiffness re-estimates.
    pub stiffness_refresh: usize,
    /// Samples whose dissipated entropy falls below this are excluded from
    /// the entropy-identity check.
    pub identity_floor: f64,
    /// Adaptive steps are also capped at this fraction of H/D while H is
    /// above `identity_floor`.
    pub entropy_step_fraction: f64,
    pub snapshot_times: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            epsilon: 0.0,
            half_width: 6.0,
            nodes: 16,
            dt: DtPolicy::Adaptive {
                rtol: 1e-6,
                atol: 1e-15,
                dt_max: 0.05,
            },
            t_end: 20.0,
            sample_interval: 0.05,
            floor: 1e-30,
            abort_fraction: 1e-8,
            ball_mask: true,
            max_stages: 2000,
            stiffness_refresh: 25,
            identity_floor: 1e-18,
            entropy_step_fraction: 0.25,
            snapshot_times: Vec::new(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon = {} must be nonnegative", self.epsilon));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return bad(format!("half_width = {} must be positive", self.half_width));
        }
        if self.nodes < 4 || self.nodes % 2 != 0 {
            return bad(format!("nodes = {} must be even and at least 4", self.nodes));
        }
        match self.dt {
            DtPolicy::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => return bad(format!("dt = {dt} must be positive")),
            DtPolicy::Adaptive { rtol, atol, dt_max }
                if !(rtol > 0.0 && atol >= 0.0 && dt_max > 0.0 && dt_max.is_finite()) =>
            {
                return bad("adaptive step needs rtol > 0, atol ≥ 0 and dt_max > 0".into())
            }
            DtPolicy::Cfl { factor } if !(factor > 0.0 && factor <= 1.0) => {
                return bad(format!("CFL factor {factor} must lie in (0, 1]"))
            }
            _ => {}
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be nonnegative", self.t_end));
        }
        if !(self.sample_interval > 0.0) {
            return bad(format!("sample_interval = {} must be positive", self.sample_interval));
        }
        if !(self.floor >= 0.0) || !(self.abort_fraction >= 0.0) || !(self.identity_floor >= 0.0) {
            return bad("floor, abort_fraction and identity_floor must be nonnegative".into());
        }
        if !(self.entropy_step_fraction > 0.0) {
            return bad("entropy_step_fraction must be positive".into());
        }
        if self.max_stages < 2 {
            return bad("max_stages must be at least 2".into());
        }
        if self.stiffness_refresh == 0 {
            return bad("stiffness_refresh must be positive".into());
        }
        Ok(())
    }
}

/// Independent components of a symmetric 3×3 field: xx, xy, xz, yy, yz, zz.
const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

#[inline]
fn component(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

/// |z|^γ (|z|² δ_ij − z_i z_j).
#[inline]
fn landau_entry(z: &Vec3, gamma: f64, i: usize, j: usize) -> f64 {
    let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
    if r2 == 0.0 {
        return 0.0;
    }
    let scale = if gamma == 0.0 { 1.0 } else { r2.powf(0.5 * gamma) };
    scale * (if i == j { r2 } else { 0.0 } - z[i] * z[j])
}

/// Active node set, difference stencils and kernel transforms.
pub struct Lattice {
    n: usize,
    half_width: f64,
    h: f64,
    gamma: f64,
    active: Vec<bool>,
    /// Per axis and node: three (index, coefficient) entries.
    stencils: [Vec<[(usize, f64); 3]>; 3],
    conv: Convolver,
    kernel: Vec<KernelHat>,
}

impl std::fmt::Debug for Lattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lattice")
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .field("gamma", &self.gamma)
            .field("active", &self.active_count())
            .finish()
    }
}

impl Lattice {
    pub fn new(half_width: f64, n: usize, gamma: f64, ball_mask: bool) -> Result<Self> {
        check_gamma(gamma)?;
        if n < 3 {
            return Err(Error::Precondition("lattice needs at least three nodes per axis".into()));
        }
        let h = 2.0 * half_width / n as f64;
        let coord = |i: usize| -half_width + (i as f64 + 0.5) * h;
        let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let mut active = vec![true; n * n * n];
        if ball_mask {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let r2 = coord(i).powi(2) + coord(j).powi(2) + coord(k).powi(2);
                        active[idx(i, j, k)] = r2 <= half_width * half_width;
                    }
                }
            }
            // Every line segment needs three nodes for a quadratic-exact stencil.
            loop {
                let mut changed = false;
                for p in 0..active.len() {
                    if active[p] && (0..3).any(|a| segment(&active, n, p, a).2 < 3) {
                        active[p] = false;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        let stencils = [0, 1, 2].map(|a| {
            (0..n * n * n)
                .map(|p| {
                    if !active[p] {
                        return [(p, 0.0); 3];
                    }
                    let (start, pos, len) = segment(&active, n, p, a);
                    let stride = [n * n, n, 1][a];
                    let at = |q: usize| start + q * stride;
                    let c = 0.5 / h;
                    if pos == 0 {
                        [(at(0), -3.0 * c), (at(1), 4.0 * c), (at(2), -c)]
                    } else if pos == len - 1 {
                        [(at(len - 3), c), (at(len - 2), -4.0 * c), (at(len - 1), 3.0 * c)]
                    } else {
                        [(at(pos - 1), -c), (p, 0.0), (at(pos + 1), c)]
                    }
                })
                .collect()
        });
        let conv = Convolver::new(n);
        let h3 = h * h * h;
        let kernel = PAIRS
            .iter()
            .map(|&(i, j)| {
                conv.transform(|a, b, c| {
                    let z = [a as f64 * h, b as f64 * h, c as f64 * h];
                    h3 * landau_entry(&z, gamma, i, j)
                })
            })
            .collect();
        Ok(Self {
            n,
            half_width,
            h,
            gamma,
            active,
            stencils,
            conv,
            kernel,
        })
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_active(&self, p: usize) -> bool {
        self.active[p]
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn node(&self, p: usize) -> Vec3 {
        let n = self.n;
        let c = |i: usize| -self.half_width + (i as f64 + 0.5) * self.h;
        [c(p / (n * n)), c((p / n) % n), c(p % n)]
    }

    /// Discrete gradient; zero at inactive nodes.
    pub fn gradient(&self, field: &[f64]) -> [Vec<f64>; 3] {
        [0, 1, 2].map(|a| {
            self.stencils[a]
                .iter()
                .map(|st| st.iter().map(|&(q, c)| c * field[q]).sum())
                .collect()
        })
    }

    /// −Dᵀ J, the exact adjoint of [`Lattice::gradient`] with a sign flip.
    pub fn neg_divergence_adjoint(&self, flux: &[Vec<f64>; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.active.len()];
        for a in 0..3 {
            for (p, st) in self.stencils[a].iter().enumerate() {
                if !self.active[p] {
                    continue;
                }
                for &(q, c) in st {
                    out[q] -= c * flux[a][p];
                }
            }
        }
        out
    }

    /// (a ∗ w)_k = Σ_l h³ a(v_k − v_l) w_l for all six components.
    fn matrix_convolution(&self, w_hat: &[Complex64]) -> Vec<Vec<f64>> {
        let i = Complex64::new(0.0, 1.0);
        let mut out = Vec::with_capacity(6);
        for c in 0..3 {
            let (k0, k1) = (&self.kernel[2 * c].0, &self.kernel[2 * c + 1].0);
            let (x, y) = self.conv.inverse_with(|p| (k0[p] + i * k1[p]) * w_hat[p]);
            out.push(x);
            out.push(y);
        }
        out
    }

    /// B_i = Σ_j (a_ij ∗ u_j) for a vector field u given by its transforms.
    fn vector_convolution(&self, u: &[Vec<Complex64>; 3]) -> [Vec<f64>; 3] {
        let i = Complex64::new(0.0, 1.0);
        let k = |a: usize, b: usize| &self.kernel[component(a, b)].0;
        let (b0, b1) = self.conv.inverse_with(|p| {
            let row0 = k(0, 0)[p] * u[0][p] + k(0, 1)[p] * u[1][p] + k(0, 2)[p] * u[2][p];
            let row1 = k(1, 0)[p] * u[0][p] + k(1, 1)[p] * u[1][p] + k(1, 2)[p] * u[2][p];
            row0 + i * row1
        });
        let (b2, _) = self.conv.inverse_with(|p| k(2, 0)[p] * u[0][p] + k(2, 1)[p] * u[1][p] + k(2, 2)[p] * u[2][p]);
        [b0, b1, b2]
    }
}

/// (start index, position within segment, segment length) of the maximal
/// run of active nodes through p along axis a.
fn segment(active: &[bool], n: usize, p: usize, a: usize) -> (usize, usize, usize) {
    let stride = [n * n, n, 1][a];
    let coord = (p / stride) % n;
    let mut lo = coord;
    while lo > 0 && active[p - (coord - lo + 1) * stride] {
        lo -= 1;
    }
    let mut hi = coord;
    while hi + 1 < n && active[p + (hi + 1 - coord) * stride] {
        hi += 1;
    }
    (p - (coord - lo) * stride, coord - lo, hi - lo + 1)
}

/// A[f] = a ∗ f and b[f] = (∇·a) ∗ f on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionCoefficients {
    /// Six symmetric components per node, ordered xx, xy, xz, yy, yz, zz.
    pub a: Vec<[f64; 6]>,
    pub b: Vec<Vec3>,
}

impl CollisionCoefficients {
    pub fn matrix(&self, p: usize) -> nalgebra::Matrix3<f64> {
        let c = &self.a[p];
        nalgebra::Matrix3::new(c[0], c[1], c[2], c[1], c[3], c[4], c[2], c[4], c[5])
    }
}

fn check_square(f: &GridDistribution) -> Result<()> {
    if f.nodes_per_axis() < 3 {
        return Err(Error::Precondition("grid needs at least three nodes per axis".into()));
    }
    Ok(())
}

fn coefficients_on(lat: &Lattice, weights: &[f64], drift_weights: &[f64]) -> CollisionCoefficients {
    let conv = &lat.conv;
    let (w_hat, d_hat) = conv.transform_field_pair(weights, drift_weights);
    let a = lat.matrix_convolution(&w_hat);
    // ∇·a(z) = −2 |z|^γ z.
    let (h, gamma) = (lat.h, lat.gamma);
    let h3 = h * h * h;
    let drift: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            let kernel = conv.transform(|x, y, z| {
                let v = [x as f64 * h, y as f64 * h, z as f64 * h];
                let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                if r2 == 0.0 {
                    0.0
                } else {
                    -2.0 * h3 * r2.powf(0.5 * gamma) * v[i]
                }
            });
            conv.apply(&kernel, &d_hat)
        })
        .collect();
    let len = weights.len();
    CollisionCoefficients {
        a: (0..len).map(|p| [0, 1, 2, 3, 4, 5].map(|c| a[c][p])).collect(),
        b: (0..len).map(|p| [drift[0][p], drift[1][p], drift[2][p]]).collect(),
    }
}

/// Diffusion matrix and drift of the Landau operator for a grid state.
pub fn coefficients(f: &GridDistribution, gamma: f64) -> Result<CollisionCoefficients> {
    check_square(f)?;
    let lat = Lattice::new(f.half_width(), f.nodes_per_axis(), gamma, false)?;
    Ok(coefficients_on(&lat, f.values(), f.values()))
}

/// Strong form ∇·(A[f]∇f − b[f] f) in flux-adjoint discretization; the
/// discrete mass Σ h³ Q vanishes to rounding.
pub fn apply_q(f: &GridDistribution, gamma: f64) -> Result<Vec<f64>> {
    check_square(f)?;
    let lat = Lattice::new(f.half_width(), f.nodes_per_axis(), gamma, false)?;
    let c = coefficients_on(&lat, f.values(), f.values());
    Ok(strong_form(&lat, &c, f.values(), f.values()))
}

/// ∇·(A[f(1−εf)]∇f − f(1−εf) b[f]).
pub fn apply_q_lfd(f: &GridDistribution, gamma: f64, eps: f64) -> Result<Vec<f64>> {
    check_square(f)?;
    if let Some(p) = f.values().iter().position(|x| eps * x >= 1.0) {
        return Err(Error::Pauli {
            at: f.node(p),
            value: eps * f.values()[p],
        });
    }
    let lat = Lattice::new(f.half_width(), f.nodes_per_axis(), gamma, false)?;
    let w: Vec<f64> = f.values().iter().map(|x| x * (1.0 - eps * x)).collect();
    let c = coefficients_on(&lat, &w, f.values());
    Ok(strong_form(&lat, &c, f.values(), &w))
}

fn strong_form(lat: &Lattice, c: &CollisionCoefficients, f: &[f64], drift_weight: &[f64]) -> Vec<f64> {
    let g = lat.gradient(f);
    let mut flux = [vec![0.0; f.len()], vec![0.0; f.len()], vec![0.0; f.len()]];
    for p in 0..f.len() {
        let a = &c.a[p];
        let grad = [g[0][p], g[1][p], g[2][p]];
        for i in 0..3 {
            let ag: f64 = (0..3).map(|j| a[component(i, j)] * grad[j]).sum();
            flux[i][p] = ag - c.b[p][i] * drift_weight[p];
        }
    }
    lat.neg_divergence_adjoint(&flux)
}

/// Right-hand side of the entropic scheme and the dissipation it implies.
#[derive(Debug, Clone)]
pub struct Rhs {
    pub q: Vec<f64>,
    /// ⟨G, J⟩ h³ = −dH/dt.
    pub dissipation: f64,
}

/// Entropic right-hand side on a prepared lattice. With a reference
/// equilibrium its entropy variable θ·(1, v, −|v|²/2) is subtracted before
/// differencing: the gradient of that quadratic lies in the kernel's null
/// direction, so Q is unchanged while D keeps relative accuracy near
/// equilibrium.
pub fn entropic_rhs(lat: &Lattice, f: &[f64], eps: f64, floor: f64, reference: Option<&DiscreteEquilibrium>) -> Rhs {
    let len = f.len();
    let mut s = vec![0.0; len];
    let mut w = vec![0.0; len];
    for p in 0..len {
        if lat.active[p] {
            let x = f[p];
            s[p] = x.max(floor).ln();
            w[p] = x;
            if eps > 0.0 {
                let comp = 1.0 - eps * x;
                s[p] -= comp.max(floor).ln();
                w[p] = x * comp;
            }
            if let Some(eq) = reference {
                let m = features(&lat.node(p));
                s[p] -= (0..5).map(|c| eq.theta[c] * m[c]).sum::<f64>();
            }
        }
    }
    let g = lat.gradient(&s);
    let wg: [Vec<f64>; 3] = [0, 1, 2].map(|a| (0..len).map(|p| w[p] * g[a][p]).collect());
    let conv = &lat.conv;
    let (w_hat, wg0_hat) = conv.transform_field_pair(&w, &wg[0]);
    let (wg1_hat, wg2_hat) = conv.transform_field_pair(&wg[1], &wg[2]);
    let a = lat.matrix_convolution(&w_hat);
    let b = lat.vector_convolution(&[wg0_hat, wg1_hat, wg2_hat]);
    let mut flux = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut diss = crate::quad::CompensatedSum::new();
    for p in 0..len {
        if !lat.active[p] {
            continue;
        }
        let gp = [g[0][p], g[1][p], g[2][p]];
        let mut dot = 0.0;
        for i in 0..3 {
            let ag: f64 = (0..3).map(|j| a[component(i, j)][p] * gp[j]).sum();
            let j_i = w[p] * (ag - b[i][p]);
            flux[i][p] = j_i;
            dot += gp[i] * j_i;
        }
        diss.add(dot);
    }
    let h = lat.h;
    Rhs {
        q: lat.neg_divergence_adjoint(&flux),
        dissipation: diss.value() * h * h * h,
    }
}

/// Conserved and monitored quantities of a grid state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMoments {
    pub mass: f64,
    pub momentum: Vec3,
    pub energy: f64,
    pub min_f: f64,
    pub max_f: f64,
    pub l2q6: f64,
}

pub fn grid_moments(lat: &Lattice, f: &[f64]) -> GridMoments {
    use crate::quad::CompensatedSum;
    let h3 = lat.h.powi(3);
    let (mut m, mut e, mut l2) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    let mut mom = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in 0..f.len() {
        if !lat.active[p] {
            continue;
        }
        let v = lat.node(p);
        let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let x = f[p];
        m.add(x);
        for a in 0..3 {
            mom[a].add(v[a] * x);
        }
        e.add(r2 * x);
        l2.add((1.0 + r2).powi(6) * x * x);
        lo = lo.min(x);
        hi = hi.max(x);
    }
    GridMoments {
        mass: h3 * m.value(),
        momentum: [0, 1, 2].map(|a| h3 * mom[a].value()),
        energy: h3 * e.value(),
        min_f: lo,
        max_f: hi,
        l2q6: (h3 * l2.value()).sqrt(),
    }
}

/// Discrete equilibrium exp-family member with the same mass, momentum and
/// energy on the active nodes: f = occupation(−φ, ε), φ = θ·(1, v, −|v|²/2).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEquilibrium {
    pub theta: [f64; 5],
    pub eps: f64,
    pub values: Vec<f64>,
}

fn features(v: &Vec3) -> Vector5<f64> {
    Vector5::new(1.0, v[0], v[1], v[2], -0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
}

/// ∫ occupation(−φ, ε) dφ, the convex potential whose gradient gives the
/// moments.
fn potential(phi: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        phi.exp()
    } else if phi > 0.0 {
        (phi + (eps + (-phi).exp()).ln()) / eps
    } else {
        (eps * phi.exp()).ln_1p() / eps
    }
}

/// Newton's method on the convex dual Σ h³ Ψ(θ·m) − θ·μ.
pub fn fit_discrete_equilibrium(lat: &Lattice, f: &[f64], eps: f64) -> Result<DiscreteEquilibrium> {
    let h3 = lat.h.powi(3);
    let nodes: Vec<(usize, Vector5<f64>)> = (0..f.len())
        .filter(|&p| lat.active[p])
        .map(|p| (p, features(&lat.node(p))))
        .collect();
    let mut mu = Vector5::zeros();
    for (p, m) in &nodes {
        mu += m * (h3 * f[*p]);
    }
    let mass = mu[0];
    if !(mass > 0.0) {
        return Err(Error::Degenerate("grid state has no mass".into()));
    }
    let u = [mu[1] / mass, mu[2] / mass, mu[3] / mass];
    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let temp = ((-2.0 * mu[4] / mass) - u2) / 3.0;
    if !(temp > 0.0) {
        return Err(Error::Degenerate(format!("grid temperature {temp} is not positive")));
    }
    let mut theta = Vector5::new(
        (mass / (2.0 * std::f64::consts::PI * temp).powf(1.5)).ln() - 0.5 * u2 / temp,
        u[0] / temp,
        u[1] / temp,
        u[2] / temp,
        1.0 / temp,
    );
    if eps > 0.0 {
        // Start from the classical fit; the Pauli correction is a small shift.
        theta[0] -= (1.0 + eps * theta[0].exp()).ln().max(0.0);
    }
    let objective = |th: &Vector5<f64>| -> f64 {
        nodes.iter().map(|(_, m)| h3 * potential(th.dot(m), eps)).sum::<f64>() - th.dot(&mu)
    };
    let scale = mu.abs().max().max(1.0);
    for _ in 0..200 {
        let mut grad = -mu;
        let mut hess = Matrix5::zeros();
        for (_, m) in &nodes {
            let phi = theta.dot(m);
            let occ = occupation(-phi, eps);
            grad += m * (h3 * occ);
            hess += m * m.transpose() * (h3 * occ * (1.0 - eps * occ));
        }
        if grad.abs().max() <= 1e-15 * scale {
            break;
        }
        let step = hess
            .lu()
            .solve(&grad)
            .ok_or_else(|| Error::Degenerate("singular equilibrium Hessian".into()))?;
        let f0 = objective(&theta);
        let mut t = 1.0;
        loop {
            let trial = theta - step * t;
            if objective(&trial) <= f0 + 1e-14 * f0.abs() || t < 1e-8 {
                theta = trial;
                break;
            }
            t *= 0.5;
        }
    }
    let mut values = vec![0.0; f.len()];
    for (p, m) in &nodes {
        values[*p] = occupation(-theta.dot(m), eps);
    }
    Ok(DiscreteEquilibrium {
        theta: [theta[0], theta[1], theta[2], theta[3], theta[4]],
        eps,
        values,
    })
}

/// (1 + x) ln(1 + x) − x, accurate for small x.
fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 12.0 - x * x2 / 20.0)
    } else if x <= -1.0 {
        1.0
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// Bregman divergence of the (Fermi-Dirac) entropy from the discrete
/// equilibrium; each node contributes a nonnegative term.
pub fn relative_entropy(lat: &Lattice, f: &[f64], eq: &DiscreteEquilibrium) -> f64 {
    let h3 = lat.h.powi(3);
    let eps = eq.eps;
    let mut acc = crate::quad::CompensatedSum::new();
    for p in 0..f.len() {
        if !lat.active[p] {
            continue;
        }
        let m = eq.values[p];
        let x = f[p].max(0.0);
        let mut term = m * phi1((x - m) / m);
        if eps > 0.0 {
            let cm = 1.0 - eps * m;
            term += cm / eps * phi1(-eps * (x - m) / cm);
        }
        acc.add(term);
    }
    h3 * acc.value()
}

/// Coefficients of the damped second-order RKC scheme with s stages.
#[derive(Debug, Clone)]
struct Rkc {
    s: usize,
    mu: Vec<f64>,
    nu: Vec<f64>,
    mu_t: Vec<f64>,
    gamma_t: Vec<f64>,
}

const RKC_DAMPING: f64 = 2.0 / 13.0;

fn chebyshev(s: usize, w0: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut t = vec![1.0, w0];
    let mut d1 = vec![0.0, 1.0];
    let mut d2 = vec![0.0, 0.0];
    for j in 2..=s {
        t.push(2.0 * w0 * t[j - 1] - t[j - 2]);
        d1.push(2.0 * t[j - 1] + 2.0 * w0 * d1[j - 1] - d1[j - 2]);
        d2.push(4.0 * d1[j - 1] + 2.0 * w0 * d2[j - 1] - d2[j - 2]);
    }
    (t, d1, d2)
}

/// Length of the real stability interval.
fn rkc_beta(s: usize) -> f64 {
    let w0 = 1.0 + RKC_DAMPING / (s * s) as f64;
    let (_, d1, d2) = chebyshev(s, w0);
    (w0 + 1.0) * d2[s] / d1[s]
}

impl Rkc {
    fn new(s: usize) -> Self {
        let w0 = 1.0 + RKC_DAMPING / (s * s) as f64;
        let (t, d1, d2) = chebyshev(s, w0);
        let w1 = d1[s] / d2[s];
        let mut b = vec![0.0; s + 1];
        for j in 2..=s {
            b[j] = d2[j] / (d1[j] * d1[j]);
        }
        b[0] = b[2];
        b[1] = b[2];
        let mut mu = vec![0.0; s + 1];
        let mut nu = vec![0.0; s + 1];
        let mut mu_t = vec![0.0; s + 1];
        let mut gamma_t = vec![0.0; s + 1];
        mu_t[1] = b[1] * w1;
        for j in 2..=s {
            mu[j] = 2.0 * b[j] * w0 / b[j - 1];
            nu[j] = -b[j] / b[j - 2];
            mu_t[j] = 2.0 * b[j] * w1 / b[j - 1];
            gamma_t[j] = -(1.0 - b[j - 1] * t[j - 1]) * mu_t[j];
        }
        Self {
            s,
            mu,
            nu,
            mu_t,
            gamma_t,
        }
    }
}

/// Smallest stage count whose stability interval covers dt·ρ.
fn stages_for(dt_rho: f64, max_stages: usize) -> Option<usize> {
    let guess = ((1.0 + 1.54 * dt_rho).sqrt().ceil() as usize).max(2);
    let mut s = guess.saturating_sub(2).max(2);
    while s <= max_stages {
        if rkc_beta(s) >= dt_rho {
            return Some(s);
        }
        s += 1;
    }
    None
}

/// RMS of the embedded RKC error estimate
/// (12(y₀ − y₁) + 6 dt (F₀ + F₁)) / 15 in the weighted norm.
fn local_error(y0: &[f64], y1: &[f64], f0: &[f64], f1: &[f64], dt: f64, rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for p in 0..y0.len() {
        if y0[p] == 0.0 && y1[p] == 0.0 {
            continue;
        }
        let est = (12.0 * (y0[p] - y1[p]) + 6.0 * dt * (f0[p] + f1[p])) / 15.0;
        let w = atol + rtol * y0[p].abs().max(y1[p].abs());
        acc += (est / w).powi(2);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        (acc / count as f64).sqrt()
    }
}

/// Outcome of a completed or aborted run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub identity: Vec<IdentitySample>,
    pub final_state: GridDistribution,
    pub snapshots: Vec<(f64, GridDistribution)>,
    pub equilibrium: DiscreteEquilibrium,
    pub steps: usize,
    pub rhs_evaluations: usize,
    pub max_stages_used: usize,
    pub rejected_steps: usize,
    pub spectral_radius: f64,
}

impl RunOutput {
    /// Largest relative entropy-identity residual among checked samples.
    pub fn max_identity_residual(&self) -> Option<f64> {
        self.identity.iter().filter_map(|s| s.residual).fold(None, |m, r| Some(m.map_or(r, |x: f64| x.max(r))))
    }

    /// Largest relative drift of mass, momentum norm (relative to √mass·energy)
    /// and energy against the initial sample.
    pub fn drifts(&self) -> (f64, f64, f64) {
        let s = &self.trajectory.samples;
        let first = s[0];
        let mom_scale = (first.mass * first.energy).sqrt();
        let mut out = (0.0f64, 0.0f64, 0.0f64);
        for x in s {
            out.0 = out.0.max(((x.mass - first.mass) / first.mass).abs());
            out.1 = out.1.max((x.momentum_norm - first.momentum_norm).abs() / mom_scale);
            out.2 = out.2.max(((x.energy - first.energy) / first.energy).abs());
        }
        out
    }
}

/// Entropy identity over one sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentitySample {
    pub t: f64,
    /// H(t_{k−1}) − H(t_k).
    pub entropy_drop: f64,
    /// ∫ D dt over the interval (trapezoid over steps).
    pub dissipated: f64,
    /// |drop − dissipated| / dissipated, when above the noise floor.
    pub residual: Option<f64>,
}

/// Failure with the last state that passed the checks.
#[derive(Debug, Clone)]
pub struct SolverFailure {
    pub error: Error,
    pub last_good: GridDistribution,
    pub partial: Trajectory,
}

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} samples)", self.error, self.partial.len())
    }
}

impl std::error::Error for SolverFailure {}

impl From<Box<SolverFailure>> for Error {
    fn from(s: Box<SolverFailure>) -> Self {
        s.error
    }
}

/// Solver state bound to one configuration.
pub struct Solver {
    cfg: SolverConfig,
    lattice: Lattice,
    rho: f64,
    rhs_evaluations: usize,
    rejected: usize,
    reference: Option<DiscreteEquilibrium>,
    /// Dominant eigenvector from the last stiffness estimate.
    mode: Vec<f64>,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver").field("cfg", &self.cfg).field("lattice", &self.lattice).finish()
    }
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let lattice = Lattice::new(cfg.half_width, cfg.nodes, cfg.gamma, cfg.ball_mask)?;
        Ok(Self {
            cfg,
            lattice,
            rho: 0.0,
            rhs_evaluations: 0,
            rejected: 0,
            reference: None,
            mode: Vec::new(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn rhs(&mut self, f: &[f64]) -> Rhs {
        self.rhs_evaluations += 1;
        entropic_rhs(&self.lattice, f, self.cfg.epsilon, self.cfg.floor, self.reference.as_ref())
    }

    /// Zero the inactive nodes of an initial state.
    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        f.iter()
            .enumerate()
            .map(|(p, x)| if self.lattice.active[p] { *x } else { 0.0 })
            .collect()
    }

    /// Largest |eigenvalue| of the Jacobian by power iteration in the
    /// relative variables u = δf / f, warm-started from the previous mode.
    pub fn estimate_stiffness(&mut self, f: &[f64], base: &[f64]) -> f64 {
        let len = f.len();
        let usable: Vec<bool> = (0..len).map(|p| self.lattice.active[p] && f[p] > 0.0).collect();
        let mut u: Vec<f64> = if self.mode.len() == len {
            self.mode.clone()
        } else {
            (0..len).map(|p| 1.0 + 0.5 * ((p as f64) * 0.618).sin()).collect()
        };
        for p in 0..len {
            if !usable[p] {
                u[p] = 0.0;
            }
        }
        let norm = |x: &[f64]| x.iter().map(|y| y * y).sum::<f64>().sqrt();
        let mut rho = 0.0;
        let delta = 1e-7;
        for _ in 0..60 {
            let un = norm(&u);
            if un == 0.0 {
                break;
            }
            u.iter_mut().for_each(|x| *x /= un);
            let umax = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let d = delta / umax;
            let g: Vec<f64> = (0..len).map(|p| f[p] + d * f[p] * u[p]).collect();
            let q = self.rhs(&g).q;
            let next: Vec<f64> = (0..len)
                .map(|p| if usable[p] { (q[p] - base[p]) / (d * f[p]) } else { 0.0 })
                .collect();
            let r = norm(&next);
            let converged = (r - rho).abs() <= 1e-3 * r;
            rho = r;
            u = next;
            if converged {
                break;
            }
        }
        self.mode = u;
        rho
    }

    /// One RKC step of size dt with s stages; returns the new state and the
    /// dissipation at the end point.
    fn rkc_step(&mut self, y0: &[f64], f0: &Rhs, dt: f64, s: usize) -> Vec<f64> {
        let c = Rkc::new(s);
        let len = y0.len();
        let mut y_prev2 = y0.to_vec();
        let mut y_prev: Vec<f64> = (0..len).map(|p| y0[p] + c.mu_t[1] * dt * f0.q[p]).collect();
        for j in 2..=c.s {
            let fj = self.rhs(&y_prev).q;
            let (mu, nu, mt, gt) = (c.mu[j], c.nu[j], c.mu_t[j], c.gamma_t[j]);
            let y: Vec<f64> = (0..len)
                .map(|p| {
                    (1.0 - mu - nu) * y0[p]
                        + mu * y_prev[p]
                        + nu * y_prev2[p]
                        + mt * dt * fj[p]
                        + gt * dt * f0.q[p]
                })
                .collect();
            y_prev2 = std::mem::replace(&mut y_prev, y);
        }
        y_prev
    }

    fn check_state(&self, f: &[f64], t: f64) -> Result<()> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (p, x) in f.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::Instability {
                    time: t,
                    reason: format!("non-finite density at node {p}"),
                });
            }
            lo = lo.min(*x);
            hi = hi.max(*x);
        }
        if lo < -self.cfg.abort_fraction * hi {
            return Err(Error::Instability {
                time: t,
                reason: format!("density {lo:.3e} below −{:.0e}·max f", self.cfg.abort_fraction),
            });
        }
        if self.cfg.epsilon > 0.0 && self.cfg.epsilon * hi >= 1.0 {
            return Err(Error::Instability {
                time: t,
                reason: format!("Pauli bound violated: εf = {}", self.cfg.epsilon * hi),
            });
        }
        Ok(())
    }

    fn grid(&self, f: Vec<f64>) -> GridDistribution {
        GridDistribution::from_raw(self.cfg.half_width, self.cfg.nodes, f)
    }

    fn sample(&self, t: f64, f: &[f64], d: f64, dt: f64, eq: &DiscreteEquilibrium) -> TrajectorySample {
        let m = grid_moments(&self.lattice, f);
        TrajectorySample {
            t,
            h: relative_entropy(&self.lattice, f, eq),
            // Rounding leaves ⟨G, J⟩ at about −1e-27 near equilibrium.
            d: d.max(0.0),
            mass: m.mass,
            momentum_norm: (m.momentum[0].powi(2) + m.momentum[1].powi(2) + m.momentum[2].powi(2)).sqrt(),
            energy: m.energy,
            min_f: m.min_f,
            dt,
            l2q6: m.l2q6,
        }
    }

    /// Integrate from `f0` to t_end, sampling at the configured interval.
    pub fn run(&mut self, f0: &GridDistribution) -> std::result::Result<RunOutput, Box<SolverFailure>> {
        let fail = |error: Error, last: Vec<f64>, traj: &Trajectory, s: &Self| {
            Box::new(SolverFailure {
                error,
                last_good: s.grid(last),
                partial: traj.clone(),
            })
        };
        if f0.nodes_per_axis() != self.cfg.nodes || (f0.half_width() - self.cfg.half_width).abs() > 1e-12 {
            let e = Error::Config(format!(
                "initial grid (N = {}, L = {}) does not match the solver grid (N = {}, L = {})",
                f0.nodes_per_axis(),
                f0.half_width(),
                self.cfg.nodes,
                self.cfg.half_width
            ));
            return Err(fail(e, f0.values().to_vec(), &Trajectory::default(), self));
        }
        let mut f = self.restrict(f0.values());
        let mut traj = Trajectory::default();
        if let Err(e) = self.check_state(&f, 0.0) {
            return Err(fail(e, f, &traj, self));
        }
        let eq = match fit_discrete_equilibrium(&self.lattice, &f, self.cfg.epsilon) {
            Ok(eq) => eq,
            Err(e) => return Err(fail(e, f, &traj, self)),
        };
        self.reference = Some(eq.clone());
        let mut base = self.rhs(&f);
        self.rho = self.estimate_stiffness(&f, &base.q);
        let interval = self.cfg.sample_interval;
        let samples = (self.cfg.t_end / interval).round() as usize;
        let mut snapshots = Vec::new();
        let mut pending: Vec<f64> = self.cfg.snapshot_times.clone();
        pending.sort_by(f64::total_cmp);
        let mut pending = pending.into_iter().peekable();
        let mut identity = Vec::new();
        let mut t = 0.0;
        let mut steps = 0;
        let mut max_stages = 0;
        let mut last_dt = 0.0;
        let mut proposal = match self.cfg.dt {
            DtPolicy::Adaptive { dt_max, .. } => (1.0 / self.rho.max(1e-12)).min(dt_max),
            _ => 0.0,
        };
        traj.samples.push(self.sample(0.0, &f, base.dissipation, 0.0, &eq));
        let mut h_now = traj.samples[0].h;
        while pending.peek().is_some_and(|&ts| ts <= 0.0) {
            snapshots.push((pending.next().unwrap_or(0.0), self.grid(f.clone())));
        }
        for k in 1..=samples {
            let t_next = k as f64 * interval;
            let mut dissipated = 0.0;
            while t < t_next - 1e-12 * interval {
                let remaining = t_next - t;
                let rho = 1.2 * self.rho.max(1e-12);
                let mut dt = match self.cfg.dt {
                    DtPolicy::Adaptive { dt_max, .. } => {
                        let resolved = if h_now > self.cfg.identity_floor && base.dissipation > 0.0 {
                            self.cfg.entropy_step_fraction * h_now / base.dissipation
                        } else {
                            f64::INFINITY
                        };
                        proposal.min(dt_max).min(resolved)
                    }
                    DtPolicy::Fixed { dt } => dt,
                    DtPolicy::Cfl { factor } => factor * rkc_beta(2) / rho,
                };
                // Land on the sample time without a sliver step.
                if dt >= remaining * (1.0 - 1e-9) {
                    dt = remaining;
                }
                let s = match self.cfg.dt {
                    DtPolicy::Cfl { .. } => 2,
                    _ => match stages_for(dt * rho, self.cfg.max_stages) {
                        Some(s) => s,
                        None => {
                            dt = 0.99 * rkc_beta(self.cfg.max_stages) / rho;
                            self.cfg.max_stages
                        }
                    },
                };
                let y = self.rkc_step(&f, &base, dt, s);
                let t_new = if dt == remaining { t_next } else { t + dt };
                let finite = y.iter().all(|x| x.is_finite());
                let next = if finite { Some(self.rhs(&y)) } else { None };
                if let DtPolicy::Adaptive { rtol, atol, .. } = self.cfg.dt {
                    let err = match &next {
                        Some(next) => local_error(&f, &y, &base.q, &next.q, dt, rtol, atol),
                        None => f64::INFINITY,
                    };
                    let factor = if err > 0.0 { 0.8 * err.powf(-1.0 / 3.0) } else { 10.0 };
                    if err > 1.0 {
                        self.rejected += 1;
                        proposal = dt * factor.clamp(0.1, 0.9);
                        if proposal < 1e-14 * self.cfg.t_end.max(1.0) {
                            let e = Error::Instability {
                                time: t,
                                reason: "step size underflow".into(),
                            };
                            return Err(fail(e, f, &traj, self));
                        }
                        continue;
                    }
                    proposal = dt * factor.clamp(0.2, 5.0);
                }
                if let Err(e) = self.check_state(&y, t_new) {
                    return Err(fail(e, f, &traj, self));
                }
                let Some(next) = next else {
                    let e = Error::Instability {
                        time: t_new,
                        reason: "non-finite state".into(),
                    };
                    return Err(fail(e, f, &traj, self));
                };
                dissipated += 0.5 * dt * (base.dissipation + next.dissipation);
                f = y;
                base = next;
                h_now = relative_entropy(&self.lattice, &f, &eq);
                t = t_new;
                steps += 1;
                max_stages = max_stages.max(s);
                last_dt = dt;
                if steps % self.cfg.stiffness_refresh == 0 {
                    self.rho = self.estimate_stiffness(&f, &base.q);
                }
                while pending.peek().is_some_and(|&ts| ts <= t + 1e-12) {
                    snapshots.push((pending.next().unwrap_or(t), self.grid(f.clone())));
                }
            }
            let sample = self.sample(t_next, &f, base.dissipation, last_dt, &eq);
            let prev_h = traj.samples[k - 1].h;
            let drop = prev_h - sample.h;
            identity.push(IdentitySample {
                t: t_next,
                entropy_drop: drop,
                dissipated,
                residual: (dissipated > self.cfg.identity_floor).then(|| (drop - dissipated).abs() / dissipated),
            });
            traj.samples.push(sample);
        }
        let final_state = self.grid(f);
        Ok(RunOutput {
            trajectory: traj,
            identity,
            final_state,
            snapshots,
            equilibrium: eq,
            steps,
            rhs_evaluations: self.rhs_evaluations,
            max_stages_used: max_stages,
            rejected_steps: self.rejected,
            spectral_radius: self.rho,
        })
    }
}

/// One step of the configured size from `f`.
pub fn step(f: &GridDistribution, cfg: &SolverConfig) -> Result<GridDistribution> {
    let mut solver = Solver::new(cfg.clone())?;
    let y0 = solver.restrict(f.values());
    solver.check_state(&y0, 0.0)?;
    let base = solver.rhs(&y0);
    let rho = 1.2 * solver.estimate_stiffness(&y0, &base.q).max(1e-12);
    let (dt, s) = match cfg.dt {
        DtPolicy::Fixed { dt } => (dt, stages_for(dt * rho, cfg.max_stages)),
        DtPolicy::Adaptive { dt_max, .. } => {
            let dt = dt_max.min(1.0 / rho);
            (dt, stages_for(dt * rho, cfg.max_stages))
        }
        DtPolicy::Cfl { factor } => (factor * rkc_beta(2) / rho, Some(2)),
    };
    let s = s.ok_or_else(|| Error::Instability {
        time: 0.0,
        reason: format!("dt = {dt} needs more than {} stages", cfg.max_stages),
    })?;
    let y = solver.rkc_step(&y0, &base, dt, s);
    solver.check_state(&y, dt)?;
    Ok(solver.grid(y))
}

/// Run `f0` under `cfg`.
pub fn run(f0: &GridDistribution, cfg: &SolverConfig) -> std::result::Result<RunOutput, Box<SolverFailure>> {
    let mut solver = match Solver::new(cfg.clone()) {
        Ok(s) => s,
        Err(error) => {
            return Err(Box::new(SolverFailure {
                error,
                last_good: f0.clone(),
                partial: Trajectory::default(),
            }))
        }
    };
    solver.run(f0)
}
