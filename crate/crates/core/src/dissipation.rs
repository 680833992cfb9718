//! Entropy dissipation of the Landau and Landau-Fermi-Dirac operators in the
//! projection form and the pair form, the pair quantities q_ij and r_ij,
//! and the pointwise integral identities behind the main estimates.
//!
//! Axis indices are 0-based; the pair sum runs over (i, i+1 mod 3).

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::functionals::{k_constant, s_gamma, FunctionalOptions};
use crate::quad::{check_gamma, CompensatedSum, Vec3};

/// Π(z) = I − z zᵀ/|z|², the projection onto z^⊥.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionKernel {
    pub z: Vec3,
}

impl ProjectionKernel {
    pub fn new(z: Vec3) -> Self {
        Self { z }
    }

    /// Π(z); the zero matrix at z = 0.
    pub fn matrix(&self) -> Matrix3<f64> {
        let z = nalgebra::Vector3::from(self.z);
        let n2 = z.norm_squared();
        if n2 == 0.0 {
            return Matrix3::zeros();
        }
        Matrix3::identity() - z * z.transpose() / n2
    }

    /// |z|^{2+γ} Π(z).
    pub fn landau_kernel(&self, gamma: f64) -> Matrix3<f64> {
        let n2 = norm2(&self.z);
        self.matrix() * n2 * n2.powf(0.5 * gamma)
    }
}

#[inline]
fn norm2(v: &Vec3) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// |z|^γ from |z|².
#[inline]
fn power(r2: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else if gamma == 1.0 {
        r2.sqrt()
    } else if gamma == 0.5 {
        r2.sqrt().sqrt()
    } else {
        r2.powf(0.5 * gamma)
    }
}

#[inline]
pub fn next_axis(i: usize) -> usize {
    (i + 1) % 3
}

fn check_axes(i: usize, j: usize) -> Result<()> {
    if i > 2 || j > 2 {
        return Err(Error::Precondition(format!("axis indices ({i}, {j}) must be in 0..3")));
    }
    Ok(())
}

/// (v_i − w_i)(g_j(v) − g_j(w)) − (v_j − w_j)(g_i(v) − g_i(w)).
#[inline]
pub fn pair_bracket(i: usize, j: usize, v: &Vec3, w: &Vec3, gv: &Vec3, gw: &Vec3) -> f64 {
    (v[i] - w[i]) * (gv[j] - gw[j]) - (v[j] - w[j]) * (gv[i] - gw[i])
}

fn positive_score(f: &Distribution, v: &Vec3) -> Result<Vec3> {
    if !(f.density(v) > 0.0) {
        return Err(Error::Evaluation {
            at: *v,
            reason: "zero density".into(),
        });
    }
    f.log_gradient(v)
}

/// ∇f/(f(1 − εf)) at v, or a Pauli error.
pub fn lfd_score(f: &Distribution, eps: f64, v: &Vec3) -> Result<Vec3> {
    let g = positive_score(f, v)?;
    let x = eps * f.density(v);
    if !(x < 1.0) {
        return Err(Error::Pauli { at: *v, value: x });
    }
    Ok(g.map(|c| c / (1.0 - x)))
}

/// q_ij(v, w) built from the scores ∇f/f.
pub fn q_ij(f: &Distribution, i: usize, j: usize, v: &Vec3, w: &Vec3) -> Result<f64> {
    check_axes(i, j)?;
    Ok(pair_bracket(i, j, v, w, &positive_score(f, v)?, &positive_score(f, w)?))
}

/// r_ij(v, w) built from ∇f/(f(1 − εf)).
pub fn r_ij(f: &Distribution, eps: f64, i: usize, j: usize, v: &Vec3, w: &Vec3) -> Result<f64> {
    check_axes(i, j)?;
    Ok(pair_bracket(i, j, v, w, &lfd_score(f, eps, v)?, &lfd_score(f, eps, w)?))
}

/// Nodes, weights, pair weights and scores on which double integrals are
/// evaluated: the tensor rule for analytic families, interior cells (with
/// central-difference scores) for grids.
#[derive(Debug, Clone)]
pub struct ScoreSample {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// f, or f(1 − εf) in the Fermi-Dirac case
    pub density: Vec<f64>,
    /// f
    pub plain: Vec<f64>,
    /// ∇f/f, or ∇f/(f(1 − εf))
    pub score: Vec<Vec3>,
}

impl ScoreSample {
    pub fn classical(f: &Distribution, opts: &FunctionalOptions) -> Result<Self> {
        Self::build(f, 0.0, opts)
    }

    pub fn fermi_dirac(f: &Distribution, eps: f64, opts: &FunctionalOptions) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Precondition(format!("epsilon = {eps} must be nonnegative")));
        }
        Self::build(f, eps, opts)
    }

    fn build(f: &Distribution, eps: f64, opts: &FunctionalOptions) -> Result<Self> {
        let mut out = Self {
            nodes: Vec::new(),
            weights: Vec::new(),
            density: Vec::new(),
            plain: Vec::new(),
            score: Vec::new(),
        };
        // `g` is ∇f/f; `exact` overrides the Fermi-Dirac score when given
        let mut push = |v: Vec3, w: f64, fv: f64, g: Vec3, exact: Option<Vec3>| -> Result<()> {
            let x = eps * fv;
            if !(x < 1.0) {
                return Err(Error::Pauli { at: v, value: x });
            }
            out.nodes.push(v);
            out.weights.push(w);
            out.density.push(fv * (1.0 - x));
            out.plain.push(fv);
            out.score.push(exact.unwrap_or_else(|| g.map(|c| c / (1.0 - x))));
            Ok(())
        };
        match f {
            Distribution::Grid(grid) => {
                let n = grid.nodes_per_axis();
                let h3 = grid.spacing().powi(3);
                for i in 1..n - 1 {
                    for j in 1..n - 1 {
                        for k in 1..n - 1 {
                            let fv = grid.values()[grid.index(i, j, k)];
                            if fv == 0.0 {
                                continue;
                            }
                            let v = [grid.coordinate(i), grid.coordinate(j), grid.coordinate(k)];
                            if eps == 0.0 {
                                push(v, h3, fv, grid.log_gradient_at([i, j, k])?, None)?;
                            } else {
                                push(v, h3, fv, [0.0; 3], Some(grid_lfd_score(grid, eps, [i, j, k])?))?;
                            }
                        }
                    }
                }
            }
            _ => {
                let rule = opts.rule(f);
                for (v, w) in rule.nodes().iter().zip(rule.weights()) {
                    let fv = f.density(v);
                    if fv == 0.0 {
                        continue;
                    }
                    push(*v, *w, fv, f.log_gradient(v)?, None)?;
                }
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫ |g + c v|² f over the sample.
    pub fn shifted_score_moment(&self, c: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for k in 0..self.len() {
            let (v, g) = (&self.nodes[k], &self.score[k]);
            let d = [g[0] + c * v[0], g[1] + c * v[1], g[2] + c * v[2]];
            acc.add(self.weights[k] * self.plain[k] * norm2(&d));
        }
        acc.value()
    }
}

/// Central difference of ln f − ln(1 − εf) on a grid.
fn grid_lfd_score(grid: &crate::dist::GridDistribution, eps: f64, cell: [usize; 3]) -> Result<Vec3> {
    let h = grid.spacing();
    let at = [grid.coordinate(cell[0]), grid.coordinate(cell[1]), grid.coordinate(cell[2])];
    let potential = |c: [usize; 3]| -> Result<f64> {
        let fv = grid.values()[grid.index(c[0], c[1], c[2])];
        let x = eps * fv;
        if fv <= 0.0 {
            return Err(Error::Evaluation {
                at,
                reason: "zero density in difference stencil".into(),
            });
        }
        if !(x < 1.0) {
            return Err(Error::Pauli { at, value: x });
        }
        Ok(fv.ln() - (-x).ln_1p())
    };
    let mut g = [0.0; 3];
    for d in 0..3 {
        let (mut lo, mut hi) = (cell, cell);
        lo[d] -= 1;
        hi[d] += 1;
        g[d] = (potential(hi)? - potential(lo)?) / (2.0 * h);
    }
    Ok(g)
}

/// Both forms of ½ ∫∫ ρ(v) ρ(w) |v − w|^{2+γ} Π(v − w) dg · dg with
/// dg = g(v) − g(w): (projection form, pair form).
fn both_forms(s: &ScoreSample, gamma: f64) -> (f64, f64) {
    let m = s.len();
    let rows: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|k| {
            let v = s.nodes[k];
            let gv = s.score[k];
            let mut pi = CompensatedSum::new();
            let mut q = CompensatedSum::new();
            for l in k + 1..m {
                let w = &s.nodes[l];
                let gw = &s.score[l];
                let z = [v[0] - w[0], v[1] - w[1], v[2] - w[2]];
                let dg = [gv[0] - gw[0], gv[1] - gw[1], gv[2] - gw[2]];
                let z2 = norm2(&z);
                let zg = z[0] * dg[0] + z[1] * dg[1] + z[2] * dg[2];
                let c = s.weights[l] * s.density[l] * power(z2, gamma);
                pi.add(c * (z2 * norm2(&dg) - zg * zg));
                let q01 = z[0] * dg[1] - z[1] * dg[0];
                let q12 = z[1] * dg[2] - z[2] * dg[1];
                let q20 = z[2] * dg[0] - z[0] * dg[2];
                q.add(c * (q01 * q01 + q12 * q12 + q20 * q20));
            }
            let wk = s.weights[k] * s.density[k];
            (wk * pi.value(), wk * q.value())
        })
        .collect();
    let mut pi = CompensatedSum::new();
    let mut q = CompensatedSum::new();
    for (a, b) in rows {
        pi.add(a);
        q.add(b);
    }
    // ½ over ordered pairs = sum over unordered pairs
    (pi.value(), q.value())
}

/// D_γ(f) and its pair-form twin in one pass.
pub fn dissipation_forms(f: &Distribution, gamma: f64, opts: &FunctionalOptions) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    Ok(both_forms(&ScoreSample::classical(f, opts)?, gamma))
}

/// D_γ(f) from the projection kernel.
pub fn dissipation_pi_form(f: &Distribution, gamma: f64, opts: &FunctionalOptions) -> Result<f64> {
    Ok(dissipation_forms(f, gamma, opts)?.0)
}

/// D_γ(f) = ½ Σ_i ∫∫ f f |v − w|^γ q_{i,i+1}².
pub fn dissipation_q_form(f: &Distribution, gamma: f64, opts: &FunctionalOptions) -> Result<f64> {
    Ok(dissipation_forms(f, gamma, opts)?.1)
}

/// D_{γ,LFD}(f) = ½ Σ_i ∫∫ f(1−εf) f(1−εf) |v − w|^γ r_{i,i+1}².
pub fn dissipation_lfd(f: &Distribution, gamma: f64, eps: f64, opts: &FunctionalOptions) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(both_forms(&ScoreSample::fermi_dirac(f, eps, opts)?, gamma).1)
}

/// D on a prepared sample (used by the solver monitors and sweeps).
pub fn dissipation_on_sample(s: &ScoreSample, gamma: f64) -> (f64, f64) {
    both_forms(s, gamma)
}

/// Residuals of the two pointwise identities at v.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrinResiduals {
    pub res1: f64,
    pub res2: f64,
}

/// Tolerance on (mass, momentum, energy) and off-diagonal pressure for
/// inputs of the identity checks.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

fn check_normalized(f: &Distribution, opts: &FunctionalOptions) -> Result<crate::dist::MomentSummary> {
    let m = f.moments(&opts.rule(f))?;
    let p = m.pressure;
    let off = p[(0, 1)].abs().max(p[(0, 2)].abs()).max(p[(1, 2)].abs());
    if m.normalization_defect() > NORMALIZATION_TOLERANCE || off > NORMALIZATION_TOLERANCE {
        return Err(Error::Precondition(format!(
            "identities need a normalized, diagonal state (defect {:.2e}, off-diagonal {:.2e})",
            m.normalization_defect(),
            off
        )));
    }
    Ok(m)
}

fn identity_sums(s: &ScoreSample, w_weight: &[f64], i: usize, j: usize, v: &Vec3, gv: &Vec3) -> (f64, f64) {
    let mut a = CompensatedSum::new();
    let mut b = CompensatedSum::new();
    for l in 0..s.len() {
        let w = &s.nodes[l];
        let q = pair_bracket(i, j, v, w, gv, &s.score[l]);
        let c = s.weights[l] * w_weight[l] * q;
        a.add(c);
        b.add(c * w[i]);
    }
    (a.value(), b.value())
}

fn score_at(f: &Distribution, eps: f64, v: &Vec3) -> Result<Vec3> {
    match f {
        Distribution::Grid(g) => {
            let cell = g.cell_of(v)?;
            if eps == 0.0 {
                g.log_gradient_at(cell)
            } else {
                grid_lfd_score(g, eps, cell)
            }
        }
        _ if eps == 0.0 => positive_score(f, v),
        _ => lfd_score(f, eps, v),
    }
}

/// For grids, v is replaced by the centre of its cell.
fn snap(f: &Distribution, v: &Vec3) -> Result<Vec3> {
    match f {
        Distribution::Grid(g) => {
            let c = g.cell_of(v)?;
            Ok([g.coordinate(c[0]), g.coordinate(c[1]), g.coordinate(c[2])])
        }
        _ => Ok(*v),
    }
}

/// res1 = |v_i g_j − v_j g_i − ∫ f(w) q_ij(v, w) dw|,
/// res2 = |I_i g_j + v_j + ∫ w_i f(w) q_ij(v, w) dw|, g = ∇f/f at v.
pub fn identity_prin_residuals(
    f: &Distribution,
    i: usize,
    j: usize,
    v: &Vec3,
    opts: &FunctionalOptions,
) -> Result<PrinResiduals> {
    check_axes(i, j)?;
    let m = check_normalized(f, opts)?;
    let v = snap(f, v)?;
    let s = ScoreSample::classical(f, opts)?;
    let gv = score_at(f, 0.0, &v)?;
    let (a, b) = identity_sums(&s, &s.density, i, j, &v, &gv);
    let ii = m.pressure[(i, i)];
    Ok(PrinResiduals {
        res1: (v[i] * gv[j] - v[j] * gv[i] - a).abs(),
        res2: (ii * gv[j] + v[j] + b).abs(),
    })
}

/// Fermi-Dirac analogues with G = ∇f/(f(1 − εf)):
/// res1 = |v_i G_j − v_j G_i − ∫ f r_ij|,
/// res2 = |I_i G_j − K v_j + (1/ε)∫ ln(1 − εf) w_j + ∫ w_i f r_ij|.
pub fn identity_prin_lfd_residuals(
    f: &Distribution,
    eps: f64,
    i: usize,
    j: usize,
    v: &Vec3,
    opts: &FunctionalOptions,
) -> Result<PrinResiduals> {
    check_axes(i, j)?;
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("epsilon = {eps} must be positive")));
    }
    let m = check_normalized(f, opts)?;
    let v = snap(f, v)?;
    let s = ScoreSample::fermi_dirac(f, eps, opts)?;
    // r_ij is integrated against f itself, not f(1 − εf)
    let gv = score_at(f, eps, &v)?;
    let (a, b) = identity_sums(&s, &s.plain, i, j, &v, &gv);
    let (k, log_moment) = match f {
        Distribution::Grid(g) => {
            let h3 = g.spacing().powi(3);
            let mut k = CompensatedSum::new();
            let mut lm = CompensatedSum::new();
            for (idx, fv) in g.values().iter().enumerate() {
                let l = (-eps * fv).ln_1p() / eps;
                k.add(h3 * l);
                lm.add(h3 * l * g.node(idx)[j]);
            }
            (k.value(), lm.value())
        }
        _ => {
            let rule = opts.rule(f);
            let mut lm = CompensatedSum::new();
            for (w, wt) in rule.nodes().iter().zip(rule.weights()) {
                lm.add(wt * (-eps * f.density(w)).ln_1p() / eps * w[j]);
            }
            (k_constant(f, eps, opts)?, lm.value())
        }
    };
    let ii = m.pressure[(i, i)];
    Ok(PrinResiduals {
        res1: (v[i] * gv[j] - v[j] * gv[i] - a).abs(),
        res2: (ii * gv[j] - k * v[j] + log_moment + b).abs(),
    })
}

/// One (i, j) line of the temperature-gap check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapLine {
    pub i: usize,
    pub j: usize,
    /// |I_i − I_j|
    pub lhs: f64,
    /// √(2/3) (κ₀⁻¹ D)^{1/2} s_γ^{1/2}
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureGapReport {
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub temperatures: Vec3,
    pub dissipation: f64,
    pub s_gamma: f64,
    /// κ₀ (1 in the classical case)
    pub kappa0: f64,
    pub lines: Vec<GapLine>,
    /// κ₀⁻¹ D s_γ
    pub gate: f64,
    pub gate_passes: bool,
    /// min_i I_i ≥ ½ whenever the gate passes
    pub implication_holds: bool,
}

impl TemperatureGapReport {
    pub fn all_hold(&self) -> bool {
        self.lines.iter().all(|l| l.holds) && self.implication_holds
    }
}

pub const GATE: f64 = 27.0 / 32.0;

/// |I_j − I_i| ≤ √(2/3) D^{1/2} s_γ^{1/2} on all pairs, the gate
/// D s_γ ≤ 27/32 and its consequence I_i ≥ ½. With ε, D is D_{γ,LFD} and
/// κ₀⁻¹ multiplies D.
pub fn temperature_gap_bound_check(
    f: &Distribution,
    gamma: f64,
    eps: Option<f64>,
    opts: &FunctionalOptions,
) -> Result<TemperatureGapReport> {
    let m = check_normalized(f, opts)?;
    let t = [m.pressure[(0, 0)], m.pressure[(1, 1)], m.pressure[(2, 2)]];
    let (d, kappa0) = match eps {
        Some(e) if e > 0.0 => (
            dissipation_lfd(f, gamma, e, opts)?,
            1.0 - e * crate::functionals::sup_density(f, opts),
        ),
        _ => (dissipation_q_form(f, gamma, opts)?, 1.0),
    };
    let s = s_gamma(f, gamma, opts)?;
    let tol = |rhs: f64| 1e-8 * (1.0 + rhs);
    let lines: Vec<GapLine> = [(0usize, 1usize), (0, 2), (1, 2)]
        .into_iter()
        .map(|(i, j)| {
            let lhs = (t[i] - t[j]).abs();
            let rhs = (2.0 / 3.0 * d / kappa0 * s).sqrt();
            GapLine {
                i,
                j,
                lhs,
                rhs,
                holds: lhs <= rhs + tol(rhs),
            }
        })
        .collect();
    let gate = d * s / kappa0;
    let gate_passes = gate <= GATE;
    let min_t = t.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(TemperatureGapReport {
        gamma,
        epsilon: eps,
        temperatures: t,
        dissipation: d,
        s_gamma: s,
        kappa0,
        lines,
        gate,
        gate_passes,
        implication_holds: !gate_passes || min_t >= 0.5,
    })
}
