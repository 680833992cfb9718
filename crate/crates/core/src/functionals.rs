//! Scalar functionals of a velocity distribution: temperatures, weighted
//! norms, Fisher information, entropies and the singular-kernel moments
//! s_γ, σ_γ, Σ_γ, B_γ, J_γ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::conv::Convolver;
use crate::dist::{fermi_dirac_equilibrium, Distribution, GridDistribution};
use crate::error::{Error, Result};
use crate::quad::{
    check_gamma, default_candidates, dist2, inverse_power, sup_over_candidates, CompensatedSum, DiagonalRule,
    KernelSplit, QuadratureRule, SingularKernelPolicy, SphericalRule, SupEstimate, Vec3,
};

/// ∫ M ln M for the standard Maxwellian.
pub fn maxwellian_neg_entropy() -> f64 {
    -1.5 * (1.0 + (2.0 * PI).ln())
}

/// Knobs shared by all functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalOptions {
    /// Tensor Gauss-Hermite nodes per axis for single integrals.
    pub nodes: usize,
    /// Outer nodes per axis for double integrals over analytic families.
    pub pair_nodes: usize,
    /// Coincident-node rule for grid double integrals.
    pub diagonal: DiagonalRule,
    /// Candidate points for the suprema in σ_γ and J_γ.
    pub candidates: Vec<Vec3>,
    /// Radial, polar and azimuthal nodes of the near-field rule.
    pub spherical: (usize, usize, usize),
    /// Angles in the half circle used for the infimum in B_γ.
    pub angles: usize,
}

impl Default for FunctionalOptions {
    fn default() -> Self {
        Self {
            nodes: crate::dist::DEFAULT_NODES,
            pair_nodes: 16,
            diagonal: DiagonalRule::ExactCellAverage,
            candidates: default_candidates(),
            spherical: (24, 16, 24),
            angles: 256,
        }
    }
}

impl FunctionalOptions {
    pub fn rule(&self, f: &Distribution) -> QuadratureRule {
        f.rule_with_nodes(self.nodes)
    }
}

fn integrate<G: Fn(&Vec3, f64) -> f64>(f: &Distribution, rule: &QuadratureRule, g: G) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (index, (v, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let fv = f.density(v);
        if fv == 0.0 {
            continue;
        }
        let value = g(v, fv);
        if !value.is_finite() {
            return Err(Error::NonFinite { index, node: *v });
        }
        acc.add(w * value);
    }
    Ok(acc.value())
}

#[inline]
fn norm2(v: &Vec3) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// I_i = ∫ f v_i².
pub fn directional_temperatures(f: &Distribution, opts: &FunctionalOptions) -> Result<Vec3> {
    let p = f.moments(&opts.rule(f))?.pressure;
    Ok([p[(0, 0)], p[(1, 1)], p[(2, 2)]])
}

/// (∫ (1 + |v|²)^{pq/2} |f|^p)^{1/p}.
pub fn lpq_norm(f: &Distribution, p: f64, q: f64, opts: &FunctionalOptions) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) || !q.is_finite() {
        return Err(Error::Precondition(format!("L^p_q norm needs p ≥ 1 finite (p = {p}, q = {q})")));
    }
    let rule = opts.rule(f);
    let mut total = CompensatedSum::new();
    let mut shell = 0.0f64;
    for (idx, (v, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let fv = f.density(v);
        if fv == 0.0 {
            continue;
        }
        let c = w * (1.0 + norm2(v)).powf(0.5 * p * q) * fv.powf(p);
        if !c.is_finite() {
            return Err(Error::NonFinite { index: idx, node: *v });
        }
        total.add(c);
        if rule.on_outer_shell(idx) {
            shell += c;
        }
    }
    let total = total.value();
    if shell > 1e-6 * total {
        return Err(Error::Degenerate(format!(
            "L^{p}_{q} integral looks divergent: outer layer carries {:.2e} of the total",
            shell / total
        )));
    }
    Ok(total.powf(1.0 / p))
}

fn grid_log_gradient_sum<G: Fn(&Vec3, f64, &Vec3) -> f64>(grid: &GridDistribution, g: G) -> Result<f64> {
    let n = grid.nodes_per_axis();
    let h3 = grid.spacing().powi(3);
    let mut acc = CompensatedSum::new();
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            for k in 1..n - 1 {
                let fv = grid.values()[grid.index(i, j, k)];
                if fv == 0.0 {
                    continue;
                }
                let lg = grid.log_gradient_at([i, j, k])?;
                let v = [grid.coordinate(i), grid.coordinate(j), grid.coordinate(k)];
                acc.add(h3 * g(&v, fv, &lg));
            }
        }
    }
    Ok(acc.value())
}

fn log_gradient_integral<G: Fn(&Vec3, f64, &Vec3) -> f64>(
    f: &Distribution,
    opts: &FunctionalOptions,
    g: G,
) -> Result<f64> {
    if let Distribution::Grid(grid) = f {
        return grid_log_gradient_sum(grid, g);
    }
    let rule = opts.rule(f);
    let mut acc = CompensatedSum::new();
    for (index, (v, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let fv = f.density(v);
        if fv == 0.0 {
            continue;
        }
        let lg = f.log_gradient(v)?;
        let value = g(v, fv, &lg);
        if !value.is_finite() {
            return Err(Error::NonFinite { index, node: *v });
        }
        acc.add(w * value);
    }
    Ok(acc.value())
}

/// F(f) = ∫ |∇f|² / f.
pub fn fisher(f: &Distribution, opts: &FunctionalOptions) -> Result<f64> {
    log_gradient_integral(f, opts, |_, fv, lg| fv * norm2(lg))
}

/// ∫ |∇f/f + v|² f.
pub fn fisher_rel(f: &Distribution, opts: &FunctionalOptions) -> Result<f64> {
    log_gradient_integral(f, opts, |v, fv, lg| {
        fv * norm2(&[lg[0] + v[0], lg[1] + v[1], lg[2] + v[2]])
    })
}

/// ∫ f ln f − ∫ M ln M.
pub fn entropy_rel(f: &Distribution, opts: &FunctionalOptions) -> Result<f64> {
    Ok(integrate(f, &opts.rule(f), |_, fv| fv * fv.ln())? - maxwellian_neg_entropy())
}

/// The three pair determinants Δ_{ij} for (i, j) ∈ {(1,2), (1,3), (2,3)}.
pub fn delta_pairs(f: &Distribution, opts: &FunctionalOptions) -> Result<[f64; 3]> {
    let rule = opts.rule(f);
    let mut out = [0.0; 3];
    for (slot, (i, j)) in [(0usize, 1usize), (0, 2), (1, 2)].into_iter().enumerate() {
        let mut m = [CompensatedSum::new(); 6];
        for (index, (v, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
            let fv = f.density(v);
            if !fv.is_finite() {
                return Err(Error::NonFinite { index, node: *v });
            }
            let c = w * fv / (1.0 + norm2(v)).sqrt();
            let (a, b) = (v[i], v[j]);
            for (acc, t) in m.iter_mut().zip([1.0, a, b, a * a, a * b, b * b]) {
                acc.add(c * t);
            }
        }
        let s: Vec<f64> = m.iter().map(|x| x.value()).collect();
        let g = nalgebra::Matrix3::new(s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5]);
        out[slot] = g.determinant();
    }
    Ok(out)
}

/// Δ(f): the smallest of the three pair determinants.
pub fn delta_det(f: &Distribution, opts: &FunctionalOptions) -> Result<f64> {
    Ok(delta_pairs(f, opts)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Largest value of f found on the quadrature nodes (exact for the
/// Gaussian-type families, whose maximum sits at a known point).
pub fn sup_density(f: &Distribution, opts: &FunctionalOptions) -> f64 {
    match f {
        Distribution::FermiDirac(fd) => fd.sup_norm(),
        Distribution::Gaussian(g) => g.density(&g.mean()),
        Distribution::Grid(g) => g.values().iter().cloned().fold(0.0, f64::max),
        Distribution::Mixture(m) => {
            let peaks = m.components().iter().map(|(_, c)| f.density(&c.mean()));
            let nodes = opts.rule(f).nodes().iter().map(|v| f.density(v)).collect::<Vec<_>>();
            peaks.chain(nodes).fold(0.0, f64::max)
        }
    }
}

fn pauli_check(f: &Distribution, eps: f64, rule: &QuadratureRule) -> Result<()> {
    // Quadrature nodes can miss the peak, so the known maxima are checked too.
    let peaks: Vec<Vec3> = match f {
        Distribution::FermiDirac(fd) => vec![fd.mean],
        Distribution::Gaussian(g) => vec![g.mean()],
        Distribution::Mixture(m) => m.components().iter().map(|(_, c)| c.mean()).collect(),
        Distribution::Grid(_) => Vec::new(),
    };
    for v in peaks.iter().chain(rule.nodes()) {
        let x = eps * f.density(v);
        if !(x < 1.0) {
            return Err(Error::Pauli { at: *v, value: x });
        }
    }
    Ok(())
}

/// K = (1/ε) ∫ ln(1 − ε f).
pub fn k_constant(f: &Distribution, eps: f64, opts: &FunctionalOptions) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("K needs epsilon > 0, got {eps}")));
    }
    let rule = opts.rule(f);
    pauli_check(f, eps, &rule)?;
    Ok(integrate(f, &rule, |_, fv| (-eps * fv).ln_1p())? / eps)
}

/// S_ε(f) = −(1/ε) ∫ [ε f ln(ε f) + (1 − ε f) ln(1 − ε f)].
pub fn fermi_entropy(f: &Distribution, eps: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("S_ε needs epsilon > 0, got {eps}")));
    }
    pauli_check(f, eps, rule)?;
    Ok(-integrate(f, rule, |_, fv| {
        let x = eps * fv;
        fv * x.ln() + (1.0 - x) * (-x).ln_1p() / eps
    })?)
}

/// H(f | M_ε) = S_ε(M_ε) − S_ε(f) against the normalised equilibrium.
pub fn fermi_entropy_rel(f: &Distribution, eps: f64, opts: &FunctionalOptions) -> Result<f64> {
    let m_eps: Distribution = fermi_dirac_equilibrium(eps, 1e-13)?.to_distribution().into();
    let s_m = fermi_entropy(&m_eps, eps, &opts.rule(&m_eps))?;
    Ok(s_m - fermi_entropy(f, eps, &opts.rule(f))?)
}

/// Evaluates ∫ f(w) |v − w|^{−γ} (1, |w|²) dw at arbitrary v.
///
/// Analytic families split the kernel into a smooth far field, integrated
/// with the tensor Gauss-Hermite rule of f, and a rapidly decaying near
/// field, integrated with a spherical rule centred on v. Grids sum over
/// their own nodes.
pub struct SingularMoments<'a> {
    f: &'a Distribution,
    gamma: f64,
    rule: QuadratureRule,
    spherical: SphericalRule,
    split: Option<KernelSplit>,
    policy: SingularKernelPolicy,
}

impl<'a> SingularMoments<'a> {
    pub fn new(f: &'a Distribution, gamma: f64, opts: &FunctionalOptions) -> Result<Self> {
        check_gamma(gamma)?;
        let rule = opts.rule(f);
        let s = rule.scale().iter().cloned().fold(0.0, f64::max);
        let (nr, np, na) = opts.spherical;
        let split = (gamma > 0.0 && !f.is_grid())
            .then(|| KernelSplit::new(gamma, 1.5 * s))
            .transpose()?;
        Ok(Self {
            f,
            gamma,
            spherical: SphericalRule::new(gamma, nr, np, na)?,
            split,
            rule,
            policy: SingularKernelPolicy::new(gamma, opts.diagonal)?,
        })
    }

    pub fn at(&self, v: &Vec3) -> [f64; 2] {
        let f = self.f;
        let mut acc = [CompensatedSum::new(), CompensatedSum::new()];
        let grid_side = f.is_grid().then(|| self.rule.scale()[0]);
        for (w, wt) in self.rule.nodes().iter().zip(self.rule.weights()) {
            let fw = f.density(w);
            if fw == 0.0 {
                continue;
            }
            let r2 = dist2(v, w);
            let k = match (&self.split, grid_side) {
                _ if self.gamma == 0.0 => 1.0,
                (Some(split), _) => split.far(r2),
                (None, side) if r2 == 0.0 => self.policy.diagonal_value(*wt, side),
                (None, _) => inverse_power(r2, self.gamma),
            };
            let c = wt * fw * k;
            acc[0].add(c);
            acc[1].add(c * norm2(w));
        }
        let mut out = [acc[0].value(), acc[1].value()];
        if let Some(split) = &self.split {
            let radius = split.near_radius();
            let near0 = self
                .spherical
                .integrate_around(v, radius, |w| f.density(w) * split.near_factor(dist2(v, w)));
            let near2 = self
                .spherical
                .integrate_around(v, radius, |w| f.density(w) * split.near_factor(dist2(v, w)) * norm2(w));
            out[0] += near0;
            out[1] += near2;
        }
        out
    }
}

/// s_γ and Σ_γ from one pass over the outer variable.
pub fn pair_moments(f: &Distribution, gamma: f64, opts: &FunctionalOptions) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    if let Distribution::Grid(g) = f {
        return grid_pair_moments(g, gamma, opts.diagonal);
    }
    if gamma == 0.0 {
        let rule = opts.rule(f);
        let mass = integrate(f, &rule, |_, fv| fv)?;
        let energy = integrate(f, &rule, |v, fv| fv * norm2(v))?;
        let fourth = integrate(f, &rule, |v, fv| fv * norm2(v).powi(2))?;
        return Ok((mass * fourth, mass * energy));
    }
    let inner = SingularMoments::new(f, gamma, opts)?;
    let outer = f.rule_with_nodes(opts.pair_nodes);
    let rows: Vec<(f64, f64)> = outer
        .nodes()
        .par_iter()
        .zip(outer.weights().par_iter())
        .map(|(v, w)| {
            let fv = f.density(v);
            if fv == 0.0 {
                return (0.0, 0.0);
            }
            let [i0, i2] = inner.at(v);
            let r2 = norm2(v);
            (w * fv * r2 * r2 * i0, w * fv * i2)
        })
        .collect();
    let mut s = CompensatedSum::new();
    let mut big = CompensatedSum::new();
    for (index, (a, b)) in rows.into_iter().enumerate() {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite {
                index,
                node: outer.nodes()[index],
            });
        }
        s.add(a);
        big.add(b);
    }
    Ok((s.value(), big.value()))
}

/// Grid double sums through a zero-padded transform of the kernel.
fn grid_pair_moments(g: &GridDistribution, gamma: f64, diagonal: DiagonalRule) -> Result<(f64, f64)> {
    let n = g.nodes_per_axis();
    let h = g.spacing();
    let h3 = h * h * h;
    let policy = SingularKernelPolicy::new(gamma, diagonal)?;
    let diag = policy.diagonal_value(h3, Some(h));
    let conv = Convolver::new(n);
    let kernel = conv.transform(|a, b, c| {
        if a == 0 && b == 0 && c == 0 {
            diag
        } else {
            inverse_power(((a * a + b * b + c * c) as f64) * h * h, gamma)
        }
    });
    let f = g.values();
    let f2: Vec<f64> = (0..f.len()).map(|i| f[i] * norm2(&g.node(i))).collect();
    let i0 = conv.convolve(&kernel, f);
    let i2 = conv.convolve(&kernel, &f2);
    let mut s = CompensatedSum::new();
    let mut big = CompensatedSum::new();
    for idx in 0..f.len() {
        let r2 = norm2(&g.node(idx));
        s.add(h3 * h3 * f[idx] * r2 * r2 * i0[idx]);
        big.add(h3 * h3 * f[idx] * i2[idx]);
    }
    Ok((s.value(), big.value()))
}

/// s_γ(f) = ∫∫ f(v) f(w) |v − w|^{−γ} |v|⁴.
pub fn s_gamma(f: &Distribution, gamma: f64, opts: &FunctionalOptions) -> Result<f64> {
    Ok(pair_moments(f, gamma, opts)?.0)
}

/// Σ_γ(f) = ∫∫ f(v) f(w) |v − w|^{−γ} |w|².
#[allow(non_snake_case)]
pub fn Sigma_gamma(f: &Distribution, gamma: f64, opts: &FunctionalOptions) -> Result<f64> {
    Ok(pair_moments(f, gamma, opts)?.1)
}

fn candidates_for(f: &Distribution, opts: &FunctionalOptions) -> Result<Vec<Vec3>> {
    let mut c = opts.candidates.clone();
    c.push(f.moments(&opts.rule(f))?.mean_velocity());
    Ok(c)
}

/// σ_γ(f) = sup_v ∫ f(w) |v − w|^{−γ} |w|², over the candidate set.
pub fn sigma_gamma(f: &Distribution, gamma: f64, opts: &FunctionalOptions) -> Result<SupEstimate> {
    let inner = SingularMoments::new(f, gamma, opts)?;
    sup_over_candidates(|v| inner.at(v)[1], &candidates_for(f, opts)?)
}

/// J_γ(f) = sup_v ⟨v⟩^γ ∫ f(w) |w − v|^{−γ} (1 + |w|²), over the candidate set.
pub fn j_gamma(f: &Distribution, gamma: f64, opts: &FunctionalOptions) -> Result<SupEstimate> {
    let inner = SingularMoments::new(f, gamma, opts)?;
    sup_over_candidates(
        |v| {
            let [i0, i2] = inner.at(v);
            (1.0 + norm2(v)).powf(0.5 * gamma) * (i0 + i2)
        },
        &candidates_for(f, opts)?,
    )
}

/// B_γ with the infimum over σ ∈ S¹ taken on an angle grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BGamma {
    /// (min over pairs and grid angles)^{−1}
    pub value: f64,
    /// Grid minimum for the pairs (1,2), (1,3), (2,3).
    pub pair_minima: [f64; 3],
    /// (smallest eigenvalue of the 2×2 forms)^{−1}, the exact value the
    /// angle grid approaches from below.
    pub eigen_value: f64,
    /// Angle-grid minima overestimate the infimum, so `value` may fall
    /// short of the true B_γ.
    pub from_angle_grid: bool,
}

pub fn b_gamma(f: &Distribution, opts: &FunctionalOptions) -> Result<BGamma> {
    let rule = opts.rule(f);
    let mut pair_minima = [0.0; 3];
    let mut eig_min = f64::INFINITY;
    for (slot, (i, j)) in [(0usize, 1usize), (0, 2), (1, 2)].into_iter().enumerate() {
        let a = integrate(f, &rule, |v, fv| fv * v[i] * v[i] / (1.0 + norm2(v)))?;
        let c = integrate(f, &rule, |v, fv| fv * v[j] * v[j] / (1.0 + norm2(v)))?;
        let d = integrate(f, &rule, |v, fv| fv * v[i] * v[j] / (1.0 + norm2(v)))?;
        let mut best = f64::INFINITY;
        for k in 0..opts.angles {
            let t = PI * k as f64 / opts.angles as f64;
            let (s1, s2) = (t.cos(), t.sin());
            best = best.min(s1 * s1 * a - 2.0 * s1 * s2 * d + s2 * s2 * c);
        }
        pair_minima[slot] = best;
        let half_tr = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + d * d).sqrt();
        eig_min = eig_min.min(half_tr - disc);
    }
    let grid_min = pair_minima.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(BGamma {
        value: 1.0 / grid_min,
        pair_minima,
        eigen_value: 1.0 / eig_min,
        from_angle_grid: true,
    })
}

/// Landau-Fermi-Dirac quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfdBlock {
    pub epsilon: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub s_eps: f64,
    pub entropy_rel_eps: f64,
    pub kappa0_observed: f64,
}

pub fn lfd_block(f: &Distribution, eps: f64, opts: &FunctionalOptions) -> Result<LfdBlock> {
    Ok(LfdBlock {
        epsilon: eps,
        k: k_constant(f, eps, opts)?,
        s_eps: fermi_entropy(f, eps, &opts.rule(f))?,
        entropy_rel_eps: fermi_entropy_rel(f, eps, opts)?,
        kappa0_observed: 1.0 - eps * sup_density(f, opts),
    })
}

/// Every functional at one γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub gamma: f64,
    pub temperatures: Vec3,
    pub fisher: f64,
    pub fisher_rel: f64,
    pub s_gamma: f64,
    pub sigma_gamma: f64,
    #[serde(rename = "Sigma_gamma")]
    pub big_sigma_gamma: f64,
    pub fourth: f64,
    pub l2: f64,
    pub l2_weighted: f64,
    pub l2q6: f64,
    pub delta: f64,
    pub entropy_rel: f64,
    pub lfd: Option<LfdBlock>,
}

impl FunctionalReport {
    pub fn compute(f: &Distribution, gamma: f64, eps: Option<f64>, opts: &FunctionalOptions) -> Result<Self> {
        check_gamma(gamma)?;
        let rule = opts.rule(f);
        let moments = f.moments(&rule)?;
        let p = moments.pressure;
        let (s, big) = pair_moments(f, gamma, opts)?;
        let lfd = match eps {
            Some(e) if e > 0.0 => Some(lfd_block(f, e, opts)?),
            _ => None,
        };
        Ok(Self {
            gamma,
            temperatures: [p[(0, 0)], p[(1, 1)], p[(2, 2)]],
            fisher: fisher(f, opts)?,
            fisher_rel: fisher_rel(f, opts)?,
            s_gamma: s,
            sigma_gamma: sigma_gamma(f, gamma, opts)?.value,
            big_sigma_gamma: big,
            fourth: moments.fourth,
            l2: lpq_norm(f, 2.0, 0.0, opts)?,
            l2_weighted: l2_weighted(f, opts)?,
            l2q6: lpq_norm(f, 2.0, 6.0, opts)?,
            delta: delta_det(f, opts)?,
            entropy_rel: entropy_rel(f, opts)?,
            lfd,
        })
    }

    pub const CSV_HEADER: [&'static str; 21] = [
        "id",
        "gamma",
        "I1",
        "I2",
        "I3",
        "fisher",
        "fisher_rel",
        "s_gamma",
        "sigma_gamma",
        "Sigma_gamma",
        "fourth",
        "l2",
        "l2_weighted",
        "l2q6",
        "delta",
        "entropy_rel",
        "epsilon",
        "K",
        "S_eps",
        "entropy_rel_eps",
        "kappa0_observed",
    ];

    /// Flat CSV row keyed by distribution id and γ.
    pub fn csv_row(&self, id: &str) -> Vec<String> {
        let fmt = |x: f64| format!("{x:.12e}");
        let mut row = vec![id.to_string(), fmt(self.gamma)];
        row.extend(self.temperatures.iter().map(|x| fmt(*x)));
        row.extend(
            [
                self.fisher,
                self.fisher_rel,
                self.s_gamma,
                self.sigma_gamma,
                self.big_sigma_gamma,
                self.fourth,
                self.l2,
                self.l2_weighted,
                self.l2q6,
                self.delta,
                self.entropy_rel,
            ]
            .map(fmt),
        );
        match &self.lfd {
            Some(b) => row.extend([b.epsilon, b.k, b.s_eps, b.entropy_rel_eps, b.kappa0_observed].map(fmt)),
            None => row.extend(std::iter::repeat(String::new()).take(5)),
        }
        row
    }
}

/// ‖|·|² f‖_{L²}.
pub fn l2_weighted(f: &Distribution, opts: &FunctionalOptions) -> Result<f64> {
    Ok(integrate(f, &opts.rule(f), |v, fv| norm2(v).powi(2) * fv * fv)?.sqrt())
}
