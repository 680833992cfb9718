//! Conditional entropy-dissipation hypothesis, its exponential envelope,
//! and checks of both against sampled (H, D) trajectories.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::bounds::{DECAY_GATE, REMARK_GATE};
use crate::error::{Error, Result};

/// D ≤ q implies D ≥ c0 H, starting from H(0) = h0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayHypothesis {
    pub q: f64,
    pub c0: f64,
    pub h0: f64,
}

impl DecayHypothesis {
    pub fn new(q: f64, c0: f64, h0: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) || !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::Precondition(format!("q = {q} and c0 = {c0} must be positive")));
        }
        if !(h0 >= 0.0 && h0.is_finite()) {
            return Err(Error::Precondition(format!("H0 = {h0} must be nonnegative")));
        }
        Ok(Self { q, c0, h0 })
    }

    /// Time after which the envelope applies.
    pub fn onset(&self) -> f64 {
        self.h0 / self.q
    }

    pub fn envelope(&self, t: f64) -> f64 {
        envelope(self, t)
    }
}

/// H0 exp(c0 H0 / q) e^{−c0 t} for t ≥ H0/q, H0 before.
pub fn envelope(hyp: &DecayHypothesis, t: f64) -> f64 {
    if t < hyp.onset() {
        hyp.h0
    } else {
        // Combine exponents so the onset value is exactly H0.
        hyp.h0 * (hyp.c0 * (hyp.onset() - t)).exp()
    }
}

/// (q, c0) from a bound on ‖f(t)‖_{L²₆} along the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub sup_l2q6: f64,
    pub c1: f64,
    /// min of the two candidate gates below.
    pub q: f64,
    pub c0: f64,
    pub q_decay_gate: f64,
    pub q_remark_gate: f64,
}

impl RateConstants {
    pub fn hypothesis(&self, h0: f64) -> Result<DecayHypothesis> {
        DecayHypothesis::new(self.q, self.c0, h0)
    }
}

/// Default log-Sobolev constant for H(f|M) ≤ ½ F_rel(f).
pub const DEFAULT_C1: f64 = 2.0;

pub fn landau_rate_constants(sup_l2q6: f64, c1: f64) -> Result<RateConstants> {
    if !(sup_l2q6 > 0.0 && sup_l2q6.is_finite()) {
        return Err(Error::Precondition(format!("sup ‖f‖_L²₆ = {sup_l2q6} must be positive")));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::Precondition(format!("c1 = {c1} must be positive")));
    }
    let w = 1.0 / (sup_l2q6 * sup_l2q6);
    Ok(RateConstants {
        sup_l2q6,
        c1,
        q: DECAY_GATE.min(REMARK_GATE) * w,
        c0: c1 * w / 200.0,
        q_decay_gate: DECAY_GATE * w,
        q_remark_gate: REMARK_GATE * w,
    })
}

/// Sampled run: H and D at increasing times, with optional monitors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub mass: f64,
    pub momentum_norm: f64,
    pub energy: f64,
    pub min_f: f64,
    #[serde(default)]
    pub dt: f64,
    #[serde(default)]
    pub l2q6: f64,
}

impl Trajectory {
    /// Synthetic trajectory from (t, H, D) triples; monitors set to a
    /// normalized state.
    pub fn from_hd(points: impl IntoIterator<Item = (f64, f64, f64)>) -> Result<Self> {
        let samples = points
            .into_iter()
            .map(|(t, h, d)| TrajectorySample {
                t,
                h,
                d,
                mass: 1.0,
                energy: 3.0,
                ..Default::default()
            })
            .collect();
        let traj = Self { samples };
        traj.validate()?;
        Ok(traj)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn h(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.h).collect()
    }

    pub fn d(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.d).collect()
    }

    /// Strictly increasing finite times, finite nonnegative H and D.
    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.samples.iter().enumerate() {
            let fields = [s.t, s.h, s.d, s.mass, s.momentum_norm, s.energy, s.min_f, s.dt, s.l2q6];
            if fields.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("trajectory row {k} has a non-finite entry")));
            }
            if s.h < 0.0 || s.d < 0.0 {
                return Err(Error::Config(format!("trajectory row {k}: H and D must be nonnegative")));
            }
            if k > 0 && s.t <= self.samples[k - 1].t {
                return Err(Error::Config(format!("trajectory times must increase (row {k})")));
            }
        }
        Ok(())
    }

    /// Drop the samples before `t0` and shift time so the first kept
    /// sample sits at t = 0.
    pub fn reindexed_from(&self, t0: f64) -> Trajectory {
        let kept: Vec<_> = self.samples.iter().filter(|s| s.t >= t0).copied().collect();
        let start = kept.first().map_or(0.0, |s| s.t);
        Trajectory {
            samples: kept
                .into_iter()
                .map(|mut s| {
                    s.t -= start;
                    s
                })
                .collect(),
        }
    }

    /// Largest recorded ‖f‖_{L²₆}.
    pub fn sup_l2q6(&self) -> f64 {
        self.samples.iter().map(|s| s.l2q6).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for s in &self.samples {
            wtr.serialize(s)?;
        }
        if self.samples.is_empty() {
            wtr.write_record(["t", "H", "D", "mass", "momentum_norm", "energy", "min_f", "dt", "l2q6"])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Columns t,H,D,mass,momentum_norm,energy,min_f are required; dt and
    /// l2q6 are optional.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let mut samples = Vec::new();
        for row in rdr.deserialize() {
            let s: TrajectorySample = row.map_err(|e| Error::Config(format!("trajectory CSV: {e}")))?;
            samples.push(s);
        }
        let traj = Self { samples };
        traj.validate()?;
        Ok(traj)
    }
}

/// Sample indices at which a check failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Samples with D ≤ q.
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// For each sample with D ≤ q, D ≥ c0 H − tol. Here `violation.lhs` is
/// c0 H and `rhs` is D.
pub fn verify_hypothesis(traj: &Trajectory, hyp: &DecayHypothesis, tol: f64) -> HypothesisReport {
    let mut checked = 0;
    let mut violations = Vec::new();
    for (k, s) in traj.samples.iter().enumerate() {
        if s.d <= hyp.q {
            checked += 1;
            if s.d < hyp.c0 * s.h - tol {
                violations.push(Violation {
                    index: k,
                    t: s.t,
                    lhs: hyp.c0 * s.h,
                    rhs: s.d,
                });
            }
        }
    }
    HypothesisReport { checked, violations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub onset: f64,
    /// Samples at or after the onset.
    pub checked: usize,
    pub envelope_violations: Vec<Violation>,
    /// Consecutive pairs where H grew by more than the tolerance.
    pub monotonicity_violations: Vec<Violation>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.envelope_violations.is_empty() && self.monotonicity_violations.is_empty()
    }
}

/// H(t_k) ≤ envelope(t_k) + tol for t_k ≥ H0/q, and H nonincreasing within
/// tol. Time is measured from the first sample.
pub fn verify_envelope(traj: &Trajectory, hyp: &DecayHypothesis, tol: f64) -> EnvelopeReport {
    let t0 = traj.samples.first().map_or(0.0, |s| s.t);
    let onset = hyp.onset();
    let mut checked = 0;
    let mut envelope_violations = Vec::new();
    for (k, s) in traj.samples.iter().enumerate() {
        let t = s.t - t0;
        if t >= onset {
            checked += 1;
            let e = envelope(hyp, t);
            if s.h > e + tol {
                envelope_violations.push(Violation {
                    index: k,
                    t: s.t,
                    lhs: s.h,
                    rhs: e,
                });
            }
        }
    }
    let monotonicity_violations = traj
        .samples
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].h > w[0].h + tol)
        .map(|(k, w)| Violation {
            index: k + 1,
            t: w[1].t,
            lhs: w[1].h,
            rhs: w[0].h,
        })
        .collect();
    EnvelopeReport {
        onset,
        checked,
        envelope_violations,
        monotonicity_violations,
    }
}

/// Least-squares decay rate −d ln H / dt over samples with t in `window`.
pub fn fit_rate(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.t >= window.0 && s.t <= window.1)
        .map(|s| (s.t, s.h))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Precondition(format!(
            "fit window [{}, {}] holds {} samples, need 2",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if let Some((t, h)) = pts.iter().find(|(_, h)| !(*h > 0.0)) {
        return Err(Error::Precondition(format!("H = {h} at t = {t} is not positive")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, h) in &pts {
        sxy += (t - mt) * (h.ln() - my);
        sxx += (t - mt) * (t - mt);
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("fit window has a single distinct time".into()));
    }
    Ok(-sxy / sxx)
}

/// Relative level below which H is treated as converged rounding noise.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Hypothesis and envelope checks with tolerances scaled to the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub hypothesis: DecayHypothesis,
    /// Absolute H tolerance, `rel_tol` times H0.
    pub h_tol: f64,
    pub hypothesis_check: HypothesisReport,
    pub envelope_check: EnvelopeReport,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.hypothesis_check.passed() && self.envelope_check.passed()
    }
}

/// Both checks, with H compared up to `rel_tol`·max(H0, mass) and D up to
/// c0 times that. The entropy sum rounds at the scale of the mass, so a
/// run started at equilibrium still passes.
pub fn verify_decay(traj: &Trajectory, hyp: &DecayHypothesis, rel_tol: f64) -> DecayReport {
    let mass = traj.samples.first().map_or(0.0, |s| s.mass.abs());
    let h_tol = rel_tol * hyp.h0.max(mass);
    DecayReport {
        hypothesis: *hyp,
        h_tol,
        hypothesis_check: verify_hypothesis(traj, hyp, hyp.c0 * h_tol),
        envelope_check: verify_envelope(traj, hyp, h_tol),
    }
}

/// Rate fitted over the later half of the samples with H above
/// `floor`·H(first sample).
pub fn fit_late_rate(traj: &Trajectory, floor: f64) -> Result<f64> {
    let h0 = traj
        .samples
        .first()
        .map(|s| s.h)
        .ok_or_else(|| Error::Precondition("empty trajectory".into()))?;
    let above: Vec<f64> = traj
        .samples
        .iter()
        .take_while(|s| s.h > floor * h0)
        .map(|s| s.t)
        .collect();
    if above.len() < 4 {
        return Err(Error::Precondition(format!(
            "only {} samples lie above the noise floor",
            above.len()
        )));
    }
    fit_rate(traj, (above[above.len() / 2], above[above.len() - 1]))
}
