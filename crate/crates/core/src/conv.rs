//! Zero-padded linear convolution on an N³ cell-centre lattice.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use rayon::prelude::*;
use std::sync::Arc;

/// Plans for a (2N)³ transform. `transform(kernel)` once, then
/// `convolve` computes out_k = Σ_l K(k − l) in_l over the N³ lattice.
pub struct Convolver {
    n: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Kernel in transform space.
#[derive(Clone)]
pub struct KernelHat(pub(crate) Vec<Complex64>);

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Convolver {{ n: {}, m: {} }}", self.n, self.m)
    }
}

impl Convolver {
    pub fn new(n: usize) -> Self {
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        Self {
            n,
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 3-D transform of a full (2N)³ array.
    fn fft3(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        for axis in [2, 1, 0] {
            self.lines(data, plan, axis, |_, _| true);
        }
    }

    /// Forward transform of data supported on the N³ corner: lines that
    /// are still identically zero are skipped.
    fn fft3_padded_forward(&self, data: &mut [Complex64]) {
        let n = self.n;
        self.lines(data, &self.forward, 2, |i, j| i < n && j < n);
        self.lines(data, &self.forward, 1, |i, _| i < n);
        self.lines(data, &self.forward, 0, |_, _| true);
    }

    /// Inverse transform where only the N³ corner of the result is read.
    fn fft3_padded_inverse(&self, data: &mut [Complex64]) {
        let n = self.n;
        self.lines(data, &self.inverse, 0, |_, _| true);
        self.lines(data, &self.inverse, 1, |i, _| i < n);
        self.lines(data, &self.inverse, 2, |i, j| i < n && j < n);
    }

    /// 1-D transforms along `axis` for the lines whose two remaining
    /// indices (in increasing axis order) satisfy `keep`.
    fn lines<P: Fn(usize, usize) -> bool>(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>, axis: usize, keep: P) {
        const BATCH: usize = 64;
        let m = self.m;
        let (stride, sa, sb) = match axis {
            0 => (m * m, m, 1),
            1 => (m, m * m, 1),
            _ => (1, m * m, m),
        };
        let bases: Vec<usize> = (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .filter(|&(a, b)| keep(a, b))
            .map(|(a, b)| a * sa + b * sb)
            .collect();
        let mut buf = vec![Complex64::default(); bases.len() * m];
        for (l, &base) in bases.iter().enumerate() {
            for t in 0..m {
                buf[l * m + t] = data[base + t * stride];
            }
        }
        buf.par_chunks_mut(BATCH * m).for_each(|chunk| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(chunk, &mut scratch);
        });
        for (l, &base) in bases.iter().enumerate() {
            for t in 0..m {
                data[base + t * stride] = buf[l * m + t];
            }
        }
    }

    /// Transform the kernel sampled at integer offsets d ∈ (−N, N)³;
    /// `kernel(di, dj, dk)` receives the signed offsets.
    pub fn transform<K: Fn(i64, i64, i64) -> f64>(&self, kernel: K) -> KernelHat {
        let (n, m) = (self.n as i64, self.m);
        let mut data = vec![Complex64::default(); m * m * m];
        let wrap = |d: i64| d.rem_euclid(m as i64) as usize;
        for di in -(n - 1)..n {
            for dj in -(n - 1)..n {
                for dk in -(n - 1)..n {
                    data[(wrap(di) * m + wrap(dj)) * m + wrap(dk)] = Complex64::new(kernel(di, dj, dk), 0.0);
                }
            }
        }
        self.fft3(&mut data, &self.forward);
        KernelHat(data)
    }

    fn embed(&self, re: &[f64], im: Option<&[f64]>) -> Vec<Complex64> {
        let (n, m) = (self.n, self.m);
        assert_eq!(re.len(), n * n * n);
        let mut data = vec![Complex64::default(); m * m * m];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let src = (i * n + j) * n + k;
                    data[(i * m + j) * m + k] = Complex64::new(re[src], im.map_or(0.0, |x| x[src]));
                }
            }
        }
        data
    }

    fn restrict(&self, data: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        let scale = 1.0 / (m * m * m) as f64;
        let mut re = Vec::with_capacity(n * n * n);
        let mut im = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let z = data[(i * m + j) * m + k];
                    re.push(z.re * scale);
                    im.push(z.im * scale);
                }
            }
        }
        (re, im)
    }

    /// Transform a field given on the N³ lattice (x-major).
    pub fn transform_field(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data = self.embed(field, None);
        self.fft3_padded_forward(&mut data);
        data
    }

    /// Transforms of two real fields from one complex transform.
    pub fn transform_field_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let m = self.m;
        let mut z = self.embed(a, Some(b));
        self.fft3_padded_forward(&mut z);
        let neg = |i: usize| if i == 0 { 0 } else { m - i };
        let mut x = vec![Complex64::default(); z.len()];
        let mut y = vec![Complex64::default(); z.len()];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = (i * m + j) * m + k;
                    let c = z[(neg(i) * m + neg(j)) * m + neg(k)].conj();
                    x[p] = 0.5 * (z[p] + c);
                    y[p] = Complex64::new(0.0, -0.5) * (z[p] - c);
                }
            }
        }
        (x, y)
    }

    /// Pointwise kernel·field in transform space.
    pub fn product(&self, kernel: &KernelHat, field_hat: &[Complex64]) -> Vec<Complex64> {
        kernel.0.iter().zip(field_hat).map(|(a, b)| a * b).collect()
    }

    /// Accumulate kernel·field into `acc`.
    pub fn accumulate(&self, acc: &mut [Complex64], kernel: &KernelHat, field_hat: &[Complex64]) {
        for ((a, k), f) in acc.iter_mut().zip(&kernel.0).zip(field_hat) {
            *a += k * f;
        }
    }

    /// Inverse of the spectrum `build(p)`, restricted to the N³ lattice;
    /// real and imaginary parts are returned separately.
    pub fn inverse_with<F: Fn(usize) -> Complex64 + Sync>(&self, build: F) -> (Vec<f64>, Vec<f64>) {
        let mut data: Vec<Complex64> = (0..self.m * self.m * self.m).map(build).collect();
        self.fft3_padded_inverse(&mut data);
        self.restrict(&data)
    }

    /// Inverse of two spectra of real fields, restricted to the N³ lattice.
    pub fn inverse_real_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let mut data: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + i * y).collect();
        self.fft3_padded_inverse(&mut data);
        self.restrict(&data)
    }

    pub fn inverse_real(&self, a: &[Complex64]) -> Vec<f64> {
        let mut data = a.to_vec();
        self.fft3_padded_inverse(&mut data);
        self.restrict(&data).0
    }

    /// Inverse of the product kernel·field, restricted to the N³ lattice.
    pub fn apply(&self, kernel: &KernelHat, field_hat: &[Complex64]) -> Vec<f64> {
        self.inverse_real(&self.product(kernel, field_hat))
    }

    pub fn convolve(&self, kernel: &KernelHat, field: &[f64]) -> Vec<f64> {
        self.apply(kernel, &self.transform_field(field))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum() {
        let n = 5;
        let c = Convolver::new(n);
        let kernel = |a: i64, b: i64, d: i64| ((a * a + 2 * b * b + 3 * d * d) as f64).sqrt() + 0.1 * a as f64;
        let hat = c.transform(kernel);
        let field: Vec<f64> = (0..n * n * n).map(|i| ((i * 7919) % 13) as f64 - 4.0).collect();
        let out = c.convolve(&hat, &field);
        let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        for (i, j, k) in [(0, 0, 0), (2, 3, 4), (4, 4, 0)] {
            let mut direct = 0.0;
            for a in 0..n {
                for b in 0..n {
                    for d in 0..n {
                        direct += kernel(i as i64 - a as i64, j as i64 - b as i64, k as i64 - d as i64)
                            * field[idx(a, b, d)];
                    }
                }
            }
            assert!((out[idx(i, j, k)] - direct).abs() < 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn paired_transforms_match_single() {
        let n = 4;
        let c = Convolver::new(n);
        let kernel = c.transform(|a, b, d| 1.0 / (1.0 + (a * a + b * b + d * d) as f64));
        let f: Vec<f64> = (0..n * n * n).map(|i| (i as f64 * 0.37).sin()).collect();
        let g: Vec<f64> = (0..n * n * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let (fh, gh) = c.transform_field_pair(&f, &g);
        let (cf, cg) = c.inverse_real_pair(&c.product(&kernel, &fh), &c.product(&kernel, &gh));
        let (df, dg) = (c.convolve(&kernel, &f), c.convolve(&kernel, &g));
        for k in 0..n * n * n {
            assert!((cf[k] - df[k]).abs() < 1e-12 && (cg[k] - dg[k]).abs() < 1e-12);
        }
    }
}
