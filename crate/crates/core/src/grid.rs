//! Periodic cube geometry, wavenumbers and the 3-D FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Chunk length for deterministic parallel reductions.
const REDUCE_CHUNK: usize = 4096;

/// Sum `f(i)` for `i in 0..len` with a summation order that does not
/// depend on the thread count.
pub fn det_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(REDUCE_CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCE_CHUNK;
            let hi = (lo + REDUCE_CHUNK).min(len);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partial.into_iter().sum()
}

/// Max of `f(i)` over `0..len` (order independent, NaN propagates).
pub fn det_max<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    (0..len)
        .into_par_iter()
        .map(|i| f(i))
        .reduce(|| 0.0, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lower: [f64; 3],
    upper: [f64; 3],
    n: [usize; 3],
}

impl GridSpec {
    pub fn new(bounds: [(f64, f64); 3], n: [usize; 3]) -> Result<Self> {
        for j in 0..3 {
            let (a, b) = bounds[j];
            if !(a.is_finite() && b.is_finite()) || a >= b {
                return Err(Error::Grid(format!("axis {j}: bounds [{a}, {b}] are degenerate")));
            }
            if n[j] < 2 || !n[j].is_multiple_of(2) {
                return Err(Error::Grid(format!("axis {j}: point count {} must be even and >= 2", n[j])));
            }
        }
        Ok(Self {
            lower: bounds.map(|b| b.0),
            upper: bounds.map(|b| b.1),
            n,
        })
    }

    /// Same interval and count on every axis.
    pub fn cube(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new([(a, b); 3], [n; 3])
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn lower(&self) -> [f64; 3] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 3] {
        self.upper
    }

    pub fn lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.upper[j] - self.lower[j])
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| (self.upper[j] - self.lower[j]) / self.n[j] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index of `(m1, m2, m3)`, with `m3` fastest.
    #[inline]
    pub fn index(&self, m: [usize; 3]) -> usize {
        (m[0] * self.n[1] + m[1]) * self.n[2] + m[2]
    }

    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let m3 = idx % self.n[2];
        let rest = idx / self.n[2];
        [rest / self.n[1], rest % self.n[1], m3]
    }

    /// Coordinates of grid point `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let h = self.spacing();
        [0, 1, 2].map(|j| self.lower[j] + m[j] as f64 * h[j])
    }

    pub fn check_len(&self, got: usize) -> Result<()> {
        if got == self.len() {
            Ok(())
        } else {
            Err(Error::SizeMismatch { expected: self.len(), got })
        }
    }

    /// Evaluate `f` at every grid point.
    pub fn sample<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn([f64; 3]) -> T + Sync,
    {
        (0..self.len()).into_par_iter().map(|i| f(self.point(i))).collect()
    }
}

/// Integer mode number for storage slot `m` on an axis of `n` points.
#[inline]
pub fn mode_number(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Per-axis DFT wavenumbers in FFT storage order, plus cached |ξ|².
#[derive(Debug, Clone)]
pub struct WavenumberLadder {
    n: [usize; 3],
    axes: [Vec<f64>; 3],
    deriv_axes: [Vec<f64>; 3],
    norm_sq: Vec<f64>,
}

impl WavenumberLadder {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.n();
        let len = grid.lengths();
        let axes: [Vec<f64>; 3] =
            [0, 1, 2].map(|j| (0..n[j]).map(|m| 2.0 * PI * mode_number(m, n[j]) as f64 / len[j]).collect());
        let deriv_axes = [0, 1, 2].map(|j| {
            let mut v = axes[j].clone();
            v[n[j] / 2] = 0.0;
            v
        });
        let norm_sq = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let m = grid.multi_index(i);
                axes[0][m[0]].powi(2) + axes[1][m[1]].powi(2) + axes[2][m[2]].powi(2)
            })
            .collect();
        Self { n, axes, deriv_axes, norm_sq }
    }

    pub fn axis(&self, j: usize) -> &[f64] {
        &self.axes[j]
    }

    #[inline]
    fn split(&self, idx: usize) -> [usize; 3] {
        let m3 = idx % self.n[2];
        let rest = idx / self.n[2];
        [rest / self.n[1], rest % self.n[1], m3]
    }

    /// Wavenumber of mode `idx` (Nyquist kept as the negative frequency).
    #[inline]
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        let m = self.split(idx);
        [self.axes[0][m[0]], self.axes[1][m[1]], self.axes[2][m[2]]]
    }

    /// Wavenumber used for first derivatives: Nyquist components zeroed.
    #[inline]
    pub fn xi_deriv(&self, idx: usize) -> [f64; 3] {
        let m = self.split(idx);
        [self.deriv_axes[0][m[0]], self.deriv_axes[1][m[1]], self.deriv_axes[2][m[2]]]
    }

    #[inline]
    pub fn norm_sq(&self, idx: usize) -> f64 {
        self.norm_sq[idx]
    }

    pub fn len(&self) -> usize {
        self.norm_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norm_sq.is_empty()
    }

    /// Integer mode numbers of storage slot `idx`.
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let m = self.split(idx);
        [0, 1, 2].map(|j| mode_number(m[j], self.n[j]))
    }
}

struct AxisPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Grid plus FFT plans and wavenumbers: everything a spectral solver needs.
pub struct Spectral {
    grid: GridSpec,
    ladder: WavenumberLadder,
    plans: [AxisPlans; 3],
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let plans = grid.n().map(|n| AxisPlans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        });
        Self { ladder: WavenumberLadder::new(&grid), grid, plans }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn ladder(&self) -> &WavenumberLadder {
        &self.ladder
    }

    /// In-place unnormalized forward transform.
    pub fn forward_in_place(&self, data: &mut [C64]) -> Result<()> {
        self.grid.check_len(data.len())?;
        self.transform(data, true);
        Ok(())
    }

    /// In-place inverse transform including the 1/N factor.
    pub fn inverse_in_place(&self, data: &mut [C64]) -> Result<()> {
        self.grid.check_len(data.len())?;
        self.transform(data, false);
        let scale = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
        Ok(())
    }

    pub fn dft(&self, field: &[C64]) -> Result<Vec<C64>> {
        let mut out = field.to_vec();
        self.forward_in_place(&mut out)?;
        Ok(out)
    }

    pub fn idft(&self, modes: &[C64]) -> Result<Vec<C64>> {
        let mut out = modes.to_vec();
        self.inverse_in_place(&mut out)?;
        Ok(out)
    }

    pub fn dft_real(&self, field: &[f64]) -> Result<Vec<C64>> {
        self.grid.check_len(field.len())?;
        let mut out: Vec<C64> = field.par_iter().map(|&x| C64::new(x, 0.0)).collect();
        self.transform(&mut out, true);
        Ok(out)
    }

    /// Inverse transform keeping only the real part.
    pub fn idft_real(&self, modes: &[C64]) -> Result<Vec<f64>> {
        Ok(self.idft(modes)?.into_par_iter().map(|z| z.re).collect())
    }

    fn transform(&self, data: &mut [C64], forward: bool) {
        let [n1, n2, n3] = self.grid.n();
        let pick = |j: usize| if forward { &self.plans[j].forward } else { &self.plans[j].inverse };

        let fft3 = pick(2);
        let scratch3 = fft3.get_inplace_scratch_len();
        data.par_chunks_mut(n3).for_each_init(
            || vec![C64::default(); scratch3],
            |scratch, line| fft3.process_with_scratch(line, scratch),
        );

        let fft2 = pick(1);
        let scratch2 = fft2.get_inplace_scratch_len();
        data.par_chunks_mut(n2 * n3).for_each_init(
            || (vec![C64::default(); scratch2], vec![C64::default(); n2]),
            |(scratch, buf), plane| {
                for m3 in 0..n3 {
                    for m2 in 0..n2 {
                        buf[m2] = plane[m2 * n3 + m3];
                    }
                    fft2.process_with_scratch(buf, scratch);
                    for m2 in 0..n2 {
                        plane[m2 * n3 + m3] = buf[m2];
                    }
                }
            },
        );

        let fft1 = pick(0);
        let scratch1 = fft1.get_inplace_scratch_len();
        let plane = n2 * n3;
        let mut columns = vec![C64::default(); data.len()];
        {
            let src: &[C64] = data;
            columns.par_chunks_mut(n1).enumerate().for_each_init(
                || vec![C64::default(); scratch1],
                |scratch, (p, col)| {
                    for m1 in 0..n1 {
                        col[m1] = src[m1 * plane + p];
                    }
                    fft1.process_with_scratch(col, scratch);
                },
            );
        }
        data.par_chunks_mut(plane).enumerate().for_each(|(m1, row)| {
            for (p, z) in row.iter_mut().enumerate() {
                *z = columns[p * n1 + m1];
            }
        });
    }

    /// Gradient of a complex field: component j is idft(iξ_j·dft(f)).
    pub fn gradient(&self, field: &[C64]) -> Result<[Vec<C64>; 3]> {
        let hat = self.dft(field)?;
        let grad = [0, 1, 2].map(|j| {
            let mut g: Vec<C64> = hat
                .par_iter()
                .enumerate()
                .map(|(i, &z)| C64::new(0.0, self.ladder.xi_deriv(i)[j]) * z)
                .collect();
            self.transform(&mut g, false);
            let scale = 1.0 / self.grid.len() as f64;
            g.par_iter_mut().for_each(|z| *z *= scale);
            g
        });
        Ok(grad)
    }

    /// Gradient of a real field; the (roundoff) imaginary part is dropped.
    pub fn gradient_real(&self, field: &[f64]) -> Result<[Vec<f64>; 3]> {
        let hat = self.dft_real(field)?;
        self.gradient_from_modes(&hat)
    }

    pub(crate) fn gradient_from_modes(&self, hat: &[C64]) -> Result<[Vec<f64>; 3]> {
        let mut out: [Vec<f64>; 3] = Default::default();
        for (j, slot) in out.iter_mut().enumerate() {
            let g: Vec<C64> = hat
                .par_iter()
                .enumerate()
                .map(|(i, &z)| C64::new(0.0, self.ladder.xi_deriv(i)[j]) * z)
                .collect();
            *slot = self.idft_real(&g)?;
        }
        Ok(out)
    }

    /// Spectral divergence of a real vector field.
    pub fn divergence_real(&self, field: [&[f64]; 3]) -> Result<Vec<f64>> {
        let mut acc = vec![C64::default(); self.grid.len()];
        for (j, comp) in field.iter().enumerate() {
            let hat = self.dft_real(comp)?;
            acc.par_iter_mut().enumerate().for_each(|(i, a)| {
                *a += C64::new(0.0, self.ladder.xi_deriv(i)[j]) * hat[i];
            });
        }
        self.idft_real(&acc)
    }

    /// Periodic solution of −Δu = f with the mean mode of `f` discarded and
    /// `u` of zero mean.
    pub fn poisson(&self, source: &[f64]) -> Result<Vec<f64>> {
        let mut hat = self.dft_real(source)?;
        self.poisson_modes(&mut hat);
        self.idft_real(&hat)
    }

    pub(crate) fn poisson_modes(&self, hat: &mut [C64]) {
        hat.par_iter_mut().enumerate().for_each(|(i, z)| {
            let k2 = self.ladder.norm_sq(i);
            *z = if k2 == 0.0 { C64::default() } else { *z / k2 };
        });
    }

    /// Discrete integral Σ f ΠΔx.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        det_sum(f.len(), |i| f[i]) * self.grid.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_points() {
        let g = GridSpec::cube(-0.5, 0.5, 32).unwrap();
        assert_eq!(g.spacing(), [1.0 / 32.0; 3]);
        assert_eq!(g.point(0), [-0.5; 3]);
        let g = GridSpec::cube(0.0, 1.0, 2).unwrap();
        assert_eq!(g.spacing(), [0.5; 3]);
        assert_eq!(g.point(g.index([1, 0, 1])), [0.5, 0.0, 0.5]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new([(0.0, 1.0); 3], [3, 4, 4]).is_err());
        assert!(GridSpec::new([(0.0, 1.0); 3], [0, 4, 4]).is_err());
        assert!(GridSpec::new([(1.0, 1.0), (0.0, 1.0), (0.0, 1.0)], [4; 3]).is_err());
    }

    #[test]
    fn ladder_layout() {
        let g = GridSpec::cube(0.0, 1.0, 4).unwrap();
        let l = WavenumberLadder::new(&g);
        let two_pi = 2.0 * PI;
        assert_eq!(l.axis(0), &[0.0, two_pi, -2.0 * two_pi, -two_pi]);
        let zeros = (0..l.len()).filter(|&i| l.norm_sq(i) == 0.0).count();
        assert_eq!(zeros, 1);
        assert_eq!(l.xi_deriv(g.index([2, 1, 0])), [0.0, two_pi, 0.0]);
    }

    #[test]
    fn constant_transforms_to_mean_mode() {
        let g = GridSpec::cube(0.0, 1.0, 2).unwrap();
        let s = Spectral::new(g);
        let c = C64::new(0.3, -1.2);
        let hat = s.dft(&vec![c; 8]).unwrap();
        assert!((hat[0] - c * 8.0).norm() < 1e-14);
        assert!(hat[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn pure_mode_is_single_coefficient() {
        let g = GridSpec::cube(0.0, 1.0, 4).unwrap();
        let s = Spectral::new(g);
        let f = g.sample(|x| C64::from_polar(1.0, 2.0 * PI * x[0]));
        let hat = s.dft(&f).unwrap();
        let target = g.index([1, 0, 0]);
        for (i, z) in hat.iter().enumerate() {
            let want = if i == target { 64.0 } else { 0.0 };
            assert!((z - want).norm() < 1e-12, "mode {i}: {z}");
        }
    }

    #[test]
    fn size_mismatch_is_reported() {
        let s = Spectral::new(GridSpec::cube(0.0, 1.0, 4).unwrap());
        assert!(matches!(s.dft(&[C64::default(); 7]), Err(Error::SizeMismatch { expected: 64, got: 7 })));
    }

    #[test]
    fn gradient_of_sine_and_constant() {
        let g = GridSpec::new([(0.0, 1.0); 3], [16, 8, 4]).unwrap();
        let s = Spectral::new(g);
        let f = g.sample(|x| (2.0 * PI * x[0]).sin());
        let grad = s.gradient_real(&f).unwrap();
        for i in 0..g.len() {
            let x = g.point(i);
            assert!((grad[0][i] - 2.0 * PI * (2.0 * PI * x[0]).cos()).abs() < 1e-10);
            assert!(grad[1][i].abs() < 1e-10 && grad[2][i].abs() < 1e-10);
        }
        let grad = s.gradient_real(&vec![2.5; g.len()]).unwrap();
        assert!(grad.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn poisson_inverts_laplacian() {
        let g = GridSpec::cube(-0.5, 0.5, 8).unwrap();
        let s = Spectral::new(g);
        let k = 2.0 * PI;
        let f = g.sample(|x| 3.0 + (k * x[0]).cos() * (k * x[1]).sin());
        let u = s.poisson(&f).unwrap();
        for i in 0..g.len() {
            let x = g.point(i);
            let want = (k * x[0]).cos() * (k * x[1]).sin() / (2.0 * k * k);
            assert!((u[i] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn det_sum_matches_serial() {
        let v: Vec<f64> = (0..10_000).map(|i| (i as f64).sqrt()).collect();
        let a = det_sum(v.len(), |i| v[i]);
        let b: f64 = v.iter().sum();
        assert!((a - b).abs() < 1e-9 * b);
    }
}
