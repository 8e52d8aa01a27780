//! Fourier symbols of the free Dirac operator: eigenvalues, energy
//! projectors and the free-flow propagator.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Spinor, SpinorField};
use crate::grid::{Spectral, WavenumberLadder, C64};

pub type Mat4 = [[C64; 4]; 4];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Energy branch: electrons (+) or positrons (−).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

pub fn identity() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    for (k, row) in m.iter_mut().enumerate() {
        row[k] = ONE;
    }
    m
}

pub fn beta() -> Mat4 {
    let mut m = identity();
    m[2][2] = -ONE;
    m[3][3] = -ONE;
    m
}

fn pauli(k: usize) -> [[C64; 2]; 2] {
    match k {
        0 => [[ZERO, ONE], [ONE, ZERO]],
        1 => [[ZERO, -I], [I, ZERO]],
        _ => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Off-diagonal Dirac matrix for direction `k` (0-based).
pub fn alpha(k: usize) -> Mat4 {
    assert!(k < 3, "alpha index {k} out of range");
    let s = pauli(k);
    let mut m = [[ZERO; 4]; 4];
    for r in 0..2 {
        for c in 0..2 {
            m[r][c + 2] = s[r][c];
            m[r + 2][c] = s[r][c];
        }
    }
    m
}

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = (0..4).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    m
}

pub fn mat_vec(a: &Mat4, v: &Spinor) -> Spinor {
    std::array::from_fn(|r| (0..4).map(|k| a[r][k] * v[k]).sum())
}

pub fn adjoint(a: &Mat4) -> Mat4 {
    std::array::from_fn(|r| std::array::from_fn(|c| a[c][r].conj()))
}

/// Largest entrywise modulus of `a − b`.
pub fn max_abs_diff(a: &Mat4, b: &Mat4) -> f64 {
    let mut d: f64 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            d = d.max((a[r][c] - b[r][c]).norm());
        }
    }
    d
}

/// α·ξ + β as an explicit matrix.
pub fn dirac_symbol(xi: [f64; 3]) -> Mat4 {
    let mut m = beta();
    for (k, &x) in xi.iter().enumerate() {
        let a = alpha(k);
        for r in 0..4 {
            for c in 0..4 {
                m[r][c] += a[r][c] * x;
            }
        }
    }
    m
}

/// (α·a)v without forming the matrix.
#[inline]
pub fn apply_alpha_dot(a: [f64; 3], v: &Spinor) -> Spinor {
    let sx = |p: C64, q: C64| {
        (
            p * a[2] + q * C64::new(a[0], -a[1]),
            p * C64::new(a[0], a[1]) - q * a[2],
        )
    };
    let (l0, l1) = sx(v[2], v[3]);
    let (u0, u1) = sx(v[0], v[1]);
    [l0, l1, u0, u1]
}

/// (α·ξ + β)v.
#[inline]
pub fn apply_symbol(xi: [f64; 3], v: &Spinor) -> Spinor {
    let mut w = apply_alpha_dot(xi, v);
    w[0] += v[0];
    w[1] += v[1];
    w[2] -= v[2];
    w[3] -= v[3];
    w
}

/// The three real bilinears ⟨v, α^k v⟩.
#[inline]
pub fn alpha_bilinear(v: &Spinor) -> [f64; 3] {
    let (u0, u1, l0, l1) = (v[0].conj(), v[1].conj(), v[2], v[3]);
    let s1 = u0 * l1 + u1 * l0;
    let s2 = (u1 * l0 - u0 * l1) * I;
    let s3 = u0 * l0 - u1 * l1;
    [2.0 * s1.re, 2.0 * s2.re, 2.0 * s3.re]
}

#[inline]
pub fn lambda0(xi: [f64; 3]) -> f64 {
    (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2] + 1.0).sqrt()
}

/// ½(I ± (α·ξ + β)/λ₀(ξ)).
pub fn free_projector(xi: [f64; 3], sign: Sign) -> Mat4 {
    let d = dirac_symbol(xi);
    let f = 0.5 * sign.value() / lambda0(xi);
    let mut m = identity();
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = m[r][c] * 0.5 + d[r][c] * f;
        }
    }
    m
}

/// Π₀±(ξ)v without forming the matrix.
#[inline]
pub fn project(xi: [f64; 3], sign: Sign, v: &Spinor) -> Spinor {
    let d = apply_symbol(xi, v);
    let f = sign.value() / lambda0(xi);
    std::array::from_fn(|k| 0.5 * (v[k] + d[k] * f))
}

/// Free-flow propagator exp(−iΔt(εδ α·ξ + β)/(εδ²)).
pub fn step1_propagator(xi: [f64; 3], dt: f64, epsilon: f64, delta: f64) -> Mat4 {
    let (c, s) = propagator_coefficients(xi, dt, epsilon, delta);
    let scaled = xi.map(|x| x * epsilon * delta);
    let d = dirac_symbol(scaled);
    let mut m = identity();
    for r in 0..4 {
        for col in 0..4 {
            m[r][col] = m[r][col] * c - I * s * d[r][col];
        }
    }
    m
}

/// (cos θ, sin θ/λ₀(εδξ)) with θ = Δt·λ₀(εδξ)/(εδ²).
#[inline]
fn propagator_coefficients(xi: [f64; 3], dt: f64, epsilon: f64, delta: f64) -> (f64, f64) {
    let lam = lambda0(xi.map(|x| x * epsilon * delta));
    let theta = dt * lam / (epsilon * delta * delta);
    (theta.cos(), theta.sin() / lam)
}

/// Per-mode symbol values for one spectral scale, optionally with a cached
/// free-flow propagator for a fixed time step.
#[derive(Debug, Clone)]
pub struct DiracSymbolTables {
    scale: f64,
    lambda0: Vec<f64>,
    prop: Option<PropagatorTable>,
}

#[derive(Debug, Clone)]
struct PropagatorTable {
    dt: f64,
    cos: Vec<f64>,
    sin_over: Vec<f64>,
}

impl DiracSymbolTables {
    pub fn new(ladder: &WavenumberLadder, scale: f64) -> Self {
        let lambda0 = (0..ladder.len())
            .into_par_iter()
            .map(|i| (1.0 + scale * scale * ladder.norm_sq(i)).sqrt())
            .collect();
        Self { scale, lambda0, prop: None }
    }

    /// Tables for the free-flow substep: scale εδ plus the propagator for `dt`.
    pub fn with_propagator(ladder: &WavenumberLadder, dt: f64, epsilon: f64, delta: f64) -> Self {
        let mut t = Self::new(ladder, epsilon * delta);
        let (cos, sin_over) = (0..ladder.len())
            .into_par_iter()
            .map(|i| propagator_coefficients(ladder.xi(i), dt, epsilon, delta))
            .unzip();
        t.prop = Some(PropagatorTable { dt, cos, sin_over });
        t
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn lambda0(&self, idx: usize) -> f64 {
        self.lambda0[idx]
    }

    pub fn time_step(&self) -> Option<f64> {
        self.prop.as_ref().map(|p| p.dt)
    }

    /// The cached propagator of mode `idx` as a matrix.
    pub fn propagator(&self, ladder: &WavenumberLadder, idx: usize) -> Option<Mat4> {
        let p = self.prop.as_ref()?;
        let d = dirac_symbol(ladder.xi(idx).map(|x| x * self.scale));
        let mut m = identity();
        for r in 0..4 {
            for c in 0..4 {
                m[r][c] = m[r][c] * p.cos[idx] - I * p.sin_over[idx] * d[r][c];
            }
        }
        Some(m)
    }

    /// Apply the cached propagator of mode `idx` to `v`.
    #[inline]
    pub fn apply_propagator(&self, ladder: &WavenumberLadder, idx: usize, v: &Spinor) -> Spinor {
        let p = self.prop.as_ref().expect("propagator table not built");
        let d = apply_symbol(ladder.xi(idx).map(|x| x * self.scale), v);
        let (c, s) = (p.cos[idx], p.sin_over[idx]);
        std::array::from_fn(|k| v[k] * c - I * s * d[k])
    }
}

/// How the energy projector is quantized.
#[derive(Debug, Clone, Copy)]
pub enum ProjectorMode<'a> {
    /// Fourier multiplier Π₀±(s·ξ).
    Spectral { scale: f64 },
    /// Pointwise Π₀±(∇φ(x)) for a given phase φ.
    PhaseGradient(&'a [f64]),
}

fn project_spectral(spec: &Spectral, psi: &SpinorField, sign: Sign, scale: f64) -> Result<SpinorField> {
    let mut hat = psi.clone();
    for comp in hat.components_mut() {
        spec.forward_in_place(comp)?;
    }
    let ladder = spec.ladder();
    hat.map_points(|i, v| project(ladder.xi(i).map(|x| x * scale), sign, &v));
    for comp in hat.components_mut() {
        spec.inverse_in_place(comp)?;
    }
    Ok(hat)
}

pub fn apply_projector(spec: &Spectral, psi: &SpinorField, sign: Sign, mode: ProjectorMode<'_>) -> Result<SpinorField> {
    if psi.grid() != spec.grid() {
        return Err(Error::Grid("spinor field and transform use different grids".into()));
    }
    match mode {
        ProjectorMode::Spectral { scale } => project_spectral(spec, psi, sign, scale),
        ProjectorMode::PhaseGradient(phase) => {
            let grad = spec.gradient_real(phase)?;
            let mut out = psi.clone();
            out.map_points(|i, v| project([grad[0][i], grad[1][i], grad[2][i]], sign, &v));
            Ok(out)
        }
    }
}

/// Electron/positron splitting for the non-relativistic limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NrProjection {
    /// Symbols Π(δξ) with the rest-energy phases e^{±it/δ²}.
    Delta(f64),
    /// δ → 0 limit: upper and lower component pairs, no phase.
    FormalLimit,
}

pub fn nr_projector_split(spec: &Spectral, psi: &SpinorField, projection: NrProjection, t: f64) -> Result<(SpinorField, SpinorField)> {
    match projection {
        NrProjection::FormalLimit => {
            let mut e = psi.clone();
            let mut p = psi.clone();
            let zeros = vec![C64::default(); psi.grid().len()];
            e.components_mut()[2].clone_from(&zeros);
            e.components_mut()[3].clone_from(&zeros);
            p.components_mut()[0].clone_from(&zeros);
            p.components_mut()[1].clone_from(&zeros);
            Ok((e, p))
        }
        NrProjection::Delta(delta) => {
            if !(delta > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "delta = {delta} must be positive; use the formal limit for delta = 0"
                )));
            }
            let phase = t / (delta * delta);
            let mut e = project_spectral(spec, psi, Sign::Plus, delta)?;
            let mut p = project_spectral(spec, psi, Sign::Minus, delta)?;
            let (pe, pp) = (C64::from_polar(1.0, phase), C64::from_polar(1.0, -phase));
            for comp in e.components_mut() {
                comp.par_iter_mut().for_each(|z| *z *= pe);
            }
            for comp in p.components_mut() {
                comp.par_iter_mut().for_each(|z| *z *= pp);
            }
            Ok((e, p))
        }
    }
}
