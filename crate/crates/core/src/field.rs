//! Spinor fields, electromagnetic potentials and run configuration.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{det_sum, GridSpec, C64};

pub type Spinor = [C64; 4];

/// Four complex components sampled on a grid, stored as one plane per component.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: GridSpec,
    comps: [Vec<C64>; 4],
    pub time: f64,
}

impl SpinorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self { grid, comps: std::array::from_fn(|_| vec![C64::default(); n]), time: 0.0 }
    }

    pub fn from_components(grid: GridSpec, comps: [Vec<C64>; 4]) -> Result<Self> {
        for c in &comps {
            grid.check_len(c.len())?;
        }
        Ok(Self { grid, comps, time: 0.0 })
    }

    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> Spinor + Sync,
    {
        let values: Vec<Spinor> = grid.sample(f);
        Self::from_points(grid, &values)
    }

    pub(crate) fn from_points(grid: GridSpec, values: &[Spinor]) -> Self {
        let comps = std::array::from_fn(|k| values.par_iter().map(|v| v[k]).collect());
        Self { grid, comps, time: 0.0 }
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn component(&self, k: usize) -> &[C64] {
        &self.comps[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut [C64] {
        &mut self.comps[k]
    }

    pub fn components(&self) -> &[Vec<C64>; 4] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<C64>; 4] {
        &mut self.comps
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Spinor {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx], self.comps[3][idx]]
    }

    pub fn to_points(&self) -> Vec<Spinor> {
        (0..self.grid.len()).into_par_iter().map(|i| self.at(i)).collect()
    }

    /// Apply `f(index, value)` at every point, in parallel.
    pub fn map_points<F>(&mut self, f: F)
    where
        F: Fn(usize, Spinor) -> Spinor + Sync,
    {
        let updated: Vec<Spinor> = (0..self.grid.len()).into_par_iter().map(|i| f(i, self.at(i))).collect();
        for (k, comp) in self.comps.iter_mut().enumerate() {
            comp.par_iter_mut().zip(updated.par_iter()).for_each(|(z, v)| *z = v[k]);
        }
    }

    /// Pointwise |ψ|².
    pub fn density(&self) -> Vec<f64> {
        (0..self.grid.len()).into_par_iter().map(|i| norm_sq(&self.at(i))).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.par_iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    pub fn check_same_grid(&self, other: &SpinorField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::Grid(format!("grid mismatch: {:?} vs {:?}", self.grid.n(), other.grid.n())))
        }
    }
}

#[inline]
pub fn norm_sq(v: &Spinor) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Discrete charge Σ|ψ|² ΠΔx.
pub fn total_charge(psi: &SpinorField) -> f64 {
    let dv = psi.grid.cell_volume();
    det_sum(psi.grid.len(), |i| norm_sq(&psi.at(i))) * dv
}

/// Scalar and vector potentials with their time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialState {
    grid: GridSpec,
    pub v: Vec<f64>,
    pub v_t: Vec<f64>,
    pub a: [Vec<f64>; 3],
    pub a_t: [Vec<f64>; 3],
    pub time: f64,
}

impl PotentialState {
    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![0.0; grid.len()];
        Self {
            grid,
            v: z.clone(),
            v_t: z.clone(),
            a: [z.clone(), z.clone(), z.clone()],
            a_t: [z.clone(), z.clone(), z],
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn validate(&self) -> Result<()> {
        for f in [&self.v, &self.v_t].into_iter().chain(self.a.iter()).chain(self.a_t.iter()) {
            self.grid.check_len(f.len())?;
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        [&self.v, &self.v_t]
            .into_iter()
            .chain(self.a.iter())
            .chain(self.a_t.iter())
            .all(|f| f.iter().all(|&x| x == 0.0))
    }
}

pub type ScalarFn = Arc<dyn Fn(f64, [f64; 3]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64, [f64; 3]) -> [f64; 3] + Send + Sync>;

/// Externally imposed potentials, functions of (t, x).
#[derive(Clone, Default)]
pub struct ExternalFields {
    scalar: Option<ScalarFn>,
    vector: Option<VectorFn>,
}

impl fmt::Debug for ExternalFields {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalFields")
            .field("scalar", &self.scalar.is_some())
            .field("vector", &self.vector.is_some())
            .finish()
    }
}

impl ExternalFields {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_scalar(mut self, f: impl Fn(f64, [f64; 3]) -> f64 + Send + Sync + 'static) -> Self {
        self.scalar = Some(Arc::new(f));
        self
    }

    pub fn with_vector(mut self, f: impl Fn(f64, [f64; 3]) -> [f64; 3] + Send + Sync + 'static) -> Self {
        self.vector = Some(Arc::new(f));
        self
    }

    /// Static harmonic trap `strength·|x|²`.
    pub fn harmonic(strength: f64) -> Self {
        Self::none().with_scalar(move |_, x| strength * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]))
    }

    #[inline]
    pub fn scalar(&self, t: f64, x: [f64; 3]) -> f64 {
        self.scalar.as_ref().map_or(0.0, |f| f(t, x))
    }

    #[inline]
    pub fn vector(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        self.vector.as_ref().map_or([0.0; 3], |f| f(t, x))
    }

    pub fn has_scalar(&self) -> bool {
        self.scalar.is_some()
    }

    pub fn has_vector(&self) -> bool {
        self.vector.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    FirstOrder,
    #[default]
    Strang,
}

impl std::str::FromStr for Splitting {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "first_order" => Ok(Self::FirstOrder),
            "strang" => Ok(Self::Strang),
            other => Err(format!("unknown splitting `{other}` (expected first_order or strang)")),
        }
    }
}

impl fmt::Display for Splitting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FirstOrder => "first_order",
            Self::Strang => "strang",
        })
    }
}

/// Physical and numerical parameters of one run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Semi-classical scale.
    pub epsilon: f64,
    /// Ratio of the reference speed to the speed of light.
    pub delta: f64,
    pub dt: f64,
    pub t_final: f64,
    pub grid: GridSpec,
    pub external: ExternalFields,
    pub splitting: Splitting,
    /// Drop the mean mode of the Maxwell sources (neutralizing background).
    pub neutralize: bool,
}

impl SimConfig {
    pub fn new(grid: GridSpec, epsilon: f64, delta: f64, dt: f64, t_final: f64) -> Self {
        Self {
            epsilon,
            delta,
            dt,
            t_final,
            grid,
            external: ExternalFields::none(),
            splitting: Splitting::Strang,
            neutralize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1]")))
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("delta", self.delta)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_final = {} must be non-negative", self.t_final)));
        }
        self.steps().map(|_| ())
    }

    /// Number of steps T/Δt, which must be an integer up to rounding.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.t_final / self.dt;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "dt = {} does not divide t_final = {}",
                self.dt, self.t_final
            )));
        }
        Ok(m as usize)
    }
}

/// χ(x)·exp(−|x − c|²/(4d²))·exp(i·phase(x)/ε).
pub fn gaussian_spinor<C, P>(grid: GridSpec, center: [f64; 3], width: f64, chi: C, phase: P, epsilon: f64) -> Result<SpinorField>
where
    C: Fn([f64; 3]) -> Spinor + Sync,
    P: Fn([f64; 3]) -> f64 + Sync,
{
    if !(width > 0.0) {
        return Err(Error::InvalidParameter(format!("Gaussian width {width} must be positive")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be positive")));
    }
    Ok(SpinorField::from_fn(grid, |x| {
        let r2: f64 = (0..3).map(|j| (x[j] - center[j]).powi(2)).sum();
        let amp = (-r2 / (4.0 * width * width)).exp();
        let p = phase(x);
        let factor = if p == 0.0 { C64::new(amp, 0.0) } else { C64::from_polar(amp, p / epsilon) };
        chi(x).map(|c| c * factor)
    }))
}
