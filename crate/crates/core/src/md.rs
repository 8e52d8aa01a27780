//! Time-splitting spectral scheme for the coupled Dirac and Maxwell equations.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dirac::{alpha_bilinear, apply_alpha_dot, DiracSymbolTables};
use crate::error::{Error, Result};
use crate::field::{norm_sq, PotentialState, SimConfig, Splitting, SpinorField};
use crate::grid::{det_sum, Spectral, C64};

#[derive(Debug, Clone)]
pub struct MdState {
    pub psi: SpinorField,
    pub pot: PotentialState,
    pub step_index: usize,
}

impl MdState {
    pub fn new(psi: SpinorField, pot: PotentialState) -> Self {
        Self { psi, pot, step_index: 0 }
    }

    pub fn time(&self) -> f64 {
        self.psi.time
    }
}

/// Crank–Nicolson step for û_tt = −(|ξ|²/δ²)û + (coef/δ²)·ŝ, per mode, where
/// `sum_src` holds ŝⁿ + ŝⁿ⁺¹.
pub(crate) fn wave_cn_update(spec: &Spectral, u: &mut [C64], u_t: &mut [C64], sum_src: &[C64], dt: f64, delta: f64, coef: f64) {
    let ladder = spec.ladder();
    let inv_d2 = 1.0 / (delta * delta);
    u.par_iter_mut().zip(u_t.par_iter_mut()).enumerate().for_each(|(i, (u, w))| {
        let k = ladder.norm_sq(i) * inv_d2;
        let q = 0.25 * dt * dt * k;
        let den = 1.0 + q;
        let a = 1.0 - q;
        let f = sum_src[i] * (coef * inv_d2);
        let u1 = (*u * a + *w * dt + f * (0.25 * dt * dt)) / den;
        let w1 = (*u * (-dt * k) + *w * a + f * (0.5 * dt)) / den;
        *u = u1;
        *w = w1;
    });
}

/// Wave update of a real field pair in physical space.
pub(crate) fn wave_cn_real(
    spec: &Spectral,
    u: &mut Vec<f64>,
    u_t: &mut Vec<f64>,
    sum_src: &[C64],
    dt: f64,
    delta: f64,
    coef: f64,
) -> Result<()> {
    let mut uh = spec.dft_real(u)?;
    let mut wh = spec.dft_real(u_t)?;
    wave_cn_update(spec, &mut uh, &mut wh, sum_src, dt, delta, coef);
    *u = spec.idft_real(&uh)?;
    *u_t = spec.idft_real(&wh)?;
    Ok(())
}

/// Density |ψ|² and current δ⁻¹⟨ψ, αψ⟩ at every point.
pub fn sources(psi: &SpinorField, delta: f64) -> (Vec<f64>, [Vec<f64>; 3]) {
    let n = psi.grid().len();
    let inv = 1.0 / delta;
    let pairs: Vec<(f64, [f64; 3])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v = psi.at(i);
            (norm_sq(&v), alpha_bilinear(&v).map(|j| j * inv))
        })
        .collect();
    let rho = pairs.par_iter().map(|p| p.0).collect();
    let current = std::array::from_fn(|k| pairs.par_iter().map(|p| p.1[k]).collect());
    (rho, current)
}

/// Maxwell–Dirac time stepper for a fixed configuration.
pub struct MdSolver {
    spec: Arc<Spectral>,
    cfg: SimConfig,
    full: DiracSymbolTables,
    half: DiracSymbolTables,
    dealias: bool,
}

impl MdSolver {
    pub fn new(spec: Arc<Spectral>, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if spec.grid() != &cfg.grid {
            return Err(Error::Grid("solver transform and configuration use different grids".into()));
        }
        let ladder = spec.ladder();
        let full = DiracSymbolTables::with_propagator(ladder, cfg.dt, cfg.epsilon, cfg.delta);
        let half = DiracSymbolTables::with_propagator(ladder, 0.5 * cfg.dt, cfg.epsilon, cfg.delta);
        Ok(Self { spec, cfg, full, half, dealias: false })
    }

    /// Apply the 2/3 truncation to the Maxwell sources.
    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn spectral(&self) -> &Arc<Spectral> {
        &self.spec
    }

    fn tables_for(&self, dt: f64) -> std::borrow::Cow<'_, DiracSymbolTables> {
        if dt == self.cfg.dt {
            std::borrow::Cow::Borrowed(&self.full)
        } else if dt == 0.5 * self.cfg.dt {
            std::borrow::Cow::Borrowed(&self.half)
        } else {
            std::borrow::Cow::Owned(DiracSymbolTables::with_propagator(
                self.spec.ladder(),
                dt,
                self.cfg.epsilon,
                self.cfg.delta,
            ))
        }
    }

    fn filter_source(&self, hat: &mut [C64]) {
        if self.cfg.neutralize {
            hat[0] = C64::default();
        }
        if self.dealias {
            let ladder = self.spec.ladder();
            let n = self.spec.grid().n();
            hat.par_iter_mut().enumerate().for_each(|(i, z)| {
                let m = ladder.mode(i);
                if (0..3).any(|j| 3 * m[j].unsigned_abs() as usize > n[j]) {
                    *z = C64::default();
                }
            });
        }
    }

    /// Free Dirac flow over `dt` plus the Crank–Nicolson Maxwell update.
    pub fn step1(&self, state: &mut MdState, dt: f64) -> Result<()> {
        let tables = self.tables_for(dt);
        let spec = &*self.spec;
        let ladder = spec.ladder();
        let delta = self.cfg.delta;

        let (rho0, cur0) = sources(&state.psi, delta);
        for comp in state.psi.components_mut() {
            spec.forward_in_place(comp)?;
        }
        state.psi.map_points(|i, v| tables.apply_propagator(ladder, i, &v));
        for comp in state.psi.components_mut() {
            spec.inverse_in_place(comp)?;
        }
        let (rho1, cur1) = sources(&state.psi, delta);

        let sum = |a: &[f64], b: &[f64]| -> Result<Vec<C64>> {
            let s: Vec<f64> = a.par_iter().zip(b).map(|(x, y)| x + y).collect();
            let mut hat = spec.dft_real(&s)?;
            self.filter_source(&mut hat);
            Ok(hat)
        };

        let pot = &mut state.pot;
        let s_rho = sum(&rho0, &rho1)?;
        wave_cn_real(spec, &mut pot.v, &mut pot.v_t, &s_rho, dt, delta, self.cfg.epsilon)?;
        for k in 0..3 {
            let s_cur = sum(&cur0[k], &cur1[k])?;
            wave_cn_real(spec, &mut pot.a[k], &mut pot.a_t[k], &s_cur, dt, delta, self.cfg.epsilon * delta)?;
        }
        state.psi.time += dt;
        pot.time += dt;
        Ok(())
    }

    /// Pointwise phase rotation by the total potentials over `dt`, with the
    /// external fields sampled at `t_eval`.
    pub fn step2(&self, psi: &mut SpinorField, pot: &PotentialState, dt: f64, t_eval: f64) -> Result<()> {
        if psi.grid() != pot.grid() {
            return Err(Error::Grid("spinor and potentials use different grids".into()));
        }
        let grid = *psi.grid();
        let ext = &self.cfg.external;
        let tau = dt / self.cfg.epsilon;
        psi.map_points(|i, v| {
            let x = grid.point(i);
            let w = pot.v[i] + ext.scalar(t_eval, x);
            let e = ext.vector(t_eval, x);
            let total = [pot.a[0][i] + e[0], pot.a[1][i] + e[1], pot.a[2][i] + e[2]];
            rotate(&v, w, total, tau)
        });
        Ok(())
    }

    pub fn advance(&self, state: &mut MdState) -> Result<()> {
        let dt = self.cfg.dt;
        let t0 = state.step_index as f64 * dt;
        match self.cfg.splitting {
            Splitting::Strang => {
                self.step1(state, 0.5 * dt)?;
                let MdState { psi, pot, .. } = state;
                self.step2(psi, pot, dt, t0 + 0.5 * dt)?;
                self.step1(state, 0.5 * dt)?;
            }
            Splitting::FirstOrder => {
                self.step1(state, dt)?;
                let MdState { psi, pot, .. } = state;
                self.step2(psi, pot, dt, t0 + dt)?;
            }
        }
        state.step_index += 1;
        let t = state.step_index as f64 * dt;
        state.psi.time = t;
        state.pot.time = t;
        Ok(())
    }
}

/// exp(−iτ(W − α·𝔸))v evaluated in closed form.
#[inline]
pub(crate) fn rotate(v: &[C64; 4], w: f64, field: [f64; 3], tau: f64) -> [C64; 4] {
    let r = (field[0] * field[0] + field[1] * field[1] + field[2] * field[2]).sqrt();
    let rt = r * tau;
    let cos = rt.cos();
    let sinc = if r < 1e-8 { tau * (1.0 - rt * rt / 6.0) } else { rt.sin() / r };
    let av = apply_alpha_dot(field, v);
    let phase = C64::from_polar(1.0, -w * tau);
    std::array::from_fn(|k| phase * (v[k] * cos + C64::new(0.0, sinc) * av[k]))
}

/// Initial potential profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialInit {
    Zero,
    Poisson,
}

/// Whether ∂tV(0) is chosen to satisfy the gauge constraint or set to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDerivativeInit {
    Gauge,
    Zero,
}

#[derive(Debug, Clone)]
pub struct InitOutcome {
    pub pot: PotentialState,
    /// Largest relative l² change a source suffered from removing its mean.
    pub removed_mean_fraction: f64,
    pub warning: Option<String>,
}

/// Default threshold above which the mean removal is reported.
pub const MEAN_REMOVAL_WARNING: f64 = 1e-3;

/// Initial potentials that satisfy both discrete Lorentz-gauge constraints.
pub fn gauge_consistent_init(
    spec: &Spectral,
    psi0: &SpinorField,
    cfg: &SimConfig,
    v0: PotentialInit,
    a0: PotentialInit,
    warn_threshold: f64,
) -> Result<InitOutcome> {
    init_potentials(spec, psi0, cfg, v0, a0, TimeDerivativeInit::Gauge, warn_threshold)
}

pub fn init_potentials(
    spec: &Spectral,
    psi0: &SpinorField,
    cfg: &SimConfig,
    v0: PotentialInit,
    a0: PotentialInit,
    v1: TimeDerivativeInit,
    warn_threshold: f64,
) -> Result<InitOutcome> {
    let grid = *psi0.grid();
    if spec.grid() != &grid {
        return Err(Error::Grid("initial spinor and transform use different grids".into()));
    }
    let mut pot = PotentialState::zeros(grid);
    pot.time = psi0.time;
    let (rho, cur) = sources(psi0, cfg.delta);
    let mut removed: f64 = 0.0;
    let mut solve = |src: &[f64], coef: f64| -> Result<Vec<f64>> {
        let mut hat = spec.dft_real(src)?;
        let total = det_sum(src.len(), |i| src[i] * src[i]);
        if total > 0.0 {
            let mean_part = hat[0].norm_sqr() / src.len() as f64;
            removed = removed.max((mean_part / total).sqrt());
        }
        spec.poisson_modes(&mut hat);
        Ok(spec.idft_real(&hat)?.into_iter().map(|x| x * coef).collect())
    };
    if v0 == PotentialInit::Poisson {
        pot.v = solve(&rho, cfg.epsilon)?;
    }
    if a0 == PotentialInit::Poisson {
        for k in 0..3 {
            pot.a[k] = solve(&cur[k], cfg.epsilon * cfg.delta)?;
        }
    }
    if v1 == TimeDerivativeInit::Gauge && a0 == PotentialInit::Poisson {
        let div = spec.divergence_real([&pot.a[0], &pot.a[1], &pot.a[2]])?;
        pot.v_t = div.into_iter().map(|d| -d / cfg.delta).collect();
    }
    let warning = (removed > warn_threshold).then(|| {
        format!("removing the source mean changed it by {removed:.3e} (relative l2) when solving for the initial potentials")
    });
    Ok(InitOutcome { pot, removed_mean_fraction: removed, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::total_charge;
    use crate::grid::GridSpec;

    #[test]
    fn rotation_special_cases() {
        let v = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.7, 0.0), C64::new(0.1, -0.4)];
        let tau = 0.37;
        let out = rotate(&v, 1.3, [0.0; 3], tau);
        let ph = C64::from_polar(1.0, -1.3 * tau);
        assert!((0..4).all(|k| (out[k] - ph * v[k]).norm() < 1e-15));

        let a = 0.9;
        let out = rotate(&v, 0.0, [0.0, 0.0, a], tau);
        let (c, s) = ((a * tau).cos(), C64::new(0.0, (a * tau).sin()));
        assert!((out[0] - (v[0] * c + s * v[2])).norm() < 1e-15);
        assert!((out[2] - (v[2] * c + s * v[0])).norm() < 1e-15);
        assert!((out[1] - (v[1] * c - s * v[3])).norm() < 1e-15);
        assert!((out[3] - (v[3] * c - s * v[1])).norm() < 1e-15);
    }

    #[test]
    fn small_field_series_matches_direct_formula() {
        let v = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.5, 0.5), C64::new(-0.3, 0.2)];
        let (w, tau) = (0.2, 0.5);
        let field = [0.3e-8, -0.5e-8, 0.6e-8];
        let r = (field.iter().map(|x| x * x).sum::<f64>()).sqrt();
        assert!(r < 1e-8);
        let out = rotate(&v, w, field, tau);
        let av = apply_alpha_dot(field, &v);
        let ph = C64::from_polar(1.0, -w * tau);
        for k in 0..4 {
            let want = ph * (v[k] * (r * tau).cos() + C64::new(0.0, (r * tau).sin() / r) * av[k]);
            assert!((out[k] - want).norm() < 1e-16);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = GridSpec::cube(-0.5, 0.5, 4).unwrap();
        let spec = Arc::new(Spectral::new(g));
        let solver = MdSolver::new(spec, SimConfig::new(g, 1.0, 1.0, 0.125, 1.0)).unwrap();
        let mut st = MdState::new(SpinorField::zeros(g), PotentialState::zeros(g));
        for _ in 0..3 {
            solver.advance(&mut st).unwrap();
        }
        assert!(st.pot.is_zero());
        assert_eq!(total_charge(&st.psi), 0.0);
        assert_eq!(st.step_index, 3);
        assert_eq!(st.time(), 0.375);
    }

    #[test]
    fn zero_init_is_zero() {
        let g = GridSpec::cube(-0.5, 0.5, 4).unwrap();
        let spec = Spectral::new(g);
        let psi = SpinorField::from_fn(g, |x| [C64::new(x[0], 1.0); 4]);
        let cfg = SimConfig::new(g, 1.0, 1.0, 0.125, 1.0);
        let out = gauge_consistent_init(&spec, &psi, &cfg, PotentialInit::Zero, PotentialInit::Zero, 1e-3).unwrap();
        assert!(out.pot.is_zero());
        let out = gauge_consistent_init(&spec, &SpinorField::zeros(g), &cfg, PotentialInit::Poisson, PotentialInit::Poisson, 1e-3)
            .unwrap();
        assert!(out.pot.is_zero());
        assert!(out.warning.is_none());
    }
}
