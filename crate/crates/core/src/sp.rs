//! Coupled electronic/positronic Schrödinger–Poisson system.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dirac::{nr_projector_split, NrProjection};
use crate::error::{Error, Result};
use crate::field::{total_charge, SimConfig, Splitting, SpinorField};
use crate::grid::{Spectral, C64};

#[derive(Debug, Clone)]
pub struct SpState {
    pub phi_e: SpinorField,
    pub phi_p: SpinorField,
    pub v: Vec<f64>,
    pub time: f64,
    pub step_index: usize,
}

impl SpState {
    pub fn charge(&self) -> f64 {
        total_charge(&self.phi_e) + total_charge(&self.phi_p)
    }
}

pub struct SpSolver {
    spec: Arc<Spectral>,
    cfg: SimConfig,
    self_consistent: bool,
}

impl SpSolver {
    pub fn new(spec: Arc<Spectral>, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if spec.grid() != &cfg.grid {
            return Err(Error::Grid("solver transform and configuration use different grids".into()));
        }
        Ok(Self { spec, cfg, self_consistent: true })
    }

    /// Switch the Poisson coupling off (free Schrödinger flow plus external field).
    pub fn with_self_consistent(mut self, on: bool) -> Self {
        self.self_consistent = on;
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Initial state from a Dirac datum, split by the non-relativistic projectors.
    pub fn initial_state(&self, psi0: &SpinorField, projection: NrProjection) -> Result<SpState> {
        let (phi_e, phi_p) = nr_projector_split(&self.spec, psi0, projection, 0.0)?;
        let mut st = SpState { phi_e, phi_p, v: Vec::new(), time: psi0.time, step_index: 0 };
        st.v = self.potential(&st)?;
        Ok(st)
    }

    pub fn potential(&self, state: &SpState) -> Result<Vec<f64>> {
        if !self.self_consistent {
            return Ok(vec![0.0; self.spec.grid().len()]);
        }
        let rho: Vec<f64> = state
            .phi_e
            .density()
            .into_par_iter()
            .zip(state.phi_p.density())
            .map(|(a, b)| a + b)
            .collect();
        self.spec.poisson(&rho)
    }

    fn kinetic(&self, field: &mut SpinorField, dt: f64, sign: f64) -> Result<()> {
        let ladder = self.spec.ladder();
        for comp in field.components_mut() {
            self.spec.forward_in_place(comp)?;
            comp.par_iter_mut().enumerate().for_each(|(i, z)| {
                *z *= C64::from_polar(1.0, -sign * 0.5 * ladder.norm_sq(i) * dt);
            });
            self.spec.inverse_in_place(comp)?;
        }
        Ok(())
    }

    /// Free Schrödinger flows over `dt` followed by the Poisson solve.
    pub fn step1(&self, state: &mut SpState, dt: f64) -> Result<()> {
        self.kinetic(&mut state.phi_e, dt, 1.0)?;
        self.kinetic(&mut state.phi_p, dt, -1.0)?;
        state.v = self.potential(state)?;
        state.time += dt;
        Ok(())
    }

    /// Pointwise phase rotation by V + V^ex(t_eval).
    pub fn step2(&self, state: &mut SpState, dt: f64, t_eval: f64) -> Result<()> {
        let grid = *self.spec.grid();
        let ext = &self.cfg.external;
        let phases: Vec<C64> = (0..grid.len())
            .into_par_iter()
            .map(|i| C64::from_polar(1.0, -(state.v[i] + ext.scalar(t_eval, grid.point(i))) * dt))
            .collect();
        for field in [&mut state.phi_e, &mut state.phi_p] {
            for comp in field.components_mut() {
                comp.par_iter_mut().zip(phases.par_iter()).for_each(|(z, p)| *z *= p);
            }
        }
        Ok(())
    }

    pub fn advance(&self, state: &mut SpState) -> Result<()> {
        let dt = self.cfg.dt;
        let t0 = state.step_index as f64 * dt;
        match self.cfg.splitting {
            Splitting::Strang => {
                self.step1(state, 0.5 * dt)?;
                self.step2(state, dt, t0 + 0.5 * dt)?;
                self.step1(state, 0.5 * dt)?;
            }
            Splitting::FirstOrder => {
                self.step1(state, dt)?;
                self.step2(state, dt, t0 + dt)?;
            }
        }
        state.step_index += 1;
        let t = state.step_index as f64 * dt;
        state.time = t;
        state.phi_e.time = t;
        state.phi_p.time = t;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn vacuum_has_zero_potential() {
        let g = GridSpec::cube(-0.5, 0.5, 4).unwrap();
        let spec = Arc::new(Spectral::new(g));
        let solver = SpSolver::new(spec, SimConfig::new(g, 1.0, 0.1, 0.125, 1.0)).unwrap();
        let st = solver.initial_state(&SpinorField::zeros(g), NrProjection::Delta(0.1)).unwrap();
        assert!(st.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_mode_picks_up_kinetic_phase() {
        let g = GridSpec::cube(0.0, 1.0, 8).unwrap();
        let spec = Arc::new(Spectral::new(g));
        let solver = SpSolver::new(spec, SimConfig::new(g, 1.0, 0.1, 0.125, 1.0))
            .unwrap()
            .with_self_consistent(false);
        let k = [2.0 * std::f64::consts::PI, 0.0, -4.0 * std::f64::consts::PI];
        let wave = SpinorField::from_fn(g, |x| {
            let e = C64::from_polar(1.0, k[0] * x[0] + k[2] * x[2]);
            [e, C64::default(), C64::default(), C64::default()]
        });
        let mut st = SpState { phi_e: wave.clone(), phi_p: SpinorField::zeros(g), v: vec![0.0; g.len()], time: 0.0, step_index: 0 };
        let dt = 0.01;
        solver.step1(&mut st, dt).unwrap();
        let ph = C64::from_polar(1.0, -0.5 * (k[0] * k[0] + k[2] * k[2]) * dt);
        for i in 0..g.len() {
            assert!((st.phi_e.component(0)[i] - wave.component(0)[i] * ph).norm() < 1e-12);
        }
    }
}
