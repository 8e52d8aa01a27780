//! One configured run of any of the three solvers behind a single interface.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{AmplitudeKind, InitKind, PhaseProfile, PotentialInitMode, ProjectionKind, RunParams, SolverKind};
use super::dump::DumpRecord;
use crate::diagnostics::{error_norms, exact_plane_wave, gauge_residual, SeriesRow};
use crate::dirac::{lambda0, NrProjection, Sign};
use crate::error::{Error, Result};
use crate::field::{total_charge, ExternalFields, SimConfig, SpinorField};
use crate::grid::{GridSpec, Spectral, C64};
use crate::md::{init_potentials, MdSolver, MdState, PotentialInit, TimeDerivativeInit};
use crate::sp::{SpSolver, SpState};
use crate::wkb::{polarized_amplitude, wkb_reconstruct, AmplitudeBase, WkbSolver, WkbState};

impl RunParams {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(std::array::from_fn(|j| (self.grid_lower[j], self.grid_upper[j])), self.grid_n)
            .map_err(|e| Error::config("grid.n", e.to_string()))
    }

    /// Wavenumber of the plane-wave datum.
    pub fn wave_vector(&self) -> [f64; 3] {
        std::array::from_fn(|j| 2.0 * PI * self.wave_modes[j] as f64 / (self.grid_upper[j] - self.grid_lower[j]))
    }

    pub fn external(&self) -> ExternalFields {
        let harmonic = self.harmonic;
        let plane = self.plane_wave_fields;
        let xi = self.wave_vector();
        let lam = lambda0(xi);
        let mut ext = ExternalFields::none();
        if plane || harmonic != 0.0 {
            ext = ext.with_scalar(move |t, x| {
                let pw = if plane { -0.5 * t * t } else { 0.0 };
                pw + harmonic * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
            });
        }
        if plane {
            ext = ext.with_vector(move |t, _| xi.map(|k| -0.5 * t * t * k / lam));
        }
        ext
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(self.grid()?, self.epsilon, self.delta, self.dt, self.t_final);
        cfg.external = self.external();
        cfg.splitting = self.splitting;
        cfg.neutralize = self.neutralize;
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::config("md/time", msg),
            other => other,
        })?;
        Ok(cfg)
    }

    /// Whether the closed-form plane-wave solution applies to this run.
    pub fn has_exact_solution(&self) -> bool {
        self.solver == SolverKind::Md
            && self.init_kind == InitKind::PlaneWave
            && self.plane_wave_fields
            && self.epsilon == 1.0
            && self.delta == 1.0
            && self.harmonic == 0.0
            && self.potential_init == PotentialInitMode::Zero
            && !self.neutralize
    }

    pub fn phase_field(&self, grid: &GridSpec) -> Vec<f64> {
        match self.phase {
            PhaseProfile::Zero => vec![0.0; grid.len()],
            PhaseProfile::CosineBump => {
                grid.sample(|x| (1.0 + (2.0 * PI * x[0]).cos()) * (1.0 + (2.0 * PI * x[1]).cos()) / 40.0)
            }
        }
    }

    /// Slowly varying amplitude χ(x)·exp(−|x − c|²/(4d²)).
    fn envelope(&self, spec: &Spectral, phase: &[f64]) -> Result<SpinorField> {
        if !(self.width > 0.0) {
            return Err(Error::config("init.width", "width must be positive"));
        }
        let grid = *spec.grid();
        let chi = match self.amplitude {
            AmplitudeKind::Constant => {
                let c = self.chi;
                SpinorField::from_fn(grid, move |_| c)
            }
            AmplitudeKind::Polarized => polarized_amplitude(spec, phase, AmplitudeBase::Explicit)?,
        };
        let (center, d) = (self.center, self.width);
        let mut out = chi;
        out.map_points(|i, v| {
            let x = grid.point(i);
            let r2: f64 = (0..3).map(|j| (x[j] - center[j]).powi(2)).sum();
            let g = (-r2 / (4.0 * d * d)).exp();
            v.map(|z| z * g)
        });
        Ok(out)
    }

    /// Initial spinor of the full system.
    pub fn initial_spinor(&self, spec: &Spectral) -> Result<SpinorField> {
        let grid = *spec.grid();
        match self.init_kind {
            InitKind::PlaneWave => Ok(exact_plane_wave(0.0, &grid, self.wave_vector())?.0),
            InitKind::Gaussian => {
                let phase = self.phase_field(&grid);
                let mut psi = self.envelope(spec, &phase)?;
                if self.phase != PhaseProfile::Zero {
                    let eps = self.epsilon;
                    psi.map_points(|i, v| {
                        let e = C64::from_polar(1.0, phase[i] / eps);
                        v.map(|z| z * e)
                    });
                }
                Ok(psi)
            }
        }
    }

    /// Initial WKB phases and amplitudes, polarized by Π₀±(∇φ_I).
    pub fn initial_wkb(&self, spec: &Spectral) -> Result<WkbState> {
        if self.init_kind != InitKind::Gaussian {
            return Err(Error::config("init.kind", "the WKB solver needs a Gaussian datum"));
        }
        let grid = *spec.grid();
        let phase = self.phase_field(&grid);
        let u_init = self.envelope(spec, &phase)?;
        let u_plus = polarized_amplitude(spec, &phase, AmplitudeBase::Project { u_init: &u_init, sign: Sign::Plus })?;
        let u_minus = polarized_amplitude(spec, &phase, AmplitudeBase::Project { u_init: &u_init, sign: Sign::Minus })?;
        WkbState::new(phase.clone(), u_plus, phase, u_minus)
    }

    pub fn nr_projection(&self) -> NrProjection {
        match self.projection {
            ProjectionKind::Delta => NrProjection::Delta(self.delta),
            ProjectionKind::Formal => NrProjection::FormalLimit,
        }
    }
}

/// A solver together with its evolving state.
pub enum Simulation {
    Md { solver: MdSolver, state: MdState, exact: Option<[f64; 3]> },
    Wkb { solver: WkbSolver, state: WkbState, epsilon: f64 },
    Sp { solver: SpSolver, state: SpState, delta: f64 },
}

impl Simulation {
    /// Build the solver and initial state; returns non-fatal warnings too.
    pub fn new(params: &RunParams) -> Result<(Self, Vec<String>)> {
        let cfg = params.sim_config()?;
        let spec = Arc::new(Spectral::new(cfg.grid));
        let mut warnings = Vec::new();
        let sim = match params.solver {
            SolverKind::Md => {
                let psi = params.initial_spinor(&spec)?;
                let (v0, v1) = match params.potential_init {
                    PotentialInitMode::Zero => (PotentialInit::Zero, TimeDerivativeInit::Gauge),
                    PotentialInitMode::Poisson => (PotentialInit::Poisson, TimeDerivativeInit::Gauge),
                    PotentialInitMode::Static => (PotentialInit::Poisson, TimeDerivativeInit::Zero),
                };
                let init = init_potentials(&spec, &psi, &cfg, v0, v0, v1, params.mean_warning)?;
                warnings.extend(init.warning);
                let exact = params.has_exact_solution().then(|| params.wave_vector());
                let solver = MdSolver::new(spec, cfg)?.with_dealias(params.dealias);
                Simulation::Md { solver, state: MdState::new(psi, init.pot), exact }
            }
            SolverKind::Wkb => {
                let state = params.initial_wkb(&spec)?;
                let solver = WkbSolver::new(spec, cfg)?.with_caustic_threshold(params.caustic_threshold);
                Simulation::Wkb { solver, state, epsilon: params.epsilon }
            }
            SolverKind::Sp => {
                let psi = params.initial_spinor(&spec)?;
                let solver = SpSolver::new(spec, cfg)?.with_self_consistent(params.self_consistent);
                let state = solver.initial_state(&psi, params.nr_projection())?;
                Simulation::Sp { solver, state, delta: params.delta }
            }
        };
        Ok((sim, warnings))
    }

    pub fn step(&mut self) -> Result<()> {
        match self {
            Simulation::Md { solver, state, .. } => solver.advance(state)?,
            Simulation::Wkb { solver, state, .. } => solver.advance(state)?,
            Simulation::Sp { solver, state, .. } => solver.advance(state)?,
        }
        let q = self.charge();
        if !q.is_finite() {
            return Err(Error::NonFinite(format!("charge at t = {}", self.time())));
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        match self {
            Simulation::Md { state, .. } => state.time(),
            Simulation::Wkb { state, .. } => state.time,
            Simulation::Sp { state, .. } => state.time,
        }
    }

    pub fn step_index(&self) -> usize {
        match self {
            Simulation::Md { state, .. } => state.step_index,
            Simulation::Wkb { state, .. } => state.step_index,
            Simulation::Sp { state, .. } => state.step_index,
        }
    }

    pub fn grid(&self) -> GridSpec {
        match self {
            Simulation::Md { state, .. } => *state.psi.grid(),
            Simulation::Wkb { state, .. } => *state.grid(),
            Simulation::Sp { state, .. } => *state.phi_e.grid(),
        }
    }

    pub fn charge(&self) -> f64 {
        match self {
            Simulation::Md { state, .. } => total_charge(&state.psi),
            Simulation::Wkb { state, .. } => state.charge(),
            Simulation::Sp { state, .. } => state.charge(),
        }
    }

    /// Particle density at every grid point.
    pub fn density(&self) -> Vec<f64> {
        match self {
            Simulation::Md { state, .. } => state.psi.density(),
            Simulation::Wkb { state, .. } => crate::wkb::wkb_density(state),
            Simulation::Sp { state, .. } => {
                let (a, b) = (state.phi_e.density(), state.phi_p.density());
                a.into_par_iter().zip(b).map(|(x, y)| x + y).collect()
            }
        }
    }

    /// Approximation of the Dirac spinor: the field itself, the WKB
    /// reconstruction, or the projected pair with rest-energy phases restored.
    pub fn spinor(&self) -> SpinorField {
        match self {
            Simulation::Md { state, .. } => state.psi.clone(),
            Simulation::Wkb { state, epsilon, .. } => wkb_reconstruct(state, *epsilon),
            Simulation::Sp { state, delta, .. } => {
                let ph = state.time / (delta * delta);
                let (pe, pp) = (C64::from_polar(1.0, -ph), C64::from_polar(1.0, ph));
                let mut out = state.phi_e.clone();
                out.map_points(|i, v| {
                    let w = state.phi_p.at(i);
                    std::array::from_fn(|k| v[k] * pe + w[k] * pp)
                });
                out.time = state.time;
                out
            }
        }
    }

    pub fn extra_names(&self) -> Vec<String> {
        let names: &[&str] = match self {
            Simulation::Md { .. } => &["gauge_mean_mode"],
            Simulation::Wkb { .. } => &["charge_plus", "charge_minus", "max_div_omega"],
            Simulation::Sp { .. } => &["charge_e", "charge_p"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Monitors for the current state.
    pub fn series_row(&self) -> Result<SeriesRow> {
        let t = self.time();
        let charge = self.charge();
        Ok(match self {
            Simulation::Md { solver, state, exact } => {
                let g = gauge_residual(solver.spectral(), &state.pot, solver.config().delta)?;
                let (l2, linf) = match exact {
                    Some(xi) => {
                        let reference = exact_plane_wave(t, state.psi.grid(), *xi)?.0;
                        let e = error_norms(&state.psi, &reference)?;
                        (e.l2_rel, e.linf_abs)
                    }
                    None => (f64::NAN, f64::NAN),
                };
                SeriesRow { t, charge, gauge_residual: g.nonzero_modes, l2_error: l2, linf_error: linf, extra: vec![g.mean_mode] }
            }
            Simulation::Wkb { solver, state, .. } => SeriesRow {
                t,
                charge,
                gauge_residual: f64::NAN,
                l2_error: f64::NAN,
                linf_error: f64::NAN,
                extra: vec![total_charge(&state.u_plus), total_charge(&state.u_minus), solver.caustic_indicator(state)?],
            },
            Simulation::Sp { state, .. } => SeriesRow {
                t,
                charge,
                gauge_residual: f64::NAN,
                l2_error: f64::NAN,
                linf_error: f64::NAN,
                extra: vec![total_charge(&state.phi_e), total_charge(&state.phi_p)],
            },
        })
    }

    /// Field dumps describing the current state.
    pub fn dumps(&self, epsilon: f64, delta: f64) -> Result<Vec<DumpRecord>> {
        let grid = self.grid();
        let t = self.time();
        let real = |name: &str, comps: &[&[f64]]| DumpRecord::from_real(name, &grid, comps, t, epsilon, delta);
        let density = self.density();
        let mut out = vec![DumpRecord::from_spinor("psi", &self.spinor(), epsilon, delta), real("density", &[&density])?];
        match self {
            Simulation::Md { state, .. } => {
                let p = &state.pot;
                out.push(real("v", &[&p.v])?);
                out.push(real("a", &[&p.a[0], &p.a[1], &p.a[2]])?);
            }
            Simulation::Wkb { state, .. } => {
                out.push(DumpRecord::from_spinor("u_plus", &state.u_plus, epsilon, delta));
                out.push(DumpRecord::from_spinor("u_minus", &state.u_minus, epsilon, delta));
                out.push(real("phi_plus", &[&state.phi_plus])?);
                out.push(real("phi_minus", &[&state.phi_minus])?);
                out.push(real("v", &[&state.calv])?);
                out.push(real("a", &[&state.cala[0], &state.cala[1], &state.cala[2]])?);
            }
            Simulation::Sp { state, .. } => {
                out.push(DumpRecord::from_spinor("phi_e", &state.phi_e, epsilon, delta));
                out.push(DumpRecord::from_spinor("phi_p", &state.phi_p, epsilon, delta));
                out.push(real("v", &[&state.v])?);
            }
        }
        Ok(out)
    }
}
