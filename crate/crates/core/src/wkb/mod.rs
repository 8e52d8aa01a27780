//! Semi-classical (WKB) asymptotic system: phases, polarized amplitudes and
//! their self-consistent fields.

mod eikonal;

use std::sync::Arc;

use rayon::prelude::*;

pub use eikonal::{cfl_limit, eiconal_advance, eiconal_rhs, eiconal_step, max_speed, HamiltonianSpec};

use crate::dirac::{lambda0, project, Sign};
use crate::error::{Error, Result};
use crate::field::{norm_sq, total_charge, SimConfig, Splitting, Spinor, SpinorField};
use crate::grid::{det_max, det_sum, GridSpec, Spectral, C64};
use crate::md::wave_cn_real;

/// Default threshold on max |div ω| that flags a caustic.
pub const DEFAULT_CAUSTIC_THRESHOLD: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausticEvent {
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct WkbState {
    pub phi_plus: Vec<f64>,
    pub phi_minus: Vec<f64>,
    pub u_plus: SpinorField,
    pub u_minus: SpinorField,
    pub calv: Vec<f64>,
    pub calv_t: Vec<f64>,
    pub cala: [Vec<f64>; 3],
    pub cala_t: [Vec<f64>; 3],
    pub time: f64,
    pub step_index: usize,
    pub caustic: Option<CausticEvent>,
}

impl WkbState {
    /// State with the given phases and amplitudes and zero fields.
    pub fn new(phi_plus: Vec<f64>, u_plus: SpinorField, phi_minus: Vec<f64>, u_minus: SpinorField) -> Result<Self> {
        let grid = *u_plus.grid();
        u_plus.check_same_grid(&u_minus)?;
        grid.check_len(phi_plus.len())?;
        grid.check_len(phi_minus.len())?;
        let z = vec![0.0; grid.len()];
        Ok(Self {
            phi_plus,
            phi_minus,
            u_plus,
            u_minus,
            calv: z.clone(),
            calv_t: z.clone(),
            cala: [z.clone(), z.clone(), z.clone()],
            cala_t: [z.clone(), z.clone(), z],
            time: 0.0,
            step_index: 0,
            caustic: None,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.u_plus.grid()
    }

    pub fn caustic_flag(&self) -> bool {
        self.caustic.is_some()
    }

    /// Σ(ρ⁺ + ρ⁻)ΠΔx.
    pub fn charge(&self) -> f64 {
        total_charge(&self.u_plus) + total_charge(&self.u_minus)
    }
}

/// Group velocity ±p/λ₀(p) with p = ∇φ computed spectrally.
pub fn group_velocity(spec: &Spectral, phi: &[f64], sign: Sign) -> Result<[Vec<f64>; 3]> {
    let grad = spec.gradient_real(phi)?;
    let s = sign.value();
    let n = phi.len();
    let lam: Vec<f64> = (0..n).into_par_iter().map(|i| lambda0([grad[0][i], grad[1][i], grad[2][i]])).collect();
    Ok(std::array::from_fn(|j| (0..n).into_par_iter().map(|i| s * grad[j][i] / lam[i]).collect()))
}

/// max |div ω| of the branch with phase `phi`.
pub fn max_div_velocity(spec: &Spectral, phi: &[f64], sign: Sign) -> Result<f64> {
    let w = group_velocity(spec, phi, sign)?;
    let div = spec.divergence_real([&w[0], &w[1], &w[2]])?;
    Ok(det_max(div.len(), |i| div[i].abs()))
}

/// Transport operator L u = −½[div(ωu) + ω·∇u], skew-adjoint for real ω.
struct Transport<'a> {
    spec: &'a Spectral,
    omega: &'a [Vec<f64>; 3],
}

impl Transport<'_> {
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let spec = self.spec;
        let ladder = spec.ladder();
        let n = u.len();
        let hat = spec.dft(u)?;
        let mut adv = vec![C64::default(); n];
        let mut flux_hat = vec![C64::default(); n];
        for j in 0..3 {
            let w = &self.omega[j];
            let mut d: Vec<C64> = hat.par_iter().enumerate().map(|(i, z)| C64::new(0.0, ladder.xi_deriv(i)[j]) * z).collect();
            spec.inverse_in_place(&mut d)?;
            adv.par_iter_mut().enumerate().for_each(|(i, a)| *a += d[i] * w[i]);
            let mut f: Vec<C64> = u.par_iter().zip(w.par_iter()).map(|(z, w)| z * w).collect();
            spec.forward_in_place(&mut f)?;
            flux_hat.par_iter_mut().enumerate().for_each(|(i, a)| *a += C64::new(0.0, ladder.xi_deriv(i)[j]) * f[i]);
        }
        spec.inverse_in_place(&mut flux_hat)?;
        Ok((0..n).into_par_iter().map(|i| -0.5 * (flux_hat[i] + adv[i])).collect())
    }

    /// Solve (I − cL)x = (I + cL)b by conjugate gradients on the normal equations.
    fn crank_nicolson(&self, b: &[C64], c: f64, tol: f64) -> Result<Vec<C64>> {
        let n = b.len();
        let dot = |a: &[C64], b: &[C64]| det_sum(n, |i| (a[i].conj() * b[i]).re);
        let lb = self.apply(b)?;
        let rhs: Vec<C64> = (0..n).into_par_iter().map(|i| b[i] + lb[i] * c).collect();
        let a_op = |v: &[C64]| -> Result<Vec<C64>> {
            let lv = self.apply(v)?;
            Ok((0..n).into_par_iter().map(|i| v[i] - lv[i] * c).collect())
        };
        let ah_op = |v: &[C64]| -> Result<Vec<C64>> {
            let lv = self.apply(v)?;
            Ok((0..n).into_par_iter().map(|i| v[i] + lv[i] * c).collect())
        };
        let rhs_norm = dot(&rhs, &rhs).sqrt();
        if rhs_norm == 0.0 {
            return Ok(vec![C64::default(); n]);
        }
        let mut x = b.to_vec();
        let ax = a_op(&x)?;
        let mut r: Vec<C64> = (0..n).into_par_iter().map(|i| rhs[i] - ax[i]).collect();
        let mut s = ah_op(&r)?;
        let mut p = s.clone();
        let mut gamma = dot(&s, &s);
        for _ in 0..500 {
            if dot(&r, &r).sqrt() <= tol * rhs_norm {
                return Ok(x);
            }
            let q = a_op(&p)?;
            let alpha = gamma / dot(&q, &q);
            x.par_iter_mut().zip(p.par_iter()).for_each(|(x, p)| *x += p * alpha);
            r.par_iter_mut().zip(q.par_iter()).for_each(|(r, q)| *r -= q * alpha);
            s = ah_op(&r)?;
            let gamma_new = dot(&s, &s);
            let beta = gamma_new / gamma;
            gamma = gamma_new;
            p.par_iter_mut().zip(s.par_iter()).for_each(|(p, s)| *p = s + *p * beta);
        }
        Err(Error::NoConvergence(format!(
            "transport solve residual {:.3e} after 500 iterations",
            dot(&r, &r).sqrt() / rhs_norm
        )))
    }
}

fn is_zero(u: &SpinorField) -> bool {
    u.components().iter().all(|c| c.par_iter().all(|z| z.re == 0.0 && z.im == 0.0))
}

/// Co-advances phases, amplitudes and the self-consistent wave fields.
pub struct WkbSolver {
    spec: Arc<Spectral>,
    cfg: SimConfig,
    caustic_threshold: f64,
    tolerance: f64,
}

impl WkbSolver {
    pub fn new(spec: Arc<Spectral>, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if spec.grid() != &cfg.grid {
            return Err(Error::Grid("solver transform and configuration use different grids".into()));
        }
        if cfg.external.has_vector() {
            return Err(Error::InvalidParameter("external vector potentials are not supported by the WKB solver".into()));
        }
        Ok(Self { spec, cfg, caustic_threshold: DEFAULT_CAUSTIC_THRESHOLD, tolerance: 1e-14 })
    }

    pub fn with_caustic_threshold(mut self, threshold: f64) -> Self {
        self.caustic_threshold = threshold;
        self
    }

    pub fn caustic_threshold(&self) -> f64 {
        self.caustic_threshold
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn hamiltonian(&self, sign: Sign) -> HamiltonianSpec {
        HamiltonianSpec::new(sign, self.cfg.external.clone())
    }

    fn current(&self, u_plus: &SpinorField, w_plus: &[Vec<f64>; 3], u_minus: &SpinorField, w_minus: &[Vec<f64>; 3]) -> (Vec<f64>, [Vec<f64>; 3]) {
        let n = u_plus.grid().len();
        let rp = u_plus.density();
        let rm = u_minus.density();
        let rho = (0..n).into_par_iter().map(|i| rp[i] + rm[i]).collect();
        let cur = std::array::from_fn(|j| (0..n).into_par_iter().map(|i| w_plus[j][i] * rp[i] + w_minus[j][i] * rm[i]).collect());
        (rho, cur)
    }

    /// Max |div ω| over branches that carry amplitude (the + branch if none do).
    pub fn caustic_indicator(&self, state: &WkbState) -> Result<f64> {
        let plus_active = !is_zero(&state.u_plus);
        let minus_active = !is_zero(&state.u_minus);
        let mut m: f64 = 0.0;
        if plus_active || !minus_active {
            m = m.max(max_div_velocity(&self.spec, &state.phi_plus, Sign::Plus)?);
        }
        if minus_active {
            m = m.max(max_div_velocity(&self.spec, &state.phi_minus, Sign::Minus)?);
        }
        Ok(m)
    }

    /// Phase update, Crank–Nicolson transport and wave-field update over `dt`.
    pub fn transport_step1(&self, state: &mut WkbState, dt: f64) -> Result<()> {
        if let Some(ev) = state.caustic {
            return Err(Error::Caustic { time: ev.time, value: ev.value, threshold: self.caustic_threshold });
        }
        let spec = &*self.spec;
        let grid = *spec.grid();
        let t = state.time;
        let phi_p = eiconal_advance(&grid, &state.phi_plus, dt, &self.hamiltonian(Sign::Plus), t)?;
        let phi_m = eiconal_advance(&grid, &state.phi_minus, dt, &self.hamiltonian(Sign::Minus), t)?;

        let w_old_p = group_velocity(spec, &state.phi_plus, Sign::Plus)?;
        let w_old_m = group_velocity(spec, &state.phi_minus, Sign::Minus)?;
        let (rho0, cur0) = self.current(&state.u_plus, &w_old_p, &state.u_minus, &w_old_m);

        for (u, old, new, sign) in [
            (&mut state.u_plus, &state.phi_plus, &phi_p, Sign::Plus),
            (&mut state.u_minus, &state.phi_minus, &phi_m, Sign::Minus),
        ] {
            if is_zero(u) {
                continue;
            }
            let mid: Vec<f64> = old.par_iter().zip(new.par_iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            let omega = group_velocity(spec, &mid, sign)?;
            let op = Transport { spec, omega: &omega };
            for comp in u.components_mut() {
                let next = op.crank_nicolson(comp, 0.5 * dt, self.tolerance)?;
                comp.copy_from_slice(&next);
            }
        }
        state.phi_plus = phi_p;
        state.phi_minus = phi_m;

        let w_new_p = group_velocity(spec, &state.phi_plus, Sign::Plus)?;
        let w_new_m = group_velocity(spec, &state.phi_minus, Sign::Minus)?;
        let (rho1, cur1) = self.current(&state.u_plus, &w_new_p, &state.u_minus, &w_new_m);
        let sum = |a: &[f64], b: &[f64]| -> Result<Vec<C64>> {
            let s: Vec<f64> = a.par_iter().zip(b).map(|(x, y)| x + y).collect();
            let mut hat = spec.dft_real(&s)?;
            if self.cfg.neutralize {
                hat[0] = C64::default();
            }
            Ok(hat)
        };
        wave_cn_real(spec, &mut state.calv, &mut state.calv_t, &sum(&rho0, &rho1)?, dt, 1.0, 1.0)?;
        for j in 0..3 {
            let s = sum(&cur0[j], &cur1[j])?;
            wave_cn_real(spec, &mut state.cala[j], &mut state.cala_t[j], &s, dt, 1.0, 1.0)?;
        }
        state.time += dt;
        state.u_plus.time = state.time;
        state.u_minus.time = state.time;

        let indicator = self.caustic_indicator(state)?;
        if !indicator.is_finite() || indicator > self.caustic_threshold {
            state.caustic = Some(CausticEvent { time: state.time, value: indicator });
            return Err(Error::Caustic { time: state.time, value: indicator, threshold: self.caustic_threshold });
        }
        Ok(())
    }

    /// Pointwise rotation u± ← exp(i(𝒜·ω± − 𝒱)dt)u±.
    pub fn transport_step2(&self, state: &mut WkbState, dt: f64) -> Result<()> {
        let spec = &*self.spec;
        for (u, phi, sign) in [
            (&mut state.u_plus, &state.phi_plus, Sign::Plus),
            (&mut state.u_minus, &state.phi_minus, Sign::Minus),
        ] {
            if is_zero(u) {
                continue;
            }
            let w = group_velocity(spec, phi, sign)?;
            let (cala, calv) = (&state.cala, &state.calv);
            u.map_points(|i, v| {
                let nl = cala[0][i] * w[0][i] + cala[1][i] * w[1][i] + cala[2][i] * w[2][i] - calv[i];
                let r = C64::from_polar(1.0, nl * dt);
                v.map(|z| z * r)
            });
        }
        Ok(())
    }

    pub fn advance(&self, state: &mut WkbState) -> Result<()> {
        let dt = self.cfg.dt;
        match self.cfg.splitting {
            Splitting::Strang => {
                self.transport_step1(state, 0.5 * dt)?;
                self.transport_step2(state, dt)?;
                self.transport_step1(state, 0.5 * dt)?;
            }
            Splitting::FirstOrder => {
                self.transport_step1(state, dt)?;
                self.transport_step2(state, dt)?;
            }
        }
        state.step_index += 1;
        state.time = state.step_index as f64 * dt;
        state.u_plus.time = state.time;
        state.u_minus.time = state.time;
        Ok(())
    }
}

/// Positive-energy amplitude polarized along ξ = ∇φ_I, regularized at ξ → 0.
pub fn polarized_vector(xi: [f64; 3]) -> Spinor {
    let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    if k2 == 0.0 {
        return [C64::new(1.0, 0.0), C64::default(), C64::default(), C64::default()];
    }
    let f = (lambda0(xi) + 1.0) / (2.0 * k2);
    let xy = C64::new(xi[0], xi[1]);
    [
        C64::new((xi[0] * xi[0] + xi[1] * xi[1]) * f, 0.0),
        -xy * (xi[2] * f),
        C64::default(),
        xy * 0.5,
    ]
}

/// Where the initial amplitude comes from.
#[derive(Debug, Clone, Copy)]
pub enum AmplitudeBase<'a> {
    /// The explicit polarized vector built from ∇φ_I.
    Explicit,
    /// Π₀±(∇φ_I) applied pointwise to a given amplitude.
    Project { u_init: &'a SpinorField, sign: Sign },
}

pub fn polarized_amplitude(spec: &Spectral, phi_init: &[f64], base: AmplitudeBase<'_>) -> Result<SpinorField> {
    let grid = *spec.grid();
    let grad = spec.gradient_real(phi_init)?;
    let xi = |i: usize| [grad[0][i], grad[1][i], grad[2][i]];
    match base {
        AmplitudeBase::Explicit => {
            let values: Vec<Spinor> = (0..grid.len()).into_par_iter().map(|i| polarized_vector(xi(i))).collect();
            Ok(SpinorField::from_points(grid, &values))
        }
        AmplitudeBase::Project { u_init, sign } => {
            if u_init.grid() != &grid {
                return Err(Error::Grid("initial amplitude and transform use different grids".into()));
            }
            let mut out = u_init.clone();
            out.map_points(|i, v| project(xi(i), sign, &v));
            Ok(out)
        }
    }
}

/// u⁺e^{iφ⁺/ε} + u⁻e^{iφ⁻/ε}.
pub fn wkb_reconstruct(state: &WkbState, epsilon: f64) -> SpinorField {
    let mut out = state.u_plus.clone();
    out.map_points(|i, v| {
        let ep = C64::from_polar(1.0, state.phi_plus[i] / epsilon);
        let em = C64::from_polar(1.0, state.phi_minus[i] / epsilon);
        let w = state.u_minus.at(i);
        std::array::from_fn(|k| v[k] * ep + w[k] * em)
    });
    out.time = state.time;
    out
}

/// Pointwise |u⁺|² + |u⁻|².
pub fn wkb_density(state: &WkbState) -> Vec<f64> {
    (0..state.grid().len())
        .into_par_iter()
        .map(|i| norm_sq(&state.u_plus.at(i)) + norm_sq(&state.u_minus.at(i)))
        .collect()
}
