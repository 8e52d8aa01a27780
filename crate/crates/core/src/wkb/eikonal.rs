//! Relaxation scheme for the phase equation φ_t + h(t, x, ∇φ) = 0.

use rayon::prelude::*;

use crate::dirac::{lambda0, Sign};
use crate::error::{Error, Result};
use crate::field::ExternalFields;
use crate::grid::{det_max, GridSpec};

/// Energy branch plus the scalar external potential.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub sign: Sign,
    pub external: ExternalFields,
}

impl HamiltonianSpec {
    pub fn new(sign: Sign, external: ExternalFields) -> Self {
        Self { sign, external }
    }

    /// h(t, x, p) = ±λ₀(p) + V^ex(t, x).
    #[inline]
    pub fn h(&self, t: f64, x: [f64; 3], p: [f64; 3]) -> f64 {
        self.sign.value() * lambda0(p) + self.external.scalar(t, x)
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Second-order limited one-sided gradients (p⁻, p⁺) at every point.
fn one_sided_gradients(grid: &GridSpec, phi: &[f64]) -> Vec<([f64; 3], [f64; 3])> {
    let h = grid.spacing();
    let n = grid.n();
    let strides = [n[1] * n[2], n[2], 1];
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let m = grid.multi_index(i);
            let mut pm = [0.0; 3];
            let mut pp = [0.0; 3];
            for j in 0..3 {
                let base = i - m[j] * strides[j];
                let at = |k: usize| {
                    let mut q = m[j] + n[j] + k - 2;
                    while q >= n[j] {
                        q -= n[j];
                    }
                    phi[base + q * strides[j]]
                };
                let s = [at(0), at(1), at(2), at(3), at(4)];
                let dx = h[j];
                let dd = |k: usize| (s[k + 1] - 2.0 * s[k] + s[k - 1]) / (dx * dx);
                let (d_im1, d_i, d_ip1) = (dd(1), dd(2), dd(3));
                pp[j] = (s[3] - s[2]) / dx - 0.5 * dx * minmod(d_i, d_ip1);
                pm[j] = (s[2] - s[1]) / dx + 0.5 * dx * minmod(d_i, d_im1);
            }
            (pm, pp)
        })
        .collect()
}

fn speed_of(grads: &[([f64; 3], [f64; 3])]) -> f64 {
    det_max(grads.len(), |i| {
        let (pm, pp) = grads[i];
        let s = |p: [f64; 3]| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() / lambda0(p);
        s(pm).max(s(pp))
    })
}

fn limit_for(grid: &GridSpec, speed: f64) -> f64 {
    let dx = grid.spacing().into_iter().fold(f64::INFINITY, f64::min);
    if speed > 0.0 {
        dx / (2.0 * speed)
    } else {
        f64::INFINITY
    }
}

/// Largest characteristic speed |∇_p h| over the grid.
pub fn max_speed(grid: &GridSpec, phi: &[f64]) -> Result<f64> {
    grid.check_len(phi.len())?;
    Ok(speed_of(&one_sided_gradients(grid, phi)))
}

/// Largest stable step Δx_min/(2·max|∇_p h|).
pub fn cfl_limit(grid: &GridSpec, phi: &[f64]) -> Result<f64> {
    Ok(limit_for(grid, max_speed(grid, phi)?))
}

/// −Ĥ(t, x, p⁻, p⁺) with the relaxed Lax–Friedrichs numerical Hamiltonian.
pub fn eiconal_rhs(grid: &GridSpec, phi: &[f64], spec: &HamiltonianSpec, t: f64) -> Result<Vec<f64>> {
    grid.check_len(phi.len())?;
    Ok(rhs_with_speed(grid, phi, spec, t).0)
}

/// Right-hand side together with the largest characteristic speed.
fn rhs_with_speed(grid: &GridSpec, phi: &[f64], spec: &HamiltonianSpec, t: f64) -> (Vec<f64>, f64) {
    let grads = one_sided_gradients(grid, phi);
    let speeds: [f64; 3] = std::array::from_fn(|j| {
        det_max(grads.len(), |i| {
            let (pm, pp) = grads[i];
            (pm[j].abs() / lambda0(pm)).max(pp[j].abs() / lambda0(pp))
        })
    });
    let rhs = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (pm, pp) = grads[i];
            let mid = std::array::from_fn(|j| 0.5 * (pm[j] + pp[j]));
            let visc: f64 = (0..3).map(|j| 0.5 * speeds[j] * (pp[j] - pm[j])).sum();
            -(spec.h(t, grid.point(i), mid) - visc)
        })
        .collect();
    (rhs, speed_of(&grads))
}

/// One classical RK4 step of the semi-discrete phase equation.
pub fn eiconal_step(grid: &GridSpec, phi: &[f64], dt: f64, spec: &HamiltonianSpec, t: f64) -> Result<Vec<f64>> {
    grid.check_len(phi.len())?;
    let (k1, speed) = rhs_with_speed(grid, phi, spec, t);
    rk4_from(grid, phi, k1, speed, dt, spec, t)
}

fn rk4_from(grid: &GridSpec, phi: &[f64], k1: Vec<f64>, speed: f64, dt: f64, spec: &HamiltonianSpec, t: f64) -> Result<Vec<f64>> {
    let limit = limit_for(grid, speed);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { phi.par_iter().zip(k).map(|(p, k)| p + a * k).collect() };
    let k2 = eiconal_rhs(grid, &axpy(0.5 * dt, &k1), spec, t + 0.5 * dt)?;
    let k3 = eiconal_rhs(grid, &axpy(0.5 * dt, &k2), spec, t + 0.5 * dt)?;
    let k4 = eiconal_rhs(grid, &axpy(dt, &k3), spec, t + dt)?;
    let out: Vec<f64> = (0..phi.len())
        .into_par_iter()
        .map(|i| phi[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if out.par_iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("phase".into()));
    }
    Ok(out)
}

/// Advance over `dt`, sub-cycling so that every RK4 step respects the CFL limit.
pub fn eiconal_advance(grid: &GridSpec, phi: &[f64], dt: f64, spec: &HamiltonianSpec, t: f64) -> Result<Vec<f64>> {
    grid.check_len(phi.len())?;
    let mut cur = phi.to_vec();
    let mut done = 0.0;
    while done < dt {
        let remaining = dt - done;
        let (k1, speed) = rhs_with_speed(grid, &cur, spec, t + done);
        let limit = limit_for(grid, speed);
        let pieces = if limit.is_finite() { (remaining / limit).ceil().max(1.0) } else { 1.0 };
        let h = if pieces == 1.0 { remaining } else { remaining / pieces };
        cur = rk4_from(grid, &cur, k1, speed, h, spec, t + done)?;
        done = if pieces == 1.0 { dt } else { done + h };
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmod_picks_smaller_same_sign() {
        assert_eq!(minmod(1.0, 2.0), 1.0);
        assert_eq!(minmod(-3.0, -2.0), -2.0);
        assert_eq!(minmod(1.0, -2.0), 0.0);
    }

    #[test]
    fn constant_phase_rest_energy() {
        let g = GridSpec::cube(-0.5, 0.5, 8).unwrap();
        let phi = vec![0.3; g.len()];
        let spec = HamiltonianSpec::new(Sign::Plus, ExternalFields::none());
        let rhs = eiconal_rhs(&g, &phi, &spec, 0.0).unwrap();
        assert!(rhs.iter().all(|v| (v + 1.0).abs() < 1e-15));
        let trap = HamiltonianSpec::new(Sign::Plus, ExternalFields::harmonic(1.0));
        let rhs = eiconal_rhs(&g, &phi, &trap, 0.0).unwrap();
        for i in 0..g.len() {
            let x = g.point(i);
            assert!((rhs[i] + 1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_phase_decreases_linearly() {
        let g = GridSpec::cube(-0.5, 0.5, 4).unwrap();
        let spec = HamiltonianSpec::new(Sign::Plus, ExternalFields::none());
        let mut phi = vec![0.0; g.len()];
        for n in 0..8 {
            phi = eiconal_step(&g, &phi, 1.0 / 128.0, &spec, n as f64 / 128.0).unwrap();
        }
        assert!(phi.iter().all(|v| (v + 8.0 / 128.0).abs() < 1e-15));
    }
}
