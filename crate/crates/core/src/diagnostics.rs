//! Conservation monitors, error norms, reference solutions and time series.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::dirac::{apply_projector, lambda0, ProjectorMode, Sign};
use crate::error::{Error, Result};
use crate::field::{norm_sq, PotentialState, SpinorField};
use crate::grid::{det_max, det_sum, GridSpec, Spectral, C64};

/// Exact plane-wave solution of the coupled system with ε = δ = 1 under the
/// external fields `V = −t²/2`, `A = −t²ξ₀/(2λ₀(ξ₀))`.
pub fn exact_plane_wave(t: f64, grid: &GridSpec, xi0: [f64; 3]) -> Result<(SpinorField, PotentialState)> {
    let len = grid.lengths();
    for j in 0..3 {
        let k = xi0[j] * len[j] / (2.0 * PI);
        if (k - k.round()).abs() > 1e-9 * k.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "wavenumber {} on axis {j} is not periodic on a box of length {}",
                xi0[j], len[j]
            )));
        }
    }
    let lam = lambda0(xi0);
    let norm = 1.0 / (2.0 * (lam * lam - lam)).sqrt();
    let chi = [
        C64::new(xi0[2], 0.0),
        C64::new(xi0[0], xi0[1]),
        C64::new(lam - 1.0, 0.0),
        C64::default(),
    ]
    .map(|c| c * norm);
    let psi = SpinorField::from_fn(*grid, |x| {
        let ph = C64::from_polar(1.0, xi0[0] * x[0] + xi0[1] * x[1] + xi0[2] * x[2] - t * lam);
        chi.map(|c| c * ph)
    })
    .with_time(t);
    let mut pot = PotentialState::zeros(*grid);
    let n = grid.len();
    pot.v = vec![0.5 * t * t; n];
    pot.v_t = vec![t; n];
    for k in 0..3 {
        pot.a[k] = vec![0.5 * t * t * xi0[k] / lam; n];
        pot.a_t[k] = vec![t * xi0[k] / lam; n];
    }
    pot.time = t;
    Ok((psi, pot))
}

/// Gauge defect δ·∂tV̂ + iξ·Â, split into the mean mode and all others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeResidual {
    /// Max over ξ ≠ 0, normalized by max(1, ‖V̂‖∞).
    pub nonzero_modes: f64,
    /// |δ·∂tV̂(0)|, same normalization.
    pub mean_mode: f64,
}

pub fn gauge_residual(spec: &Spectral, pot: &PotentialState, delta: f64) -> Result<GaugeResidual> {
    let vt = spec.dft_real(&pot.v_t)?;
    let a: Vec<Vec<C64>> = pot.a.iter().map(|f| spec.dft_real(f)).collect::<Result<_>>()?;
    let v = spec.dft_real(&pot.v)?;
    let ladder = spec.ladder();
    let defect = |i: usize| {
        let xi = ladder.xi_deriv(i);
        let div: C64 = (0..3).map(|k| C64::new(0.0, xi[k]) * a[k][i]).sum();
        (vt[i] * delta + div).norm()
    };
    let scale = det_max(v.len(), |i| v[i].norm()).max(1.0);
    let rest = det_max(v.len() - 1, |i| defect(i + 1));
    Ok(GaugeResidual { nonzero_modes: rest / scale, mean_mode: defect(0) / scale })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// ‖a − b‖ / ‖b‖ in the discrete l² norm; infinite when ‖b‖ = 0 ≠ ‖a − b‖.
    pub l2_rel: f64,
    /// max over points of |a − b|.
    pub linf_abs: f64,
}

/// Compare `a` against the reference `b`.
pub fn error_norms(a: &SpinorField, b: &SpinorField) -> Result<ErrorNorms> {
    a.check_same_grid(b)?;
    let n = a.grid().len();
    let diff = |i: usize| {
        let (x, y) = (a.at(i), b.at(i));
        (0..4).map(|k| (x[k] - y[k]).norm_sqr()).sum::<f64>()
    };
    let num = det_sum(n, diff);
    let den = det_sum(n, |i| norm_sq(&b.at(i)));
    let l2_rel = if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).sqrt()
    };
    let linf_abs = det_max(n, |i| diff(i).sqrt());
    Ok(ErrorNorms { l2_rel, linf_abs })
}

/// Pointwise squared magnitude of the projected spinor.
pub fn projector_density(spec: &Spectral, psi: &SpinorField, sign: Sign, mode: ProjectorMode<'_>) -> Result<Vec<f64>> {
    Ok(apply_projector(spec, psi, sign, mode)?.density())
}

/// Observed order between consecutive refinement levels:
/// log(e_coarse/e_fine)/log(h_coarse/h_fine).
pub fn convergence_orders(h: &[f64], err: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(err.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

/// Per-point max of |a|² summed over a pair of fields, used for projected
/// comparisons.
pub fn pointwise_pair_difference(a: (&SpinorField, &SpinorField), b: (&SpinorField, &SpinorField)) -> Result<f64> {
    a.0.check_same_grid(b.0)?;
    a.1.check_same_grid(b.1)?;
    let n = a.0.grid().len();
    Ok(det_max(n, |i| {
        let d = |x: [C64; 4], y: [C64; 4]| (0..4).map(|k| (x[k] - y[k]).norm_sqr()).sum::<f64>();
        d(a.0.at(i), b.0.at(i)) + d(a.1.at(i), b.1.at(i))
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub charge: f64,
    pub gauge_residual: f64,
    pub l2_error: f64,
    pub linf_error: f64,
    pub extra: Vec<f64>,
}

/// Rows of scalar monitors, one per recorded step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    extra_names: Vec<String>,
    rows: Vec<SeriesRow>,
}

pub const SERIES_COLUMNS: [&str; 5] = ["t", "charge", "gauge_residual", "l2_error", "linf_error"];

impl TimeSeries {
    pub fn new(extra_names: Vec<String>) -> Self {
        Self { extra_names, rows: Vec::new() }
    }

    pub fn extra_names(&self) -> &[String] {
        &self.extra_names
    }

    pub fn rows(&self) -> &[SeriesRow] {
        &self.rows
    }

    pub fn push(&mut self, row: SeriesRow) -> Result<()> {
        if row.extra.len() != self.extra_names.len() {
            return Err(Error::InvalidParameter(format!(
                "time series row has {} extra values, expected {}",
                row.extra.len(),
                self.extra_names.len()
            )));
        }
        if let Some(last) = self.rows.last() {
            if !(row.t > last.t) {
                return Err(Error::InvalidParameter(format!("time series times must increase: {} after {}", row.t, last.t)));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn header(&self) -> String {
        SERIES_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.extra_names.iter().cloned())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.header())?;
        for r in &self.rows {
            let mut line = format!("{},{},{},{},{}", r.t, r.charge, r.gauge_residual, r.l2_error, r.linf_error);
            for v in &r.extra {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parse the CSV written by [`TimeSeries::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < SERIES_COLUMNS.len() || cols[..SERIES_COLUMNS.len()] != SERIES_COLUMNS {
            return Err(Error::Format(format!("unexpected CSV header `{header}`")));
        }
        let mut series = Self::new(cols[SERIES_COLUMNS.len()..].iter().map(|s| s.to_string()).collect());
        for (ln, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", ln + 2))))
                .collect::<Result<_>>()?;
            if vals.len() != cols.len() {
                return Err(Error::Format(format!("line {}: expected {} columns", ln + 2, cols.len())));
            }
            series.push(SeriesRow {
                t: vals[0],
                charge: vals[1],
                gauge_residual: vals[2],
                l2_error: vals[3],
                linf_error: vals[4],
                extra: vals[5..].to_vec(),
            })?;
        }
        Ok(series)
    }
}

/// Largest pointwise density of a scalar field, for reporting.
pub fn max_value(f: &[f64]) -> f64 {
    f.par_iter().cloned().reduce(|| f64::NEG_INFINITY, f64::max)
}
