//! Driving runs from a parameter set: single runs, refinement sweeps and
//! regime comparisons, each writing its results under the output directory.

pub mod config;
pub mod dump;
mod simulation;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{ConvergeAxis, PresetName, RegimePair, RunParams, SolverKind};
pub use dump::{DumpHeader, DumpRecord, ValueKind};
pub use simulation::Simulation;

use crate::diagnostics::{convergence_orders, error_norms, exact_plane_wave, pointwise_pair_difference, TimeSeries};
use crate::dirac::nr_projector_split;
use crate::error::{Error, Result};
use crate::wkb::CausticEvent;

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub series: TimeSeries,
    pub dumps: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn steps_for(t: f64, dt: f64, key: &str) -> Result<usize> {
    let k = (t / dt).round();
    if !(k >= 0.0) || (k * dt - t).abs() > 1e-9 * t.abs().max(dt) {
        return Err(Error::config(key, format!("{t} is not a multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Run one simulation to `t_final`, writing `manifest.txt`,
/// `timeseries.csv` and the requested dumps into `out_dir`.
///
/// The time series is written even when the run aborts.
pub fn run(params: &RunParams) -> Result<RunSummary> {
    if params.stride == 0 {
        return Err(Error::config("output.stride", "stride must be at least 1"));
    }
    let cfg = params.sim_config()?;
    let steps = cfg.steps()?;
    let mut dump_steps = Vec::new();
    for &t in &params.dump_times {
        let k = steps_for(t, params.dt, "output.dump_times")?;
        if k > steps {
            return Err(Error::config("output.dump_times", format!("{t} is past t_final")));
        }
        dump_steps.push(k);
    }
    let out = &params.out_dir;
    fs::create_dir_all(out)?;
    write_text(&out.join("manifest.txt"), &params.manifest())?;

    let (mut sim, warnings) = Simulation::new(params)?;
    let mut series = TimeSeries::new(sim.extra_names());
    let mut dumps = Vec::new();
    let result = (|| -> Result<()> {
        loop {
            let k = sim.step_index();
            if k % params.stride == 0 || k == steps {
                series.push(sim.series_row()?)?;
            }
            if dump_steps.contains(&k) {
                for rec in sim.dumps(params.epsilon, params.delta)? {
                    let path = out.join(format!("{}_{k:06}.mdk", rec.header.name));
                    rec.write_file(&path)?;
                    dumps.push(path);
                }
            }
            if k == steps {
                return Ok(());
            }
            sim.step()?;
        }
    })();
    let mut f = std::io::BufWriter::new(fs::File::create(out.join("timeseries.csv"))?);
    series.write_csv(&mut f)?;
    f.flush()?;
    result?;
    Ok(RunSummary { steps, final_time: sim.time(), series, dumps, warnings })
}

/// Advance a fresh simulation to `t_final` without writing anything.
pub fn run_to_end(params: &RunParams) -> Result<Simulation> {
    let steps = params.sim_config()?.steps()?;
    let (mut sim, _) = Simulation::new(params)?;
    for _ in 0..steps {
        sim.step()?;
    }
    Ok(sim)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: f64,
    pub n: [usize; 3],
    pub dt: f64,
    pub l2: f64,
    pub linf: f64,
    /// Observed orders against the previous, coarser level.
    pub l2_order: Option<f64>,
    pub linf_order: Option<f64>,
}

fn level_params(base: &RunParams, axis: ConvergeAxis, level: f64) -> Result<RunParams> {
    let mut p = base.clone();
    match axis {
        ConvergeAxis::Time => p.dt = level,
        ConvergeAxis::Space => {
            for j in 0..3 {
                let len = p.grid_upper[j] - p.grid_lower[j];
                let n = (len / level).round();
                if (n * level - len).abs() > 1e-9 * len || n < 2.0 {
                    return Err(Error::config("converge.levels", format!("{level} does not divide the box")));
                }
                p.grid_n[j] = n as usize;
            }
        }
    }
    Ok(p)
}

/// Error at `t_final` for each refinement level.
///
/// The spatial sweep needs the closed-form solution; the temporal sweep
/// falls back to a reference run with a quarter of the finest step.
pub fn convergence_sweep(params: &RunParams, axis: ConvergeAxis, levels: &[f64], parallel: bool) -> Result<Vec<ConvergenceRow>> {
    if params.solver != SolverKind::Md {
        return Err(Error::config("solver", "refinement sweeps use the md solver"));
    }
    if levels.is_empty() || levels.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::config("converge.levels", "levels must be positive and non-empty"));
    }
    let exact = params.has_exact_solution();
    if !exact && axis == ConvergeAxis::Space {
        return Err(Error::config("converge.axis", "spatial sweeps need an exact solution"));
    }
    let runs: Vec<RunParams> = levels.iter().map(|&h| level_params(params, axis, h)).collect::<Result<_>>()?;
    let reference = if exact {
        None
    } else {
        let finest = levels.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut p = params.clone();
        p.dt = finest / 4.0;
        Some(run_to_end(&p)?.spinor())
    };
    let measure = |p: &RunParams| -> Result<(f64, f64)> {
        let sim = run_to_end(p)?;
        let psi = sim.spinor();
        let e = match &reference {
            Some(r) => error_norms(&psi, r)?,
            None => error_norms(&psi, &exact_plane_wave(sim.time(), psi.grid(), p.wave_vector())?.0)?,
        };
        Ok((e.l2_rel, e.linf_abs))
    };
    let errs: Vec<(f64, f64)> = if parallel {
        runs.par_iter().map(measure).collect::<Result<_>>()?
    } else {
        runs.iter().map(measure).collect::<Result<_>>()?
    };
    let l2: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let linf: Vec<f64> = errs.iter().map(|e| e.1).collect();
    let (o2, oinf) = (convergence_orders(levels, &l2), convergence_orders(levels, &linf));
    Ok((0..levels.len())
        .map(|i| ConvergenceRow {
            level: levels[i],
            n: runs[i].grid_n,
            dt: runs[i].dt,
            l2: l2[i],
            linf: linf[i],
            l2_order: i.checked_sub(1).map(|j| o2[j]),
            linf_order: i.checked_sub(1).map(|j| oinf[j]),
        })
        .collect())
}

/// CSV text for a sweep; order columns appear only with two or more levels.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let with_order = rows.len() > 1;
    let mut s = String::from("level,n1,n2,n3,dt,l2_error,linf_error");
    if with_order {
        s.push_str(",l2_order,linf_order");
    }
    s.push('\n');
    let opt = |o: Option<f64>| o.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        s.push_str(&format!("{},{},{},{},{},{},{}", r.level, r.n[0], r.n[1], r.n[2], r.dt, r.l2, r.linf));
        if with_order {
            s.push_str(&format!(",{},{}", opt(r.l2_order), opt(r.linf_order)));
        }
        s.push('\n');
    }
    s
}

pub fn write_convergence(params: &RunParams, rows: &[ConvergenceRow]) -> Result<PathBuf> {
    fs::create_dir_all(&params.out_dir)?;
    write_text(&params.out_dir.join("manifest.txt"), &params.manifest())?;
    let path = params.out_dir.join("converge.csv");
    write_text(&path, &convergence_csv(rows))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    /// ε for the semiclassical pairs, δ for the nonrelativistic pair.
    pub value: f64,
    /// Last time included in the maxima.
    pub t_end: f64,
    /// Maximum over time of the relative l² difference of the spinors.
    pub l2: f64,
    /// Maximum over time and space of the pointwise difference.
    pub linf: f64,
    /// Maximum over time and space of |ψe−φe|² + |ψp−φp|² (md_vs_sp only).
    pub pair_sup: Option<f64>,
    pub caustic: Option<CausticEvent>,
}

fn compare_one(params: &RunParams, pair: RegimePair, value: f64, t_window: f64) -> Result<ComparisonRow> {
    let mut p = params.clone();
    p.t_final = t_window;
    p.solver = SolverKind::Md;
    match pair {
        RegimePair::MdVsSp => p.delta = value,
        RegimePair::MdVsWkb | RegimePair::MdVsMd => p.epsilon = value,
    }
    let steps = steps_for(t_window, p.dt, "compare.t_final")?;
    let mut q = p.clone();
    q.solver = match pair {
        RegimePair::MdVsWkb => SolverKind::Wkb,
        RegimePair::MdVsSp => SolverKind::Sp,
        RegimePair::MdVsMd => SolverKind::Md,
    };
    let (mut md, _) = Simulation::new(&p)?;
    let (mut other, _) = Simulation::new(&q)?;
    let spec = crate::grid::Spectral::new(p.grid()?);
    let projection = p.nr_projection();
    let mut row = ComparisonRow { value, t_end: 0.0, l2: 0.0, linf: 0.0, pair_sup: None, caustic: None };
    for k in 0..=steps {
        let (a, b) = (md.spinor(), other.spinor());
        let e = error_norms(&b, &a)?;
        row.l2 = row.l2.max(e.l2_rel);
        row.linf = row.linf.max(e.linf_abs);
        if let (Simulation::Sp { state, .. }, RegimePair::MdVsSp) = (&other, pair) {
            let (pe, pp) = nr_projector_split(&spec, &a, projection, md.time())?;
            let d = pointwise_pair_difference((&pe, &pp), (&state.phi_e, &state.phi_p))?;
            row.pair_sup = Some(row.pair_sup.unwrap_or(0.0).max(d));
        }
        row.t_end = md.time();
        if k == steps {
            break;
        }
        md.step()?;
        match other.step() {
            Ok(()) => {}
            Err(Error::Caustic { time, value, .. }) => {
                row.caustic = Some(CausticEvent { time, value });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(row)
}

/// Lockstep runs of two regimes for each parameter value. A caustic in the
/// WKB run ends that comparison; the maxima cover the times before it.
pub fn compare_regimes(params: &RunParams, pair: RegimePair, values: &[f64], t_window: f64, parallel: bool) -> Result<Vec<ComparisonRow>> {
    if values.is_empty() {
        return Err(Error::config("compare.values", "no values to compare"));
    }
    if parallel {
        values.par_iter().map(|&v| compare_one(params, pair, v, t_window)).collect()
    } else {
        values.iter().map(|&v| compare_one(params, pair, v, t_window)).collect()
    }
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("value,t_end,l2_error,linf_error,pair_sup,caustic_time\n");
    let opt = |o: Option<f64>| o.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.value,
            r.t_end,
            r.l2,
            r.linf,
            opt(r.pair_sup),
            opt(r.caustic.map(|c| c.time))
        ));
    }
    s
}

pub fn write_comparison(params: &RunParams, rows: &[ComparisonRow]) -> Result<PathBuf> {
    fs::create_dir_all(&params.out_dir)?;
    write_text(&params.out_dir.join("manifest.txt"), &params.manifest())?;
    let path = params.out_dir.join("compare.csv");
    write_text(&path, &comparison_csv(rows))?;
    Ok(path)
}
