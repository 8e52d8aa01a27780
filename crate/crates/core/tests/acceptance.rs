//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line;
//! the test fails if any of them fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::Matrix4;
use rand::{rngs::StdRng, Rng, SeedableRng};

use mdkit::dirac::{self, Mat4, Sign};
use mdkit::runner::{self, ConvergeAxis, PresetName, RegimePair, RunParams, Simulation, SolverKind};
use mdkit::wkb::{eiconal_advance, max_div_velocity, HamiltonianSpec};
use mdkit::{Spectral, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_factor(value: f64, target: f64, factor: f64) -> bool {
    let r = value / target;
    r.is_finite() && r >= 1.0 / factor && r <= factor
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fitted_order(h: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

const PRESETS: [PresetName; 6] = [
    PresetName::ExactPlaneWave,
    PresetName::SteadyState,
    PresetName::SelfConsistent,
    PresetName::Harmonic,
    PresetName::NrGaussian,
    PresetName::NrHarmonic,
];

/// A preset shrunk to a 16³ grid for per-step property checks.
fn reduced(name: PresetName) -> RunParams {
    let mut p = RunParams::preset(name);
    p.grid_n = [16; 3];
    p
}

fn spatial_convergence() -> Outcome {
    let mut p = RunParams::preset(PresetName::ExactPlaneWave);
    p.t_final = 0.25;
    p.dt = 1.0 / 1024.0;
    let levels = [0.25, 0.125, 0.0625];
    let rows = runner::convergence_sweep(&p, ConvergeAxis::Space, &levels, false).unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| r.l2).collect();
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.l2_order).collect();
    let pass = orders.iter().all(|&o| o >= 4.0) && within_factor(errs[2], 6.95e-5, 3.0);
    outcome(pass, format!("l2 errors {}, orders {orders:.2?}, target 6.95e-5 at dx = 1/16", sci(&errs)))
}

fn temporal_convergence() -> Outcome {
    let mut p = RunParams::preset(PresetName::ExactPlaneWave);
    p.t_final = 0.25;
    p.grid_n = [32; 3];
    let levels = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let rows = runner::convergence_sweep(&p, ConvergeAxis::Time, &levels, false).unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| r.l2).collect();
    let order = fitted_order(&levels, &errs);
    let pass = (order - 2.0).abs() <= 0.3 && within_factor(errs[3], 3.21e-6, 3.0);
    outcome(pass, format!("l2 errors {}, fitted order {order:.2}, target 3.21e-6 at dt = 1/128", sci(&errs)))
}

fn charge_conservation() -> Outcome {
    let mut p = RunParams::preset(PresetName::ExactPlaneWave);
    p.grid_n = [32; 3];
    p.dt = 1.0 / 1024.0;
    p.t_final = 1.0;
    let (mut sim, _) = Simulation::new(&p).unwrap();
    let mut worst_abs = (sim.charge() - 1.0).abs();
    while sim.time() < p.t_final - 0.5 * p.dt {
        sim.step().unwrap();
        worst_abs = worst_abs.max((sim.charge() - 1.0).abs());
    }

    let mut worst_step: f64 = 0.0;
    for name in PRESETS {
        let mut solvers = vec![SolverKind::Md];
        if matches!(name, PresetName::NrGaussian | PresetName::NrHarmonic) {
            solvers.push(SolverKind::Sp);
        }
        for solver in solvers {
            let mut p = reduced(name);
            p.solver = solver;
            let (mut sim, _) = Simulation::new(&p).unwrap();
            let q0 = sim.charge();
            for _ in 0..8 {
                let q = sim.charge();
                sim.step().unwrap();
                worst_step = worst_step.max((sim.charge() - q).abs() / q0);
            }
        }
    }
    let pass = worst_abs <= 1e-7 && worst_step <= 1e-12;
    outcome(pass, format!("max |q - 1| = {worst_abs:.2e} over t in [0, 1]; worst per-step drift on presets {worst_step:.2e}"))
}

fn lorentz_gauge() -> Outcome {
    let mut report = Vec::new();
    let mut pass = true;
    for name in PRESETS {
        let mut p = reduced(name);
        p.potential_init = mdkit::runner::config::PotentialInitMode::Poisson;
        let (mut sim, _) = Simulation::new(&p).unwrap();
        let mut worst = sim.series_row().unwrap().gauge_residual;
        for _ in 0..8 {
            sim.step().unwrap();
            worst = worst.max(sim.series_row().unwrap().gauge_residual);
        }
        pass &= worst <= 1e-11;
        report.push(format!("{name} {worst:.1e}"));
    }
    outcome(pass, format!("max residual per preset: {}", report.join(", ")))
}

fn to_na(m: &Mat4) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| m[r][c])
}

fn unitarity_and_projectors() -> Outcome {
    let id = dirac::identity();
    let dt = 1.0 / 128.0;
    let (mut unit, mut proj) = (0.0f64, 0.0f64);
    for (eps, delta) in [(1.0, 1.0), (0.01, 1.0), (1.0, 0.01)] {
        for k1 in -16..16 {
            for k2 in -16..16 {
                for k3 in -16..16 {
                    let xi = [k1, k2, k3].map(|k| 2.0 * PI * k as f64);
                    let u = dirac::step1_propagator(xi, dt, eps, delta);
                    unit = unit.max(dirac::max_abs_diff(&dirac::mat_mul(&dirac::adjoint(&u), &u), &id));
                    if eps == 1.0 && delta == 1.0 {
                        let p = dirac::free_projector(xi, Sign::Plus);
                        let m = dirac::free_projector(xi, Sign::Minus);
                        let zero = [[C64::default(); 4]; 4];
                        proj = proj
                            .max(dirac::max_abs_diff(&dirac::mat_mul(&p, &p), &p))
                            .max(dirac::max_abs_diff(&dirac::mat_mul(&m, &m), &m))
                            .max(dirac::max_abs_diff(&dirac::mat_mul(&p, &m), &zero));
                    }
                }
            }
        }
    }

    let mut rng = StdRng::seed_from_u64(2024);
    let mut expm: f64 = 0.0;
    for _ in 0..100 {
        let xi: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-100.0..100.0));
        let eps = rng.gen_range(0.05..1.0);
        let delta = rng.gen_range(0.05..1.0);
        let sym = to_na(&dirac::dirac_symbol(xi.map(|x| x * eps * delta)));
        let reference = (sym * C64::new(0.0, -dt / (eps * delta * delta))).exp();
        let diff = to_na(&dirac::step1_propagator(xi, dt, eps, delta)) - reference;
        expm = expm.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let pass = unit <= 1e-12 && proj <= 1e-13 && expm <= 1e-11;
    outcome(pass, format!("unitarity {unit:.1e}, projector algebra {proj:.1e}, matrix exponential {expm:.1e}"))
}

fn semiclassical_scaling() -> Outcome {
    let mut p = RunParams::preset(PresetName::SteadyState);
    p.dt = 1.0 / 128.0;
    p.grid_n = [32; 3];
    let rows = runner::compare_regimes(&p, RegimePair::MdVsWkb, &[1e-2, 1e-3], 0.25, false).unwrap();
    let (a, b) = (rows[0].l2, rows[1].l2);
    let ratio = a / b;
    let pass = (5.0..=20.0).contains(&ratio) && within_factor(a, 2.98e-1, 3.0) && rows.iter().all(|r| r.caustic.is_none());
    outcome(pass, format!("sup l2 difference {a:.3e} (eps 1e-2), {b:.3e} (eps 1e-3), ratio {ratio:.2}"))
}

fn wkb_structure() -> Outcome {
    let mut p = RunParams::preset(PresetName::SteadyState);
    p.solver = SolverKind::Wkb;
    p.grid_n = [32; 3];
    let (mut sim, _) = Simulation::new(&p).unwrap();
    let density0 = match &sim {
        Simulation::Wkb { state, .. } => state.u_plus.density(),
        _ => unreachable!(),
    };
    let (mut drift, mut minus_zero) = (0.0f64, true);
    while sim.time() < 0.25 - 0.5 * p.dt {
        sim.step().unwrap();
        if let Simulation::Wkb { state, .. } = &sim {
            let d = state.u_plus.density();
            drift = d.iter().zip(&density0).map(|(a, b)| (a - b).abs()).fold(drift, f64::max);
            minus_zero &= state.u_minus.components().iter().flatten().all(|z| z.re == 0.0 && z.im == 0.0);
        }
    }
    let pass = drift <= 1e-10 && minus_zero;
    outcome(pass, format!("max pointwise change of |u+|^2 {drift:.1e}, u- identically zero: {minus_zero}"))
}

fn caustic_detection() -> Outcome {
    let mut p = RunParams::preset(PresetName::SelfConsistent);
    p.grid_n = [128; 3];
    let grid = p.grid().unwrap();
    let spec = Spectral::new(grid);
    let hs = HamiltonianSpec::new(Sign::Plus, p.external());
    let mut phi = p.phase_field(&grid);
    let (mut t, mut flagged) = (0.0, None);
    let mut indicator = 0.0;
    while t < 0.75 {
        phi = eiconal_advance(&grid, &phi, p.dt, &hs, t).unwrap();
        t += p.dt;
        indicator = max_div_velocity(&spec, &phi, Sign::Plus).unwrap();
        if indicator > p.caustic_threshold {
            flagged = Some(t);
            break;
        }
    }
    match flagged {
        Some(tc) => outcome((tc - 0.56).abs() <= 0.05, format!("flagged at t = {tc:.4} (indicator {indicator:.1}, threshold {})", p.caustic_threshold)),
        None => outcome(false, format!("no caustic flagged before t = {t:.3} (last indicator {indicator:.1})")),
    }
}

fn nonrelativistic_limit() -> Outcome {
    let mut p = RunParams::preset(PresetName::NrGaussian);
    p.grid_n = [32; 3];
    p.dt = 1.0 / 128.0;
    let deltas = [1.0, 0.1, 0.01];
    let targets = [2.407, 0.345, 0.101];
    let rows = runner::compare_regimes(&p, RegimePair::MdVsSp, &deltas, 0.25, false).unwrap();
    let sups: Vec<f64> = rows.iter().map(|r| r.pair_sup.unwrap()).collect();
    let monotone = sups.windows(2).all(|w| w[1] < w[0]);
    let close = sups.iter().zip(targets).all(|(&s, t)| within_factor(s, t, 5.0));

    let (mut sim, _) = Simulation::new(&p).unwrap();
    let q0 = sim.charge();
    let mut drift: f64 = 0.0;
    let mut stable = true;
    while sim.time() < p.t_final - 0.5 * p.dt {
        if sim.step().is_err() {
            stable = false;
            break;
        }
        drift = drift.max((sim.charge() - q0).abs() / q0);
    }
    let pass = monotone && close && stable && drift <= 1e-10;
    let factors: Vec<f64> = sups.iter().zip(targets).map(|(s, t)| s / t).collect();
    outcome(
        pass,
        format!("sup differences {sups:.3?} (ratios to reference {factors:.2?}), delta = 0.01 to t = 1: stable {stable}, charge drift {drift:.1e}"),
    )
}

fn sp_isometry() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in [PresetName::NrGaussian, PresetName::NrHarmonic] {
        for delta in [1.0, 0.01] {
            let mut p = reduced(name);
            p.solver = SolverKind::Sp;
            p.delta = delta;
            let (sim, _) = Simulation::new(&p).unwrap();
            let Simulation::Sp { solver, mut state, .. } = sim else { unreachable!() };
            let dt = p.dt;
            let q0 = state.charge();
            for k in 0..1000 {
                let t0 = k as f64 * dt;
                let mut q = state.charge();
                let mut check = |q_new: f64| {
                    worst = worst.max((q_new - q).abs() / q0);
                    q = q_new;
                };
                solver.step1(&mut state, 0.5 * dt).unwrap();
                check(state.charge());
                solver.step2(&mut state, dt, t0 + 0.5 * dt).unwrap();
                check(state.charge());
                solver.step1(&mut state, 0.5 * dt).unwrap();
                check(state.charge());
                state.step_index += 1;
                state.time = state.step_index as f64 * dt;
            }
        }
    }
    outcome(worst <= 1e-13, format!("worst relative charge change per substep over 1000 steps: {worst:.1e}"))
}

#[test]
fn primary_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("spatial convergence of the exact plane wave", spatial_convergence),
        ("temporal convergence of the exact plane wave", temporal_convergence),
        ("charge conservation", charge_conservation),
        ("discrete Lorentz gauge", lorentz_gauge),
        ("unitarity and projector algebra", unitarity_and_projectors),
        ("semi-classical O(eps) scaling", semiclassical_scaling),
        ("WKB structure of the steady state", wkb_structure),
        ("caustic detection", caustic_detection),
        ("non-relativistic limit", nonrelativistic_limit),
        ("Schrodinger-Poisson isometry", sp_isometry),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name}: {}", i + 1, result.detail);
        if !result.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
