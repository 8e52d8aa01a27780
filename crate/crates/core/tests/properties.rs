use std::sync::Arc;

use proptest::prelude::*;

use mdkit::diagnostics::{error_norms, gauge_residual, SeriesRow, TimeSeries};
use mdkit::dirac::{self, NrProjection, Sign};
use mdkit::field::norm_sq;
use mdkit::md::{MdSolver, MdState};
use mdkit::runner::{DumpRecord, PresetName, RunParams};
use mdkit::sp::SpSolver;
use mdkit::{total_charge, GridSpec, PotentialState, SimConfig, Spectral, SpinorField, C64};

fn grid4() -> GridSpec {
    GridSpec::cube(-0.5, 0.5, 4).unwrap()
}

fn c64() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn field(grid: GridSpec) -> impl Strategy<Value = SpinorField> {
    prop::collection::vec(prop::array::uniform4(c64()), grid.len())
        .prop_map(move |pts| SpinorField::from_fn(grid, |x| pts[grid_index(&grid, x)]))
}

fn grid_index(grid: &GridSpec, x: [f64; 3]) -> usize {
    let h = grid.spacing();
    let lo = grid.lower();
    grid.index(std::array::from_fn(|j| ((x[j] - lo[j]) / h[j]).round() as usize))
}

fn xi() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-40.0..40.0f64)
}

fn max_abs(m: &dirac::Mat4) -> f64 {
    m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

fn sub(a: &dirac::Mat4, b: &dirac::Mat4) -> dirac::Mat4 {
    std::array::from_fn(|r| std::array::from_fn(|c| a[r][c] - b[r][c]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_round_trip_and_parseval(vals in prop::collection::vec(c64(), 64)) {
        let spec = Spectral::new(grid4());
        let hat = spec.dft(&vals).unwrap();
        let back = spec.idft(&hat).unwrap();
        for (a, b) in vals.iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-14);
        }
        let e_x: f64 = vals.iter().map(|z| z.norm_sqr()).sum();
        let e_k: f64 = hat.iter().map(|z| z.norm_sqr()).sum::<f64>() / 64.0;
        prop_assert!((e_x - e_k).abs() < 1e-12 * e_x.max(1.0));
    }

    #[test]
    fn projector_algebra(x in xi()) {
        let p = dirac::free_projector(x, Sign::Plus);
        let m = dirac::free_projector(x, Sign::Minus);
        prop_assert!(max_abs(&sub(&dirac::mat_mul(&p, &p), &p)) < 1e-13);
        prop_assert!(max_abs(&sub(&dirac::mat_mul(&m, &m), &m)) < 1e-13);
        prop_assert!(max_abs(&dirac::mat_mul(&p, &m)) < 1e-13);
        let sum: dirac::Mat4 = std::array::from_fn(|r| std::array::from_fn(|c| p[r][c] + m[r][c]));
        prop_assert!(max_abs(&sub(&sum, &dirac::identity())) < 1e-13);
        prop_assert!(max_abs(&sub(&dirac::adjoint(&p), &p)) < 1e-13);
    }

    #[test]
    fn propagator_is_unitary(x in xi(), dt in 1e-4..0.1f64, eps in 0.01..1.0f64, delta in 0.01..1.0f64) {
        let u = dirac::step1_propagator(x, dt, eps, delta);
        let uu = dirac::mat_mul(&dirac::adjoint(&u), &u);
        prop_assert!(max_abs(&sub(&uu, &dirac::identity())) < 1e-12);
    }

    #[test]
    fn free_flow_is_linear(a in field(grid4()), b in field(grid4()), s in c64()) {
        let grid = grid4();
        let spec = Arc::new(Spectral::new(grid));
        let solver = MdSolver::new(spec, SimConfig::new(grid, 0.5, 0.5, 1.0 / 16.0, 1.0 / 16.0)).unwrap();
        let mut combo = a.clone();
        combo.map_points(|i, v| { let w = b.at(i); std::array::from_fn(|k| v[k] * s + w[k]) });
        let run = |psi: SpinorField| {
            let mut st = MdState::new(psi, PotentialState::zeros(grid));
            solver.step1(&mut st, 1.0 / 16.0).unwrap();
            st.psi
        };
        let (ra, rb, rc) = (run(a), run(b), run(combo));
        for i in 0..grid.len() {
            let (x, y, z) = (ra.at(i), rb.at(i), rc.at(i));
            for k in 0..4 {
                prop_assert!((x[k] * s + y[k] - z[k]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn md_step_conserves_charge(psi in field(grid4()), eps in 0.05..1.0f64, delta in 0.05..1.0f64, strang in any::<bool>()) {
        let grid = grid4();
        let spec = Arc::new(Spectral::new(grid));
        let mut cfg = SimConfig::new(grid, eps, delta, 1.0 / 32.0, 1.0 / 8.0);
        cfg.external = mdkit::ExternalFields::harmonic(3.0);
        if !strang {
            cfg.splitting = mdkit::Splitting::FirstOrder;
        }
        let solver = MdSolver::new(spec, cfg).unwrap();
        let q0 = total_charge(&psi);
        let mut st = MdState::new(psi, PotentialState::zeros(grid));
        for _ in 0..4 {
            let before = total_charge(&st.psi);
            solver.advance(&mut st).unwrap();
            prop_assert!((total_charge(&st.psi) - before).abs() <= 1e-12 * q0);
        }
    }

    #[test]
    fn potential_rotation_is_pointwise_isometry(psi in field(grid4()), w in -5.0..5.0f64, a in prop::array::uniform3(-5.0..5.0f64)) {
        let grid = grid4();
        let spec = Arc::new(Spectral::new(grid));
        let solver = MdSolver::new(spec, SimConfig::new(grid, 0.1, 1.0, 0.05, 0.05)).unwrap();
        let mut pot = PotentialState::zeros(grid);
        pot.v.fill(w);
        for k in 0..3 { pot.a[k].fill(a[k]); }
        let mut out = psi.clone();
        solver.step2(&mut out, &pot, 0.05, 0.0).unwrap();
        for i in 0..grid.len() {
            prop_assert!((norm_sq(&out.at(i)) - norm_sq(&psi.at(i))).abs() < 1e-13);
        }
    }

    #[test]
    fn sp_substeps_are_isometries(psi in field(grid4()), delta in 0.01..1.0f64) {
        let grid = grid4();
        let spec = Arc::new(Spectral::new(grid));
        let mut cfg = SimConfig::new(grid, 1.0, delta, 1.0 / 64.0, 1.0);
        cfg.external = mdkit::ExternalFields::harmonic(50.0);
        let solver = SpSolver::new(spec, cfg).unwrap();
        let mut st = solver.initial_state(&psi, NrProjection::Delta(delta)).unwrap();
        let q0 = st.charge();
        for _ in 0..5 {
            let q = st.charge();
            solver.step1(&mut st, 1.0 / 64.0).unwrap();
            prop_assert!((st.charge() - q).abs() <= 1e-13 * q0);
            let q = st.charge();
            solver.step2(&mut st, 1.0 / 64.0, 0.0).unwrap();
            prop_assert!((st.charge() - q).abs() <= 1e-13 * q0);
        }
    }

    #[test]
    fn error_norms_obey_triangle_inequality(a in field(grid4()), b in field(grid4()), c in field(grid4())) {
        let ab = error_norms(&a, &b).unwrap();
        let bc = error_norms(&b, &c).unwrap();
        let ac = error_norms(&a, &c).unwrap();
        prop_assert!(ac.linf_abs <= ab.linf_abs + bc.linf_abs + 1e-14);
        // relative norms share the reference c after rescaling
        let nb = total_charge(&b).sqrt();
        let nc = total_charge(&c).sqrt();
        prop_assert!(ac.l2_rel * nc <= ab.l2_rel * nb + bc.l2_rel * nc + 1e-12);
        prop_assert_eq!(error_norms(&a, &a).unwrap().l2_rel, 0.0);
    }

    #[test]
    fn gauge_residual_ignores_curl(phase in prop::array::uniform3(0.0..1.0f64), amp in -2.0..2.0f64) {
        use std::f64::consts::PI;
        let grid = GridSpec::cube(-0.5, 0.5, 8).unwrap();
        let spec = Spectral::new(grid);
        let mut pot = PotentialState::zeros(grid);
        pot.v_t = grid.sample(|x| (2.0 * PI * (x[0] + phase[0])).sin());
        pot.a[0] = grid.sample(|x| (2.0 * PI * (x[1] + phase[1])).cos());
        let base = gauge_residual(&spec, &pot, 0.5).unwrap();
        // ∇×(0, 0, f(x1, x2)) is divergence free
        let f = |x: [f64; 3]| amp * (2.0 * PI * (x[0] + phase[2])).sin() * (4.0 * PI * x[1]).cos();
        let h = 1e-6;
        let mut curl = pot.clone();
        for (k, a) in curl.a.iter_mut().enumerate().take(2) {
            let add = grid.sample(|x| {
                let mut p = x;
                let j = 1 - k;
                p[j] += h;
                let d = (f(p) - f(x)) / h;
                if k == 0 { d } else { -d }
            });
            a.iter_mut().zip(add).for_each(|(v, d)| *v += d);
        }
        let _ = &mut curl;
        let spectral_curl = {
            let mut c = pot.clone();
            let g = spec.gradient_real(&grid.sample(f)).unwrap();
            c.a[0].iter_mut().zip(&g[1]).for_each(|(v, d)| *v += d);
            c.a[1].iter_mut().zip(&g[0]).for_each(|(v, d)| *v -= d);
            c
        };
        let after = gauge_residual(&spec, &spectral_curl, 0.5).unwrap();
        prop_assert!((after.nonzero_modes - base.nonzero_modes).abs() < 1e-12);
    }

    #[test]
    fn dump_round_trip(psi in field(grid4()), t in 0.0..10.0f64) {
        let rec = DumpRecord::from_spinor("psi", &psi.clone().with_time(t), 0.3, 0.7);
        let mut buf = Vec::new();
        rec.write(&mut buf).unwrap();
        let back = DumpRecord::read(&buf[..]).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn series_csv_round_trip(vals in prop::collection::vec(prop::array::uniform4(-1e6..1e6f64), 1..8)) {
        let mut s = TimeSeries::new(vec!["extra".into()]);
        for (k, v) in vals.iter().enumerate() {
            s.push(SeriesRow { t: k as f64 * 0.1, charge: v[0], gauge_residual: v[1], l2_error: v[2], linf_error: f64::NAN, extra: vec![v[3]] }).unwrap();
        }
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = TimeSeries::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.rows().len(), s.rows().len());
        for (a, b) in back.rows().iter().zip(s.rows()) {
            prop_assert_eq!(a.charge, b.charge);
            prop_assert_eq!(a.extra[0], b.extra[0]);
            prop_assert!(a.linf_error.is_nan());
        }
    }

    #[test]
    fn manifest_round_trips_overrides(eps in 0.001..1.0f64, n in 2usize..40, dt_den in 1u32..512) {
        let mut p = RunParams::preset(PresetName::SteadyState);
        p.set("md.epsilon", &eps.to_string()).unwrap();
        p.set("grid.n", &n.to_string()).unwrap();
        p.set("time.dt", &format!("1/{dt_den}")).unwrap();
        let back = RunParams::parse(&p.manifest(), &[]).unwrap();
        prop_assert_eq!(back, p);
    }
}
