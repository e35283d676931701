use wavefront_core::birth::PiecewiseLinearBirth;
use wavefront_core::profile::{solve_profile, SolverOptions};
use wavefront_core::shape::{self, Shape};
use wavefront_core::spectrum::{critical_speed, make_context, Branch};

fn opts(dt: f64) -> SolverOptions {
    SolverOptions {
        dt: Some(dt),
        tol: 1e-12,
        ..SolverOptions::default()
    }
}

#[test]
fn shape_survives_grid_refinement() {
    let g = PiecewiseLinearBirth::reference();
    for c in [0.72, 0.8] {
        let ctx = make_context(&g, 2.0, c).unwrap();
        let coarse = solve_profile(&ctx, &opts(0.01)).unwrap();
        let fine = solve_profile(&ctx, &opts(0.005)).unwrap();
        let a = shape::classify(&ctx, &coarse).unwrap();
        let b = shape::classify(&ctx, &fine).unwrap();
        assert_eq!(a.classification, b.classification, "c = {c}");
        assert_eq!(a.maxima(), b.maxima(), "c = {c}");
        let (t1a, t1b) = (a.tau1.unwrap(), b.tau1.unwrap());
        assert!((t1a - t1b).abs() < 0.02, "tau1 {t1a} vs {t1b}");
        // profiles agree at coarse nodes inside the fine window
        let mut worst: f64 = 0.0;
        for i in 0..coarse.len() {
            let t = coarse.t(i);
            if t > fine.t_start && t < fine.t_end() {
                worst = worst.max((coarse.values[i] - fine.eval(t)).abs());
            }
        }
        assert!(worst < 1e-3, "c = {c}: sup difference {worst}");
    }
}

#[test]
fn two_segment_front_is_monotone() {
    let g = PiecewiseLinearBirth::two_segment(2.0, -0.5, 0.4).unwrap();
    let h = 1.0;
    let cs = critical_speed(g.slope_at_zero(), h, Branch::PositiveDoubleRoot).unwrap().c;
    let ctx = make_context(&g, h, cs + 0.01).unwrap();
    let phi = solve_profile(&ctx, &opts(0.01)).unwrap();
    let rep = shape::classify(&ctx, &phi).unwrap();
    assert_eq!(rep.classification, Shape::Monotone);
    assert!(rep.tau1.is_none());
    assert!(shape::check_leading_edge(&ctx, &phi).holds);
    assert!((phi.values[phi.len() - 1] - g.kappa()).abs() < 1e-6);
}

#[test]
fn oscillating_front_crosses_kappa_repeatedly() {
    let g = PiecewiseLinearBirth::reference();
    let ctx = make_context(&g, 2.0, 0.8).unwrap();
    let phi = solve_profile(&ctx, &opts(0.01)).unwrap();
    let rep = shape::classify(&ctx, &phi).unwrap();
    assert_eq!(rep.classification, Shape::SlowlyOscillating);
    assert!(rep.crossings_of_kappa >= 2);
    let mode = rep.tail_mode.unwrap();
    assert!(mode.is_oscillatory() && mode.re < 0.0);
}
