use wavefront_core::birth::PiecewiseLinearBirth;
use wavefront_core::pde::{measure_front_speed, simulate, step_history, SimConfig};

fn speed(dx: f64, dt: f64) -> f64 {
    let g = PiecewiseLinearBirth::reference();
    let cfg = SimConfig {
        domain_length: 200.0,
        dx,
        dt,
        t_end: 150.0,
        output_every: 1.0,
    };
    let rec = simulate(&g, 2.0, &cfg, step_history(g.kappa(), 20.0)).unwrap();
    measure_front_speed(&rec, g.theta()).unwrap().speed
}

#[test]
fn front_speed_is_grid_converged() {
    let coarse = speed(0.1, 0.004);
    let fine = speed(0.05, 0.001);
    let rel = (coarse / fine - 1.0).abs();
    assert!(rel < 0.01, "coarse {coarse}, fine {fine}");
}

#[test]
fn unstable_step_is_rejected() {
    let g = PiecewiseLinearBirth::reference();
    let cfg = SimConfig {
        dt: 0.006,
        ..SimConfig::default()
    };
    assert!(simulate(&g, 2.0, &cfg, step_history(g.kappa(), 20.0)).is_err());
}
