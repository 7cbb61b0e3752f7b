use std::f64::consts::PI;

use zerovisc::field::{SpectralField, VectorField};
use zerovisc::grid::{GridSpec, Stretching};
use zerovisc::ns::NsSolver;
use zerovisc::snapshot::{Snapshot, Trajectory};

// a checkpoint written mid-run and read back continues the same trajectory
#[test]
fn navier_stokes_restarts_from_a_checkpoint() {
    let g = GridSpec { d: 1, nx: 16, box_len: 2.0 * PI, ny: 96, ly: 6.0, stretching: Stretching::Tanh { beta: 2.0 } }
        .build()
        .unwrap();
    // psi = sin x * y^2 e^{-y^2}: no-slip and divergence free
    let u = VectorField {
        h: vec![SpectralField::from_fn(&g, "u", |x, y| x[0].sin() * (2.0 * y - 2.0 * y.powi(3)) * (-y * y).exp())],
        v: SpectralField::from_fn(&g, "v", |x, y| -x[0].cos() * y * y * (-y * y).exp()),
    };
    let ns = NsSolver::new(&g, 0.2, 0.005).unwrap();
    let mut straight = ns.state(0.0, &u).unwrap();
    for _ in 0..10 {
        straight = ns.step_ns(&straight).unwrap();
    }

    let dir = tempfile::tempdir().unwrap();
    let mut traj = Trajectory::create(dir.path()).unwrap();
    let mut s = ns.state(0.0, &u).unwrap();
    for _ in 0..5 {
        s = ns.step_ns(&s).unwrap();
    }
    traj.push(&Snapshot::from_velocity(s.t, &s.velocity).with_meta("eps", 0.2)).unwrap();

    let back = Trajectory::open(dir.path()).unwrap().load(0, Some(&g)).unwrap();
    assert_eq!(back.meta["eps"], 0.2);
    let mut r = ns.state(back.t, &back.velocity().unwrap()).unwrap();
    for _ in 0..5 {
        r = ns.step_ns(&r).unwrap();
    }
    assert!((r.t - straight.t).abs() < 1e-14);
    assert!(straight.wall_slip() < 1e-14, "slip {:e}", straight.wall_slip());
    let gap = (&r.velocity.h[0] - &straight.velocity.h[0]).linf_norm() + (&r.velocity.v - &straight.velocity.v).linf_norm();
    assert!(gap < 1e-10 * straight.velocity.linf_norm(), "{gap}");
}
