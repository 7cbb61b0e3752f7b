mod common;

use zerovisc::assemble::{
    assemble, assemble_parts, euler_residual_by_substitution, euler_residual_closed_form, resample, Expansion, Parts,
};
use zerovisc::field::SpectralField;
use zerovisc::split::{evolve_vorticity_split, evolve_vorticity_split_with};
use zerovisc::Error;

fn expansion(nsteps: usize) -> Expansion {
    let c = common::tiny();
    Expansion::build(&c.outer.build().unwrap(), &c.layer.build().unwrap(), &c.initial, c.dt, nsteps).unwrap()
}

#[test]
fn assembled_solution_meets_the_wall_and_divergence_conditions() {
    let exp = expansion(12);
    for n in [2, 6, 10] {
        let s = exp.state(n).unwrap();
        for eps in [0.2, 0.1] {
            let a = assemble(&s, eps).unwrap();
            let (slip, normal) = a.wall_defects();
            assert!(slip < 1e-12 && normal < 1e-12, "step {n}, eps {eps}: {slip:e} {normal:e}");
            let div = a.divergence().unwrap().l2_norm() / a.velocity().l2_norm();
            assert!(div < 1e-7, "step {n}, eps {eps}: {div:e}");
            // the layer is a genuine correction, not a no-op
            let outer = assemble_parts(&s, eps, Parts::OuterOnly).unwrap();
            assert!((&a.velocity().h[0] - &outer.velocity().h[0]).l2_norm() > 1e-7);
        }
    }
}

#[test]
fn euler_residual_closed_form_matches_substitution() {
    let exp = expansion(12);
    for n in [2, 6, 10] {
        let window: Vec<_> = (n - 2..=n + 2).map(|k| exp.state(k).unwrap()).collect();
        for eps in [0.2, 0.1, 0.05] {
            let closed = euler_residual_closed_form(&window[2], eps).unwrap();
            let subst = euler_residual_by_substitution(&window, eps, exp.dt()).unwrap();
            let scale = closed.iter().map(|c| c.l2_norm()).fold(0.0, f64::max);
            for (a, b) in closed.iter().zip(&subst) {
                assert!((a - b).l2_norm() < 1e-10 * scale, "step {n}, eps {eps}");
            }
        }
    }
}

#[test]
fn resampling_rescales_the_layer_variable() {
    let c = common::tiny();
    let (outer, layer) = (c.outer.build().unwrap(), c.layer.build().unwrap());
    let lf = SpectralField::from_fn(&layer, "p", |x, z| x[0].cos() * z * (-z * z).exp());
    for eps in [0.2, 0.1, 0.05] {
        let got = resample(&lf, &outer, eps).unwrap();
        let want = SpectralField::from_fn(&outer, "p", |x, y| {
            let z = y / eps;
            x[0].cos() * z * (-z * z).exp()
        });
        assert!((&got - &want).linf_norm() < 1e-5, "eps {eps}");
    }
    // a field still large at the top of the layer column cannot be placed
    let slow = SpectralField::from_fn(&layer, "slow", |x, z| x[0].cos() * (-0.1 * z).exp());
    assert!(matches!(resample(&slow, &outer, 0.2), Err(Error::Interpolation(_))));
}

#[test]
fn vorticity_split_reconstructs_the_error_vorticity() {
    let exp = expansion(12);
    let mut seen = Vec::new();
    let recs = evolve_vorticity_split_with(&exp, 0.2, 2, 6, |s, err| {
        assert_eq!(err.v.grid().d(), 1);
        seen.push(s.t);
        Ok(())
    })
    .unwrap();
    assert_eq!(recs.len(), 7);
    assert_eq!(seen.len(), recs.len());
    assert!(seen.iter().zip(&recs).all(|(t, r)| (t - r.t).abs() < 1e-14));
    assert_eq!(recs[0].defect, 0.0);
    for r in &recs {
        assert!(r.relative_defect() < 1e-3, "{r:?}");
        assert_eq!(r.normal_component_trace, 0.0);
    }
    // the homogeneous wall condition holds once the outer part is evolved
    assert!(recs[1..].iter().all(|r| r.outer_wall_residual < 1e-12));

    match evolve_vorticity_split(&exp, 0.2, 8, 6) {
        Err(Error::WindowMismatch(_)) => {}
        other => panic!("expected a window refusal, got {other:?}"),
    }
}
