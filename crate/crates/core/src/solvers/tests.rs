use std::sync::Arc;

use super::*;
use crate::models::NonlinearityModel;
use crate::radial::{RadialGrid, RadialProblem};

fn power() -> NonlinearityModel {
    NonlinearityModel::pure_power(2.5, 1.0, 2.7).unwrap()
}

fn grid() -> Arc<RadialGrid> {
    RadialGrid::new(30.0, 3000).unwrap()
}

fn gaussian(grid: &RadialGrid, amp: f64, width: f64) -> Vec<f64> {
    let mut v = grid.sample(|r| amp * (-(r / width).powi(2)).exp());
    v[grid.n] = 0.0;
    v
}

#[test]
fn free_energy_descends_to_zero() {
    let g = grid();
    let p = RadialProblem::autonomous(g.clone(), 0.0, NonlinearityModel::vanishing(2.5).unwrap()).unwrap();
    let opts = SolveOptions {
        tol_grad: GradTol::Absolute(1e-10),
        ..Default::default()
    };
    let r = minimize(&p, &gaussian(&g, 3.0, 2.0), &opts).unwrap();
    assert!(r.converged);
    assert_eq!(r.classification, Classification::Zero);
    assert!(r.iterations <= 3, "{}", r.iterations);
}

#[test]
fn descent_is_strictly_monotone_and_finds_negative_minimizer() {
    let g = grid();
    let p = RadialProblem::autonomous(g.clone(), 0.00316, power()).unwrap();
    let opts = SolveOptions {
        tol_grad: GradTol::Absolute(1e-6),
        ..Default::default()
    };
    let r = minimize(&p, &gaussian(&g, 30.0, 2.0), &opts).unwrap();
    assert!(r.converged, "{} after {}", r.gradient_norm, r.iterations);
    assert!(r.energy < 0.0);
    assert!(r.trace.windows(2).all(|w| w[1].accumulated < w[0].accumulated));
    assert!(r.trace.iter().skip(1).all(|row| row.change < 0.0));
    assert!(r.nehari_residual.abs() < 1e-3);
    assert_eq!(r.classification, Classification::Minimizer);
}

#[test]
fn mountain_pass_requires_negative_endpoint() {
    let g = RadialGrid::new(12.0, 256).unwrap();
    let p = RadialProblem::autonomous(g.clone(), 0.0, NonlinearityModel::vanishing(2.5).unwrap()).unwrap();
    let zero = vec![0.0; g.len()];
    let err = mountain_pass(&p, &zero, &SolveOptions::default(), &MountainPassOptions::default()).unwrap_err();
    assert!(matches!(err, crate::Error::Precondition(_)));
}

#[test]
fn mountain_pass_above_zero() {
    let g = grid();
    let p = RadialProblem::autonomous(g.clone(), 0.00316, power()).unwrap();
    let opts = SolveOptions {
        tol_grad: GradTol::Absolute(1e-6),
        ..Default::default()
    };
    let low = minimize(&p, &gaussian(&g, 30.0, 2.0), &opts).unwrap();
    let mp_opts = SolveOptions {
        tol_grad: GradTol::Absolute(1e-5),
        max_iter: 5000,
        ..Default::default()
    };
    let mp = mountain_pass(&p, &low.values, &mp_opts, &MountainPassOptions::default()).unwrap();
    let r = &mp.result;
    assert!(r.converged, "{} after {}", r.gradient_norm, r.iterations);
    assert!(r.energy > 0.0);
    assert!(r.nehari_residual.abs() < 1e-3);
    assert!(mp.tangent_curvature < 0.0);
    assert_eq!(r.classification, Classification::MountainPass);
}

#[test]
fn multistart_is_schedule_independent() {
    let g = RadialGrid::new(16.0, 512).unwrap();
    let p = RadialProblem::autonomous(g.clone(), 0.0625, power()).unwrap();
    let starts: Vec<Vec<f64>> = (0..4).map(|i| gaussian(&g, 1.0 + i as f64, 1.5)).collect();
    let opts = SolveOptions {
        tol_grad: GradTol::Absolute(1e-9),
        ..Default::default()
    };
    let a = multistart_minimize(&p, &starts, &opts, true).unwrap();
    let b = multistart_minimize(&p, &starts, &opts, false).unwrap();
    assert_eq!(a.best, b.best);
    for (x, y) in a.results.iter().zip(&b.results) {
        assert_eq!(x.values, y.values);
    }
    assert!(a.results.iter().all(|r| r.classification == Classification::Zero));
    let with_zero = multistart_minimize(&p, &[vec![0.0; g.len()]], &opts, true).unwrap();
    assert_eq!(with_zero.best().unwrap().classification, Classification::Zero);
}

#[test]
fn options_validation() {
    let bad = SolveOptions {
        max_iter: 0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let bad = SolveOptions {
        tol_grad: GradTol::Relative(0.0),
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let json = r#"{"tol_grad":{"absolute":1e-8},"max_iter":50}"#;
    let o: SolveOptions = serde_json::from_str(json).unwrap();
    assert_eq!(o.tol_grad, GradTol::Absolute(1e-8));
    assert_eq!(o.armijo_c, 1e-4);
    assert!(serde_json::from_str::<SolveOptions>(r#"{"bogus":1}"#).is_err());
}
