use super::*;
use crate::models::{ChargeProfile, NonlinearityModel, ProfileShape};
use crate::radial::RadialProblem;

fn power() -> NonlinearityModel {
    NonlinearityModel::pure_power(2.5, 1.0, 2.7).unwrap()
}

// Independent NumPy evaluation of the same family with trapezoid weights and
// midpoint stiffness; the two quadratures differ at O(h²) ≈ 1e-4 relative.
const LAMBDA0_LOWER_ORACLE: f64 = 0.001578781529874625;
const LAMBDABAR0_LOWER_ORACLE: f64 = 0.0077092902644728695;

#[test]
fn threshold_bounds_match_oracle_and_bracket() {
    let model = power();
    let family = TrialFamily::default();
    let b = estimate_lambda_bounds(&model, &family).unwrap();
    let lo = b.lambda0_lower.unwrap();
    let lob = b.lambdabar0_lower.unwrap();
    assert!((lo / LAMBDA0_LOWER_ORACLE - 1.0).abs() < 1e-4, "{lo}");
    assert!((lob / LAMBDABAR0_LOWER_ORACLE - 1.0).abs() < 1e-4, "{lob}");
    assert!(lo < b.lambda0_upper && lob < b.lambdabar0_upper);
    assert!((b.lambda0_upper - 0.5 * model.c1 * model.c1).abs() == 0.0);
    // same maximizer width as the oracle
    assert!((b.witness.unwrap().sigma - 1.6813374064511935).abs() < 1e-12);

    // witness re-evaluation is reproducible
    let grid = family.grid().unwrap();
    let w = b.witness.unwrap();
    let again = threshold_ratios(&family.member(&grid, w.sigma, w.amplitude), &model).0.unwrap();
    assert!((again - w.ratio).abs() < 1e-10);
    let (_, inside) = membership_a0(&family.member(&grid, w.sigma, w.amplitude), &model);
    assert!(inside);
}

#[test]
fn small_fields_are_outside_both_sets() {
    let grid = RadialGrid::new(20.0, 800).unwrap();
    let u = RadialField::from_fn(grid, |r| 1e-3 * (-r * r).exp());
    assert!(!membership_a0(&u, &power()).1);
    assert!(!membership_abar0(&u, &power()).1);
    assert_eq!(threshold_ratios(&u, &power()), (None, None));
}

#[test]
fn cutoff_shape() {
    assert!(cutoff_psi(5.9).is_err());
    let c = cutoff_psi(8.0).unwrap();
    assert_eq!(c.eval(4.0), 1.0);
    assert_eq!(c.eval(8.0), 0.0);
    assert_eq!(c.eval(2.0), 1.0);
    // steepest at 3R/4 with slope −3/R
    assert!((c.derivative(6.0) + 3.0 / 8.0).abs() < 1e-15);
    let max_slope = (0..=1000).map(|k| c.derivative(8.0 * k as f64 / 1000.0).abs()).fold(0.0, f64::max);
    assert!(max_slope <= 3.0 / 8.0 + 1e-15);
    let fd = (c.eval(5.0 + 1e-6) - c.eval(5.0 - 1e-6)) / 2e-6;
    assert!((fd - c.derivative(5.0)).abs() < 1e-8);
}

#[test]
fn truncation_finds_negative_radius() {
    let grid = RadialGrid::new(48.0, 4800).unwrap();
    let lambda = 0.00316;
    let mut v = RadialField::from_fn(grid.clone(), |r| 30.0 * (-(r / 2.0).powi(2)).exp());
    v.values[grid.n] = 0.0;
    let t = truncate_and_tune(&v, lambda, &power()).unwrap();
    assert_eq!(t.r0, 6.0);
    let p = RadialProblem::autonomous(grid.clone(), lambda, power()).unwrap();
    assert!(p.energy(&t.field.values) < 0.0);
    assert_eq!(t.sweep.iter().map(|s| s.radius).collect::<Vec<_>>(), vec![6.0, 12.0, 24.0, 48.0]);
    assert!(t.energy_gap_monotone && t.parts_monotone);
    assert!((t.sweep.last().unwrap().energy - t.reference.energy).abs() < 1e-9 * t.reference.energy.abs());
}

#[test]
fn truncation_rejects_positive_energy() {
    let grid = RadialGrid::new(12.0, 256).unwrap();
    let v = RadialField::from_fn(grid, |r| 0.1 * (-r * r).exp());
    assert!(matches!(truncate_and_tune(&v, 0.003, &power()), Err(Error::Precondition(_))));
}

#[test]
fn truncation_outside_grid() {
    // a shell at r = 8: every admissible cutoff (R = 6 only) removes it
    let grid = RadialGrid::new(10.0, 1000).unwrap();
    let mut v = RadialField::from_fn(grid.clone(), |r| 100.0 * (-((r - 8.0) / 0.7).powi(2)).exp());
    v.values[grid.n] = 0.0;
    let p = RadialProblem::autonomous(grid.clone(), 0.0, power()).unwrap();
    let full = p.energy(&v.values);
    let cut = cutoff_psi(6.0).unwrap();
    let u6: Vec<f64> = grid.nodes.iter().zip(&v.values).map(|(&r, &x)| x * cut.eval(r)).collect();
    if full < 0.0 && p.energy(&u6) >= 0.0 {
        assert!(matches!(truncate_and_tune(&v, 0.0, &power()), Err(Error::TruncationOutsideGrid { .. })));
    } else {
        panic!("fixture no longer separates: J(v) = {full}, J(u6) = {}", p.energy(&u6));
    }
}

#[test]
fn multibump_spec_geometry() {
    let s = MultibumpSpec::new(6.0, 3, [0.0, 0.0, 2.0]).unwrap();
    assert_eq!(s.direction, [0.0, 0.0, 1.0]);
    assert_eq!(s.spacing(), 27.0);
    assert!(s.disjoint());
    assert_eq!(s.eps(), 1.0 / 87.0);
    assert_eq!(s.centers(), vec![[0.0, 0.0, 27.0], [0.0, 0.0, 54.0], [0.0, 0.0, 81.0]]);
    assert_eq!(s.cross_bound(2.0).unwrap(), 6.0 / 15.0 * 4.0);
    let two = MultibumpSpec::new(6.0, 2, [1.0, 0.0, 0.0]).unwrap();
    assert!(!two.disjoint());
    assert!(two.cross_bound(1.0).is_none());
    assert!(MultibumpSpec::new(6.0, 0, [1.0, 0.0, 0.0]).is_err());
    assert!(MultibumpSpec::new(6.0, 1, [0.0; 3]).is_err());
}

#[test]
fn lattice_additivity_is_exact() {
    let grid = RadialGrid::new(8.0, 800).unwrap();
    let cut = cutoff_psi(6.0).unwrap();
    let u = RadialField::from_fn(grid, |r| 3.0 * (-(r / 2.0).powi(2)).exp() * cut.eval(r));
    let spec = MultibumpSpec::new(6.0, 3, [1.0, 0.0, 0.0]).unwrap();
    let err = lattice_additivity(&u, &spec, &power(), 72).unwrap();
    assert!(err < 1e-12, "{err}");
    let two = MultibumpSpec::new(6.0, 2, [1.0, 0.0, 0.0]).unwrap();
    assert!(matches!(
        lattice_additivity(&u, &two, &power(), 16),
        Err(Error::OverlappingBumps { .. })
    ));
}

#[test]
fn analytic_multibump_cross_terms() {
    let grid = RadialGrid::new(8.0, 1600).unwrap();
    let cut = cutoff_psi(6.0).unwrap();
    let u = RadialField::from_fn(grid, |r| 30.0 * (-(r / 2.0).powi(2)).exp() * cut.eval(r));
    let lambda: f64 = 0.00316;
    let shape = ProfileShape::Ramp {
        rho0: 0.5 * lambda.sqrt(),
        rho_inf: lambda.sqrt(),
        r0: 1.0,
        r1: 2.0,
    };
    let profile = ChargeProfile::new(shape, 1.0).unwrap();
    let rep = multibump_energy(&u, 6.0, 4, [1.0, 0.0, 0.0], &profile, &power(), lambda, MultibumpGrid { half_width: 12.0, n: 32 })
        .unwrap();
    assert_eq!(rep.rows.len(), 4);
    assert_eq!(rep.rows[1].path, MultibumpPath::Grid3D);
    assert!(rep.cross_bounds_hold);
    let mass = u.grid.integrate(&u.values.iter().map(|x| x * x).collect::<Vec<_>>());
    // N = 3: pairs at distance 27 (four ordered) and 54 (two ordered)
    let expect = mass * mass / (4.0 * std::f64::consts::PI) * (4.0 / 27.0 + 2.0 / 54.0);
    let got = rep.rows[2].cross_sum.unwrap();
    assert!((got / expect - 1.0).abs() < 1e-13);
    assert!(rep.rows[2].cross_bound_sharp.unwrap() >= got);
    assert_eq!(rep.rows[0].cross_sum, Some(0.0));
}
