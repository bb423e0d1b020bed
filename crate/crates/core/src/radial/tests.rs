use super::*;
use crate::oracles::{ball_potential as ball_exact, unit_ball_radial as unit_ball_source};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn desk() -> Arc<RadialGrid> {
    RadialGrid::new(12.0, 4096).unwrap()
}

fn power() -> NonlinearityModel {
    NonlinearityModel::pure_power(2.5, 1.0, 2.7).unwrap()
}

fn ball_error(grid: &Arc<RadialGrid>) -> f64 {
    let src = RadialField::new(grid.clone(), unit_ball_source(grid)).unwrap();
    let phi = poisson_radial(&src).unwrap();
    grid.nodes
        .iter()
        .zip(&phi.values)
        .map(|(&r, &p)| ((p - ball_exact(r)) / ball_exact(r)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn weights_integrate_volume_exactly() {
    for &(r, n) in &[(12.0, 4096), (3.0, 17), (40.0, 4000)] {
        let g = RadialGrid::new(r, n).unwrap();
        let vol = g.integrate(&vec![1.0; g.len()]);
        let exact = 4.0 * PI * r * r * r / 3.0;
        assert!(((vol - exact) / exact).abs() < 1e-12);
        assert!(g.weights.iter().all(|w| *w >= 0.0));
    }
}

#[test]
fn gaussian_h1_norm() {
    let u = RadialField::from_fn(desk(), |r| (-r * r / 2.0).exp());
    let exact = 2.5 * PI.powf(1.5);
    assert!((h1_norm_sq(&u) - exact).abs() < 1e-3);
    assert_eq!(h1_norm_sq(&RadialField::zeros(desk())), 0.0);
    let t = 3.7;
    let v = RadialField::new(desk(), u.values.iter().map(|x| t * x).collect()).unwrap();
    assert!((h1_norm_sq(&v) / (t * t * h1_norm_sq(&u)) - 1.0).abs() < 1e-12);
}

#[test]
fn ball_potential_oracle() {
    let grid = desk();
    assert!(ball_error(&grid) < 1e-3);
    let src = RadialField::new(grid.clone(), unit_ball_source(&grid)).unwrap();
    let phi = poisson_radial(&src).unwrap();
    assert!((phi.values[0] - 0.5).abs() < 1e-3 * 0.5);
    let at = |r: f64| {
        let i = (r / grid.h).round() as usize;
        (grid.nodes[i], phi.values[i])
    };
    let (r1, p1) = at(1.0);
    assert!((p1 - ball_exact(r1)).abs() < 1e-3 / 3.0);
    let (r10, p10) = at(10.0);
    assert!((r10 * p10 - 1.0 / 3.0).abs() < 1e-3);
    assert!((grid.r_max * phi.values[grid.n] - phi.charge / (4.0 * PI)).abs() < 1e-12);
    let ident = phi.gradient_energy();
    let gphi = grid.integrate(&src.values.iter().zip(&phi.values).map(|(g, p)| g * p).collect::<Vec<_>>());
    assert!(((ident - gphi) / gphi).abs() < 1e-3);
}

#[test]
fn ball_error_is_second_order() {
    let coarse = ball_error(&RadialGrid::new(12.0, 256).unwrap());
    let fine = ball_error(&RadialGrid::new(12.0, 512).unwrap());
    assert!(coarse / fine >= 3.0, "{coarse} / {fine}");
}

#[test]
fn poisson_rejects_negative_and_handles_zero() {
    let grid = desk();
    let zero = poisson_radial(&RadialField::zeros(grid.clone())).unwrap();
    assert!(zero.values.iter().all(|v| *v == 0.0));
    let mut neg = RadialField::zeros(grid);
    neg.values[7] = -1e-3;
    assert!(matches!(poisson_radial(&neg), Err(Error::NegativeSource { index: 7, .. })));
}

#[test]
fn nonlocal_ball_and_scaling() {
    let grid = desk();
    let u = RadialField::new(grid.clone(), unit_ball_source(&grid).iter().map(|g| g.sqrt()).collect()).unwrap();
    let one = ChargeProfile::constant(1.0).unwrap();
    let val = nonlocal_term(&u, &one).unwrap();
    assert!((val - 8.0 * PI / 15.0).abs() < 2e-3);
    let c = 0.37;
    let scaled = nonlocal_term(&u, &ChargeProfile::constant(c).unwrap()).unwrap();
    assert!((scaled / (c * c * val) - 1.0).abs() < 1e-12);
    assert_eq!(nonlocal_term(&RadialField::zeros(grid), &one).unwrap(), 0.0);
}

#[test]
fn gaussian_energy_three_oracles() {
    let grid = desk();
    let u = RadialField::from_fn(grid, |r| (-r * r / 2.0).exp());
    let one = ChargeProfile::constant(1.0).unwrap();
    // ∫e^{−r²}φ with φ = π^{3/2} erf(r)/(4πr): π^{3/2}∫ r e^{−r²} erf(r) dr = π^{3/2}/(2√2)
    let coulomb = PI.powf(1.5) / (2.0 * 2f64.sqrt());
    let potential = 0.4 * PI.powf(1.5) / 1.25f64.powf(1.5);
    let oracle = 0.5 * 2.5 * PI.powf(1.5) + 0.25 * coulomb - potential;
    let e = energy_radial(&u, &one, &power()).unwrap();
    assert!(((e - oracle) / oracle).abs() < 1e-3, "{e} vs {oracle}");
    let nl = nonlocal_term(&u, &one).unwrap();
    assert!(((nl - coulomb) / coulomb).abs() < 1e-3);
}

#[test]
fn free_energy_is_half_norm() {
    let grid = desk();
    let p = RadialProblem::autonomous(grid.clone(), 0.0, NonlinearityModel::vanishing(2.5).unwrap()).unwrap();
    let mut u = RadialField::from_fn(grid, |r| (-r * r / 3.0).exp() * (1.0 + r));
    u.values[4096] = 0.0;
    assert!((p.energy(&u.values) - 0.5 * p.h1_norm_sq(&u.values)).abs() < 1e-12);
    let (g, _) = p.sobolev_gradient(&u.values);
    for (a, b) in g.iter().zip(&u.values) {
        assert!((a - b).abs() < 1e-10 * u.max_abs());
    }
    let zero = vec![0.0; 4097];
    let (gz, nz) = RadialProblem::autonomous(desk(), 0.01, power())
        .unwrap()
        .sobolev_gradient(&zero);
    assert!(gz.iter().all(|v| *v == 0.0) && nz == 0.0);
}

#[test]
fn gradient_matches_central_differences() {
    let grid = RadialGrid::new(12.0, 1024).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let profile = ChargeProfile::new(
        crate::models::ProfileShape::Rational {
            rho0: 0.2,
            rho_inf: 1.0,
            width: 2.0,
        },
        1.0,
    )
    .unwrap();
    let p = RadialProblem::with_profile(grid.clone(), &profile, power()).unwrap();
    for _ in 0..5 {
        let u = random_band_limited(&grid, &mut rng, 5).values;
        let (g, _) = p.sobolev_gradient(&u);
        for _ in 0..5 {
            let v = random_direction(&grid, &mut rng);
            let kv = p.gram(&v);
            let exact = dot(&g, &kv);
            let eps = 1e-4 * (1.0 + u.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            let plus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let minus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
            let fd = (p.energy(&plus) - p.energy(&minus)) / (2.0 * eps);
            assert!(((fd - exact) / exact.abs().max(1e-8)).abs() < 1e-4, "{fd} vs {exact}");
        }
    }
}

#[test]
fn strauss_examples() {
    let grid = desk();
    let one = ChargeProfile::constant(1.0).unwrap();
    let z = strauss_check(&RadialField::zeros(grid.clone()), &one).unwrap();
    assert_eq!((z.lhs, z.rhs, z.holds), (0.0, 0.0, true));
    let u = RadialField::new(grid.clone(), unit_ball_source(&grid)).unwrap();
    assert!(strauss_check(&u, &one).unwrap().holds);
}

#[test]
fn nehari_examples() {
    let grid = desk();
    let one = ChargeProfile::constant(1.0).unwrap();
    let (raw, _) = nehari_residual(&RadialField::zeros(grid.clone()), &one, &power()).unwrap();
    assert_eq!(raw, 0.0);
    let u = RadialField::from_fn(grid.clone(), |r| (-r * r).exp());
    let p = RadialProblem::autonomous(grid, 0.0, NonlinearityModel::vanishing(2.5).unwrap()).unwrap();
    let (raw, rel) = p.nehari(&u.values);
    assert!((raw - p.h1_norm_sq(&u.values)).abs() < 1e-12 && (rel - 1.0).abs() < 1e-12);
}

#[test]
fn csv_round_trip() {
    let u = RadialField::from_fn(RadialGrid::new(5.0, 64).unwrap(), |r| (-r).exp() * r.sin());
    let back = RadialField::from_csv(&u.to_csv()).unwrap();
    assert_eq!(back.values, u.values);
    assert_eq!(back.grid.nodes, u.grid.nodes);
}

#[test]
fn decay_guard_and_support() {
    let grid = desk();
    let g = RadialField::from_fn(grid.clone(), |r| (-r * r / 2.0).exp());
    assert!(g.decay_ok());
    let slow = RadialField::from_fn(grid, |r| (-r / 4.0).exp());
    assert!(!slow.decay_ok());
    let s = g.support_radius(1e-6);
    assert!((s - (2.0 * 1e6f64.ln()).sqrt()).abs() < 0.01);
}
