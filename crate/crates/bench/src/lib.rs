//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use spvar::{FreeSpacePoisson, Grid3D, NonlinearityModel, Problem3D, RadialGrid, RadialProblem};

/// Reference coupling: twice the certified lower threshold of the reference model.
pub const LAMBDA: f64 = 0.0031575744;

/// Pure power `f(s) = s^{3/2}` with growth exponent 2.7.
pub fn model() -> NonlinearityModel {
    NonlinearityModel::pure_power(2.5, 1.0, 2.7).expect("reference model is valid")
}

pub fn radial(n: usize) -> (RadialProblem, Vec<f64>) {
    let grid = RadialGrid::new(24.0, n).expect("valid radial grid");
    let p = RadialProblem::autonomous(grid.clone(), LAMBDA, model()).expect("valid problem");
    (p, gaussian_radial(&grid))
}

pub fn cube(n: usize) -> (Problem3D, Vec<f64>) {
    let grid = Grid3D::new(8.0, n).expect("valid 3-D grid");
    let poisson = Arc::new(FreeSpacePoisson::new(grid.clone()).expect("kernel builds"));
    let p = Problem3D::autonomous(poisson, LAMBDA, model()).expect("valid problem");
    let u = grid.sample(|x| 10.0 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).exp());
    (p, u)
}

fn gaussian_radial(grid: &RadialGrid) -> Vec<f64> {
    let mut u = grid.sample(|r| 10.0 * (-(r / 2.0).powi(2)).exp());
    u[grid.n] = 0.0;
    u
}
