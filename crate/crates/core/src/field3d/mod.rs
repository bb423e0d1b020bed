//! Cell-centred discretization of `H¹(ℝ³)` on a cube.
//!
//! Cells of side `h = 2L/n` have centres `x_i = c − L + (i + ½)h` on each
//! axis; values outside the box are zero (a ghost layer), so the kinetic
//! form `h Σ_edges (Δu)²` carries homogeneous Dirichlet data half a cell
//! beyond the outermost centres. The Coulomb potential is the exact discrete
//! free-space convolution with the cell-averaged Newton kernel, evaluated by
//! zero padding to the doubled grid.

mod fft;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::functional::{dual_norm, EnergyParts, Evaluation, Functional};
use crate::models::{ChargeProfile, NonlinearityModel};
use crate::numerics::psum_by;
use crate::radial::{RadialField, DECAY_GUARD};

use fft::{strided, zeroed, Plans};

/// `∫_{[−½,½]³} |x|⁻¹ dx = 3 ln(2 + √3) − π/2`.
pub const SINGULAR_CELL: f64 = 2.380_077_363_979_553;

/// `∫_{|x|_∞ > 1} |x|⁻⁴ dx = 6 ∫∫_{[−1,1]²} (1 + y² + z²)⁻² dy dz`.
pub const CUBE_EXTERIOR: f64 = 10.445_037_016_405_239;

/// Relative level that delimits the support of a radial profile when it is
/// embedded in a box.
pub const EMBED_SUPPORT_TOL: f64 = 1e-4;

const MAGIC: &[u8; 4] = b"SPF3";
const FORMAT_VERSION: u32 = 1;
const KIND_F64: u8 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 1 + 24;

/// Uniform cube `[c − L, c + L]³` split into `n³` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3D {
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
    pub center: [f64; 3],
}

pub fn fft_friendly(mut n: usize) -> bool {
    for p in [2, 3, 5] {
        while n % p == 0 {
            n /= p;
        }
    }
    n == 1
}

impl Grid3D {
    pub fn new(half_width: f64, n: usize) -> Result<Arc<Self>> {
        Self::with_center(half_width, n, [0.0; 3])
    }

    /// `n` must be even with no prime factor above 5.
    pub fn with_center(half_width: f64, n: usize, center: [f64; 3]) -> Result<Arc<Self>> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("half_width", format!("{half_width} must be positive")));
        }
        if n < 8 || n % 2 != 0 || !fft_friendly(n) {
            return Err(invalid("n", format!("{n} must be an even 5-smooth number >= 8")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("center", "non-finite coordinate"));
        }
        Ok(Arc::new(Grid3D {
            half_width,
            n,
            h: 2.0 * half_width / n as f64,
            center,
        }))
    }

    pub fn cells(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] - self.half_width + (i as f64 + 0.5) * self.h
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        [
            self.coord(0, idx / (n * n)),
            self.coord(1, (idx / n) % n),
            self.coord(2, idx % n),
        ]
    }

    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        (0..self.cells()).map(|c| f(self.position(c))).collect()
    }

    /// `h³ Σ g`.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        self.cell_volume() * psum_by(g.len(), &|c| g[c])
    }

    /// `h Σ_edges (Δu)²` including the edges to the zero ghost layer.
    pub fn dirichlet_form(&self, u: &[f64]) -> f64 {
        let n = self.n;
        let strides = [n * n, n, 1];
        let sum = psum_by(u.len(), &|c| {
            let idx = [c / (n * n), (c / n) % n, c % n];
            let mut acc = 0.0;
            for a in 0..3 {
                let below = if idx[a] > 0 { u[c - strides[a]] } else { 0.0 };
                let d = u[c] - below;
                acc += d * d;
                if idx[a] == n - 1 {
                    acc += u[c] * u[c];
                }
            }
            acc
        });
        self.h * sum
    }

    /// `h Σ_edges Δa·Δb`, the polarization of [`Self::dirichlet_form`].
    pub fn dirichlet_bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n;
        let strides = [n * n, n, 1];
        let sum = psum_by(a.len(), &|c| {
            let idx = [c / (n * n), (c / n) % n, c % n];
            let mut acc = 0.0;
            for ax in 0..3 {
                let (da, db) = if idx[ax] > 0 {
                    (a[c] - a[c - strides[ax]], b[c] - b[c - strides[ax]])
                } else {
                    (a[c], b[c])
                };
                acc += da * db;
                if idx[ax] == n - 1 {
                    acc += a[c] * b[c];
                }
            }
            acc
        });
        self.h * sum
    }

    pub fn on_boundary(&self, idx: usize) -> bool {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
            .iter()
            .any(|&i| i == 0 || i == n - 1)
    }
}

/// Cell values of a field on a [`Grid3D`], row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3D {
    pub grid: Arc<Grid3D>,
    pub values: Vec<f64>,
}

impl Field3D {
    pub fn new(grid: Arc<Grid3D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "non-finite sample"));
        }
        Ok(Field3D { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid3D>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = grid.sample(f);
        Field3D { grid, values }
    }

    pub fn zeros(grid: Arc<Grid3D>) -> Self {
        let values = vec![0.0; grid.cells()];
        Field3D { grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|u|` over the outermost layer of cells.
    pub fn boundary_max(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(c, _)| self.grid.on_boundary(*c))
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
    }

    /// Boundary layer below `1e−6 · max|u|`.
    pub fn decay_ok(&self) -> bool {
        self.boundary_max() <= DECAY_GUARD * self.max_abs()
    }

    pub fn h1_norm_sq(&self) -> f64 {
        self.grid.dirichlet_form(&self.values) + self.grid.integrate(&self.values.iter().map(|v| v * v).collect::<Vec<_>>())
    }

    /// Image under `x ↦ 2c − x`, which reverses the cell order.
    pub fn mirrored(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Field3D {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Flat little-endian binary: magic, version, `L`, `n`, element kind,
    /// centre, then the `n³` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&g.half_width.to_le_bytes());
        out.extend_from_slice(&(g.n as u64).to_le_bytes());
        out.push(KIND_F64);
        for c in g.center {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |why: &str| invalid("field bytes", why.to_string());
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(bad("missing header"));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let half_width = f64_at(8);
        let n = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
        if bytes[24] != KIND_F64 {
            return Err(bad(&format!("unknown element kind {}", bytes[24])));
        }
        let center = [f64_at(25), f64_at(33), f64_at(41)];
        let grid = Grid3D::with_center(half_width, n, center)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 8 * grid.cells() {
            return Err(Error::DimensionMismatch {
                expected: 8 * grid.cells(),
                got: body.len(),
            });
        }
        let values = body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        Field3D::new(grid, values)
    }

    /// Lossy `x,y,u` export of the plane with third index `k`.
    pub fn slice_csv(&self, k: usize) -> String {
        let g = &self.grid;
        let k = k.min(g.n - 1);
        let mut out = String::from("x,y,u\n");
        for i in 0..g.n {
            for j in 0..g.n {
                let v = self.values[g.index(i, j, k)];
                let _ = writeln!(out, "{:.6e},{:.6e},{:.6e}", g.coord(0, i), g.coord(1, j), v);
            }
        }
        out
    }
}

/// Free-space solver for `−Δφ = g` on a [`Grid3D`].
///
/// `φ_x = Σ_y K(x − y) g_y` with `K(d) = h³/(4π|d|)` off the origin and the
/// cell average `h² · SINGULAR_CELL / 4π` on it. The aperiodic convolution is
/// done on the `(2n)³` grid; the even kernel has a real, even spectrum, so only
/// its first octant is stored. Real data is transformed two rows at a time
/// along the last axis and kept as a half spectrum of `n + 1` columns.
pub struct FreeSpacePoisson {
    pub grid: Arc<Grid3D>,
    big: usize,
    cols: usize,
    kernel: Vec<f64>,
    plans: Plans,
    work: Mutex<Vec<Complex64>>,
}

impl std::fmt::Debug for FreeSpacePoisson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FreeSpacePoisson").field("grid", &self.grid).finish()
    }
}

impl FreeSpacePoisson {
    pub fn new(grid: Arc<Grid3D>) -> Result<Self> {
        let n = grid.n;
        let big = 2 * n;
        let cols = n + 1;
        let plans = Plans::new(big);
        let h = grid.h;
        let mut work = zeroed(big * big * cols)?;
        {
            let mut raw: Vec<f64> = Vec::new();
            raw.try_reserve_exact(big * big * big).map_err(|_| Error::Allocation {
                cells: big * big * big,
                bytes: 8 * big * big * big,
            })?;
            let off = |i: usize| if i < n { i as f64 } else { i as f64 - big as f64 };
            for i in 0..big {
                for j in 0..big {
                    for k in 0..big {
                        let r = (off(i).powi(2) + off(j).powi(2) + off(k).powi(2)).sqrt();
                        raw.push(if r == 0.0 { h * h * SINGULAR_CELL / (4.0 * PI) } else { h * h / (4.0 * PI * r) });
                    }
                }
            }
            forward_padded(&raw, big, big, cols, &plans, &mut work);
        }
        let mut kernel = Vec::with_capacity(cols * cols * cols);
        for i in 0..cols {
            for j in 0..cols {
                for k in 0..cols {
                    kernel.push(work[(i * big + j) * cols + k].re);
                }
            }
        }
        Ok(FreeSpacePoisson {
            grid,
            big,
            cols,
            kernel,
            plans,
            work: Mutex::new(work),
        })
    }

    /// Potential of `source` without sign checks.
    pub fn potential(&self, source: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let (big, cols) = (self.big, self.cols);
        let mut guard = self.work.lock().unwrap_or_else(|e| e.into_inner());
        let w = &mut guard[..];
        // rows the forward pass does not write must start at zero
        for i in 0..n {
            w[(i * big + n) * cols..(i + 1) * big * cols].fill(Complex64::default());
        }
        w[n * big * cols..].fill(Complex64::default());
        forward_padded(source, n, big, cols, &self.plans, w);
        for i in 0..big {
            let fi = i.min(big - i);
            for j in 0..big {
                let fj = j.min(big - j);
                let krow = &self.kernel[(fi * cols + fj) * cols..(fi * cols + fj + 1) * cols];
                let row = &mut w[(i * big + j) * cols..(i * big + j + 1) * cols];
                for (v, kv) in row.iter_mut().zip(krow) {
                    *v *= *kv;
                }
            }
        }
        let inv = self.plans.get(false);
        strided(w, inv, big * cols, (0..big).map(|j| j * cols), 0..cols);
        strided(w, inv, cols, (0..n).map(|i| i * big * cols), 0..cols);
        let scale = 1.0 / (big as f64).powi(3);
        let mut out = vec![0.0; n * n * n];
        let mut line = vec![Complex64::default(); big];
        let mut scratch = vec![Complex64::default(); inv.get_inplace_scratch_len()];
        let i_unit = Complex64::new(0.0, 1.0);
        for i in 0..n {
            for j in (0..n).step_by(2) {
                let a_row = (i * big + j) * cols;
                let b_row = a_row + cols;
                for (k, z) in line.iter_mut().enumerate() {
                    let (kk, flip) = if k <= n { (k, false) } else { (big - k, true) };
                    let (mut a, mut b) = (w[a_row + kk], w[b_row + kk]);
                    if flip {
                        a = a.conj();
                        b = b.conj();
                    }
                    *z = a + i_unit * b;
                }
                inv.process_with_scratch(&mut line, &mut scratch);
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[base + k] = line[k].re * scale;
                    out[base + n + k] = line[k].im * scale;
                }
            }
        }
        out
    }

    /// Potential of a nonnegative source field.
    pub fn solve(&self, source: &Field3D) -> Result<Field3D> {
        if source.grid.n != self.grid.n {
            return Err(Error::DimensionMismatch {
                expected: self.grid.n,
                got: source.grid.n,
            });
        }
        if let Some((index, &value)) = source.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeSource { index, value });
        }
        Ok(Field3D {
            grid: source.grid.clone(),
            values: self.potential(&source.values),
        })
    }
}

/// Forward transform of a real `e³` block placed at the origin of the
/// `big³` grid, into the half spectrum `w` of shape `[big][big][cols]`.
fn forward_padded(src: &[f64], e: usize, big: usize, cols: usize, plans: &Plans, w: &mut [Complex64]) {
    let fwd = plans.get(true);
    let mut line = vec![Complex64::default(); big];
    let mut scratch = vec![Complex64::default(); fwd.get_inplace_scratch_len()];
    let half = Complex64::new(0.5, 0.0);
    let minus_half_i = Complex64::new(0.0, -0.5);
    for i in 0..e {
        for j in (0..e).step_by(2) {
            let a_row = &src[(i * e + j) * e..(i * e + j + 1) * e];
            let has_b = j + 1 < e;
            for k in 0..big {
                line[k] = if k < e {
                    let b = if has_b { src[(i * e + j + 1) * e + k] } else { 0.0 };
                    Complex64::new(a_row[k], b)
                } else {
                    Complex64::default()
                };
            }
            fwd.process_with_scratch(&mut line, &mut scratch);
            for k in 0..cols {
                let z = line[k];
                let zc = line[(big - k) % big].conj();
                w[(i * big + j) * cols + k] = (z + zc) * half;
                if has_b {
                    w[(i * big + j + 1) * cols + k] = (z - zc) * minus_half_i;
                }
            }
        }
    }
    strided(w, fwd, cols, (0..e).map(|i| i * big * cols), 0..cols);
    strided(w, fwd, big * cols, (0..big).map(|j| j * cols), 0..cols);
}

/// Free-space potential of a nonnegative source (builds a fresh solver).
pub fn poisson_freespace(source: &Field3D) -> Result<Field3D> {
    FreeSpacePoisson::new(source.grid.clone())?.solve(source)
}

/// `∫|∇φ|²`: interior edges of the box plus the exterior monopole tail
/// `(Q/4π)² · CUBE_EXTERIOR / (L − h/2)` for total charge `Q`.
pub fn gradient_energy(phi: &Field3D, charge: f64) -> f64 {
    let g = &phi.grid;
    let n = g.n;
    let u = &phi.values;
    let strides = [n * n, n, 1];
    let interior = psum_by(u.len(), &|c| {
        let idx = [c / (n * n), (c / n) % n, c % n];
        (0..3)
            .filter(|&a| idx[a] > 0)
            .map(|a| (u[c] - u[c - strides[a]]).powi(2))
            .sum::<f64>()
    });
    let q = charge / (4.0 * PI);
    g.h * interior + q * q * CUBE_EXTERIOR / (g.half_width - 0.5 * g.h)
}

/// `(−Δ_per + 1)` on the periodic grid, with the same `h` scaling as the
/// kinetic form. Applied in Fourier space.
#[derive(Debug, Clone)]
struct PeriodicMetric {
    n: usize,
    h: f64,
    eig: Vec<f64>,
    plans: Plans,
}

impl PeriodicMetric {
    fn new(grid: &Grid3D) -> Self {
        let n = grid.n;
        let eig = (0..n)
            .map(|m| 2.0 - 2.0 * (2.0 * PI * m as f64 / n as f64).cos())
            .collect();
        PeriodicMetric {
            n,
            h: grid.h,
            eig,
            plans: Plans::new(n),
        }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let h = self.h;
        let wrap = |i: usize, d: isize| ((i as isize + d).rem_euclid(n as isize)) as usize;
        (0..n * n * n)
            .map(|c| {
                let (i, j, k) = (c / (n * n), (c / n) % n, c % n);
                let at = |i: usize, j: usize, k: usize| v[(i * n + j) * n + k];
                let nb = at(wrap(i, -1), j, k)
                    + at(wrap(i, 1), j, k)
                    + at(i, wrap(j, -1), k)
                    + at(i, wrap(j, 1), k)
                    + at(i, j, wrap(k, -1))
                    + at(i, j, wrap(k, 1));
                h * (6.0 * v[c] - nb) + h * h * h * v[c]
            })
            .collect()
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let h = self.h;
        let mut w: Vec<Complex64> = rhs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft::cube(&mut w, &self.plans, true);
        for i in 0..n {
            for j in 0..n {
                let row = &mut w[(i * n + j) * n..(i * n + j + 1) * n];
                let eij = self.eig[i] + self.eig[j];
                for (k, v) in row.iter_mut().enumerate() {
                    *v /= h * (eij + self.eig[k]) + h * h * h;
                }
            }
        }
        fft::cube(&mut w, &self.plans, false);
        let scale = 1.0 / (n * n * n) as f64;
        w.iter().map(|z| z.re * scale).collect()
    }
}

/// The energy on a [`Grid3D`] for fixed charge samples and nonlinearity.
#[derive(Debug, Clone)]
pub struct Problem3D {
    pub grid: Arc<Grid3D>,
    pub rho: Vec<f64>,
    pub model: NonlinearityModel,
    poisson: Arc<FreeSpacePoisson>,
    metric: PeriodicMetric,
}

impl Problem3D {
    pub fn new(grid: Arc<Grid3D>, rho: Vec<f64>, model: NonlinearityModel) -> Result<Self> {
        let poisson = Arc::new(FreeSpacePoisson::new(grid.clone())?);
        Self::with_solver(poisson, rho, model)
    }

    /// Shares an existing Poisson solver (and its kernel spectrum).
    pub fn with_solver(poisson: Arc<FreeSpacePoisson>, rho: Vec<f64>, model: NonlinearityModel) -> Result<Self> {
        let grid = poisson.grid.clone();
        if rho.len() != grid.cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.cells(),
                got: rho.len(),
            });
        }
        if rho.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("rho", "charge samples must be nonnegative"));
        }
        let metric = PeriodicMetric::new(&grid);
        Ok(Problem3D {
            grid,
            rho,
            model,
            poisson,
            metric,
        })
    }

    pub fn with_profile(poisson: Arc<FreeSpacePoisson>, profile: &ChargeProfile, model: NonlinearityModel) -> Result<Self> {
        let rho = poisson.grid.sample(|x| profile.at(x));
        Self::with_solver(poisson, rho, model)
    }

    /// `ρ ≡ √λ`.
    pub fn autonomous(poisson: Arc<FreeSpacePoisson>, lambda: f64, model: NonlinearityModel) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(invalid("lambda", format!("{lambda} must be nonnegative")));
        }
        let rho = vec![lambda.sqrt(); poisson.grid.cells()];
        Self::with_solver(poisson, rho, model)
    }

    pub fn solver(&self) -> &Arc<FreeSpacePoisson> {
        &self.poisson
    }

    pub fn field(&self, values: Vec<f64>) -> Result<Field3D> {
        Field3D::new(self.grid.clone(), values)
    }

    /// Potential of `ρu²`.
    pub fn potential(&self, u: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = u.iter().zip(&self.rho).map(|(u, r)| r * u * u).collect();
        self.poisson.potential(&g)
    }

    fn parts_with(&self, u: &[f64], phi: &[f64], work: bool) -> EnergyParts {
        let g = &self.grid;
        let vol = g.cell_volume();
        let m = &self.model;
        EnergyParts {
            kinetic: g.dirichlet_form(u),
            mass: vol * psum_by(u.len(), &|c| u[c] * u[c]),
            coulomb: vol * psum_by(u.len(), &|c| self.rho[c] * phi[c] * u[c] * u[c]),
            potential: vol * psum_by(u.len(), &|c| m.big_f(u[c])),
            work: if work { vol * psum_by(u.len(), &|c| m.f(u[c]) * u[c]) } else { 0.0 },
        }
    }

    pub fn parts(&self, u: &[f64]) -> EnergyParts {
        self.parts_with(u, &self.potential(u), true)
    }

    /// Sobolev gradient in the periodic metric and the dual norm of `J′(u)`.
    pub fn sobolev_gradient(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let (_, dual) = self.energy_and_dual(u);
        let g = self.riesz(&dual);
        let norm = dual_norm(&dual, &g);
        (g, norm)
    }
}

impl Functional for Problem3D {
    fn dim(&self) -> usize {
        self.grid.cells()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.parts_with(u, &self.potential(u), false).energy()
    }

    fn evaluate(&self, u: &[f64]) -> Evaluation {
        let g = &self.grid;
        let n = g.n;
        let h = g.h;
        let vol = g.cell_volume();
        let phi = self.potential(u);
        let strides = [n * n, n, 1];
        let dual = (0..u.len())
            .map(|c| {
                let idx = [c / (n * n), (c / n) % n, c % n];
                let mut nb = 0.0;
                for a in 0..3 {
                    if idx[a] > 0 {
                        nb += u[c - strides[a]];
                    }
                    if idx[a] + 1 < n {
                        nb += u[c + strides[a]];
                    }
                }
                h * (6.0 * u[c] - nb) + vol * (u[c] + self.rho[c] * phi[c] * u[c] - self.model.f(u[c]))
            })
            .collect();
        Evaluation {
            energy: self.parts_with(u, &phi, false).energy(),
            dual,
            potential: phi,
        }
    }

    fn energy_change(&self, u: &[f64], at_u: &Evaluation, v: &[f64], at_v: &Evaluation) -> f64 {
        let g = &self.grid;
        let vol = g.cell_volume();
        let diff: Vec<f64> = v.iter().zip(u).map(|(b, a)| b - a).collect();
        let sum: Vec<f64> = v.iter().zip(u).map(|(b, a)| b + a).collect();
        let kinetic = g.dirichlet_bilinear(&diff, &sum);
        let mass = vol * psum_by(u.len(), &|c| diff[c] * sum[c]);
        let coulomb = vol
            * psum_by(u.len(), &|c| {
                self.rho[c] * diff[c] * sum[c] * (at_u.potential[c] + at_v.potential[c])
            });
        let potential = vol * psum_by(u.len(), &|c| self.model.big_f_change(u[c], v[c]));
        0.5 * (kinetic + mass) + 0.25 * coulomb - potential
    }

    fn riesz(&self, dual: &[f64]) -> Vec<f64> {
        self.metric.solve(dual)
    }

    fn gram(&self, v: &[f64]) -> Vec<f64> {
        self.metric.apply(v)
    }

    fn h1_norm_sq(&self, u: &[f64]) -> f64 {
        self.grid.dirichlet_form(u) + self.grid.cell_volume() * psum_by(u.len(), &|c| u[c] * u[c])
    }
}

/// `J_ρ(u)` on the grid of `u` (builds a fresh Poisson solver).
pub fn energy_3d(u: &Field3D, profile: &ChargeProfile, model: &NonlinearityModel) -> Result<f64> {
    let poisson = Arc::new(FreeSpacePoisson::new(u.grid.clone())?);
    Ok(Problem3D::with_profile(poisson, profile, model.clone())?.energy(&u.values))
}

/// Sobolev gradient of `J_ρ` at `u` (builds a fresh Poisson solver).
pub fn sobolev_gradient_3d(u: &Field3D, profile: &ChargeProfile, model: &NonlinearityModel) -> Result<Field3D> {
    let poisson = Arc::new(FreeSpacePoisson::new(u.grid.clone())?);
    let p = Problem3D::with_profile(poisson, profile, model.clone())?;
    p.field(p.sobolev_gradient(&u.values).0)
}

/// Samples `u(|x − center|)` with linear interpolation in `r`.
pub fn embed_radial(u: &RadialField, grid: &Arc<Grid3D>, center: [f64; 3]) -> Result<Field3D> {
    embed_radial_sum(u, grid, &[center])
}

/// Sum of translated copies `Σ_i u(|x − c_i|)`; each support must fit in the box.
pub fn embed_radial_sum(u: &RadialField, grid: &Arc<Grid3D>, centers: &[[f64; 3]]) -> Result<Field3D> {
    let radius = u.support_radius(EMBED_SUPPORT_TOL);
    for &center in centers {
        let fits = (0..3).all(|a| (center[a] - grid.center[a]).abs() + radius <= grid.half_width);
        if !fits {
            return Err(Error::SupportOverflow {
                center,
                radius,
                half_width: grid.half_width,
            });
        }
    }
    Ok(Field3D::from_fn(grid.clone(), |x| {
        centers
            .iter()
            .map(|c| {
                let r = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt();
                u.interpolate(r)
            })
            .sum()
    }))
}

/// Shell averages `(mean r, mean u)` over shells of the given width around `center`.
pub fn radial_average(field: &Field3D, center: [f64; 3], width: f64) -> Vec<(f64, f64)> {
    let g = &field.grid;
    let shells = (g.half_width * 3f64.sqrt() / width).ceil() as usize + 1;
    let mut acc = vec![(0.0, 0.0, 0usize); shells];
    for (c, v) in field.values.iter().enumerate() {
        let x = g.position(c);
        let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) + (x[2] - center[2]).powi(2)).sqrt();
        let s = ((r / width) as usize).min(shells - 1);
        acc[s].0 += r;
        acc[s].1 += v;
        acc[s].2 += 1;
    }
    acc.into_iter()
        .filter(|a| a.2 > 0)
        .map(|(r, u, m)| (r / m as f64, u / m as f64))
        .collect()
}

/// Random smooth field: a few Gaussian bumps of random sign, width and
/// position, kept away from the box faces.
pub fn random_smooth(grid: &Arc<Grid3D>, rng: &mut impl rand::Rng, bumps: usize) -> Field3D {
    let l = grid.half_width;
    let params: Vec<([f64; 3], f64, f64)> = (0..bumps)
        .map(|_| {
            let sigma = rng.random_range(0.1 * l..0.2 * l);
            let c = [0, 1, 2].map(|a| grid.center[a] + rng.random_range(-0.3 * l..0.3 * l));
            (c, sigma, rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-1.0..1.0)))
        })
        .collect();
    Field3D::from_fn(grid.clone(), |x| {
        params
            .iter()
            .map(|(c, s, a)| {
                let r2 = (0..3).map(|k| (x[k] - c[k]).powi(2)).sum::<f64>();
                a * (-r2 / (s * s)).exp()
            })
            .sum()
    })
}
