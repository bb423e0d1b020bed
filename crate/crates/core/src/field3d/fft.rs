//! Batched 1-D FFTs along the axes of row-major 3-D arrays.
//!
//! An array of shape `[a][b][c]` stores `(i, j, k)` at `(i·b + j)·c + k`.
//! Passes take explicit index ranges so that lines known to be zero on input
//! (or unused on output) are skipped.

use std::ops::Range;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub(crate) struct Plans {
    pub len: usize,
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Plans {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Plans").field("len", &self.len).finish()
    }
}

impl Plans {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plans {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn get(&self, forward: bool) -> &Arc<dyn Fft<f64>> {
        if forward {
            &self.forward
        } else {
            &self.inverse
        }
    }
}

/// Zeroed complex buffer, reporting the requested size on failure.
pub(crate) fn zeroed(cells: usize) -> Result<Vec<Complex64>> {
    let mut v: Vec<Complex64> = Vec::new();
    v.try_reserve_exact(cells).map_err(|_| Error::Allocation {
        cells,
        bytes: cells * std::mem::size_of::<Complex64>(),
    })?;
    v.resize(cells, Complex64::new(0.0, 0.0));
    Ok(v)
}

/// Transforms the strided lines `base + m·stride + k`, `m < fft.len()`, for
/// every `base` in `bases` and `k` in `cols`. Columns are gathered in
/// batches so that each pass reads contiguous runs of `k`.
pub(crate) fn strided(
    data: &mut [Complex64],
    fft: &Arc<dyn Fft<f64>>,
    stride: usize,
    bases: impl Iterator<Item = usize>,
    cols: Range<usize>,
) {
    let len = fft.len();
    let width = cols.len();
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut tmp = vec![Complex64::default(); width * len];
    for base in bases {
        for m in 0..len {
            let row = &data[base + m * stride + cols.start..base + m * stride + cols.end];
            for (kk, v) in row.iter().enumerate() {
                tmp[kk * len + m] = *v;
            }
        }
        fft.process_with_scratch(&mut tmp, &mut scratch);
        for m in 0..len {
            let row = &mut data[base + m * stride + cols.start..base + m * stride + cols.end];
            for (kk, v) in row.iter_mut().enumerate() {
                *v = tmp[kk * len + m];
            }
        }
    }
}

/// Full complex 3-D transform of a cube of side `plans.len` (unnormalized).
pub(crate) fn cube(data: &mut [Complex64], plans: &Plans, forward: bool) {
    let n = plans.len;
    let fft = plans.get(forward);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    strided(data, fft, n, (0..n).map(|i| i * n * n), 0..n);
    strided(data, fft, n * n, (0..n).map(|j| j * n), 0..n);
}
