//! Two-dimensional DCT-II on cell-centred grids.
//!
//! The basis functions are `cos(pi k (i + 1/2) / nx) * cos(pi l (j + 1/2) / ny)`,
//! i.e. `cos(k pi x / W) cos(l pi y / H)` sampled at node centres. They are the
//! eigenvectors of the mirrored-ghost Neumann Laplacian and the cosine modes
//! used by spectral multiscale coverage.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Batched 1-D DCT-II / inverse along rows of length `n`.
struct Dct1d {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `e^{-i pi k / 2n}` for `k < n`
    twiddle: Vec<Complex<f64>>,
}

impl Dct1d {
    fn new(n: usize, planner: &mut FftPlanner<f64>) -> Self {
        let twiddle = (0..n)
            .map(|k| Complex::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64)))
            .collect();
        Dct1d {
            n,
            forward: planner.plan_fft_forward(2 * n),
            inverse: planner.plan_fft_inverse(2 * n),
            twiddle,
        }
    }

    /// `X[k] = sum_i x[i] cos(pi k (i + 1/2) / n)` for every row of `data`.
    fn forward(&self, data: &mut [f64]) {
        let n = self.n;
        let rows = data.len() / n;
        let mut buf = vec![Complex::new(0.0, 0.0); rows * 2 * n];
        for (r, row) in data.chunks(n).enumerate() {
            for (b, &x) in buf[r * 2 * n..r * 2 * n + n].iter_mut().zip(row) {
                b.re = x;
            }
        }
        self.forward.process(&mut buf);
        for (r, row) in data.chunks_mut(n).enumerate() {
            let y = &buf[r * 2 * n..r * 2 * n + n];
            for k in 0..n {
                row[k] = (self.twiddle[k] * y[k]).re;
            }
        }
    }

    /// Inverse of [`Dct1d::forward`].
    fn inverse(&self, data: &mut [f64]) {
        let n = self.n;
        let rows = data.len() / n;
        let mut buf = vec![Complex::new(0.0, 0.0); rows * 2 * n];
        let w0 = 1.0 / n as f64;
        let w = 2.0 / n as f64;
        for (r, row) in data.chunks(n).enumerate() {
            let b = &mut buf[r * 2 * n..r * 2 * n + n];
            b[0] = Complex::new(row[0] * w0, 0.0);
            for k in 1..n {
                b[k] = self.twiddle[k].conj() * (row[k] * w);
            }
        }
        self.inverse.process(&mut buf);
        for (r, row) in data.chunks_mut(n).enumerate() {
            for (x, b) in row.iter_mut().zip(&buf[r * 2 * n..r * 2 * n + n]) {
                *x = b.re;
            }
        }
    }
}

/// Reusable 2-D transform for one grid shape. Arrays use the grid layout:
/// index `j * nx + i`, and coefficient `(k, l)` lives at `l * nx + k`.
pub struct Dct2d {
    nx: usize,
    ny: usize,
    along_x: Dct1d,
    along_y: Dct1d,
}

impl std::fmt::Debug for Dct2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct2d").field("nx", &self.nx).field("ny", &self.ny).finish()
    }
}

impl Dct2d {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        let along_x = Dct1d::new(nx, &mut planner);
        let along_y = Dct1d::new(ny, &mut planner);
        Dct2d {
            nx,
            ny,
            along_x,
            along_y,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Unnormalised forward transform.
    pub fn forward(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.nx * self.ny);
        let mut a = values.to_vec();
        self.along_x.forward(&mut a);
        let mut t = transpose(&a, self.nx, self.ny);
        self.along_y.forward(&mut t);
        transpose(&t, self.ny, self.nx)
    }

    /// Exact inverse of [`Dct2d::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.nx * self.ny);
        let mut t = transpose(coeffs, self.nx, self.ny);
        self.along_y.inverse(&mut t);
        let mut a = transpose(&t, self.ny, self.nx);
        self.along_x.inverse(&mut a);
        a
    }
}

/// `src` has `rows` rows of length `cols`; returns the `cols x rows` transpose.
fn transpose(src: &[f64], cols: usize, rows: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}
