//! Small dense complex linear algebra and random sampling.
//!
//! Everything in this crate works on matrices no larger than a few hundred
//! rows, so the kernel is deliberately plain: row-major storage, scalar
//! loops, no blocking. [`Matrix`] carries `U x B` channels and their
//! variants, [`Rng`] is a seedable xoshiro256** generator (with splitmix64
//! seed expansion) used for every random draw in the crate, and Gaussian
//! samples come from the Box-Muller transform on top of it. The generator
//! family and the sampling method are fixed on purpose: simulation results
//! are reproduced bit-for-bit from a seed, across platforms and thread
//! counts.

use crate::C64;
use std::ops::{Index, IndexMut};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LinalgError {
    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Panics if `data.len() != rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![C64::new(0.0, 0.0); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix entry by entry from `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * v`. Panics on dimension mismatch.
    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec: dimension mismatch");
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut acc = C64::new(0.0, 0.0);
            for (m, x) in self.row(r).iter().zip(v) {
                acc += m * x;
            }
            out.push(acc);
        }
        out
    }

    /// `self^H`, the conjugate transpose.
    pub fn conj_transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    /// Gram matrix `self^H * self` (Hermitian, positive semidefinite).
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..self.rows {
                    acc += self[(k, i)].conj() * self[(k, j)];
                }
                g[(i, j)] = acc;
                if i != j {
                    g[(j, i)] = acc.conj();
                }
            }
        }
        g
    }

    /// `self * rhs`. Panics on dimension mismatch.
    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "mul: dimension mismatch");
        Matrix::from_fn(self.rows, rhs.cols, |r, c| {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..self.cols {
                acc += self[(r, k)] * rhs[(k, c)];
            }
            acc
        })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Inner product `a^H b` (conjugate-linear in the first argument).
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    assert_eq!(a.len(), b.len(), "inner: dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm `||v||^2`.
pub fn norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// Solves `G x = b` for Hermitian positive definite `G` via Cholesky
/// factorization and two triangular solves.
pub fn hermitian_solve(g: &Matrix, b: &[C64]) -> Result<Vec<C64>, LinalgError> {
    assert_eq!(g.rows(), g.cols(), "hermitian_solve: matrix must be square");
    assert_eq!(g.rows(), b.len(), "hermitian_solve: dimension mismatch");
    let n = g.rows();

    // G = L L^H with L lower triangular, real positive diagonal.
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let ljj = d.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut acc = g[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / ljj;
        }
    }

    // Forward substitution L y = b.
    let mut y = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[(i, k)] * y[k];
        }
        y[i] = acc / l[(i, i)].re;
    }
    // Backward substitution L^H x = y.
    let mut x = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for k in i + 1..n {
            acc -= l[(k, i)].conj() * x[k];
        }
        x[i] = acc / l[(i, i)].re;
    }
    Ok(x)
}

// Fixed seed for the power-iteration start vector, so repeated estimates of
// the same matrix agree exactly. Shared with the matrix-free estimator in
// the precoder so both run the same iteration.
pub(crate) const POWER_ITER_SEED: u64 = 0x5eed_0000_0000_0001;

/// Power-iteration estimate of the largest eigenvalue of `M^H M`, i.e. the
/// squared spectral norm of `M`. The estimate is a Rayleigh quotient, so it
/// never exceeds the true value; 30 iterations are enough for a few percent
/// of accuracy on the well-conditioned random matrices seen here.
pub fn spectral_norm_sq_estimate(m: &Matrix, iters: usize) -> f64 {
    let mut rng = Rng::new(POWER_ITER_SEED);
    let mut v = gaussian_complex_vector(&mut rng, m.cols(), 1.0);
    let nv = norm_sq(&v).sqrt();
    if nv == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);

    for _ in 0..iters {
        let w = m.matvec(&v);
        let u = m.conj_transpose().matvec(&w);
        let nu = norm_sq(&u).sqrt();
        if nu == 0.0 {
            return 0.0; // M^H M v vanished; M is (numerically) zero on v.
        }
        v = u.into_iter().map(|x| x / nu).collect();
    }
    norm_sq(&m.matvec(&v))
}

/// Seedable xoshiro256** generator.
///
/// The four state words are expanded from the seed with splitmix64, so any
/// 64-bit seed (including 0) yields a well-mixed state.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let mut next = || {
            sm = sm.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = sm;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        };
        Self {
            s: [next(), next(), next(), next()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; safe as a logarithm argument.
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One random bit (0 or 1).
    pub fn next_bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    /// Two independent standard normal samples via Box-Muller.
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

/// `n` i.i.d. circularly symmetric complex Gaussian samples with the given
/// per-entry variance (`E|z|^2 = variance`). Each entry consumes exactly one
/// Box-Muller pair, so streams are reproducible sample by sample.
pub fn gaussian_complex_vector(rng: &mut Rng, n: usize, variance: f64) -> Vec<C64> {
    assert!(variance >= 0.0, "variance must be nonnegative");
    let sigma = (variance / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let (re, im) = rng.gaussian_pair();
            C64::new(sigma * re, sigma * im)
        })
        .collect()
}
