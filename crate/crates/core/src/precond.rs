//! Approximate inverse Hessians used as the initial quasi-Newton metric.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rustfft::{num_complex::Complex, Fft, FftPlanner};

/// Symmetric positive definite operator applied as `P^{-1} g`.
#[derive(Clone)]
pub enum Preconditioner {
    Identity,
    Band(BandCholesky),
    Dense(Arc<Cholesky<f64, Dyn>>),
    Toeplitz(Arc<ToeplitzInverse>),
}

impl std::fmt::Debug for Preconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Preconditioner::Identity => "identity",
            Preconditioner::Band(_) => "band",
            Preconditioner::Dense(_) => "dense",
            Preconditioner::Toeplitz(_) => "toeplitz",
        };
        f.write_str(name)
    }
}

impl Preconditioner {
    pub fn solve(&self, g: &[f64]) -> Vec<f64> {
        match self {
            Preconditioner::Identity => g.to_vec(),
            Preconditioner::Band(b) => b.solve(g),
            Preconditioner::Dense(c) => c.solve(&DVector::from_column_slice(g)).as_slice().to_vec(),
            Preconditioner::Toeplitz(c) => c.solve(g),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Preconditioner::Identity)
    }

    /// Cholesky of a dense SPD matrix; `None` if it is not numerically SPD.
    pub fn dense(m: DMatrix<f64>) -> Option<Self> {
        Cholesky::new(m).map(|c| Preconditioner::Dense(Arc::new(c)))
    }
}

/// Cholesky factor of a symmetric banded matrix, stored by rows:
/// `l[i * (w + 1) + (j + w - i)]` holds `L[i][j]` for `i - w <= j <= i`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    w: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// `lower(i, j)` returns `A[i][j]` for `i - w <= j <= i`.
    pub fn new(n: usize, w: usize, lower: impl Fn(usize, usize) -> f64) -> Option<Self> {
        let stride = w + 1;
        let mut l = vec![0.0; n * stride];
        for i in 0..n {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                let mut sum = lower(i, j);
                let klo = lo.max(j.saturating_sub(w));
                for k in klo..j {
                    sum -= l[i * stride + k + w - i] * l[j * stride + k + w - j];
                }
                if j == i {
                    if !(sum > 0.0) {
                        return None;
                    }
                    l[i * stride + w] = sum.sqrt();
                } else {
                    l[i * stride + j + w - i] = sum / l[j * stride + w];
                }
            }
        }
        Some(BandCholesky { n, w, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, w, stride) = (self.n, self.w, self.w + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut sum = y[i];
            for j in i.saturating_sub(w)..i {
                sum -= self.l[i * stride + j + w - i] * y[j];
            }
            y[i] = sum / self.l[i * stride + w];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for j in i + 1..(i + w + 1).min(n) {
                sum -= self.l[j * stride + i + w - j] * y[j];
            }
            y[i] = sum / self.l[i * stride + w];
        }
        y
    }
}

/// Inverse of a symmetric positive definite Toeplitz matrix. The first
/// column of the inverse comes from the Durbin recursion; products use the
/// Gohberg-Semencul form `x0 T^{-1} = L(x) L(x)^T - L(Z J x) L(Z J x)^T`.
pub struct ToeplitzInverse {
    n: usize,
    x0: f64,
    // spectra of the two generators, zero padded to `m`
    gen_a: Vec<Complex<f64>>,
    gen_b: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ToeplitzInverse {
    /// `column` is the first column of the matrix. `None` if the recursion
    /// detects a matrix that is not numerically positive definite.
    pub fn new(column: &[f64]) -> Option<Self> {
        let n = column.len();
        let t0 = *column.first()?;
        if !(t0 > 0.0) {
            return None;
        }
        let r: Vec<f64> = column[1..].iter().map(|c| c / t0).collect();
        // Durbin: T_{n-1} y = -r with T normalised to a unit diagonal
        let mut y: Vec<f64> = Vec::with_capacity(n);
        if n > 1 {
            y.push(-r[0]);
            let mut beta = 1.0;
            let mut alpha = -r[0];
            let mut z = vec![0.0; n];
            for k in 1..n - 1 {
                beta *= 1.0 - alpha * alpha;
                if !(beta > 0.0) {
                    return None;
                }
                let dot: f64 = (0..k).map(|j| r[k - 1 - j] * y[j]).sum();
                alpha = -(r[k] + dot) / beta;
                for j in 0..k {
                    z[j] = y[j] + alpha * y[k - 1 - j];
                }
                y[..k].copy_from_slice(&z[..k]);
                y.push(alpha);
            }
        }
        let denom = t0 * (1.0 + r.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>());
        if !(denom > 0.0) {
            return None;
        }
        let x: Vec<f64> = std::iter::once(1.0).chain(y).map(|v| v / denom).collect();
        let m = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let spectrum = |v: &mut dyn Iterator<Item = f64>| {
            let mut buf = vec![Complex::new(0.0, 0.0); m];
            for (b, x) in buf.iter_mut().zip(v) {
                b.re = x;
            }
            forward.process(&mut buf);
            buf
        };
        let gen_a = spectrum(&mut x.iter().copied());
        // Z J x = (0, x_{n-1}, ..., x_1)
        let gen_b = spectrum(&mut std::iter::once(0.0).chain(x[1..].iter().rev().copied()));
        Some(ToeplitzInverse {
            n,
            x0: x[0],
            gen_a,
            gen_b,
            forward,
            inverse,
        })
    }

    /// `L(g) L(g)^T w` for the generator with spectrum `gen`.
    fn gram_product(&self, gen: &[Complex<f64>], w: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, gen.len());
        let scale = 1.0 / m as f64;
        // L^T w = J L J w
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (b, &v) in buf.iter_mut().zip(w.iter().rev()) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, g) in buf.iter_mut().zip(gen) {
            *b *= g * scale;
        }
        self.inverse.process(&mut buf);
        let lt: Vec<f64> = buf[..n].iter().rev().map(|c| c.re).collect();
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (b, &v) in buf.iter_mut().zip(&lt) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, g) in buf.iter_mut().zip(gen) {
            *b *= g * scale;
        }
        self.inverse.process(&mut buf);
        buf[..n].iter().map(|c| c.re).collect()
    }

    pub fn solve(&self, g: &[f64]) -> Vec<f64> {
        let a = self.gram_product(&self.gen_a, g);
        let b = self.gram_product(&self.gen_b, g);
        a.iter().zip(&b).map(|(p, q)| (p - q) / self.x0).collect()
    }
}
