//! Shared test oracles: an explicit dense DFT matrix for tiny grids and a
//! dense one-step linear solve, both independent of the library's FFT path.

// Not every test binary sharing this module touches every helper.
#![allow(dead_code)]

use chlog_core::{Field, Grid, ModelParams};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

pub struct DenseDft {
    pub n: usize,
    /// Wavenumbers in the library's flat mode order.
    pub k: Vec<[i32; 2]>,
    pub k_sq: Vec<f64>,
    /// fwd[m][j] = e^{-i k(m).x_j} / n^2
    fwd: Vec<Complex64>,
    /// inv[j][m] = e^{+i k(m).x_j}
    inv: Vec<Complex64>,
}

impl DenseDft {
    pub fn new(n: usize) -> DenseDft {
        let n2 = n * n;
        let half = (n / 2) as i32;
        let wrap = |m: usize| -> i32 {
            let m = m as i32;
            if m < half {
                m
            } else {
                m - n as i32
            }
        };
        let coord = |i: usize| 2.0 * PI * (i as f64) / (n as f64) - PI;

        let mut k = Vec::with_capacity(n2);
        let mut k_sq = Vec::with_capacity(n2);
        for m1 in 0..n {
            for m2 in 0..n {
                let kk = [wrap(m1), wrap(m2)];
                k.push(kk);
                k_sq.push((kk[0] * kk[0] + kk[1] * kk[1]) as f64);
            }
        }

        let mut fwd = vec![Complex64::ZERO; n2 * n2];
        let mut inv = vec![Complex64::ZERO; n2 * n2];
        for (m, kk) in k.iter().enumerate() {
            for j1 in 0..n {
                for j2 in 0..n {
                    let j = j1 * n + j2;
                    let dot = kk[0] as f64 * coord(j1) + kk[1] as f64 * coord(j2);
                    let e = Complex64::new(0.0, -dot).exp();
                    fwd[m * n2 + j] = e / (n2 as f64);
                    inv[j * n2 + m] = e.conj();
                }
            }
        }

        DenseDft { n, k, k_sq, fwd, inv }
    }

    pub fn transform(&self, values: &[f64]) -> Vec<Complex64> {
        let n2 = self.n * self.n;
        (0..n2)
            .map(|m| {
                (0..n2)
                    .map(|j| self.fwd[m * n2 + j] * values[j])
                    .sum::<Complex64>()
            })
            .collect()
    }

    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let n2 = self.n * self.n;
        (0..n2)
            .map(|j| {
                (0..n2)
                    .map(|m| self.inv[j * n2 + m] * coeffs[m])
                    .sum::<Complex64>()
                    .re
            })
            .collect()
    }

    /// Real-space matrix of the Fourier multiplier `symbol(m)`.
    pub fn multiplier_matrix(&self, symbol: impl Fn(usize) -> f64) -> Vec<Complex64> {
        let n2 = self.n * self.n;
        let mut out = vec![Complex64::ZERO; n2 * n2];
        for j in 0..n2 {
            for jp in 0..n2 {
                let mut acc = Complex64::ZERO;
                for m in 0..n2 {
                    acc += self.inv[j * n2 + m] * symbol(m) * self.fwd[m * n2 + jp];
                }
                out[j * n2 + jp] = acc;
            }
        }
        out
    }
}

pub fn matvec(a: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
        .collect()
}

pub fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; n * n];
    for i in 0..n {
        for kk in 0..n {
            let aik = a[i * n + kk];
            for j in 0..n {
                out[i * n + j] += aik * b[kk * n + j];
            }
        }
    }
    out
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = b.len();
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                m[r1 * n + col]
                    .norm()
                    .partial_cmp(&m[r2 * n + col].norm())
                    .unwrap()
            })
            .unwrap();
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            rhs.swap(col, pivot);
        }
        let d = m[col * n + col];
        for row in (col + 1)..n {
            let factor = m[row * n + col] / d;
            if factor == Complex64::ZERO {
                continue;
            }
            for j in col..n {
                let v = m[col * n + j];
                m[row * n + j] -= factor * v;
            }
            let r = rhs[col];
            rhs[row] -= factor * r;
        }
    }
    let mut x = vec![Complex64::ZERO; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in (row + 1)..n {
            acc -= m[row * n + j] * x[j];
        }
        x[row] = acc / m[row * n + row];
    }
    x
}

/// One dense semi-implicit step: solve
/// `(I + tau nu L^2 + tau theta_c L) u1 = u0 + tau L f_tilde(u0)`
/// where `L` is the dense real-space Laplacian.
pub fn dense_semi_implicit_step(
    dft: &DenseDft,
    grid: &Arc<Grid>,
    u0: &Field,
    tau: f64,
    params: &ModelParams,
) -> Vec<f64> {
    let n2 = dft.n * dft.n;
    let lap = dft.multiplier_matrix(|m| -dft.k_sq[m]);
    let lap2 = matmul(&lap, &lap, n2);

    let mut a = vec![Complex64::ZERO; n2 * n2];
    for i in 0..n2 {
        for j in 0..n2 {
            a[i * n2 + j] = tau * params.nu * lap2[i * n2 + j] + tau * params.theta_c * lap[i * n2 + j];
        }
        a[i * n2 + i] += 1.0;
    }

    let g: Vec<Complex64> = u0
        .values()
        .iter()
        .map(|&v| Complex64::new(params.f_tilde(v), 0.0))
        .collect();
    let lap_g = matvec(&lap, &g);
    let rhs: Vec<Complex64> = u0
        .values()
        .iter()
        .zip(&lap_g)
        .map(|(&u, lg)| u + tau * lg)
        .collect();

    let _ = grid;
    solve_dense(&a, &rhs).iter().map(|c| c.re).collect()
}
