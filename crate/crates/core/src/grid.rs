//! Torus geometry and the spectral toolbox: discrete Fourier transforms,
//! Fourier-multiplier application, Galerkin truncation, norms and quadrature.
//!
//! The domain is the square torus `[-pi, pi)^2` sampled on an `n x n` uniform
//! lattice. Coefficients follow the convention
//! `coeff(k) = (2pi)^{-2} \int f(x) e^{-i k.x} dx`, approximated by the
//! rectangle rule, so `coeff(0,0)` is the mean of the field and
//! `f(x) = sum_k coeff(k) e^{i k.x}`. Wavenumbers run over the symmetric
//! range `{-n/2, ..., n/2 - 1}` per dimension.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Hard ceiling on points per dimension.
pub const MAX_GRID_N: usize = 4096;

/// One lattice mode: the integer wavenumber pair and its squared modulus.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    pub k: [i32; 2],
    pub k_sq: f64,
}

/// Immutable torus discretization shared by all fields and spectra.
///
/// Owns the wavenumber table, quadrature weight and FFT plans. Construction
/// returns an `Arc` because every `Field`/`Spectrum` keeps a handle; a `Grid`
/// is never mutated after construction and is safe to share across threads.
pub struct Grid {
    n: usize,
    quad_weight: f64,
    coords: Vec<f64>,
    modes: Vec<Mode>,
    // (-1)^(k1+k2) per mode; relates the index-space DFT to coefficients on
    // the centered domain [-pi, pi)^2.
    phase: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).finish()
    }
}

impl Grid {
    /// Builds an `n x n` torus grid. `n` must be even and in `4..=4096`.
    pub fn new(n: usize) -> Result<Arc<Self>> {
        if !n.is_multiple_of(2) {
            return Err(Error::GridOdd(n));
        }
        if n < 4 {
            return Err(Error::GridTooSmall(n));
        }
        if n > MAX_GRID_N {
            return Err(Error::GridTooLarge { n, max: MAX_GRID_N });
        }

        let half = (n / 2) as i32;
        let wrap = |m: usize| -> i32 {
            let m = m as i32;
            if m < half {
                m
            } else {
                m - n as i32
            }
        };

        let mut modes = Vec::with_capacity(n * n);
        let mut phase = Vec::with_capacity(n * n);
        for m1 in 0..n {
            let k1 = wrap(m1);
            for m2 in 0..n {
                let k2 = wrap(m2);
                modes.push(Mode {
                    k: [k1, k2],
                    k_sq: (k1 as f64) * (k1 as f64) + (k2 as f64) * (k2 as f64),
                });
                // k and m have the same parity because n is even.
                phase.push(if (m1 + m2) % 2 == 0 { 1.0 } else { -1.0 });
            }
        }

        let coords = (0..n)
            .map(|i| 2.0 * PI * (i as f64) / (n as f64) - PI)
            .collect();

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);

        let h = 2.0 * PI / (n as f64);
        Ok(Arc::new(Grid {
            n,
            quad_weight: h * h,
            coords,
            modes,
            phase,
            fwd,
            inv,
        }))
    }

    /// Points per dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of lattice points (and modes).
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Rectangle-rule weight `(2pi/n)^2` of each sample point.
    pub fn quad_weight(&self) -> f64 {
        self.quad_weight
    }

    /// Sample coordinates along one axis: `x_i = -pi + 2pi i / n`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Wavenumber table, aligned with the flat spectral layout.
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Flat index of the mode with wavenumber `k` (components in
    /// `-n/2..n/2`).
    pub fn index_of_mode(&self, k: [i32; 2]) -> usize {
        let n = self.n as i32;
        let m1 = k[0].rem_euclid(n) as usize;
        let m2 = k[1].rem_euclid(n) as usize;
        m1 * self.n + m2
    }

    /// Sample coordinates of the flat lattice index.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        (self.coords[idx / self.n], self.coords[idx % self.n])
    }

    // Row FFTs, transpose, row FFTs, transpose back: a full 2D transform for
    // the square lattice.
    fn fft2(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(buf.len(), self.len());
        let mut scratch = vec![Complex64::ZERO; plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, self.n);
        plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, self.n);
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

pub(crate) fn ensure_same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.n == b.n {
        Ok(())
    } else {
        Err(Error::GridMismatch(a.n, b.n))
    }
}

/// Real-valued samples on a grid, row-major (`values[i*n + j]` holds the
/// sample at `(x1_i, x2_j)`).
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    /// The constant field `u == c`.
    pub fn constant(grid: &Arc<Grid>, c: f64) -> Field {
        Field {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x1, x2)` on the lattice.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Field {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            let x1 = grid.coords[i];
            for j in 0..n {
                values.push(f(x1, grid.coords[j]));
            }
        }
        Field {
            grid: grid.clone(),
            values,
        }
    }

    /// Wraps an existing sample array; rejects wrong length and non-finite
    /// entries.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::FieldLength {
                got: values.len(),
                want: grid.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { index, value });
            }
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_values_unchecked(grid: Arc<Grid>, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Mean value `(2pi)^{-2} \int u dx` (plain sample average).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / (self.values.len() as f64)
    }

    /// Quadrature L2 norm.
    pub fn norm_l2(&self) -> f64 {
        (self.grid.quad_weight * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Max over grid samples (may undershoot the continuum sup between
    /// samples; that gap is accepted and documented).
    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Quadrature L^p norm, `p >= 1`.
    pub fn norm_lp(&self, p: f64) -> f64 {
        (self.grid.quad_weight * self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>())
            .powf(1.0 / p)
    }

    /// Distance of the samples from the pure phases: `1 - max|u|`.
    pub fn margin(&self) -> f64 {
        1.0 - self.norm_linf()
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Forward transform to Fourier coefficients.
    pub fn transform(&self) -> Spectrum {
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.grid.fft2(&mut buf, &self.grid.fwd);
        let scale = 1.0 / (self.grid.len() as f64);
        let coeffs = buf
            .iter()
            .zip(&self.grid.phase)
            .map(|(c, ph)| c * (ph * scale))
            .collect();
        Spectrum {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// Solves `-lap v = u - mean(u)` with `mean(v) = 0`, i.e. applies the
    /// multiplier `1/|k|^2` away from the zero mode. Requires `u` to be
    /// mean-zero up to `1e-10 * ||u||_2`.
    pub fn inverse_laplacian_meanzero(&self) -> Result<Field> {
        let mean = self.mean();
        let bound = 1e-10 * self.norm_l2();
        if mean.abs() > bound {
            return Err(Error::MeanNotZero {
                mean: mean.abs(),
                bound,
            });
        }
        let mut spec = self.transform();
        for (c, mode) in spec.coeffs.iter_mut().zip(self.grid.modes()) {
            if mode.k == [0, 0] {
                *c = Complex64::ZERO;
            } else {
                *c /= mode.k_sq;
            }
        }
        Ok(spec.inverse_transform())
    }
}

/// Fourier coefficients of a field, aligned with `Grid::modes`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    /// All-zero spectrum.
    pub fn zero(grid: &Arc<Grid>) -> Spectrum {
        Spectrum {
            grid: grid.clone(),
            coeffs: vec![Complex64::ZERO; grid.len()],
        }
    }

    pub(crate) fn from_coeffs(grid: Arc<Grid>, coeffs: Vec<Complex64>) -> Spectrum {
        debug_assert_eq!(coeffs.len(), grid.len());
        Spectrum { grid, coeffs }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Mutable coefficient access. Keep conjugate symmetry intact if the
    /// spectrum is meant to invert to a real field.
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at wavenumber `k`.
    pub fn coeff(&self, k: [i32; 2]) -> Complex64 {
        self.coeffs[self.grid.index_of_mode(k)]
    }

    /// Back to real samples (imaginary parts are discarded; they vanish for
    /// conjugate-symmetric input).
    pub fn inverse_transform(&self) -> Field {
        let mut buf: Vec<Complex64> = self
            .coeffs
            .iter()
            .zip(&self.grid.phase)
            .map(|(c, &ph)| c * ph)
            .collect();
        self.grid.fft2(&mut buf, &self.grid.inv);
        let values = buf.iter().map(|c| c.re).collect();
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Multiplies every coefficient by the real symbol evaluated at its mode:
    /// `-|k|^2` realizes the Laplacian, `|k|^4` the bilaplacian, `|k|^s` the
    /// fractional gradient, and the stepper's rational symbols its update.
    pub fn apply_symbol(&self, symbol: impl Fn(Mode) -> f64) -> Result<Spectrum> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (c, &mode) in self.coeffs.iter().zip(self.grid.modes()) {
            let s = symbol(mode);
            if !s.is_finite() {
                return Err(Error::NonFiniteSymbol(mode.k[0], mode.k[1]));
            }
            coeffs.push(c * s);
        }
        Ok(Spectrum {
            grid: self.grid.clone(),
            coeffs,
        })
    }

    /// Zeroes every coefficient with `max(|k1|, |k2|) > cutoff` (the
    /// projection onto the first `cutoff` Fourier modes per direction).
    pub fn galerkin_project(&self, cutoff: usize) -> Result<Spectrum> {
        let max = self.grid.n() / 2;
        if cutoff == 0 || cutoff > max {
            return Err(Error::CutoffOutOfRange { cutoff, max });
        }
        let cut = cutoff as i32;
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.grid.modes())
            .map(|(c, mode)| {
                if mode.k[0].abs() > cut || mode.k[1].abs() > cut {
                    Complex64::ZERO
                } else {
                    *c
                }
            })
            .collect();
        Ok(Spectrum {
            grid: self.grid.clone(),
            coeffs,
        })
    }

    /// Spectral L2 norm `2pi * sqrt(sum |coeff|^2)`; equals the quadrature
    /// norm of the samples by Parseval.
    pub fn norm_l2(&self) -> f64 {
        let sum: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        2.0 * PI * sum.sqrt()
    }

    /// Sobolev norm `sqrt((2pi)^2 sum (1+|k|^2)^s |coeff|^2)`.
    pub fn norm_h(&self, s: f64) -> f64 {
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(self.grid.modes())
            .map(|(c, mode)| (1.0 + mode.k_sq).powf(s) * c.norm_sqr())
            .sum();
        2.0 * PI * sum.sqrt()
    }

    /// `||grad f||_2 = sqrt((2pi)^2 sum |k|^2 |coeff|^2)`.
    pub fn grad_norm_l2(&self) -> f64 {
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(self.grid.modes())
            .map(|(c, mode)| mode.k_sq * c.norm_sqr())
            .sum();
        2.0 * PI * sum.sqrt()
    }

    /// Norm of `|grad|^{-1} f`, defined on mean-zero fields: the zero mode
    /// must vanish up to `1e-10` relative to the L2 norm.
    pub fn neg_grad_norm_l2(&self) -> Result<f64> {
        let l2 = self.norm_l2() / (2.0 * PI);
        let zero = self.coeffs[self.grid.index_of_mode([0, 0])].norm();
        if zero > 1e-10 * l2 {
            return Err(Error::MeanNotZero {
                mean: zero,
                bound: 1e-10 * l2,
            });
        }
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(self.grid.modes())
            .filter(|(_, mode)| mode.k != [0, 0])
            .map(|(c, mode)| c.norm_sqr() / mode.k_sq)
            .sum();
        Ok(2.0 * PI * sum.sqrt())
    }
}
