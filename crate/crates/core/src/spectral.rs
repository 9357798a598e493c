//! Fourier diagonalization of the long-stencil Laplacian on periodic grids.
//!
//! Every translation-invariant difference operator used by the scheme acts on
//! the discrete mode `exp(2 pi i (k x + l y) / L)` by a real multiplier. With
//! `nu_k = 4 sin^2(k pi h / L) / h^2`:
//!
//! * standard second difference: `lambda_std[k] = -nu_k`
//! * long stencil: `lambda_long[k] = lambda_std[k] - h^2/12 lambda_std[k]^2 = -(nu_k + h^2 nu_k^2 / 12)`
//! * `-Lap_(4)` in 2-D: `Lambda[k, l] = -(lambda_long[k] + lambda_long[l]) >= 0`
//!
//! Transforms are real-to-complex along the contiguous (y) axis followed by
//! complex transforms along x. The spectrum is stored column-wise: entry
//! `(kx, ky)` lives at `ky * m + kx` with `ky in 0..=m/2`. The inverse carries
//! the `1 / m^dim` normalization.

use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Dim, Field, GridSpec};

/// Mean tolerance used when a right-hand side must be mean-free.
pub fn mean_tolerance(g: &Field) -> f64 {
    1e-12 * (1.0 + g.norm_linf())
}

/// Half-spectrum of a real grid function.
#[derive(Debug, Clone)]
pub struct Spectrum {
    points: usize,
    dim: Dim,
    data: Vec<Complex64>,
}

impl Spectrum {
    /// Number of stored `ky` columns, `m / 2 + 1`.
    pub fn half_len(&self) -> usize {
        self.points / 2 + 1
    }

    fn rows(&self) -> usize {
        match self.dim {
            Dim::One => 1,
            Dim::Two => self.points,
        }
    }

    /// Raw coefficient at storage indices `kx in 0..m` (0 in 1-D), `ky in 0..=m/2`.
    pub fn raw(&self, kx: usize, ky: usize) -> Complex64 {
        self.data[ky * self.rows() + kx]
    }

    /// Coefficient of the mode with signed wavenumbers. `kx` is ignored in 1-D,
    /// where `ky` plays the role of the only wavenumber.
    pub fn coefficient(&self, kx: isize, ky: isize) -> Complex64 {
        let m = self.points as isize;
        let (kx, ky, conj) = if ky.rem_euclid(m) > m / 2 {
            (-kx, -ky, true)
        } else {
            (kx, ky, false)
        };
        let kx = match self.dim {
            Dim::One => 0,
            Dim::Two => kx.rem_euclid(m) as usize,
        };
        let c = self.raw(kx, ky.rem_euclid(m) as usize);
        if conj {
            c.conj()
        } else {
            c
        }
    }

    /// Visits every stored coefficient with its storage indices.
    pub fn for_each_mut<F: FnMut(usize, usize, &mut Complex64)>(&mut self, mut f: F) {
        let rows = self.rows();
        for (n, c) in self.data.iter_mut().enumerate() {
            f(n % rows, n / rows, c);
        }
    }

    /// Multiplicity of a stored `ky` column in the full spectrum (1 or 2).
    pub fn column_weight(&self, ky: usize) -> f64 {
        if ky == 0 || (self.points % 2 == 0 && ky == self.points / 2) {
            1.0
        } else {
            2.0
        }
    }

    /// Largest coefficient magnitude over modes rejected by `keep`, in signed indices.
    pub fn max_outside<F: Fn(isize, isize) -> bool>(&self, keep: F) -> f64 {
        let m = self.points as isize;
        let signed = |k: usize| if k as isize > m / 2 { k as isize - m } else { k as isize };
        let rows = self.rows();
        let mut worst: f64 = 0.0;
        for (n, c) in self.data.iter().enumerate() {
            let (kx, ky) = (signed(n % rows), (n / rows) as isize);
            let kx = if self.dim == Dim::One { 0 } else { kx };
            if !keep(kx, ky) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }
}

/// Precomputed symbols and FFT plans for one grid.
#[derive(Clone)]
pub struct SpectralPlan {
    grid: GridSpec,
    lambda_std: Vec<f64>,
    lambda_long: Vec<f64>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("grid", &self.grid).finish()
    }
}

/// Standard second-difference symbol `-4 sin^2(k pi h / L) / h^2` for wavenumber `k`.
pub fn lambda_std_symbol(grid: &GridSpec, k: isize) -> f64 {
    let h = grid.spacing();
    let s = (k as f64 * std::f64::consts::PI / grid.points() as f64).sin();
    -4.0 * s * s / (h * h)
}

/// Long-stencil symbol `lambda_std - h^2/12 lambda_std^2` for wavenumber `k`.
pub fn lambda_long_symbol(grid: &GridSpec, k: isize) -> f64 {
    let h = grid.spacing();
    let l = lambda_std_symbol(grid, k);
    l - h * h / 12.0 * l * l
}

/// Symbol of the preconditioner
/// `L_h = (-Lap_(4))^{-1} + dt + dt (eps^2 + A dt) (-Lap_(4))^p` at `Lambda > 0`.
pub fn preconditioner_symbol(lambda: f64, dt: f64, eps: f64, a: f64, power: u32) -> f64 {
    1.0 / lambda + dt + dt * (eps * eps + a * dt) * lambda.powi(power as i32)
}

impl SpectralPlan {
    pub fn new(grid: GridSpec) -> Result<Self> {
        grid.require_points(5)?;
        let m = grid.points();
        let lambda_std = (0..m).map(|k| lambda_std_symbol(&grid, k as isize)).collect();
        let lambda_long = (0..m).map(|k| lambda_long_symbol(&grid, k as isize)).collect();
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        Ok(Self {
            grid,
            lambda_std,
            lambda_long,
            r2c: real.plan_fft_forward(m),
            c2r: real.plan_fft_inverse(m),
            col_fwd: cplx.plan_fft_forward(m),
            col_inv: cplx.plan_fft_inverse(m),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `lambda_std` indexed by `k in 0..m` (periodic in `k`).
    pub fn lambda_std(&self) -> &[f64] {
        &self.lambda_std
    }

    pub fn lambda_long(&self) -> &[f64] {
        &self.lambda_long
    }

    /// Symbol of `-Lap_(4)` at storage indices `(kx, ky)`.
    pub fn big_lambda(&self, kx: usize, ky: usize) -> f64 {
        match self.grid.dim() {
            Dim::One => -self.lambda_long[ky],
            Dim::Two => -(self.lambda_long[kx] + self.lambda_long[ky]),
        }
    }

    /// Symbol of `-Lap_(4)` at signed wavenumbers.
    pub fn big_lambda_signed(&self, kx: isize, ky: isize) -> f64 {
        let m = self.grid.points() as isize;
        self.big_lambda(kx.rem_euclid(m) as usize, ky.rem_euclid(m) as usize)
    }

    fn check(&self, f: &Field) -> Result<()> {
        if *f.grid() == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn forward(&self, f: &Field) -> Result<Spectrum> {
        self.check(f)?;
        let m = self.grid.points();
        let half = m / 2 + 1;
        let rows = match self.grid.dim() {
            Dim::One => 1,
            Dim::Two => m,
        };
        let mut input = f.values().to_vec();
        let mut row_out = vec![Complex64::default(); half];
        let mut scratch = self.r2c.make_scratch_vec();
        let mut data = vec![Complex64::default(); rows * half];
        for (i, row) in input.chunks_exact_mut(m).enumerate() {
            self.r2c
                .process_with_scratch(row, &mut row_out, &mut scratch)
                .expect("buffer sizes are fixed by the plan");
            for (ky, c) in row_out.iter().enumerate() {
                data[ky * rows + i] = *c;
            }
        }
        if self.grid.dim() == Dim::Two {
            self.col_fwd.process(&mut data);
        }
        Ok(Spectrum {
            points: m,
            dim: self.grid.dim(),
            data,
        })
    }

    pub fn inverse(&self, mut spec: Spectrum) -> Result<Field> {
        let m = self.grid.points();
        if spec.points != m || spec.dim != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        let half = m / 2 + 1;
        let rows = spec.rows();
        if self.grid.dim() == Dim::Two {
            self.col_inv.process(&mut spec.data);
        }
        let norm = 1.0 / self.grid.len() as f64;
        let mut out = Field::zeros(self.grid);
        let mut row_in = vec![Complex64::default(); half];
        let mut scratch = self.c2r.make_scratch_vec();
        for (i, row) in out.values_mut().chunks_exact_mut(m).enumerate() {
            for (ky, c) in row_in.iter_mut().enumerate() {
                *c = spec.data[ky * rows + i] * norm;
            }
            // self-conjugate bins carry only rounding noise in their imaginary part
            row_in[0].im = 0.0;
            if m % 2 == 0 {
                row_in[half - 1].im = 0.0;
            }
            self.c2r
                .process_with_scratch(&mut row_in, row, &mut scratch)
                .expect("buffer sizes are fixed by the plan");
        }
        Ok(out)
    }

    /// Applies a real Fourier multiplier given by storage indices `(kx, ky)`.
    pub fn apply_multiplier<F: Fn(usize, usize) -> f64>(&self, f: &Field, mult: F) -> Result<Field> {
        let mut spec = self.forward(f)?;
        spec.for_each_mut(|kx, ky, c| *c *= mult(kx, ky));
        self.inverse(spec)
    }

    /// `Lap_(4) f` through the transform path.
    pub fn laplace_long_spectral(&self, f: &Field) -> Result<Field> {
        self.apply_multiplier(f, |kx, ky| -self.big_lambda(kx, ky))
    }

    /// Mean-free `u` with `-Lap_(4) u = g`. `g` must be mean-free to within
    /// [`mean_tolerance`]; the constant mode is zeroed regardless.
    pub fn invert_laplace_long(&self, g: &Field) -> Result<Field> {
        self.check(g)?;
        let mean = g.mean();
        let tol = mean_tolerance(g);
        if mean.abs() > tol {
            return Err(Error::NonZeroMean { mean, tol });
        }
        self.apply_multiplier(g, |kx, ky| {
            if kx == 0 && ky == 0 {
                0.0
            } else {
                1.0 / self.big_lambda(kx, ky)
            }
        })
    }

    /// Discrete `H^{-1}` norm, `sqrt((f, (-Lap_(4))^{-1} f))`.
    pub fn hminus1_norm(&self, f: &Field) -> Result<f64> {
        let t = self.invert_laplace_long(f)?;
        Ok(f.inner(&t)?.max(0.0).sqrt())
    }

    /// Solves `L_h d = r` for mean-free `d`, where `L_h` has the symbol
    /// [`preconditioner_symbol`].
    pub fn precondition_solve(
        &self,
        r: &Field,
        dt: f64,
        eps: f64,
        a: f64,
        power: u32,
    ) -> Result<Field> {
        self.check(r)?;
        let mean = r.mean();
        let tol = mean_tolerance(r);
        if mean.abs() > tol {
            return Err(Error::NonZeroMean { mean, tol });
        }
        let mut spec = self.forward(r)?;
        let mut bad = None;
        spec.for_each_mut(|kx, ky, c| {
            if kx == 0 && ky == 0 {
                *c = Complex64::default();
                return;
            }
            let sigma = preconditioner_symbol(self.big_lambda(kx, ky), dt, eps, a, power);
            if !(sigma.is_finite() && sigma > 0.0) {
                bad.get_or_insert((kx, ky));
            }
            *c /= sigma;
        });
        if let Some((kx, ky)) = bad {
            return Err(Error::NonFiniteSymbol { kx, ky });
        }
        self.inverse(spec)
    }

    /// Forward application of `L_h` on mean-free data.
    pub fn apply_preconditioner(&self, d: &Field, dt: f64, eps: f64, a: f64, power: u32) -> Result<Field> {
        self.apply_multiplier(d, |kx, ky| {
            if kx == 0 && ky == 0 {
                0.0
            } else {
                preconditioner_symbol(self.big_lambda(kx, ky), dt, eps, a, power)
            }
        })
    }

    /// Keeps only modes with `|kx|, |ky| <= max_mode`; optionally drops the mean.
    pub fn band_limit(&self, f: &Field, max_mode: usize, drop_mean: bool) -> Result<Field> {
        let m = self.grid.points();
        let signed = |k: usize| if k > m / 2 { m - k } else { k };
        let dim = self.grid.dim();
        self.apply_multiplier(f, |kx, ky| {
            let kx_ok = dim == Dim::One || signed(kx) <= max_mode;
            if drop_mean && kx == 0 && ky == 0 {
                0.0
            } else if kx_ok && ky <= max_mode {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `(f, g)_2` evaluated in Fourier space (Parseval), for cross-checks.
    pub fn inner_parseval(&self, f: &Field, g: &Field) -> Result<f64> {
        let (a, b) = (self.forward(f)?, self.forward(g)?);
        let rows = a.rows();
        let n = a.data.len();
        let s = pairwise_sum(n, |idx| {
            a.column_weight(idx / rows) * (a.data[idx] * b.data[idx].conj()).re
        });
        Ok(s * self.grid.cell_volume() / self.grid.len() as f64)
    }
}
