//! Direct (real-space) application of periodic difference stencils.
//!
//! The long-stencil operators are
//!
//! ```text
//! D1_(4) f_i = ( f_{i-2} - 8 f_{i-1} + 8 f_{i+1} - f_{i+2} ) / (12 h)
//! D2_(4) f_i = (-f_{i-2} + 16 f_{i-1} - 30 f_i + 16 f_{i+1} - f_{i+2}) / (12 h^2)
//! ```
//!
//! and `Lap_(4) = D2_(4),x + D2_(4),y`. The discrete gradient is realized with
//! forward differences on cell edges, so `||grad_h f||^2 = (f, -Lap_h f)`
//! holds up to rounding.

use crate::error::Result;
use crate::grid::{pairwise_sum, Axis, Dim, Field, GridSpec};

/// A one-dimensional periodic stencil: `sum_k weights[k] * f[i + offsets[k]] / (denom * h^order)`.
#[derive(Debug, Clone, Copy)]
pub struct StencilCoeffs {
    pub offsets: &'static [isize],
    pub weights: &'static [f64],
    pub denom: f64,
    /// Power of `h` in the denominator.
    pub order: i32,
}

impl StencilCoeffs {
    pub fn span(&self) -> usize {
        let lo = self.offsets.iter().min().copied().unwrap_or(0);
        let hi = self.offsets.iter().max().copied().unwrap_or(0);
        (hi - lo) as usize + 1
    }

    fn scale(&self, h: f64) -> f64 {
        1.0 / (self.denom * h.powi(self.order))
    }
}

pub const D1_LONG: StencilCoeffs = StencilCoeffs {
    offsets: &[-2, -1, 1, 2],
    weights: &[1.0, -8.0, 8.0, -1.0],
    denom: 12.0,
    order: 1,
};

pub const D2_LONG: StencilCoeffs = StencilCoeffs {
    offsets: &[-2, -1, 0, 1, 2],
    weights: &[-1.0, 16.0, -30.0, 16.0, -1.0],
    denom: 12.0,
    order: 2,
};

pub const D2_STD: StencilCoeffs = StencilCoeffs {
    offsets: &[-1, 0, 1],
    weights: &[1.0, -2.0, 1.0],
    denom: 1.0,
    order: 2,
};

/// Forward difference `(f_{i+1} - f_i) / h`, living on edges.
pub const D1_FORWARD: StencilCoeffs = StencilCoeffs {
    offsets: &[0, 1],
    weights: &[-1.0, 1.0],
    denom: 1.0,
    order: 1,
};

/// Applies `stencil` along `axis` with periodic wrap.
pub fn apply_stencil(f: &Field, axis: Axis, stencil: &StencilCoeffs) -> Result<Field> {
    let grid = *f.grid();
    grid.check_axis(axis)?;
    grid.require_points(stencil.span())?;
    let mut out = Field::zeros(grid);
    apply_stencil_into(f.values(), out.values_mut(), &grid, axis, stencil, 1.0, false);
    Ok(out)
}

/// `out (+)= c * stencil(f)` along `axis`. Bounds must already be checked.
fn apply_stencil_into(
    f: &[f64],
    out: &mut [f64],
    grid: &GridSpec,
    axis: Axis,
    stencil: &StencilCoeffs,
    c: f64,
    accumulate: bool,
) {
    let m = grid.points();
    let s = c * stencil.scale(grid.spacing());
    let wrap = |i: usize, o: isize| (i as isize + o).rem_euclid(m as isize) as usize;
    let weights: Vec<f64> = stencil.weights.iter().map(|w| w * s).collect();

    // Along the contiguous direction: rows of length m (the whole field in 1-D).
    let along_rows = matches!((grid.dim(), axis), (Dim::One, _) | (Dim::Two, Axis::Y));
    if along_rows {
        let tables: Vec<Vec<usize>> = stencil
            .offsets
            .iter()
            .map(|&o| (0..m).map(|j| wrap(j, o)).collect())
            .collect();
        for (row_in, row_out) in f.chunks_exact(m).zip(out.chunks_exact_mut(m)) {
            for j in 0..m {
                let mut acc = 0.0;
                for (w, t) in weights.iter().zip(&tables) {
                    acc += w * row_in[t[j]];
                }
                if accumulate {
                    row_out[j] += acc;
                } else {
                    row_out[j] = acc;
                }
            }
        }
    } else {
        for i in 0..m {
            let row_out = &mut out[i * m..(i + 1) * m];
            if !accumulate {
                row_out.iter_mut().for_each(|v| *v = 0.0);
            }
            for (w, &o) in weights.iter().zip(stencil.offsets) {
                let src = &f[wrap(i, o) * m..(wrap(i, o) + 1) * m];
                for (a, b) in row_out.iter_mut().zip(src) {
                    *a += w * b;
                }
            }
        }
    }
}

/// Fourth-order first derivative along `axis`.
pub fn d1_long(f: &Field, axis: Axis) -> Result<Field> {
    apply_stencil(f, axis, &D1_LONG)
}

/// Fourth-order second derivative along `axis`.
pub fn d2_long(f: &Field, axis: Axis) -> Result<Field> {
    apply_stencil(f, axis, &D2_LONG)
}

/// Standard three-point second derivative along `axis`.
pub fn d2_std(f: &Field, axis: Axis) -> Result<Field> {
    apply_stencil(f, axis, &D2_STD)
}

fn laplace_with(f: &Field, stencil: &StencilCoeffs) -> Result<Field> {
    let grid = *f.grid();
    grid.require_points(stencil.span())?;
    let mut out = Field::zeros(grid);
    for (k, &axis) in grid.axes().iter().enumerate() {
        apply_stencil_into(f.values(), out.values_mut(), &grid, axis, stencil, 1.0, k > 0);
    }
    Ok(out)
}

/// Long-stencil Laplacian `Lap_(4)`.
pub fn laplace_long(f: &Field) -> Result<Field> {
    laplace_with(f, &D2_LONG)
}

/// `out = c * Lap_(4) f`, reusing `out`'s storage.
pub fn laplace_long_scaled_into(f: &Field, c: f64, out: &mut Field) -> Result<()> {
    f.same_grid(out)?;
    let grid = *f.grid();
    grid.require_points(D2_LONG.span())?;
    for (k, &axis) in grid.axes().iter().enumerate() {
        apply_stencil_into(f.values(), out.values_mut(), &grid, axis, &D2_LONG, c, k > 0);
    }
    Ok(())
}

/// Standard five-point (three-point in 1-D) Laplacian `Lap_h`.
pub fn laplace_std(f: &Field) -> Result<Field> {
    laplace_with(f, &D2_STD)
}

/// `||grad_h f||_2^2` with forward edge differences summed over axes.
pub fn grad_norm_sq_std(f: &Field) -> Result<f64> {
    let grid = *f.grid();
    grid.require_points(D2_STD.span())?;
    let mut total = 0.0;
    for &axis in grid.axes() {
        let g = apply_stencil(f, axis, &D1_FORWARD)?;
        total += g.norm_l2().powi(2);
    }
    Ok(total)
}

/// `||grad_h,(4) f||_2^2 = (f, -Lap_(4) f)`.
///
/// Computed as `||grad_h f||^2 + h^2/12 * sum_axes ||D2_axis f||^2`; this is the
/// exact expansion of `-Lap_(4) = -Lap_h + h^2/12 (Dxx^2 + Dyy^2)`.
pub fn grad_norm_sq_long(f: &Field) -> Result<f64> {
    let grid = *f.grid();
    grid.require_points(D2_LONG.span())?;
    let h = grid.spacing();
    let mut total = grad_norm_sq_std(f)?;
    for &axis in grid.axes() {
        total += h * h / 12.0 * d2_std(f, axis)?.norm_l2().powi(2);
    }
    Ok(total)
}

/// `(f, -Lap_(4) g)` evaluated as a sum of edge and second-difference pairings.
pub fn grad_inner_long(f: &Field, g: &Field) -> Result<f64> {
    f.same_grid(g)?;
    let grid = *f.grid();
    grid.require_points(D2_LONG.span())?;
    let h = grid.spacing();
    let mut total = 0.0;
    for &axis in grid.axes() {
        let (fa, ga) = (
            apply_stencil(f, axis, &D1_FORWARD)?,
            apply_stencil(g, axis, &D1_FORWARD)?,
        );
        total += fa.inner(&ga)?;
        let (fb, gb) = (d2_std(f, axis)?, d2_std(g, axis)?);
        total += h * h / 12.0 * fb.inner(&gb)?;
    }
    Ok(total)
}

/// Pointwise cube, used by the nonlinear term.
pub fn cube(f: &Field) -> Field {
    f.map(|v| v * v * v)
}

/// `h^dim * sum(a * b * c)`.
pub fn triple_product(a: &Field, b: &Field, c: &Field) -> Result<f64> {
    a.same_grid(b)?;
    a.same_grid(c)?;
    let (x, y, z) = (a.values(), b.values(), c.values());
    Ok(a.grid().cell_volume() * pairwise_sum(x.len(), |k| x[k] * y[k] * z[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    fn pseudo_random(grid: GridSpec, seed: u64) -> Field {
        let mut s = seed;
        let mut vals = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            vals.push(((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0);
        }
        Field::from_values(grid, vals).unwrap()
    }

    /// Brute-force stencil loop used as an oracle for the row/column kernels.
    fn brute(f: &Field, axis: Axis, st: &StencilCoeffs) -> Field {
        let g = *f.grid();
        let m = g.points() as isize;
        let h = g.spacing();
        let mut out = Field::zeros(g);
        for i in 0..m {
            for j in 0..(if g.dim() == Dim::Two { m } else { 1 }) {
                let mut acc = 0.0;
                for (w, &o) in st.weights.iter().zip(st.offsets) {
                    acc += w * match axis {
                        Axis::X => f.at(i + o, j),
                        Axis::Y => f.at(i, j + o),
                    };
                }
                let idx = if g.dim() == Dim::Two { (i * m + j) as usize } else { i as usize };
                out.values_mut()[idx] = acc / (st.denom * h.powi(st.order));
            }
        }
        out
    }

    #[test]
    fn weights_annihilate_constants_and_have_parity() {
        for st in [D1_LONG, D2_LONG, D2_STD, D1_FORWARD] {
            assert_eq!(st.weights.iter().sum::<f64>(), 0.0);
        }
        for st in [D2_LONG, D2_STD] {
            for (w, o) in st.weights.iter().zip(st.offsets) {
                let k = st.offsets.iter().position(|p| p == &-o).unwrap();
                assert_eq!(*w, st.weights[k]);
            }
        }
        for (w, o) in D1_LONG.weights.iter().zip(D1_LONG.offsets) {
            let k = D1_LONG.offsets.iter().position(|p| p == &-o).unwrap();
            assert_eq!(*w, -D1_LONG.weights[k]);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let g = GridSpec::square(1.0, 9).unwrap();
        let c = Field::constant(g, 2.75);
        for f in [
            d1_long(&c, Axis::X).unwrap(),
            d2_long(&c, Axis::Y).unwrap(),
            laplace_long(&c).unwrap(),
            laplace_std(&c).unwrap(),
        ] {
            assert!(f.norm_linf() < 1e-10);
        }
        assert!(grad_norm_sq_std(&c).unwrap().abs() < 1e-20);
        assert!(grad_norm_sq_long(&c).unwrap().abs() < 1e-20);
    }

    #[test]
    fn kernels_match_brute_force_loops() {
        for (g, seed) in [
            (GridSpec::square(1.3, 7).unwrap(), 1),
            (GridSpec::square(2.0, 12).unwrap(), 2),
            (GridSpec::line(1.0, 11).unwrap(), 3),
        ] {
            let f = pseudo_random(g, seed);
            for &axis in g.axes() {
                for st in [D1_LONG, D2_LONG, D2_STD, D1_FORWARD] {
                    let fast = apply_stencil(&f, axis, &st).unwrap();
                    let slow = brute(&f, axis, &st);
                    let diff = fast.zip_map(&slow, |a, b| a - b).unwrap().norm_linf();
                    assert!(diff <= 1e-12 * slow.norm_linf(), "{diff}");
                }
            }
        }
    }

    #[test]
    fn delta_response_is_the_stencil() {
        let g = GridSpec::square(1.0, 10).unwrap();
        let h = g.spacing();
        let mut f = Field::zeros(g);
        f.values_mut()[4 * 10 + 6] = 1.0;
        let out = d2_long(&f, Axis::X).unwrap();
        let expect = [-1.0, 16.0, -30.0, 16.0, -1.0];
        for (k, e) in expect.iter().enumerate() {
            let i = 2 + k as isize;
            assert!((out.at(i, 6) - e / (12.0 * h * h)).abs() < 1e-9);
        }
        assert_eq!(out.at(0, 6), 0.0);
        assert_eq!(out.at(4, 5), 0.0);
    }

    #[test]
    fn single_modes_are_eigenfunctions() {
        let l = 1.7;
        let m = 16;
        let g = GridSpec::square(l, m).unwrap();
        let h = g.spacing();
        for k in 1..8 {
            let f = Field::from_fn(g, |x, _| (2.0 * PI * k as f64 * x / l).cos());
            let s = (k as f64 * PI * h / l).sin();
            let lam_std = -4.0 * s * s / (h * h);
            let lam_long = lam_std - h * h / 12.0 * lam_std * lam_std;
            let out = laplace_long(&f).unwrap();
            let diff = out.zip_map(&f, |a, b| a - lam_long * b).unwrap().norm_linf();
            assert!(diff <= 1e-12 * f.norm_linf() * lam_long.abs());
            // grad norms follow the symbols nu_k and nu_k + h^2 nu_k^2 / 12
            let nu = -lam_std;
            let n2 = f.norm_l2().powi(2);
            assert!((grad_norm_sq_std(&f).unwrap() - nu * n2).abs() <= 1e-11 * nu * n2);
            let mu = nu + h * h * nu * nu / 12.0;
            assert!((grad_norm_sq_long(&f).unwrap() - mu * n2).abs() <= 1e-11 * mu * n2);
        }
    }

    #[test]
    fn d1_long_on_sine_mode_matches_symbol() {
        let l = 2.0;
        let m = 20;
        let g = GridSpec::line(l, m).unwrap();
        let h = g.spacing();
        for k in 1..6 {
            let kk = 2.0 * PI * k as f64 / l;
            let f = Field::from_fn(g, |x, _| (kk * x).sin());
            let sym = (8.0 * (kk * h).sin() - (2.0 * kk * h).sin()) / (6.0 * h);
            let expect = Field::from_fn(g, |x, _| sym * (kk * x).cos());
            let out = d1_long(&f, Axis::X).unwrap();
            assert!(out.zip_map(&expect, |a, b| a - b).unwrap().norm_linf() < 1e-12 * sym);
        }
    }

    #[test]
    fn summation_by_parts_identities() {
        let g = GridSpec::square(1.5, 11).unwrap();
        for seed in 0..50 {
            let f = pseudo_random(g, seed);
            let lap_std = laplace_std(&f).unwrap();
            let a = grad_norm_sq_std(&f).unwrap();
            let b = -f.inner(&lap_std).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs());

            let lap = laplace_long(&f).unwrap();
            let a = grad_norm_sq_long(&f).unwrap();
            let b = -f.inner(&lap).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn too_small_grids_error() {
        let g = GridSpec::square(1.0, 4).unwrap();
        let f = Field::zeros(g);
        assert!(matches!(d2_long(&f, Axis::X), Err(Error::TooFewPoints { required: 5, got: 4 })));
        assert!(d1_long(&f, Axis::X).is_err());
        assert!(laplace_long(&f).is_err());
        assert!(d2_std(&f, Axis::X).is_ok());
        let g = GridSpec::square(1.0, 2).unwrap();
        assert!(laplace_std(&Field::zeros(g)).is_err());
        assert!(matches!(
            d2_std(&Field::zeros(GridSpec::line(1.0, 8).unwrap()), Axis::Y),
            Err(Error::InvalidAxis { .. })
        ));
    }
}
