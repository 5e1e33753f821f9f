//! Pointwise level-set objects: the truncation `v = (|u| − C)₊`, the
//! dissipation density `d` and the second-viscosity remainder `r`.

use crate::grid::{divergence, gradient, gradient_sq, ScalarField, VectorField};

/// Derivative data of `u` shared by every level.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub magnitude: ScalarField,
    /// `|∇|u||²` with centred differences of `|u|`.
    pub grad_mag_sq: ScalarField,
    /// `|∇u|² = Σ_j |∇u_j|²`.
    pub grad_sq: ScalarField,
    /// Centred `div u` over the grid axes.
    pub div: ScalarField,
    /// `Σ_{i < dim} u_i ∂_i|u|`.
    pub u_dot_grad_mag: ScalarField,
}

impl Derivatives {
    pub fn new(u: &VectorField) -> Self {
        let magnitude = u.magnitude();
        let gm = gradient(&magnitude);
        let grid = *u.grid();
        let mut gms = vec![0.0; grid.len()];
        let mut udg = vec![0.0; grid.len()];
        for axis in 0..grid.dim() {
            let comp = gm.component(axis);
            for c in 0..grid.len() {
                gms[c] += comp[c] * comp[c];
                if axis < u.ncomp() {
                    udg[c] += u.component(axis)[c] * comp[c];
                }
            }
        }
        Self {
            magnitude,
            grad_mag_sq: ScalarField::from_vec_unchecked(grid, gms),
            grad_sq: gradient_sq(u),
            div: divergence(u),
            u_dot_grad_mag: ScalarField::from_vec_unchecked(grid, udg),
        }
    }
}

/// `(|u| − C)₊` cellwise.
pub fn truncate(u: &VectorField, c: f64) -> ScalarField {
    truncate_magnitude(&u.magnitude(), c)
}

pub(crate) fn truncate_magnitude(mag: &ScalarField, c: f64) -> ScalarField {
    ScalarField::from_vec_unchecked(*mag.grid(), mag.values().iter().map(|&m| (m - c).max(0.0)).collect())
}

/// `d²` at one cell:
/// `(C 1_{|u|≥C}/|u|)|∇|u||² + (v/|u|)|∇u|²`. At `C = 0` this is `|∇u|²`;
/// cells with `|u| = 0` give 0 otherwise.
#[inline]
pub(crate) fn dk_sq_at(m: f64, grad_mag_sq: f64, grad_sq: f64, c: f64) -> f64 {
    if c == 0.0 {
        return grad_sq;
    }
    if m <= 0.0 || m < c {
        return 0.0;
    }
    let a = c / m;
    a * grad_mag_sq + (1.0 - a) * grad_sq
}

pub(crate) fn dk_sq(d: &Derivatives, c: f64) -> Vec<f64> {
    (0..d.magnitude.values().len())
        .map(|i| dk_sq_at(d.magnitude.values()[i], d.grad_mag_sq.values()[i], d.grad_sq.values()[i], c))
        .collect()
}

/// Nonnegative square root of the dissipation density.
pub fn dk_field(u: &VectorField, c: f64) -> ScalarField {
    let d = Derivatives::new(u);
    ScalarField::from_vec_unchecked(*u.grid(), dk_sq(&d, c).into_iter().map(f64::sqrt).collect())
}

pub(crate) fn rk_values(d: &Derivatives, c: f64) -> Vec<f64> {
    (0..d.magnitude.values().len())
        .map(|i| {
            let m = d.magnitude.values()[i];
            if m < crate::system::ZERO_MAGNITUDE || m < c {
                0.0
            } else {
                d.div.values()[i] * d.u_dot_grad_mag.values()[i] * c / (m * m)
            }
        })
        .collect()
}

/// `r = (div u)(u·∇|u|) C/|u|² 1_{|u|≥C}` cellwise.
pub fn rk_field(u: &VectorField, c: f64) -> ScalarField {
    ScalarField::from_vec_unchecked(*u.grid(), rk_values(&Derivatives::new(u), c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn truncate_examples() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let u = VectorField::from_fn(g, 3, |_| vec![3.0, 0.0, 0.0]).unwrap();
        assert!(truncate(&u, 1.0).values().iter().all(|&v| v == 2.0));
        assert!(truncate(&u, 3.0).values().iter().all(|&v| v == 0.0));
        let w = VectorField::from_fn(g, 3, |x| vec![x[0], -2.0 * x[0], 0.5]).unwrap();
        assert_eq!(truncate(&w, 0.0), w.magnitude());
    }

    #[test]
    fn dk_at_zero_level_is_full_gradient() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let u = VectorField::from_fn(g, 3, |x| vec![(2.0 * PI * x[0]).sin(), x[1].cos(), 0.2]).unwrap();
        let d = dk_field(&u, 0.0);
        let full = gradient_sq(&u);
        for c in 0..g.len() {
            assert!((d.values()[c] - full.values()[c].sqrt()).abs() < 1e-14);
        }
        assert!(dk_field(&u, 10.0).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dk_matches_closed_form() {
        // u = (2 sin 2πx, 0, 0), C = 1: d² = (C/|u|)|u|'² + (1 − C/|u|)|u|'²
        // = |u|'² on {|u| ≥ 1}, i.e. d = 4π|cos 2πx|.
        let n = 4096;
        let g = Grid::new(1, n, 1.0).unwrap();
        let u = VectorField::from_fn(g, 3, |x| vec![2.0 * (2.0 * PI * x[0]).sin(), 0.0, 0.0]).unwrap();
        let d = dk_field(&u, 1.0);
        for s in 0..64 {
            let c = s * n / 64 + 7;
            let x = g.center(c)[0];
            let m = 2.0 * (2.0 * PI * x).sin().abs();
            let exact = if m >= 1.0 { 4.0 * PI * (2.0 * PI * x).cos().abs() } else { 0.0 };
            assert!((d.values()[c] - exact).abs() <= 1e-8 + 2.0 * (2.0 * PI / n as f64).powi(2) * 4.0 * PI, "x = {x}");
        }
    }

    #[test]
    fn rk_vanishes_on_divergence_free_and_low_fields() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let u = VectorField::from_fn(g, 3, |x| vec![(2.0 * PI * x[1]).sin() + 2.0, (2.0 * PI * x[0]).cos(), 1.0]).unwrap();
        assert!(rk_field(&u, 0.5).values().iter().all(|v| v.abs() < 1e-12));
        let w = VectorField::from_fn(g, 3, |x| vec![0.1 * x[0], 0.0, 0.0]).unwrap();
        assert!(rk_field(&w, 1.0).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rk_matches_closed_form() {
        // u = (a sin kx, 0, 0) in 1D: div u = ak cos kx, u·∇|u| = u ∂x|u| = |u| ∂x|u|,
        // so r = C ak cos(kx) sign(u) ∂x(|u|)/|u| = C (ak cos kx)²/|u| on {|u| ≥ C}.
        let n = 2048;
        let (a, k, c0) = (1.5, 2.0 * PI, 0.6);
        let g = Grid::new(1, n, 1.0).unwrap();
        let u = VectorField::from_fn(g, 3, |x| vec![a * (k * x[0]).sin(), 0.0, 0.0]).unwrap();
        let r = rk_field(&u, c0);
        for s in 0..32 {
            let c = s * n / 32 + 11;
            let x = g.center(c)[0];
            let m = (a * (k * x).sin()).abs();
            let exact = if m >= c0 { c0 * (a * k * (k * x).cos()).powi(2) / m } else { 0.0 };
            assert!((r.values()[c] - exact).abs() < 1e-3 * (1.0 + exact.abs()), "x = {x}: {} vs {exact}", r.values()[c]);
        }
    }

    proptest! {
        #[test]
        fn truncation_homogeneity(vals in prop::collection::vec(-5.0..5.0f64, 24), c in 0.0..3.0f64, a in 0.1..10.0f64) {
            let g = Grid::new(1, 8, 1.0).unwrap();
            let comps: Vec<Vec<f64>> = vals.chunks(8).map(|x| x.to_vec()).collect();
            let u = VectorField::new(g, comps.clone()).unwrap();
            let au = VectorField::new(g, comps.iter().map(|x| x.iter().map(|v| a * v).collect()).collect()).unwrap();
            let lhs = truncate(&au, a * c);
            let rhs = truncate(&u, c);
            for i in 0..8 {
                prop_assert!((lhs.values()[i] - a * rhs.values()[i]).abs() <= 1e-12 * (1.0 + lhs.values()[i].abs()));
            }
            // d and r are 0-homogeneous in (u, C) up to the gradient scaling by a.
            let (d1, d2) = (dk_field(&au, a * c), dk_field(&u, c));
            for i in 0..8 {
                prop_assert!((d1.values()[i] - a * d2.values()[i]).abs() <= 1e-9 * (1.0 + d1.values()[i].abs()));
            }
        }

        #[test]
        fn dk_nonincreasing_in_level(vals in prop::collection::vec(-5.0..5.0f64, 48), c in 0.0..3.0f64, dc in 0.0..2.0f64) {
            let g = Grid::new(2, 4, 1.0).unwrap();
            let u = VectorField::new(g, vals.chunks(16).map(|x| x.to_vec()).collect()).unwrap();
            let (lo, hi) = (dk_field(&u, c), dk_field(&u, c + dc));
            for i in 0..16 {
                prop_assert!(hi.values()[i] <= lo.values()[i] * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}
