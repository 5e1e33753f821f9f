//! Compact face-based discretization of `−div(µ∇·)` on a periodic grid.
//!
//! Face coefficients are arithmetic means of the two adjacent cells, so the
//! operator is symmetric, has nonpositive off-diagonals (an M-matrix once a
//! positive mass term is added) and annihilates constants.

use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone)]
pub struct Diffusion {
    grid: Grid,
    /// `faces[axis][c]` is the coefficient on the face between `c` and its
    /// `+axis` neighbour, already divided by `h²`.
    faces: Vec<Vec<f64>>,
}

impl Diffusion {
    /// Operator `−div(factor·µ ∇·)`.
    pub fn new(mu: &ScalarField, factor: f64) -> Self {
        let g = *mu.grid();
        let ih2 = 1.0 / (g.h() * g.h());
        let m = mu.values();
        let faces = (0..g.dim())
            .map(|axis| (0..g.len()).map(|c| factor * 0.5 * (m[c] + m[g.shift(c, axis, 1)]) * ih2).collect())
            .collect();
        Self { grid: g, faces }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `out += L x`.
    pub fn apply_add(&self, x: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        for (axis, face) in self.faces.iter().enumerate() {
            for c in 0..g.len() {
                let up = g.shift(c, axis, 1);
                let dn = g.shift(c, axis, -1);
                out[c] += face[c] * (x[c] - x[up]) + face[dn] * (x[c] - x[dn]);
            }
        }
    }

    /// Diagonal entries of `L`.
    pub fn diagonal(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut d = vec![0.0; g.len()];
        for (axis, face) in self.faces.iter().enumerate() {
            for (c, dc) in d.iter_mut().enumerate() {
                *dc += face[c] + face[g.shift(c, axis, -1)];
            }
        }
        d
    }

    /// Bilinear form `Σ_faces µ_f (a_R − a_L)(b_R − b_L)/h² · h^dim`, equal to
    /// `Σ a (L b) h^dim` by summation by parts.
    pub fn form(&self, a: &[f64], b: &[f64]) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for (axis, face) in self.faces.iter().enumerate() {
            for c in 0..g.len() {
                let up = g.shift(c, axis, 1);
                s += face[c] * (a[up] - a[c]) * (b[up] - b[c]);
            }
        }
        s * g.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn form_matches_operator() {
        let g = Grid::new(2, 7, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu = ScalarField::new(g, (0..g.len()).map(|_| rng.random_range(1.0..5.0)).collect()).unwrap();
        let op = Diffusion::new(&mu, 2.0);
        let a: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut lb = vec![0.0; g.len()];
        op.apply_add(&b, &mut lb);
        let direct: f64 = a.iter().zip(&lb).map(|(x, y)| x * y).sum::<f64>() * g.cell_volume();
        assert!((direct - op.form(&a, &b)).abs() < 1e-10 * direct.abs().max(1.0));
        assert!((op.form(&a, &b) - op.form(&b, &a)).abs() < 1e-10);
        assert!(op.form(&a, &a) >= 0.0);
    }

    #[test]
    fn constants_are_annihilated() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let op = Diffusion::new(&ScalarField::from_fn(g, |x| 1.0 + x[0]).unwrap(), 1.0);
        let mut out = vec![0.0; 8];
        op.apply_add(&[3.0; 8], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }
}
