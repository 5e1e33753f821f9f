//! Uniform periodic grids, cell-centered fields, centered difference
//! operators and the plain / density-weighted / space-time norms used by the
//! solvers and the level-set analyzer.
//!
//! Cells are indexed `i + n * j` where `i` runs along axis 0. Cell centers sit
//! at `(i + 1/2) h`. All reductions run in index order so that results are
//! reproducible bit-for-bit.

use crate::error::{Error, Result};

/// Uniform periodic grid in one or two space dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 cells per axis, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length, h: length / n as f64 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell measure `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Measure of the whole box.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Axis indices of a cell.
    pub fn coords(&self, idx: usize) -> [usize; 2] {
        [idx % self.n, idx / self.n]
    }

    /// Physical position of a cell center; the second entry is 0 in 1D.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.coords(idx);
        let y = if self.dim == 2 { (j as f64 + 0.5) * self.h } else { 0.0 };
        [(i as f64 + 0.5) * self.h, y]
    }

    /// Periodic neighbour of `idx` displaced by `offset` cells along `axis`.
    #[inline]
    pub fn shift(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.n as isize;
        let [i, j] = self.coords(idx);
        if axis == 0 {
            let i2 = (i as isize + offset).rem_euclid(n) as usize;
            i2 + self.n * j
        } else {
            let j2 = (j as isize + offset).rem_euclid(n) as usize;
            i + self.n * j2
        }
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(cell) => Err(Error::NonFinite { cell }),
        None => Ok(()),
    }
}

/// One real value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|c| f(grid.center(c))).collect();
        Self::new(grid, values)
    }

    /// Builds a field without the finiteness check; internal use by operators
    /// whose outputs are finite whenever their inputs are.
    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cellwise map; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Riemann sum `Σ f h^dim`.
    pub fn integral(&self) -> f64 {
        let mut s = 0.0;
        for v in &self.values {
            s += v;
        }
        s * self.grid.cell_volume()
    }

    /// Linear combination `a * self + other`.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + y).collect();
        Self::new(self.grid, values)
    }
}

/// Several real components per cell, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::InvalidGrid("vector field needs at least one component".into()));
        }
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::InvalidGrid(format!(
                    "expected {} values per component, got {}",
                    grid.len(),
                    c.len()
                )));
            }
            check_finite(c)?;
        }
        Ok(Self { grid, comps })
    }

    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        Self { grid, comps: vec![vec![0.0; grid.len()]; ncomp.max(1)] }
    }

    pub fn from_scalars(fields: &[ScalarField]) -> Result<Self> {
        let grid = *fields.first().ok_or(Error::InvalidGrid("no components".into()))?.grid();
        if fields.iter().any(|f| *f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, comps: fields.iter().map(|f| f.values.clone()).collect() })
    }

    /// Replicates one scalar field into `ncomp` identical components.
    pub fn replicate(f: &ScalarField, ncomp: usize) -> Self {
        Self { grid: f.grid, comps: vec![f.values.clone(); ncomp.max(1)] }
    }

    /// Samples `f` at cell centers; `f` returns the component values.
    pub fn from_fn(grid: Grid, ncomp: usize, f: impl Fn([f64; 2]) -> Vec<f64>) -> Result<Self> {
        let mut comps = vec![vec![0.0; grid.len()]; ncomp];
        for c in 0..grid.len() {
            let v = f(grid.center(c));
            for (k, comp) in comps.iter_mut().enumerate() {
                comp[c] = v.get(k).copied().unwrap_or(0.0);
            }
        }
        Self::new(grid, comps)
    }

    pub(crate) fn from_vecs_unchecked(grid: Grid, comps: Vec<Vec<f64>>) -> Self {
        Self { grid, comps }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.comps[k]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    /// Euclidean norm of the components at cell `c`.
    #[inline]
    pub fn norm_at(&self, c: usize) -> f64 {
        let mut s = 0.0;
        for comp in &self.comps {
            s += comp[c] * comp[c];
        }
        s.sqrt()
    }

    /// Cellwise Euclidean magnitude `|u|`.
    pub fn magnitude(&self) -> ScalarField {
        let values = (0..self.grid.len()).map(|c| self.norm_at(c)).collect();
        ScalarField::from_vec_unchecked(self.grid, values)
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.grid.len()).fold(0.0, |m, c| m.max(self.norm_at(c)))
    }

    /// Largest single-component magnitude over all cells.
    pub fn max_component_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Exponents of a discrete `L^p(t_start, T; L^q)` norm of `ρ^w f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    /// Time exponent `p`; `f64::INFINITY` means a maximum over snapshots.
    pub time_exponent: f64,
    /// Space exponent `q`; `f64::INFINITY` means a maximum over cells.
    pub space_exponent: f64,
    /// Exponent `w` applied to the density inside the norm.
    pub weight_exponent: f64,
}

impl NormSpec {
    pub fn new(time_exponent: f64, space_exponent: f64, weight_exponent: f64) -> Result<Self> {
        let spec = Self { time_exponent, space_exponent, weight_exponent };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.time_exponent >= 1.0) {
            return Err(Error::InvalidExponent(format!("time exponent p = {} < 1", self.time_exponent)));
        }
        if !(self.space_exponent >= 1.0) {
            return Err(Error::InvalidExponent(format!("space exponent q = {} < 1", self.space_exponent)));
        }
        if !self.weight_exponent.is_finite() {
            return Err(Error::InvalidExponent("weight exponent must be finite".into()));
        }
        Ok(())
    }
}

/// Centered second-order gradient with periodic wraparound.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let inv = 0.5 / g.h;
    let comps = (0..g.dim)
        .map(|axis| {
            (0..g.len())
                .map(|c| (f.values[g.shift(c, axis, 1)] - f.values[g.shift(c, axis, -1)]) * inv)
                .collect()
        })
        .collect();
    VectorField::from_vecs_unchecked(g, comps)
}

/// Gradients of every component of `u`: entry `j` holds `∇u_j`.
pub fn jacobian(u: &VectorField) -> Vec<VectorField> {
    u.comps
        .iter()
        .map(|c| gradient(&ScalarField::from_vec_unchecked(u.grid, c.clone())))
        .collect()
}

/// Cellwise `|∇u|² = Σ_j Σ_i (∂_i u_j)²`.
pub fn gradient_sq(u: &VectorField) -> ScalarField {
    let g = u.grid;
    let mut out = vec![0.0; g.len()];
    for grad in jacobian(u) {
        for comp in &grad.comps {
            for (o, v) in out.iter_mut().zip(comp) {
                *o += v * v;
            }
        }
    }
    ScalarField::from_vec_unchecked(g, out)
}

/// Centered divergence `Σ_i ∂_i w_i` over the grid axes. Components beyond
/// the first `dim` do not vary in space; missing axis components count as 0.
pub fn divergence(w: &VectorField) -> ScalarField {
    let g = w.grid;
    let inv = 0.5 / g.h;
    let mut out = vec![0.0; g.len()];
    for axis in 0..g.dim.min(w.ncomp()) {
        let comp = &w.comps[axis];
        for (c, o) in out.iter_mut().enumerate() {
            *o += (comp[g.shift(c, axis, 1)] - comp[g.shift(c, axis, -1)]) * inv;
        }
    }
    ScalarField::from_vec_unchecked(g, out)
}

/// `Σ ρ f² h^dim`, the squared norm of `f` in `L²(ρ)`.
pub fn weighted_l2(f: &ScalarField, rho: &ScalarField) -> Result<f64> {
    if f.grid != rho.grid {
        return Err(Error::GridMismatch);
    }
    if let Some(cell) = rho.values.iter().position(|&r| r < 0.0) {
        return Err(Error::NegativeDensity { cell, value: rho.values[cell] });
    }
    let mut s = 0.0;
    for (r, v) in rho.values.iter().zip(&f.values) {
        s += r * v * v;
    }
    Ok(s * f.grid.cell_volume())
}

/// Spatial `L^q` norm of `ρ^w f` at one time.
pub fn space_norm(f: &ScalarField, rho: &ScalarField, q: f64, weight_exponent: f64) -> Result<f64> {
    if f.grid != rho.grid {
        return Err(Error::GridMismatch);
    }
    let weighted = |c: usize| {
        let w = if weight_exponent == 0.0 { 1.0 } else { rho.values[c].max(0.0).powf(weight_exponent) };
        (w * f.values[c]).abs()
    };
    if q.is_infinite() {
        return Ok((0..f.values.len()).fold(0.0, |m, c| m.max(weighted(c))));
    }
    let mut s = 0.0;
    for c in 0..f.values.len() {
        s += weighted(c).powf(q);
    }
    Ok((s * f.grid.cell_volume()).powf(1.0 / q))
}

/// Discrete `‖ρ^w f‖_{L^p(t_start, T; L^q)}`.
///
/// Snapshot `n` carries the time weight `t_n − max(t_{n−1}, t_start)` when
/// `t_n > t_start` (right-endpoint rule, the first snapshot uses `t_start` as
/// its left end) and is ignored otherwise.
pub fn norm(
    times: &[f64],
    f: &[ScalarField],
    rho: &[ScalarField],
    spec: &NormSpec,
    t_start: f64,
) -> Result<f64> {
    spec.validate()?;
    if times.len() != f.len() || times.len() != rho.len() {
        return Err(Error::InvalidParameter("trajectory lengths differ".into()));
    }
    if times.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let grid = f[0].grid;
    if f.iter().chain(rho).any(|x| x.grid != grid) {
        return Err(Error::GridMismatch);
    }
    let p = spec.time_exponent;
    let mut acc = 0.0;
    let mut prev: Option<f64> = None;
    for (n, &t) in times.iter().enumerate() {
        let left = prev.map_or(t_start, |tp| tp.max(t_start));
        prev = Some(t);
        if t <= t_start {
            continue;
        }
        let inner = space_norm(&f[n], &rho[n], spec.space_exponent, spec.weight_exponent)?;
        if p.is_infinite() {
            acc = f64::max(acc, inner);
        } else {
            acc += (t - left) * inner.powf(p);
        }
    }
    Ok(if p.is_infinite() { acc } else { acc.powf(1.0 / p) })
}
