use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Tensor-product reference mesh on the slab `T^1 x [0, 1]`.
///
/// The horizontal direction is periodic with `nx` nodes and spacing
/// `hx = period / nx` (no duplicated endpoint); the vertical direction has
/// walls at `z = 0` and `z = 1` with `nz` nodes and `hz = 1 / (nz - 1)`.
/// `ny` is carried for the 3-d interface but only `dim = 2` solvers exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub nz: usize,
    #[serde(default)]
    pub ny: Option<usize>,
    /// Horizontal period; defaults to `2 pi`.
    pub period: f64,
}

impl Grid {
    pub fn new(nx: usize, nz: usize, period: f64) -> Result<Grid> {
        let g = Grid { nx, nz, ny: None, period };
        g.validate()?;
        Ok(g)
    }

    /// Torus-convention grid with period `2 pi`.
    pub fn standard(nx: usize, nz: usize) -> Result<Grid> {
        Grid::new(nx, nz, std::f64::consts::TAU)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.nz < 4 {
            return Err(SimError::Param(format!(
                "grid needs at least 4 nodes per direction, got {}x{}",
                self.nx, self.nz
            )));
        }
        if !(self.period > 0.0) {
            return Err(SimError::Param(format!("period must be > 0, got {}", self.period)));
        }
        if let Some(ny) = self.ny {
            if ny < 4 {
                return Err(SimError::Param(format!("ny must be >= 4, got {ny}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.period / self.nx as f64
    }

    #[inline]
    pub fn hz(&self) -> f64 {
        1.0 / (self.nz - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.hz()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Trapezoidal quadrature weight of node `(i, j)`: full cells in the
    /// periodic direction, half cells at the walls.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        let wz = if j == 0 || j == self.nz - 1 { 0.5 } else { 1.0 };
        self.hx() * self.hz() * wz
    }
}

/// Scalar samples on a [`Grid`], collocated at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> ScalarField {
        ScalarField { grid: Arc::clone(grid), data: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> ScalarField {
        ScalarField { grid: Arc::clone(grid), data: vec![c; grid.len()] }
    }

    /// Samples `f(x, z)` at every node.
    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(f64, f64) -> f64) -> ScalarField {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                data.push(f(grid.x(i), grid.z(j)));
            }
        }
        ScalarField { grid: Arc::clone(grid), data }
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.grid.idx(i, j);
        &mut self.data[k]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(SimError::GridMismatch(format!(
                "{}x{} vs {}x{}",
                self.grid.nx, self.grid.nz, other.grid.nx, other.grid.nz
            )))
        }
    }

    /// Pointwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: Arc::clone(&self.grid), data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Vector-valued samples (one `[f64; 2]` per node, reference components).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Arc<Grid>,
    data: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn zeros(grid: &Arc<Grid>) -> VectorField {
        VectorField { grid: Arc::clone(grid), data: vec![[0.0; 2]; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(f64, f64) -> [f64; 2]) -> VectorField {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                data.push(f(grid.x(i), grid.z(j)));
            }
        }
        VectorField { grid: Arc::clone(grid), data }
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        self.data[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut [f64; 2] {
        let k = self.grid.idx(i, j);
        &mut self.data[k]
    }

    #[inline]
    pub fn data(&self) -> &[[f64; 2]] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v[0].is_finite() && v[1].is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .fold(0.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()))
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: Arc::clone(&self.grid),
            data: self.data.iter().map(|v| v[c]).collect(),
        }
    }

    pub fn same_grid(&self, other: &VectorField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(SimError::GridMismatch("vector fields on different grids".into()))
        }
    }
}

/// Matrix-valued samples (one 2x2 matrix per node), used for velocity
/// gradients and stress tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Arc<Grid>,
    data: Vec<crate::la::Mat2>,
}

impl TensorField {
    pub fn zeros(grid: &Arc<Grid>) -> TensorField {
        TensorField { grid: Arc::clone(grid), data: vec![[[0.0; 2]; 2]; grid.len()] }
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> crate::la::Mat2 {
        self.data[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut crate::la::Mat2 {
        let k = self.grid.idx(i, j);
        &mut self.data[k]
    }

    #[inline]
    pub fn data(&self) -> &[crate::la::Mat2] {
        &self.data
    }
}

/// Reference-domain quadrature of `f * weight`, exact for constants.
///
/// Realizes moving-domain integrals through `weight = J_w`: an integral over
/// the deformed domain equals the reference integral of the pullback times
/// the Jacobian determinant.
pub fn integrate_reference(f: &ScalarField, weight: &ScalarField) -> Result<f64> {
    f.same_grid(weight)?;
    let g = f.grid();
    let mut total = 0.0;
    for j in 0..g.nz {
        let wj = g.weight(j);
        let mut row = 0.0;
        for i in 0..g.nx {
            row += f.at(i, j) * weight.at(i, j);
        }
        total += wj * row;
    }
    Ok(total)
}

/// Quadrature over the horizontal torus (plate samples).
pub fn integrate_plate(samples: &[f64], hx: f64) -> f64 {
    samples.iter().sum::<f64>() * hx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::standard(16, 9).unwrap())
    }

    #[test]
    fn grid_invariants() {
        let g = grid();
        assert!((g.nx as f64 * g.hx() - g.period).abs() < 1e-14);
        assert!(((g.nz - 1) as f64 * g.hz() - 1.0).abs() < 1e-14);
        assert!(Grid::new(3, 9, 1.0).is_err());
    }

    #[test]
    fn quadrature_constant_exact() {
        let g = grid();
        let one = ScalarField::constant(&g, 1.0);
        let v = integrate_reference(&one, &one).unwrap();
        assert!((v - g.period).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn quadrature_zero() {
        let g = grid();
        let zero = ScalarField::zeros(&g);
        let one = ScalarField::constant(&g, 1.0);
        assert_eq!(integrate_reference(&zero, &one).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_periodic_mean_zero() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        let one = ScalarField::constant(&g, 1.0);
        let v = integrate_reference(&f, &one).unwrap();
        assert!(v.abs() < 1e-13, "got {v}");
    }

    #[test]
    fn quadrature_grid_mismatch() {
        let g = grid();
        let other = Arc::new(Grid::standard(8, 9).unwrap());
        let f = ScalarField::zeros(&g);
        let w = ScalarField::constant(&other, 1.0);
        assert!(integrate_reference(&f, &w).is_err());
    }

    proptest! {
        // Linearity and positivity of the quadrature.
        #[test]
        fn quadrature_linear_positive(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = grid();
            let f1 = ScalarField::from_fn(&g, |x, z| (x + z).sin());
            let f2 = ScalarField::from_fn(&g, |x, z| (2.0 * x).cos() + z);
            let w = ScalarField::from_fn(&g, |x, _| 1.5 + 0.5 * x.cos());
            let combo = ScalarField::from_fn(&g, |x, z| {
                a * (x + z).sin() + b * ((2.0 * x).cos() + z)
            });
            let lhs = integrate_reference(&combo, &w).unwrap();
            let rhs = a * integrate_reference(&f1, &w).unwrap()
                + b * integrate_reference(&f2, &w).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-11);

            let nonneg = ScalarField::from_fn(&g, |x, z| (x.sin() * z).powi(2));
            prop_assert!(integrate_reference(&nonneg, &w).unwrap() >= 0.0);
        }
    }
}
