//! Rectangular evaluation grids with trapezoid quadrature weights, and the
//! L2 inner products / norms they induce on scalar- and matrix-valued
//! function grids.

use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("dimension {dim}: range [{lo}, {hi}] is empty or reversed")]
    NonpositiveRange { dim: usize, lo: f64, hi: f64 },
    #[error("dimension {dim}: {count} points requested, need at least 2")]
    TooFewPoints { dim: usize, count: usize },
    #[error("{bounds} bounds given but {counts} point counts")]
    DimsMismatch { bounds: usize, counts: usize },
    #[error("grid must have at least one dimension")]
    Empty,
    #[error("function grids live on different grids or have different value shapes")]
    GridMismatch,
    #[error("function grid values must be finite")]
    NotFinite,
    #[error("value vector has length {got}, expected {want}")]
    LengthMismatch { got: usize, want: usize },
}

/// Equispaced rectangular lattice with per-point trapezoid quadrature weights.
///
/// Points are stored per dimension; a flat index runs in row-major order with
/// the last dimension fastest. The flat weight at a point is the product of
/// the per-dimension trapezoid weights (`step/2` at the two endpoints, `step`
/// in the interior), so per-dimension weights sum to `hi - lo`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    bounds: Vec<(f64, f64)>,
    counts: Vec<usize>,
    axes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(bounds: &[(f64, f64)], counts: &[usize]) -> Result<Arc<Grid>, GridError> {
        if bounds.is_empty() {
            return Err(GridError::Empty);
        }
        if bounds.len() != counts.len() {
            return Err(GridError::DimsMismatch {
                bounds: bounds.len(),
                counts: counts.len(),
            });
        }
        let mut axes = Vec::with_capacity(bounds.len());
        for (dim, (&(lo, hi), &count)) in bounds.iter().zip(counts).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(GridError::NonpositiveRange { dim, lo, hi });
            }
            if count < 2 {
                return Err(GridError::TooFewPoints { dim, count });
            }
            let step = (hi - lo) / (count - 1) as f64;
            let axis: Vec<f64> = (0..count)
                .map(|i| if i + 1 == count { hi } else { lo + i as f64 * step })
                .collect();
            axes.push(axis);
        }
        let weights = flat_trapezoid_weights(&axes);
        Ok(Arc::new(Grid {
            bounds: bounds.to_vec(),
            counts: counts.to_vec(),
            axes,
            weights,
        }))
    }

    /// Convenience constructor from a marginal step size shared by all
    /// dimensions; point counts are fixed by rounding `(hi-lo)/step`.
    pub fn with_step(bounds: &[(f64, f64)], step: f64) -> Result<Arc<Grid>, GridError> {
        let counts: Vec<usize> = bounds
            .iter()
            .map(|&(lo, hi)| ((hi - lo) / step).round() as usize + 1)
            .collect();
        Grid::new(bounds, &counts)
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn axis(&self, dim: usize) -> &[f64] {
        &self.axes[dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinates of the point with flat index `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let multi = self.multi_index(flat);
        multi
            .iter()
            .zip(&self.axes)
            .map(|(&i, axis)| axis[i])
            .collect()
    }

    /// Flat index of a multi-index, row-major with the last dimension fastest.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dims());
        let mut flat = 0;
        for (i, &idx) in multi.iter().enumerate() {
            debug_assert!(idx < self.counts[i]);
            flat = flat * self.counts[i] + idx;
        }
        flat
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut multi = vec![0; self.dims()];
        for i in (0..self.dims()).rev() {
            multi[i] = flat % self.counts[i];
            flat /= self.counts[i];
        }
        multi
    }

    /// Iterator over all points in flat order.
    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|j| self.point(j))
    }
}

fn flat_trapezoid_weights(axes: &[Vec<f64>]) -> Vec<f64> {
    let per_dim: Vec<Vec<f64>> = axes
        .iter()
        .map(|axis| {
            let n = axis.len();
            let step = (axis[n - 1] - axis[0]) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == 0 || i + 1 == n { step / 2.0 } else { step })
                .collect()
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut weights = vec![1.0; total];
    let mut stride = total;
    for dim_w in &per_dim {
        stride /= dim_w.len();
        for (j, w) in weights.iter_mut().enumerate() {
            *w *= dim_w[(j / stride) % dim_w.len()];
        }
    }
    weights
}

/// Shape of the values attached to each grid point: a scalar or a square
/// matrix stored as a row-major `d*d` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueShape {
    Scalar,
    Matrix(usize),
}

impl ValueShape {
    pub fn block_len(&self) -> usize {
        match self {
            ValueShape::Scalar => 1,
            ValueShape::Matrix(d) => d * d,
        }
    }
}

/// Scalar- or matrix-valued function discretized on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionGrid {
    grid: Arc<Grid>,
    shape: ValueShape,
    values: Vec<f64>,
}

impl FunctionGrid {
    pub fn scalar(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, GridError> {
        Self::with_shape(grid, ValueShape::Scalar, values)
    }

    pub fn matrix(grid: Arc<Grid>, dq: usize, values: Vec<f64>) -> Result<Self, GridError> {
        Self::with_shape(grid, ValueShape::Matrix(dq), values)
    }

    pub fn with_shape(
        grid: Arc<Grid>,
        shape: ValueShape,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        let want = grid.len() * shape.block_len();
        if values.len() != want {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                want,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GridError::NotFinite);
        }
        Ok(FunctionGrid {
            grid,
            shape,
            values,
        })
    }

    /// Evaluate a scalar function at every grid point, in flat order.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self, GridError> {
        let values: Vec<f64> = grid.points().map(|p| f(&p)).collect();
        Self::scalar(grid, values)
    }

    pub fn zeros(grid: Arc<Grid>, shape: ValueShape) -> Self {
        let len = grid.len() * shape.block_len();
        FunctionGrid {
            grid,
            shape,
            values: vec![0.0; len],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn shape(&self) -> ValueShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value block for grid point `j` (length 1 for scalars, `d*d` otherwise).
    pub fn block(&self, j: usize) -> &[f64] {
        let b = self.shape.block_len();
        &self.values[j * b..(j + 1) * b]
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.shape == other.shape
            && (Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid)
    }

    /// Trapezoid-weighted L2 norm: sqrt of the weighted sum of squared point
    /// values, Frobenius-norm squared per point in the matrix case. In one
    /// dimension this is exactly the trapezoid-rule approximation of the
    /// integral of `f^2`.
    pub fn l2_norm(&self) -> f64 {
        self.l2_inner_unchecked(self).max(0.0).sqrt()
    }

    /// Trapezoid-weighted L2 inner product; trace inner product per point in
    /// the matrix case.
    pub fn l2_inner(&self, other: &Self) -> Result<f64, GridError> {
        if !self.same_layout(other) {
            return Err(GridError::GridMismatch);
        }
        Ok(self.l2_inner_unchecked(other))
    }

    fn l2_inner_unchecked(&self, other: &Self) -> f64 {
        let b = self.shape.block_len();
        let mut acc = 0.0;
        for (j, &w) in self.grid.weights().iter().enumerate() {
            let mut dot = 0.0;
            for l in 0..b {
                dot += self.values[j * b + l] * other.values[j * b + l];
            }
            acc += w * dot;
        }
        acc
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self, GridError> {
        if !self.same_layout(other) {
            return Err(GridError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(FunctionGrid {
            grid: self.grid.clone(),
            shape: self.shape,
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, GridError> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, c: f64) -> Self {
        FunctionGrid {
            grid: self.grid.clone(),
            shape: self.shape,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Sup-norm distance between two grids of the same layout.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
