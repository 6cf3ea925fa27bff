//! B-spline sieve regression: basis construction (univariate and tensor
//! product), least-squares fitting with a pseudo-inverse Gram, grid and
//! derivative evaluation, and score-bootstrap draws.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::grid::{FunctionGrid, Grid, GridError};

/// Relative singular-value cutoff for pseudo-inverses of Gram matrices.
const GRAM_SV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SieveError {
    #[error("column {column} is degenerate: min equals max")]
    DegenerateColumn { column: usize },
    #[error("evaluation point {value} lies outside the basis range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("dataset is empty")]
    EmptyData,
    #[error("expected {want} entries, got {got}")]
    LengthMismatch { want: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Clamped knot vector with interior knots at the equispaced empirical
/// quantiles of a data column. The quantile convention is the order
/// statistic at (1-based) index `ceil(q * n)`; endpoints are the column
/// min and max, each repeated `order` times.
pub fn knots_from_quantiles(
    column: &[f64],
    interior: usize,
    order: usize,
) -> Result<Vec<f64>, SieveError> {
    let n = column.len();
    if n == 0 {
        return Err(SieveError::EmptyData);
    }
    if n <= interior {
        return Err(SieveError::InvalidBasis(format!(
            "{interior} interior knots need more than {interior} observations"
        )));
    }
    if order < 1 {
        return Err(SieveError::InvalidBasis("order must be at least 1".into()));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(SieveError::InvalidBasis("data must be finite".into()));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[0];
    let hi = sorted[n - 1];
    if lo >= hi {
        return Err(SieveError::DegenerateColumn { column: 0 });
    }
    let mut knots = vec![lo; order];
    for j in 1..=interior {
        let q = j as f64 / (interior + 1) as f64;
        let idx = (q * n as f64).ceil() as usize;
        let value = sorted[idx.clamp(1, n) - 1];
        if value <= lo || value >= hi {
            return Err(SieveError::InvalidBasis(format!(
                "interior knot at quantile {q} falls on the boundary"
            )));
        }
        knots.push(value);
    }
    knots.extend(std::iter::repeat_n(hi, order));
    Ok(knots)
}

/// One clamped univariate B-spline basis.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateBasis {
    order: usize,
    knots: Vec<f64>,
}

impl UnivariateBasis {
    pub fn new(order: usize, knots: Vec<f64>) -> Result<Self, SieveError> {
        if order < 1 {
            return Err(SieveError::InvalidBasis("order must be at least 1".into()));
        }
        if knots.len() < 2 * order {
            return Err(SieveError::InvalidBasis(
                "knot vector shorter than twice the order".into(),
            ));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(SieveError::InvalidBasis(
                "knots must be nondecreasing".into(),
            ));
        }
        for i in 0..order {
            if knots[i] != knots[0] || knots[knots.len() - 1 - i] != knots[knots.len() - 1] {
                return Err(SieveError::InvalidBasis(
                    "endpoints must be clamped order-fold".into(),
                ));
            }
        }
        if knots[0] >= knots[knots.len() - 1] {
            return Err(SieveError::InvalidBasis("empty knot span".into()));
        }
        Ok(UnivariateBasis { order, knots })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions: interior knots + order.
    pub fn len(&self) -> usize {
        self.knots.len() - self.order
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    fn check_range(&self, z: f64) -> Result<f64, SieveError> {
        let (lo, hi) = (self.lo(), self.hi());
        if z < lo - 1e-12 || z > hi + 1e-12 {
            return Err(SieveError::OutOfRange { value: z, lo, hi });
        }
        Ok(z.clamp(lo, hi))
    }

    fn find_span(&self, z: f64) -> usize {
        let nb = self.len();
        let d = self.order - 1;
        if z >= self.knots[nb] {
            return nb - 1;
        }
        if z <= self.knots[d] {
            return d;
        }
        let mut lo = d;
        let mut hi = nb;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Cox-de Boor recursion: the `order` basis values that are nonzero at
    /// `z`, namely functions `span-order+1 ..= span`.
    fn nonzero_at(&self, span: usize, z: f64) -> Vec<f64> {
        let d = self.order - 1;
        let t = &self.knots;
        let mut values = vec![0.0; self.order];
        let mut left = vec![0.0; self.order];
        let mut right = vec![0.0; self.order];
        values[0] = 1.0;
        for j in 1..=d {
            left[j] = z - t[span + 1 - j];
            right[j] = t[span + j] - z;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        values
    }

    /// Dense basis values at `z`.
    pub fn eval(&self, z: f64) -> Result<Vec<f64>, SieveError> {
        let z = self.check_range(z)?;
        let span = self.find_span(z);
        let nz = self.nonzero_at(span, z);
        let mut out = vec![0.0; self.len()];
        let first = span + 1 - self.order;
        out[first..=span].copy_from_slice(&nz);
        Ok(out)
    }

    /// Dense first-derivative values at `z`, from the standard relation
    /// between a spline of degree `d` and its degree `d-1` neighbors.
    pub fn eval_derivative(&self, z: f64) -> Result<Vec<f64>, SieveError> {
        if self.order < 2 {
            return Err(SieveError::InvalidBasis(
                "derivatives need order at least 2".into(),
            ));
        }
        let z = self.check_range(z)?;
        let span = self.find_span(z);
        let d = self.order - 1;
        let t = &self.knots;
        // degree d-1 values at the same span: functions span-d+1 ..= span
        let lower = {
            let mut values = vec![0.0; d];
            let mut left = vec![0.0; d];
            let mut right = vec![0.0; d];
            values[0] = 1.0;
            for j in 1..d {
                left[j] = z - t[span + 1 - j];
                right[j] = t[span + j] - z;
                let mut saved = 0.0;
                for r in 0..j {
                    let temp = values[r] / (right[r + 1] + left[j - r]);
                    values[r] = saved + right[r + 1] * temp;
                    saved = left[j - r] * temp;
                }
                values[j] = saved;
            }
            values
        };
        let mut out = vec![0.0; self.len()];
        let df = d as f64;
        for r in 0..=d {
            let i = span - d + r;
            let mut v = 0.0;
            if r > 0 {
                let den = t[i + d] - t[i];
                if den > 0.0 {
                    v += lower[r - 1] / den;
                }
            }
            if r < d {
                let den = t[i + d + 1] - t[i + 1];
                if den > 0.0 {
                    v -= lower[r] / den;
                }
            }
            out[i] = df * v;
        }
        Ok(out)
    }
}

/// Tensor-product B-spline basis. The tensor index is lexicographic with the
/// last dimension fastest, matching the flat order of [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SieveBasis {
    axes: Vec<UnivariateBasis>,
}

impl SieveBasis {
    pub fn new(axes: Vec<UnivariateBasis>) -> Result<Self, SieveError> {
        if axes.is_empty() {
            return Err(SieveError::InvalidBasis("no dimensions".into()));
        }
        Ok(SieveBasis { axes })
    }

    /// Basis with `interior` knots per dimension at the equispaced quantiles
    /// of the corresponding column of `z`.
    pub fn from_data(z: &DMatrix<f64>, interior: usize, order: usize) -> Result<Self, SieveError> {
        let mut axes = Vec::with_capacity(z.ncols());
        for c in 0..z.ncols() {
            let column: Vec<f64> = z.column(c).iter().copied().collect();
            let knots = knots_from_quantiles(&column, interior, order).map_err(|e| match e {
                SieveError::DegenerateColumn { .. } => SieveError::DegenerateColumn { column: c },
                other => other,
            })?;
            axes.push(UnivariateBasis::new(order, knots)?);
        }
        SieveBasis::new(axes)
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[UnivariateBasis] {
        &self.axes
    }

    /// Total basis dimension: product across dimensions.
    pub fn k_n(&self) -> usize {
        self.axes.iter().map(UnivariateBasis::len).product()
    }

    fn check_point(&self, z: &[f64]) -> Result<(), SieveError> {
        if z.len() != self.dims() {
            return Err(SieveError::DimensionMismatch(format!(
                "point has {} coordinates, basis has {} dimensions",
                z.len(),
                self.dims()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>, SieveError> {
        self.check_point(z)?;
        let per_dim: Vec<Vec<f64>> = self
            .axes
            .iter()
            .zip(z)
            .map(|(axis, &zj)| axis.eval(zj))
            .collect::<Result<_, _>>()?;
        Ok(tensor_product(&per_dim))
    }

    /// Partial derivative of the tensor basis along `dim`.
    pub fn eval_derivative(&self, z: &[f64], dim: usize) -> Result<Vec<f64>, SieveError> {
        self.check_point(z)?;
        if dim >= self.dims() {
            return Err(SieveError::DimensionMismatch(format!(
                "derivative dimension {dim} out of range"
            )));
        }
        let per_dim: Vec<Vec<f64>> = self
            .axes
            .iter()
            .zip(z)
            .enumerate()
            .map(|(j, (axis, &zj))| {
                if j == dim {
                    axis.eval_derivative(zj)
                } else {
                    axis.eval(zj)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(tensor_product(&per_dim))
    }

    /// Design matrix rows `h(z_i)'` for the rows of `z`.
    pub fn design_matrix(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>, SieveError> {
        let n = z.nrows();
        let k = self.k_n();
        let mut h = DMatrix::zeros(n, k);
        let mut point = vec![0.0; self.dims()];
        for i in 0..n {
            for (j, p) in point.iter_mut().enumerate() {
                *p = z[(i, j)];
            }
            let row = self.eval(&point)?;
            for (j, v) in row.iter().enumerate() {
                h[(i, j)] = *v;
            }
        }
        Ok(h)
    }

    /// True when every grid point lies inside the basis range.
    pub fn covers(&self, grid: &Grid) -> bool {
        grid.dims() == self.dims()
            && self.axes.iter().enumerate().all(|(j, axis)| {
                let (lo, hi) = grid.bounds()[j];
                lo >= axis.lo() - 1e-12 && hi <= axis.hi() + 1e-12
            })
    }
}

fn tensor_product(per_dim: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for vals in per_dim {
        let mut next = Vec::with_capacity(out.len() * vals.len());
        for o in &out {
            for v in vals {
                next.push(o * v);
            }
        }
        out = next;
    }
    out
}

/// Observations for a scalar-response regression.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: DVector<f64>,
    z: DMatrix<f64>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, z: DMatrix<f64>) -> Result<Self, SieveError> {
        if y.is_empty() {
            return Err(SieveError::EmptyData);
        }
        if z.nrows() != y.len() {
            return Err(SieveError::LengthMismatch {
                want: y.len(),
                got: z.nrows(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) || z.iter().any(|v| !v.is_finite()) {
            return Err(SieveError::DimensionMismatch(
                "data must be finite".to_string(),
            ));
        }
        Ok(Dataset {
            y: DVector::from_vec(y),
            z,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dims(&self) -> usize {
        self.z.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }
}

/// Least-squares sieve fit with everything the score bootstrap needs.
#[derive(Debug, Clone)]
pub struct SieveFit {
    basis: SieveBasis,
    beta: DVector<f64>,
    gram_pinv: DMatrix<f64>,
    design: DMatrix<f64>,
    residuals: DVector<f64>,
    r_n: f64,
    c_n: f64,
}

impl SieveFit {
    pub fn basis(&self) -> &SieveBasis {
        &self.basis
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn residuals(&self) -> &DVector<f64> {
        &self.residuals
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn gram_pinv(&self) -> &DMatrix<f64> {
        &self.gram_pinv
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn k_n(&self) -> usize {
        self.basis.k_n()
    }

    /// Convergence rate `sqrt(n / k_n)` of the sieve estimator.
    pub fn r_n(&self) -> f64 {
        self.r_n
    }

    /// Coupling rate `1 / log n`.
    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    /// Linear map from bootstrap weights to draw values on the grid:
    /// `draw(w) = r_n * H_grid * gram_pinv * (1/n) * H' * diag(residuals) * w`.
    pub fn draw_map(&self, grid: &Arc<Grid>) -> Result<DMatrix<f64>, SieveError> {
        let h_grid = grid_design(&self.basis, grid)?;
        let n = self.n() as f64;
        let mut scores = self.design.transpose();
        for (i, r) in self.residuals.iter().enumerate() {
            for row in 0..scores.nrows() {
                scores[(row, i)] *= r / n;
            }
        }
        Ok(self.r_n * h_grid * &self.gram_pinv * scores)
    }
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = nalgebra::SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    svd.pseudo_inverse(GRAM_SV_CUTOFF * smax)
        .expect("SVD computed with both sets of singular vectors")
}

fn grid_design(basis: &SieveBasis, grid: &Arc<Grid>) -> Result<DMatrix<f64>, SieveError> {
    if !basis.covers(grid) {
        let axis = &basis.axes()[0];
        return Err(SieveError::OutOfRange {
            value: grid.bounds()[0].0,
            lo: axis.lo(),
            hi: axis.hi(),
        });
    }
    let mut h = DMatrix::zeros(grid.len(), basis.k_n());
    for (i, point) in grid.points().enumerate() {
        let row = basis.eval(&point)?;
        for (j, v) in row.iter().enumerate() {
            h[(i, j)] = *v;
        }
    }
    Ok(h)
}

/// Minimum-norm least-squares fit of the dataset on the basis.
pub fn fit(dataset: &Dataset, basis: SieveBasis) -> Result<SieveFit, SieveError> {
    if dataset.dims() != basis.dims() {
        return Err(SieveError::DimensionMismatch(format!(
            "data has {} covariates, basis has {} dimensions",
            dataset.dims(),
            basis.dims()
        )));
    }
    let design = basis.design_matrix(dataset.z())?;
    let svd = nalgebra::SVD::new(design.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let beta = svd
        .solve(dataset.y(), GRAM_SV_CUTOFF * smax.max(1e-300))
        .expect("SVD computed with both sets of singular vectors");
    let residuals = dataset.y() - &design * &beta;
    let n = dataset.n() as f64;
    let gram = design.transpose() * &design / n;
    let gram_pinv = pseudo_inverse(&gram);
    let k_n = basis.k_n() as f64;
    Ok(SieveFit {
        basis,
        beta,
        gram_pinv,
        design,
        residuals,
        r_n: (n / k_n).sqrt(),
        c_n: 1.0 / n.ln(),
    })
}

/// Fitted values `h(z)' beta` at every grid point.
pub fn eval_fit(fit: &SieveFit, grid: &Arc<Grid>) -> Result<FunctionGrid, SieveError> {
    let h = grid_design(&fit.basis, grid)?;
    let values = h * &fit.beta;
    Ok(FunctionGrid::scalar(
        grid.clone(),
        values.iter().copied().collect(),
    )?)
}

/// One score-bootstrap draw on the grid:
/// `r_n * h(.)' [gram_pinv (1/n) sum_i w_i h(Z_i) u_i]`.
pub fn bootstrap_draw(
    fit: &SieveFit,
    w: &[f64],
    grid: &Arc<Grid>,
) -> Result<FunctionGrid, SieveError> {
    if w.len() != fit.n() {
        return Err(SieveError::LengthMismatch {
            want: fit.n(),
            got: w.len(),
        });
    }
    let n = fit.n() as f64;
    let weighted_scores = DVector::from_iterator(
        fit.n(),
        w.iter().zip(fit.residuals.iter()).map(|(w, u)| w * u / n),
    );
    let score = fit.design.transpose() * weighted_scores;
    let coef = &fit.gram_pinv * score;
    let h = grid_design(&fit.basis, grid)?;
    let values = h * coef * fit.r_n;
    Ok(FunctionGrid::scalar(
        grid.clone(),
        values.iter().copied().collect(),
    )?)
}

/// Law of the mean-zero, unit-variance bootstrap weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightLaw {
    #[default]
    StandardNormal,
    Rademacher,
    /// Two-point law with weights based on the golden ratio.
    Mammen,
}

impl WeightLaw {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            WeightLaw::StandardNormal => StandardNormal.sample(rng),
            WeightLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            WeightLaw::Mammen => {
                let sqrt5 = 5.0f64.sqrt();
                let p = (sqrt5 + 1.0) / (2.0 * sqrt5);
                if rng.random::<f64>() < p {
                    -(sqrt5 - 1.0) / 2.0
                } else {
                    (sqrt5 + 1.0) / 2.0
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub b: usize,
    pub weight_law: WeightLaw,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(b: usize, seed: u64) -> Self {
        BootstrapConfig {
            b,
            weight_law: WeightLaw::StandardNormal,
            seed,
        }
    }
}

// ---------------------------------------------------------------------------
// Demand systems and the Slutsky matrix
// ---------------------------------------------------------------------------

/// Budget-share Slutsky matrix assembled pointwise from fitted levels and
/// basis derivatives:
///
/// ```text
/// theta(t) = Dp g(t) + (Dy g(t)) g(t)' + g(t) g(t)' - diag(g(t))
/// ```
///
/// where `t = (p_1, ..., p_dq, y)` and the income coordinate is last. All
/// fits must share one basis over `t`.
pub fn slutsky_matrix(fits: &[&SieveFit], grid: &Arc<Grid>) -> Result<FunctionGrid, SieveError> {
    if fits.is_empty() {
        return Err(SieveError::EmptyData);
    }
    let basis = &fits[0].basis;
    if fits.iter().any(|f| f.basis != *basis) {
        return Err(SieveError::DimensionMismatch(
            "per-equation fits must share one basis".to_string(),
        ));
    }
    let dq = fits.len();
    let mut coefs = DMatrix::zeros(basis.k_n(), dq);
    for (j, f) in fits.iter().enumerate() {
        coefs.set_column(j, &f.beta);
    }
    slutsky_from_coefs(basis, &coefs, grid)
}

/// Slutsky matrix from spline coefficients, one column per demand equation.
pub fn slutsky_from_coefs(
    basis: &SieveBasis,
    coefs: &DMatrix<f64>,
    grid: &Arc<Grid>,
) -> Result<FunctionGrid, SieveError> {
    let dq = coefs.ncols();
    check_slutsky_dims(basis, dq, grid)?;
    let mut values = Vec::with_capacity(grid.len() * dq * dq);
    for point in grid.points() {
        let h = basis.eval(&point)?;
        let g = apply(coefs, &h);
        let dy = apply(coefs, &basis.eval_derivative(&point, dq)?);
        let mut dp = Vec::with_capacity(dq);
        for l in 0..dq {
            dp.push(apply(coefs, &basis.eval_derivative(&point, l)?));
        }
        for j in 0..dq {
            for l in 0..dq {
                let mut v = dp[l][j] + dy[j] * g[l] + g[j] * g[l];
                if j == l {
                    v -= g[j];
                }
                values.push(v);
            }
        }
    }
    Ok(FunctionGrid::matrix(grid.clone(), dq, values)?)
}

/// Directional derivative of the Slutsky functional at `g` applied to `h`,
/// evaluated on the grid:
///
/// ```text
/// Dp h + (Dy g) h' + (Dy h) g' + g h' + h g' - diag(h)
/// ```
///
/// This is the linear map that turns per-equation bootstrap draws of the
/// demand system into draws for the Slutsky matrix.
pub fn slutsky_linearized(
    basis: &SieveBasis,
    g_coefs: &DMatrix<f64>,
    h_coefs: &DMatrix<f64>,
    grid: &Arc<Grid>,
) -> Result<FunctionGrid, SieveError> {
    let dq = g_coefs.ncols();
    if h_coefs.ncols() != dq || h_coefs.nrows() != g_coefs.nrows() {
        return Err(SieveError::DimensionMismatch(
            "draw coefficients must match the fit coefficients".to_string(),
        ));
    }
    check_slutsky_dims(basis, dq, grid)?;
    let mut values = Vec::with_capacity(grid.len() * dq * dq);
    for point in grid.points() {
        let hb = basis.eval(&point)?;
        let dyb = basis.eval_derivative(&point, dq)?;
        let g = apply(g_coefs, &hb);
        let h = apply(h_coefs, &hb);
        let dyg = apply(g_coefs, &dyb);
        let dyh = apply(h_coefs, &dyb);
        let mut dph = Vec::with_capacity(dq);
        for l in 0..dq {
            dph.push(apply(h_coefs, &basis.eval_derivative(&point, l)?));
        }
        for j in 0..dq {
            for l in 0..dq {
                let mut v =
                    dph[l][j] + dyg[j] * h[l] + dyh[j] * g[l] + g[j] * h[l] + h[j] * g[l];
                if j == l {
                    v -= h[j];
                }
                values.push(v);
            }
        }
    }
    Ok(FunctionGrid::matrix(grid.clone(), dq, values)?)
}

fn check_slutsky_dims(basis: &SieveBasis, dq: usize, grid: &Grid) -> Result<(), SieveError> {
    if basis.dims() != dq + 1 {
        return Err(SieveError::DimensionMismatch(format!(
            "{dq} demand equations need a basis over (prices, income) with {} dimensions",
            dq + 1
        )));
    }
    if grid.dims() != dq + 1 {
        return Err(SieveError::DimensionMismatch(
            "grid must cover (prices, income)".to_string(),
        ));
    }
    Ok(())
}

fn apply(coefs: &DMatrix<f64>, basis_values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; coefs.ncols()];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, b) in basis_values.iter().enumerate() {
            acc += coefs[(i, j)] * b;
        }
        *o = acc;
    }
    out
}

/// Observations for a demand system: budget shares `q` (n x dq), the
/// nonparametric arguments `t = (prices, income)` (n x (dq+1)), and
/// covariates `z` that enter linearly (n x dz).
#[derive(Debug, Clone)]
pub struct DemandDataset {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

/// Partially linear fit of a demand system: each budget share is regressed
/// on the spline basis in `t` plus the linear covariates `z`.
#[derive(Debug, Clone)]
pub struct DemandFit {
    basis: SieveBasis,
    spline_coefs: DMatrix<f64>,
    linear_coefs: DMatrix<f64>,
    gram_pinv: DMatrix<f64>,
    design: DMatrix<f64>,
    residuals: DMatrix<f64>,
    r_n: f64,
    c_n: f64,
}

pub fn fit_demand(data: &DemandDataset, basis: SieveBasis) -> Result<DemandFit, SieveError> {
    let n = data.q.nrows();
    if n == 0 {
        return Err(SieveError::EmptyData);
    }
    if data.t.nrows() != n || data.z.nrows() != n {
        return Err(SieveError::LengthMismatch {
            want: n,
            got: data.t.nrows().min(data.z.nrows()),
        });
    }
    let dq = data.q.ncols();
    if basis.dims() != dq + 1 || data.t.ncols() != dq + 1 {
        return Err(SieveError::DimensionMismatch(
            "basis and t must cover (prices, income)".to_string(),
        ));
    }
    let k = basis.k_n();
    let dz = data.z.ncols();
    let h = basis.design_matrix(&data.t)?;
    let mut design = DMatrix::zeros(n, k + dz);
    design.view_mut((0, 0), (n, k)).copy_from(&h);
    design.view_mut((0, k), (n, dz)).copy_from(&data.z);

    let svd = nalgebra::SVD::new(design.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut coefs = DMatrix::zeros(k + dz, dq);
    for j in 0..dq {
        let col = DVector::from_iterator(n, data.q.column(j).iter().copied());
        let beta = svd
            .solve(&col, GRAM_SV_CUTOFF * smax.max(1e-300))
            .expect("SVD computed with both sets of singular vectors");
        coefs.set_column(j, &beta);
    }
    let residuals = &data.q - &design * &coefs;
    let gram = design.transpose() * &design / n as f64;
    let gram_pinv = pseudo_inverse(&gram);
    Ok(DemandFit {
        basis,
        spline_coefs: coefs.rows(0, k).into_owned(),
        linear_coefs: coefs.rows(k, dz).into_owned(),
        gram_pinv,
        design,
        residuals,
        r_n: (n as f64 / k as f64).sqrt(),
        c_n: 1.0 / (n as f64).ln(),
    })
}

impl DemandFit {
    pub fn basis(&self) -> &SieveBasis {
        &self.basis
    }

    pub fn spline_coefs(&self) -> &DMatrix<f64> {
        &self.spline_coefs
    }

    pub fn linear_coefs(&self) -> &DMatrix<f64> {
        &self.linear_coefs
    }

    pub fn r_n(&self) -> f64 {
        self.r_n
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    /// Plug-in Slutsky matrix on the grid.
    pub fn theta_hat(&self, grid: &Arc<Grid>) -> Result<FunctionGrid, SieveError> {
        slutsky_from_coefs(&self.basis, &self.spline_coefs, grid)
    }

    /// Spline part of one score-bootstrap draw of the demand system: the
    /// upper block (spline rows) of `gram_pinv (1/n) sum_i w_i d_i u_i'`,
    /// scaled by `r_n`.
    pub fn draw_spline_coefs(&self, w: &[f64]) -> Result<DMatrix<f64>, SieveError> {
        let n = self.n();
        if w.len() != n {
            return Err(SieveError::LengthMismatch {
                want: n,
                got: w.len(),
            });
        }
        let dq = self.residuals.ncols();
        let mut weighted = self.residuals.clone();
        for i in 0..n {
            for j in 0..dq {
                weighted[(i, j)] *= w[i] / n as f64;
            }
        }
        let score = self.design.transpose() * weighted;
        let full = &self.gram_pinv * score;
        Ok(self.r_n * full.rows(0, self.basis.k_n()).into_owned())
    }

    /// One bootstrap draw of the Slutsky matrix on the grid, via the
    /// linearized Slutsky functional at the fitted demand system.
    pub fn slutsky_draw(&self, w: &[f64], grid: &Arc<Grid>) -> Result<FunctionGrid, SieveError> {
        let h_coefs = self.draw_spline_coefs(w)?;
        slutsky_linearized(&self.basis, &self.spline_coefs, &h_coefs, grid)
    }
}
