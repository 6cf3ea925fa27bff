//! Shape hypotheses as closed convex cones and their projections.
//!
//! A [`ConeSpec`] names the restriction; [`build_plan`] lowers it, for a
//! given grid, into one of three projection representations: a linear
//! constraint matrix `A h >= 0` fed to the QP solver, a pointwise closed
//! form (nonnegativity, Slutsky), or the Kuosmanen affine-minorant QP for
//! multivariate concavity/convexity. All projections minimize the
//! trapezoid-weighted L2 distance so that the discretized projection is
//! consistent with the norm used by the test statistic.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::{FunctionGrid, Grid, GridError, ValueShape};
use crate::isotonic::{self, IsotonicProblem};
use crate::qp::{self, QpProblem, QpSettings, QpStatus};

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("difference matrix needs at least 2 points")]
    TooSmall,
    #[error("cone is incompatible with this grid: {0}")]
    IncompatibleCone(String),
    #[error("unsupported intersection: {0}")]
    UnsupportedIntersection(String),
    #[error("projection QP did not converge (status {status:?} after {iterations} iterations)")]
    SolverFailure { status: QpStatus, iterations: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Isotonic(#[from] isotonic::IsotonicError),
    #[error(transparent)]
    Qp(#[from] qp::QpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneDir {
    Increasing,
    Decreasing,
}

/// Declarative description of the shape hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeSpec {
    /// Monotone along each flagged dimension; `None` leaves a dimension
    /// unrestricted.
    Monotone(Vec<Option<MonotoneDir>>),
    Convex1D,
    Concave1D,
    /// Multivariate convexity via the Kuosmanen affine representation.
    ConvexMultivariate,
    ConcaveMultivariate,
    /// Nonnegative mixed second differences for every coordinate pair.
    Supermodular,
    Nonnegative,
    /// Negative semidefiniteness of a matrix-valued function; with
    /// `enforce_symmetry` the projection also discards the antisymmetric
    /// part, otherwise only the symmetric part is restricted.
    Slutsky { dq: usize, enforce_symmetry: bool },
    /// Flattened intersection of linear-constraint cones.
    Intersection(Vec<ConeSpec>),
}

impl ConeSpec {
    /// Nondecreasing in every dimension.
    pub fn monotone_increasing(dims: usize) -> ConeSpec {
        ConeSpec::Monotone(vec![Some(MonotoneDir::Increasing); dims])
    }

    pub fn slutsky(dq: usize) -> ConeSpec {
        ConeSpec::Slutsky {
            dq,
            enforce_symmetry: true,
        }
    }

    /// True when the cone is representable as `A h >= 0` on a scalar grid.
    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            ConeSpec::Monotone(_)
                | ConeSpec::Convex1D
                | ConeSpec::Concave1D
                | ConeSpec::Supermodular
                | ConeSpec::Intersection(_)
        )
    }

    /// Short name used in reports.
    pub fn label(&self) -> String {
        match self {
            ConeSpec::Monotone(flags) => {
                if flags.iter().flatten().any(|d| *d == MonotoneDir::Decreasing) {
                    "monotone-decreasing".to_string()
                } else {
                    "monotone".to_string()
                }
            }
            ConeSpec::Convex1D | ConeSpec::ConvexMultivariate => "convex".to_string(),
            ConeSpec::Concave1D | ConeSpec::ConcaveMultivariate => "concave".to_string(),
            ConeSpec::Supermodular => "supermodular".to_string(),
            ConeSpec::Nonnegative => "nonneg".to_string(),
            ConeSpec::Slutsky {
                enforce_symmetry: true,
                ..
            } => "slutsky".to_string(),
            ConeSpec::Slutsky {
                enforce_symmetry: false,
                ..
            } => "slutsky-nsd".to_string(),
            ConeSpec::Intersection(members) => members
                .iter()
                .map(ConeSpec::label)
                .collect::<Vec<_>>()
                .join("+"),
        }
    }
}

/// Joint restriction from two or more linear-constraint cones.
///
/// Members are flattened; closed-form cones (nonnegativity, Slutsky) and the
/// Kuosmanen representation cannot be intersected this way.
pub fn intersect(cones: Vec<ConeSpec>) -> Result<ConeSpec, ConeError> {
    let mut flat = Vec::new();
    for cone in cones {
        match cone {
            ConeSpec::Intersection(members) => flat.extend(members),
            other => flat.push(other),
        }
    }
    if flat.len() < 2 {
        return Err(ConeError::UnsupportedIntersection(
            "an intersection needs at least two members".to_string(),
        ));
    }
    if let Some(bad) = flat.iter().find(|c| !c.is_linear()) {
        return Err(ConeError::UnsupportedIntersection(format!(
            "member `{}` has no linear constraint representation",
            bad.label()
        )));
    }
    Ok(ConeSpec::Intersection(flat))
}

/// How to compute the projection on a particular grid.
#[derive(Debug, Clone)]
pub enum PlanKind {
    /// Weighted QP `min sum w_j (h_j - f_j)^2  s.t.  A h >= 0`.
    LinearConstraints { a: DMatrix<f64> },
    ClosedFormNonneg,
    ClosedFormSlutsky { dq: usize, enforce_symmetry: bool },
    /// Affine-minorant QP over per-point `(a_j, b_j)`; the projected values
    /// are `min_j {a_j + b_j'z}` for concavity (max for convexity).
    KuosmanenQP {
        selector: DMatrix<f64>,
        constraints: DMatrix<f64>,
        concave: bool,
    },
}

#[derive(Debug, Clone)]
pub struct ProjectionPlan {
    pub kind: PlanKind,
    pub grid: Arc<Grid>,
    /// Set for univariate monotone cones, where PAVA solves the weighted
    /// projection exactly and much faster than the QP.
    pava_direction: Option<isotonic::Direction>,
}

/// First-difference matrix: row i maps `h` to `h[i+1] - h[i]`.
pub fn diff_matrix(k: usize) -> Result<DMatrix<f64>, ConeError> {
    if k < 2 {
        return Err(ConeError::TooSmall);
    }
    let mut a = DMatrix::zeros(k - 1, k);
    for i in 0..k - 1 {
        a[(i, i)] = -1.0;
        a[(i, i + 1)] = 1.0;
    }
    Ok(a)
}

/// Lower a cone to its projection representation on `grid`.
///
/// Linear constraint rows are ordered dimension-major, then line-major in
/// the flat order of the off-dimension indices, then point-major along the
/// dimension; intersection members stack in member order. Projection values
/// do not depend on this ordering.
pub fn build_plan(cone: &ConeSpec, grid: &Arc<Grid>) -> Result<ProjectionPlan, ConeError> {
    let kind = match cone {
        ConeSpec::Monotone(flags) => {
            if flags.len() != grid.dims() {
                return Err(ConeError::IncompatibleCone(format!(
                    "monotone flags cover {} dimensions, grid has {}",
                    flags.len(),
                    grid.dims()
                )));
            }
            if flags.iter().all(Option::is_none) {
                return Err(ConeError::IncompatibleCone(
                    "monotone cone restricts no dimension".to_string(),
                ));
            }
            PlanKind::LinearConstraints {
                a: monotone_constraints(grid, flags),
            }
        }
        ConeSpec::Convex1D | ConeSpec::Concave1D => {
            if grid.dims() != 1 {
                return Err(ConeError::IncompatibleCone(
                    "univariate curvature cone on a multivariate grid".to_string(),
                ));
            }
            let sign = if matches!(cone, ConeSpec::Convex1D) {
                1.0
            } else {
                -1.0
            };
            PlanKind::LinearConstraints {
                a: second_difference_constraints(grid.len(), sign),
            }
        }
        ConeSpec::Supermodular => {
            if grid.dims() < 2 {
                return Err(ConeError::IncompatibleCone(
                    "supermodularity needs at least two dimensions".to_string(),
                ));
            }
            PlanKind::LinearConstraints {
                a: supermodular_constraints(grid),
            }
        }
        ConeSpec::ConvexMultivariate | ConeSpec::ConcaveMultivariate => {
            let concave = matches!(cone, ConeSpec::ConcaveMultivariate);
            let (selector, constraints) = kuosmanen_matrices(grid, concave);
            PlanKind::KuosmanenQP {
                selector,
                constraints,
                concave,
            }
        }
        ConeSpec::Nonnegative => PlanKind::ClosedFormNonneg,
        ConeSpec::Slutsky {
            dq,
            enforce_symmetry,
        } => PlanKind::ClosedFormSlutsky {
            dq: *dq,
            enforce_symmetry: *enforce_symmetry,
        },
        ConeSpec::Intersection(members) => {
            if members.len() < 2 {
                return Err(ConeError::UnsupportedIntersection(
                    "an intersection needs at least two members".to_string(),
                ));
            }
            let mut blocks = Vec::with_capacity(members.len());
            for member in members {
                if matches!(member, ConeSpec::Intersection(_)) {
                    return Err(ConeError::UnsupportedIntersection(
                        "intersections must be flattened".to_string(),
                    ));
                }
                if !member.is_linear() {
                    return Err(ConeError::UnsupportedIntersection(format!(
                        "member `{}` has no linear constraint representation",
                        member.label()
                    )));
                }
                match build_plan(member, grid)?.kind {
                    PlanKind::LinearConstraints { a } => blocks.push(a),
                    _ => unreachable!("linear members lower to constraint matrices"),
                }
            }
            let rows = blocks.iter().map(DMatrix::nrows).sum();
            let mut a = DMatrix::zeros(rows, grid.len());
            let mut at = 0;
            for block in blocks {
                a.view_mut((at, 0), (block.nrows(), block.ncols()))
                    .copy_from(&block);
                at += block.nrows();
            }
            PlanKind::LinearConstraints { a }
        }
    };
    let pava_direction = match cone {
        ConeSpec::Monotone(flags) if grid.dims() == 1 => flags[0].map(|d| match d {
            MonotoneDir::Increasing => isotonic::Direction::Nondecreasing,
            MonotoneDir::Decreasing => isotonic::Direction::Nonincreasing,
        }),
        _ => None,
    };
    Ok(ProjectionPlan {
        kind,
        grid: grid.clone(),
        pava_direction,
    })
}

/// Weighted-L2 projection of `f` onto the cone.
pub fn project(
    cone: &ConeSpec,
    f: &FunctionGrid,
    settings: &QpSettings,
) -> Result<FunctionGrid, ConeError> {
    let plan = build_plan(cone, f.grid())?;
    project_with_plan(&plan, f, settings)
}

/// Projection with a prebuilt plan; reuse the plan when projecting many
/// functions on the same grid (statistic plus every bootstrap draw).
pub fn project_with_plan(
    plan: &ProjectionPlan,
    f: &FunctionGrid,
    settings: &QpSettings,
) -> Result<FunctionGrid, ConeError> {
    match &plan.kind {
        PlanKind::LinearConstraints { a } => {
            expect_scalar(f)?;
            if let Some(direction) = plan.pava_direction {
                let fitted = isotonic::pava(&IsotonicProblem {
                    values: f.values().to_vec(),
                    weights: plan.grid.weights().to_vec(),
                    direction,
                })?;
                return Ok(FunctionGrid::scalar(f.grid().clone(), fitted)?);
            }
            if a.nrows() == 0 {
                return Ok(f.clone());
            }
            let problem = QpProblem::projection(f.values(), plan.grid.weights(), a.clone())?;
            let sol = qp::solve(&problem, settings);
            if sol.status != QpStatus::Solved {
                return Err(ConeError::SolverFailure {
                    status: sol.status,
                    iterations: sol.iterations,
                });
            }
            Ok(FunctionGrid::scalar(
                f.grid().clone(),
                sol.x.iter().copied().collect(),
            )?)
        }
        PlanKind::ClosedFormNonneg => {
            expect_scalar(f)?;
            let values = f.values().iter().map(|v| v.max(0.0)).collect();
            Ok(FunctionGrid::scalar(f.grid().clone(), values)?)
        }
        PlanKind::ClosedFormSlutsky {
            dq,
            enforce_symmetry,
        } => project_slutsky(f, *dq, *enforce_symmetry),
        PlanKind::KuosmanenQP {
            selector,
            constraints,
            concave,
        } => {
            expect_scalar(f)?;
            project_kuosmanen(plan, f, selector, constraints, *concave, settings)
        }
    }
}

fn expect_scalar(f: &FunctionGrid) -> Result<(), ConeError> {
    if f.shape() != ValueShape::Scalar {
        return Err(ConeError::IncompatibleCone(
            "this cone applies to scalar-valued grids".to_string(),
        ));
    }
    Ok(())
}

fn monotone_constraints(grid: &Grid, flags: &[Option<MonotoneDir>]) -> DMatrix<f64> {
    let k = grid.len();
    let mut rows = 0;
    for (dim, flag) in flags.iter().enumerate() {
        if flag.is_some() {
            rows += k / grid.counts()[dim] * (grid.counts()[dim] - 1);
        }
    }
    let mut a = DMatrix::zeros(rows, k);
    let mut row = 0;
    for (dim, flag) in flags.iter().enumerate() {
        let Some(direction) = flag else { continue };
        let sign = match direction {
            MonotoneDir::Increasing => 1.0,
            MonotoneDir::Decreasing => -1.0,
        };
        for_each_line(grid, dim, |line| {
            for w in line.windows(2) {
                a[(row, w[1])] = sign;
                a[(row, w[0])] = -sign;
                row += 1;
            }
        });
    }
    debug_assert_eq!(row, rows);
    a
}

/// `sign = +1` enforces convexity (nonnegative second differences); `-1`
/// enforces concavity. Grids with fewer than 3 points carry no constraint.
fn second_difference_constraints(k: usize, sign: f64) -> DMatrix<f64> {
    let rows = k.saturating_sub(2);
    let mut a = DMatrix::zeros(rows, k);
    for i in 0..rows {
        a[(i, i)] = sign;
        a[(i, i + 1)] = -2.0 * sign;
        a[(i, i + 2)] = sign;
    }
    a
}

fn supermodular_constraints(grid: &Grid) -> DMatrix<f64> {
    let d = grid.dims();
    let counts = grid.counts().to_vec();
    let k = grid.len();
    let mut rows = 0;
    for p in 0..d {
        for q in (p + 1)..d {
            rows += k / (counts[p] * counts[q]) * (counts[p] - 1) * (counts[q] - 1);
        }
    }
    let mut a = DMatrix::zeros(rows, k);
    let mut row = 0;
    for p in 0..d {
        for q in (p + 1)..d {
            for_each_plane(grid, p, q, |get| {
                for ip in 0..counts[p] - 1 {
                    for iq in 0..counts[q] - 1 {
                        a[(row, get(ip + 1, iq + 1))] += 1.0;
                        a[(row, get(ip, iq + 1))] -= 1.0;
                        a[(row, get(ip + 1, iq))] -= 1.0;
                        a[(row, get(ip, iq))] += 1.0;
                        row += 1;
                    }
                }
            });
        }
    }
    debug_assert_eq!(row, rows);
    a
}

/// Visit every grid line along `dim`: the callback receives the flat indices
/// of one line, ordered along the dimension.
fn for_each_line(grid: &Grid, dim: usize, mut f: impl FnMut(&[usize])) {
    let counts = grid.counts();
    let mut multi = vec![0usize; grid.dims()];
    let mut line = vec![0usize; counts[dim]];
    loop {
        for (i, slot) in line.iter_mut().enumerate() {
            multi[dim] = i;
            *slot = grid.flat_index(&multi);
        }
        f(&line);
        // advance the off-dimension indices in flat order
        let mut carry = true;
        for j in (0..grid.dims()).rev() {
            if j == dim || !carry {
                continue;
            }
            multi[j] += 1;
            if multi[j] < counts[j] {
                carry = false;
            } else {
                multi[j] = 0;
            }
        }
        if carry {
            break;
        }
    }
}

/// Visit every (p, q) slice; the callback gets an indexer from in-plane
/// indices to flat grid indices.
fn for_each_plane(
    grid: &Grid,
    p: usize,
    q: usize,
    mut f: impl FnMut(&dyn Fn(usize, usize) -> usize),
) {
    let counts = grid.counts();
    let mut multi = vec![0usize; grid.dims()];
    loop {
        {
            let multi_ref = multi.clone();
            let get = |ip: usize, iq: usize| {
                let mut m = multi_ref.clone();
                m[p] = ip;
                m[q] = iq;
                grid.flat_index(&m)
            };
            f(&get);
        }
        let mut carry = true;
        for j in (0..grid.dims()).rev() {
            if j == p || j == q || !carry {
                continue;
            }
            multi[j] += 1;
            if multi[j] < counts[j] {
                carry = false;
            } else {
                multi[j] = 0;
            }
        }
        if carry {
            break;
        }
    }
}

/// Decision variables are one affine piece `(a_j, b_j)` per grid point,
/// stored as contiguous blocks of length `d + 1`. The selector maps the
/// stacked variables to fitted values at the grid points; the constraint
/// rows say that each point's own piece attains the minimum (concave) or
/// maximum (convex) among all pieces at that point.
fn kuosmanen_matrices(grid: &Grid, concave: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = grid.len();
    let d = grid.dims();
    let bw = d + 1;
    let mut selector = DMatrix::zeros(k, k * bw);
    for (i, point) in grid.points().enumerate() {
        selector[(i, i * bw)] = 1.0;
        for (l, z) in point.iter().enumerate() {
            selector[(i, i * bw + 1 + l)] = *z;
        }
    }
    let sign = if concave { 1.0 } else { -1.0 };
    let mut constraints = DMatrix::zeros(k * (k - 1), k * bw);
    let mut row = 0;
    for i in 0..k {
        let zi = grid.point(i);
        for j in 0..k {
            if i == j {
                continue;
            }
            // concave: a_j + b_j'z_i - a_i - b_i'z_i >= 0
            constraints[(row, j * bw)] += sign;
            constraints[(row, i * bw)] -= sign;
            for (l, z) in zi.iter().enumerate() {
                constraints[(row, j * bw + 1 + l)] += sign * z;
                constraints[(row, i * bw + 1 + l)] -= sign * z;
            }
            row += 1;
        }
    }
    (selector, constraints)
}

fn project_kuosmanen(
    plan: &ProjectionPlan,
    f: &FunctionGrid,
    selector: &DMatrix<f64>,
    constraints: &DMatrix<f64>,
    concave: bool,
    settings: &QpSettings,
) -> Result<FunctionGrid, ConeError> {
    let k = plan.grid.len();
    let w = plan.grid.weights();
    // objective sum_i w_i (f_i - a_i - b_i'z_i)^2 in the stacked variables
    let mut weighted = selector.clone();
    for i in 0..k {
        let wi = w[i];
        for c in 0..selector.ncols() {
            weighted[(i, c)] *= wi;
        }
    }
    let p = 2.0 * selector.transpose() * &weighted;
    let fv = DVector::from_column_slice(f.values());
    let q = -2.0 * weighted.transpose() * fv;
    let problem = QpProblem::new(p, q, constraints.clone())?;
    let sol = qp::solve(&problem, settings);
    if sol.status != QpStatus::Solved {
        return Err(ConeError::SolverFailure {
            status: sol.status,
            iterations: sol.iterations,
        });
    }
    let bw = plan.grid.dims() + 1;
    let values: Vec<f64> = plan
        .grid
        .points()
        .map(|z| {
            let mut best = if concave {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            for j in 0..k {
                let mut v = sol.x[j * bw];
                for (l, zl) in z.iter().enumerate() {
                    v += sol.x[j * bw + 1 + l] * zl;
                }
                best = if concave { best.min(v) } else { best.max(v) };
            }
            best
        })
        .collect();
    Ok(FunctionGrid::scalar(f.grid().clone(), values)?)
}

fn project_slutsky(
    f: &FunctionGrid,
    dq: usize,
    enforce_symmetry: bool,
) -> Result<FunctionGrid, ConeError> {
    if f.shape() != ValueShape::Matrix(dq) {
        return Err(ConeError::IncompatibleCone(format!(
            "Slutsky cone expects {dq}x{dq} matrix values"
        )));
    }
    let n = f.grid().len();
    let mut values = Vec::with_capacity(f.values().len());
    for j in 0..n {
        let block = f.block(j);
        let m = DMatrix::from_row_slice(dq, dq, block);
        let sym = (&m + m.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        // clip positive eigenvalues: nearest symmetric NSD matrix
        let mut clipped = DMatrix::zeros(dq, dq);
        for (idx, lambda) in eig.eigenvalues.iter().enumerate() {
            let l = lambda.min(0.0);
            if l != 0.0 {
                let u = eig.eigenvectors.column(idx);
                clipped += l * u * u.transpose();
            }
        }
        let out = if enforce_symmetry {
            clipped
        } else {
            // only the symmetric part is restricted
            clipped + (&m - &sym)
        };
        for r in 0..dq {
            for c in 0..dq {
                values.push(out[(r, c)]);
            }
        }
    }
    Ok(FunctionGrid::matrix(f.grid().clone(), dq, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid1d(k: usize) -> Arc<Grid> {
        Grid::new(&[(0.0, 1.0)], &[k]).unwrap()
    }

    #[test]
    fn diff_matrix_examples() {
        let d3 = diff_matrix(3).unwrap();
        let v = DVector::from_vec(vec![1.0, 3.0, 2.0]);
        let dv = &d3 * &v;
        assert_eq!(dv.as_slice(), &[2.0, -1.0]);
        let d2 = diff_matrix(2).unwrap();
        assert_eq!(d2.as_slice(), &[-1.0, 1.0]); // column-major storage, 1x2
        let d4 = diff_matrix(4).unwrap();
        let constant = DVector::from_element(4, 7.0);
        assert!((d4 * constant).amax() == 0.0);
        assert!(matches!(diff_matrix(1), Err(ConeError::TooSmall)));
    }

    #[test]
    fn monotone_1d_plan_is_first_differences() {
        let grid = grid1d(3);
        let plan = build_plan(&ConeSpec::monotone_increasing(1), &grid).unwrap();
        match &plan.kind {
            PlanKind::LinearConstraints { a } => {
                assert_eq!(a.nrows(), 2);
                assert_eq!(a, &diff_matrix(3).unwrap());
            }
            other => panic!("unexpected plan {other:?}"),
        }
    }

    #[test]
    fn monotone_2d_constraint_count() {
        let grid = Grid::new(&[(0.0, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
        let plan = build_plan(&ConeSpec::monotone_increasing(2), &grid).unwrap();
        match &plan.kind {
            PlanKind::LinearConstraints { a } => assert_eq!(a.nrows(), 12),
            other => panic!("unexpected plan {other:?}"),
        }
    }

    #[test]
    fn kuosmanen_constraint_count() {
        let grid = Grid::new(&[(0.0, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
        let plan = build_plan(&ConeSpec::ConcaveMultivariate, &grid).unwrap();
        match &plan.kind {
            PlanKind::KuosmanenQP { constraints, .. } => {
                assert_eq!(constraints.nrows(), 72);
                assert_eq!(constraints.ncols(), 27);
            }
            other => panic!("unexpected plan {other:?}"),
        }
    }

    #[test]
    fn supermodular_2d_constraint_count() {
        let grid = Grid::new(&[(0.0, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
        let plan = build_plan(&ConeSpec::Supermodular, &grid).unwrap();
        match &plan.kind {
            PlanKind::LinearConstraints { a } => assert_eq!(a.nrows(), 4),
            other => panic!("unexpected plan {other:?}"),
        }
    }

    #[test]
    fn nonnegative_projection_truncates() {
        let grid = grid1d(2);
        let f = FunctionGrid::scalar(grid, vec![-1.0, 0.5]).unwrap();
        let proj = project(&ConeSpec::Nonnegative, &f, &QpSettings::default()).unwrap();
        assert_eq!(proj.values(), &[0.0, 0.5]);
    }

    #[test]
    fn monotone_projection_pools_with_grid_weights() {
        // trapezoid weights (0.25, 0.5, 0.25): pooling 3,1 gives 5/3
        let grid = grid1d(3);
        let f = FunctionGrid::scalar(grid, vec![3.0, 1.0, 2.0]).unwrap();
        let proj = project(&ConeSpec::monotone_increasing(1), &f, &QpSettings::default()).unwrap();
        assert_relative_eq!(proj.values()[0], 5.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(proj.values()[1], 5.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(proj.values()[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn slutsky_projection_clips_positive_eigenvalue() {
        let grid = grid1d(2);
        let f =
            FunctionGrid::matrix(grid, 2, vec![1.0, 0.0, 0.0, -2.0, 1.0, 0.0, 0.0, -2.0]).unwrap();
        let proj = project(&ConeSpec::slutsky(2), &f, &QpSettings::default()).unwrap();
        for j in 0..2 {
            let b = proj.block(j);
            assert_relative_eq!(b[0], 0.0, epsilon = 1e-12);
            assert_relative_eq!(b[3], -2.0, epsilon = 1e-12);
            assert_relative_eq!(b[1], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn slutsky_without_symmetry_keeps_antisymmetric_part() {
        let grid = grid1d(2);
        // m = [[0, 1], [-1, 0]] is antisymmetric: its symmetric part is 0
        let f =
            FunctionGrid::matrix(grid, 2, vec![0.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0]).unwrap();
        let nsd_only = project(
            &ConeSpec::Slutsky {
                dq: 2,
                enforce_symmetry: false,
            },
            &f,
            &QpSettings::default(),
        )
        .unwrap();
        assert_eq!(nsd_only.values(), f.values());
        let joint = project(&ConeSpec::slutsky(2), &f, &QpSettings::default()).unwrap();
        assert!(joint.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn intersect_contract() {
        let joint = intersect(vec![ConeSpec::monotone_increasing(1), ConeSpec::Convex1D]).unwrap();
        assert_eq!(joint.label(), "monotone+convex");
        assert!(matches!(
            intersect(vec![ConeSpec::monotone_increasing(1)]),
            Err(ConeError::UnsupportedIntersection(_))
        ));
        assert!(matches!(
            intersect(vec![
                ConeSpec::monotone_increasing(1),
                ConeSpec::Nonnegative
            ]),
            Err(ConeError::UnsupportedIntersection(_))
        ));
    }

    #[test]
    fn joint_monotone_convex_projection() {
        let grid = grid1d(5);
        let cone = intersect(vec![ConeSpec::monotone_increasing(1), ConeSpec::Convex1D]).unwrap();
        let f = FunctionGrid::scalar(grid.clone(), vec![0.0, 2.0, 1.0, 4.0, 3.0]).unwrap();
        let proj = project(&cone, &f, &QpSettings::default()).unwrap();
        let v = proj.values();
        for w in v.windows(2) {
            assert!(w[1] - w[0] >= -1e-8, "not monotone: {v:?}");
        }
        for w in v.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8, "not convex: {v:?}");
        }
    }

    #[test]
    fn kuosmanen_concave_projection_on_affine_data() {
        // affine data is already concave: projection is the identity
        let grid = Grid::new(&[(0.0, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
        let f = FunctionGrid::from_fn(grid, |p| 1.0 + 2.0 * p[0] - 0.5 * p[1]).unwrap();
        let proj = project(&ConeSpec::ConcaveMultivariate, &f, &QpSettings::default()).unwrap();
        assert!(f.sup_distance(&proj) < 1e-6, "affine data should be fixed");
    }

    #[test]
    fn incompatible_cone_errors() {
        let grid2 = Grid::new(&[(0.0, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
        assert!(matches!(
            build_plan(&ConeSpec::Convex1D, &grid2),
            Err(ConeError::IncompatibleCone(_))
        ));
        let grid1 = grid1d(4);
        assert!(matches!(
            build_plan(&ConeSpec::Supermodular, &grid1),
            Err(ConeError::IncompatibleCone(_))
        ));
        let f = FunctionGrid::zeros(grid1, ValueShape::Scalar);
        assert!(matches!(
            project(&ConeSpec::slutsky(2), &f, &QpSettings::default()),
            Err(ConeError::IncompatibleCone(_))
        ));
    }

    #[test]
    fn supermodular_projection_fixes_supermodular_input() {
        let grid = Grid::new(&[(0.0, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
        let f = FunctionGrid::from_fn(grid, |p| p[0] * p[1]).unwrap();
        let proj = project(&ConeSpec::Supermodular, &f, &QpSettings::default()).unwrap();
        assert!(f.sup_distance(&proj) < 1e-7);
    }
}
