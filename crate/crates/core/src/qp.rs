//! Dense convex quadratic programming for cone projections:
//!
//! ```text
//!     minimize    1/2 x' P x + q' x
//!     subject to  G x >= 0
//! ```
//!
//! with `P` symmetric positive semidefinite. Solved by ADMM with a fixed
//! penalty, over-relaxation and one Ruiz-style equilibration pass, followed
//! by an active-set polish that solves the KKT system of the identified
//! active constraints exactly. The origin is always feasible, so no
//! infeasibility detection is needed.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("P must be square and match q; G must have the same number of columns")]
    Dimensions,
    #[error("P must be symmetric (tolerance 1e-10)")]
    NotSymmetric,
}

#[derive(Debug, Clone)]
pub struct QpProblem {
    p: DMatrix<f64>,
    q: DVector<f64>,
    g: DMatrix<f64>,
}

impl QpProblem {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, g: DMatrix<f64>) -> Result<Self, QpError> {
        let k = q.len();
        if p.nrows() != k || p.ncols() != k || (g.nrows() > 0 && g.ncols() != k) {
            return Err(QpError::Dimensions);
        }
        for i in 0..k {
            for j in (i + 1)..k {
                if (p[(i, j)] - p[(j, i)]).abs() > 1e-10 {
                    return Err(QpError::NotSymmetric);
                }
            }
        }
        let g = if g.nrows() == 0 {
            DMatrix::zeros(0, k)
        } else {
            g
        };
        Ok(QpProblem { p, q, g })
    }

    /// Weighted-projection problem: minimize `sum_j w_j (x_j - target_j)^2`
    /// subject to `G x >= 0`.
    pub fn projection(target: &[f64], weights: &[f64], g: DMatrix<f64>) -> Result<Self, QpError> {
        let k = target.len();
        if weights.len() != k {
            return Err(QpError::Dimensions);
        }
        let p = DMatrix::from_diagonal(&DVector::from_iterator(
            k,
            weights.iter().map(|w| 2.0 * w),
        ));
        let q = DVector::from_iterator(
            k,
            target.iter().zip(weights).map(|(t, w)| -2.0 * w * t),
        );
        QpProblem::new(p, q, g)
    }

    pub fn nvars(&self) -> usize {
        self.q.len()
    }

    pub fn nconstraints(&self) -> usize {
        self.g.nrows()
    }

    pub fn constraints(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x.transpose() * &self.p * x)[(0, 0)] + self.q.dot(x)
    }
}

#[derive(Debug, Clone)]
pub struct QpSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub rho: f64,
    pub over_relaxation: f64,
    pub sigma: f64,
    pub max_iter: usize,
    pub check_interval: usize,
    pub polish: bool,
    pub equilibrate: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            rho: 0.1,
            over_relaxation: 1.6,
            sigma: 1e-6,
            max_iter: 20_000,
            check_interval: 25,
            polish: true,
            equilibrate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: QpStatus,
    /// ADMM dual variable for `G x >= 0`, in the sign convention
    /// `P x + q + G' y = 0` with `y <= 0` on active constraints.
    pub y: DVector<f64>,
}

pub fn solve(problem: &QpProblem, settings: &QpSettings) -> QpSolution {
    if problem.nconstraints() == 0 {
        return solve_unconstrained(problem, settings);
    }

    // Normalize the cost so accuracy is relative to the data scale. For a
    // feasible cone `Gx >= 0` the solution is linear in `q`, so solving at
    // unit scale and multiplying back is exact; it also makes projections
    // positively homogeneous down to rounding.
    let cost_scale = problem.q.amax();
    if cost_scale > 0.0 && cost_scale != 1.0 {
        let scaled = QpProblem {
            p: problem.p.clone(),
            q: &problem.q / cost_scale,
            g: problem.g.clone(),
        };
        let mut solution = solve_normalized(&scaled, settings);
        solution.x *= cost_scale;
        solution.y *= cost_scale;
        solution.primal_residual *= cost_scale;
        solution.dual_residual *= cost_scale;
        if settings.polish && solution.status == QpStatus::Solved {
            return polish(problem, &solution, settings);
        }
        return solution;
    }
    let solution = solve_normalized(problem, settings);
    if settings.polish && solution.status == QpStatus::Solved {
        return polish(problem, &solution, settings);
    }
    solution
}

fn solve_normalized(problem: &QpProblem, settings: &QpSettings) -> QpSolution {
    let k = problem.nvars();
    let m = problem.nconstraints();

    // one Ruiz-style pass: column scaling of [P; G], row scaling of G, and a
    // scalar cost scaling that balances the objective against the
    // constraints (projection objectives carry quadrature weights that can
    // sit orders of magnitude below the unit-entry constraint rows)
    let (d, e) = if settings.equilibrate {
        equilibration_scalings(problem)
    } else {
        (DVector::from_element(k, 1.0), DVector::from_element(m, 1.0))
    };
    let mut ps = problem.p.clone();
    for i in 0..k {
        for j in 0..k {
            ps[(i, j)] *= d[i] * d[j];
        }
    }
    let mut gs = problem.g.clone();
    for i in 0..m {
        for j in 0..k {
            gs[(i, j)] *= e[i] * d[j];
        }
    }
    let cost = if settings.equilibrate {
        let pmax = ps.amax();
        if pmax > 0.0 {
            1.0 / pmax
        } else {
            1.0
        }
    } else {
        1.0
    };
    ps *= cost;
    let qs = DVector::from_iterator(
        k,
        problem.q.iter().zip(d.iter()).map(|(q, d)| cost * q * d),
    );

    let mut rho = settings.rho;
    let alpha = settings.over_relaxation;
    let kkt_base = &ps + DMatrix::from_diagonal(&DVector::from_element(k, settings.sigma));
    let gtg = gs.transpose() * &gs;
    let factor = |rho: f64| (&kkt_base + rho * &gtg).cholesky();
    let Some(mut chol) = factor(rho) else {
        return QpSolution {
            x: DVector::zeros(k),
            iterations: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            status: QpStatus::NumericalFailure,
            y: DVector::zeros(m),
        };
    };

    let mut x = DVector::zeros(k);
    let mut z = DVector::<f64>::zeros(m);
    let mut y = DVector::<f64>::zeros(m);
    let mut rhs = DVector::zeros(k);
    let mut ztilde = DVector::zeros(m);

    let mut status = QpStatus::MaxIterations;
    let mut iterations = settings.max_iter;
    let mut residuals = (f64::INFINITY, f64::INFINITY);

    for iter in 1..=settings.max_iter {
        // rhs = sigma*x - q + G'(rho*z - y)
        rhs.copy_from(&qs);
        rhs *= -1.0;
        rhs.axpy(settings.sigma, &x, 1.0);
        let tmp = rho * &z - &y;
        rhs.gemv_tr(1.0, &gs, &tmp, 1.0);

        let xtilde = chol.solve(&rhs);
        ztilde.gemv(1.0, &gs, &xtilde, 0.0);

        // over-relaxed updates
        x.axpy(alpha, &xtilde, 1.0 - alpha);
        let mut v = alpha * &ztilde + (1.0 - alpha) * &z + &y / rho;
        for i in 0..m {
            let vi = v[i];
            z[i] = vi.max(0.0);
            v[i] = rho * vi.min(0.0); // y update: rho * (v - z)
        }
        y.copy_from(&v);

        if iter % settings.check_interval == 0 || iter == settings.max_iter {
            if !x.iter().all(|v| v.is_finite()) {
                status = QpStatus::NumericalFailure;
                iterations = iter;
                break;
            }
            let (rp, rd, sp, sd) = unscaled_residuals(problem, &x, &z, &y, &d, &e, cost);
            residuals = (rp, rd);
            let tol_prim = settings.eps_abs + settings.eps_rel * sp;
            let tol_dual = settings.eps_abs + settings.eps_rel * sd;
            if rp <= tol_prim && rd <= tol_dual {
                status = QpStatus::Solved;
                iterations = iter;
                break;
            }
            // rebalance the penalty when the scaled residuals drift apart;
            // no constraint family shares one good fixed value
            let ratio = (rp / sp.max(1e-30)) / (rd / sd.max(1e-30)).max(1e-30);
            let rho_est = (rho * ratio.sqrt()).clamp(1e-6, 1e6);
            if rho_est > 5.0 * rho || rho_est < rho / 5.0 {
                if let Some(c) = factor(rho_est) {
                    rho = rho_est;
                    chol = c;
                }
            }
        }
    }

    let x_out = DVector::from_iterator(k, x.iter().zip(d.iter()).map(|(x, d)| x * d));
    let y_out = DVector::from_iterator(m, y.iter().zip(e.iter()).map(|(y, e)| y * e / cost));
    QpSolution {
        x: x_out,
        iterations,
        primal_residual: residuals.0,
        dual_residual: residuals.1,
        status,
        y: y_out,
    }
}

/// Re-solve on the active set identified from an ADMM solution.
///
/// Constraints whose slack is near zero or whose dual is clearly negative
/// are treated as equalities and the equality-constrained KKT system is
/// solved exactly. The polished point replaces the input when the solve
/// succeeds and the point is feasible; stationarity holds by construction,
/// and feasibility bounds the effect of any misidentified constraint by the
/// detection threshold, so an accepted point improves on the raw iterate.
/// Comparing objectives directly would be misleading: a slightly infeasible
/// iterate can undercut the constrained optimum. On grids with pooled
/// regions the active rows contain difference cycles, so the exported
/// multipliers are one valid stationarity certificate among many and their
/// individual signs are not meaningful there.
pub fn polish(problem: &QpProblem, solution: &QpSolution, settings: &QpSettings) -> QpSolution {
    if solution.status != QpStatus::Solved || problem.nconstraints() == 0 {
        return solution.clone();
    }
    let m = problem.nconstraints();
    let slack = &problem.g * &solution.x;
    let slack_scale = slack.amax().max(1.0);
    let dual_scale = if solution.y.len() == m {
        solution.y.amax().max(1.0)
    } else {
        1.0
    };
    let active: Vec<usize> = (0..m)
        .filter(|&i| {
            slack[i] <= 10.0 * settings.eps_abs * slack_scale
                || (solution.y.len() == m
                    && solution.y[i] < -10.0 * settings.eps_abs * dual_scale)
        })
        .collect();
    if active.is_empty() {
        return solution.clone();
    }
    let Some((xp, lambda)) = solve_equality_kkt(problem, &active) else {
        return solution.clone();
    };
    if !xp.iter().all(|v| v.is_finite()) {
        return solution.clone();
    }
    let slack_p = &problem.g * &xp;
    if slack_p.iter().any(|&s| s < -1e-9 * slack_scale) {
        return solution.clone();
    }
    let mut y = DVector::zeros(m);
    for (r, &i) in active.iter().enumerate() {
        y[i] = lambda[r];
    }
    let stat = &problem.p * &xp + &problem.q + problem.g.transpose() * &y;
    let primal = slack_p.iter().fold(0.0f64, |acc, &s| acc.max((-s).max(0.0)));
    QpSolution {
        x: xp,
        iterations: solution.iterations,
        primal_residual: primal,
        dual_residual: stat.amax(),
        status: QpStatus::Solved,
        y,
    }
}

/// Solve `min 1/2 x'Px + q'x  s.t.  G_active x = 0` through its KKT system,
/// returning the point and the multipliers (convention `Px + q + G' l = 0`).
///
/// Active rows can be linearly dependent (pooled regions on product grids
/// produce difference cycles), so the factorization uses a sign-split
/// regularization that keeps the system quasi-definite, and iterative
/// refinement against the unregularized KKT removes the bias.
fn solve_equality_kkt(problem: &QpProblem, active: &[usize]) -> Option<(DVector<f64>, Vec<f64>)> {
    let k = problem.nvars();
    let a = active.len();
    let n = k + a;
    let mut kkt = DMatrix::zeros(n, n);
    kkt.view_mut((0, 0), (k, k)).copy_from(&problem.p);
    for (r, &i) in active.iter().enumerate() {
        for j in 0..k {
            kkt[(j, k + r)] = problem.g[(i, j)];
            kkt[(k + r, j)] = problem.g[(i, j)];
        }
    }
    let delta = 1e-9 * (1.0 + problem.p.amax());
    let mut regularized = kkt.clone();
    for j in 0..k {
        regularized[(j, j)] += delta;
    }
    for r in 0..a {
        regularized[(k + r, k + r)] -= delta;
    }
    let lu = regularized.lu();

    let mut rhs = DVector::zeros(n);
    for j in 0..k {
        rhs[j] = -problem.q[j];
    }
    let rhs_scale = 1.0 + rhs.amax();
    let mut s = lu.solve(&rhs)?;
    let mut best_residual = f64::INFINITY;
    for _ in 0..20 {
        let r = &rhs - &kkt * &s;
        let res = r.amax();
        if !res.is_finite() {
            return None;
        }
        if res <= 1e-11 * rhs_scale || res >= best_residual {
            break;
        }
        best_residual = res;
        let ds = lu.solve(&r)?;
        s += ds;
    }
    if (&rhs - &kkt * &s).amax() > 1e-7 * rhs_scale || !s.iter().all(|v| v.is_finite()) {
        return None;
    }
    let xp = DVector::from_iterator(k, (0..k).map(|j| s[j]));
    let lambda: Vec<f64> = (0..a).map(|r| s[k + r]).collect();
    Some((xp, lambda))
}

fn solve_unconstrained(problem: &QpProblem, settings: &QpSettings) -> QpSolution {
    let k = problem.nvars();
    let neg_q = -&problem.q;
    let x = match problem.p.clone().cholesky() {
        Some(c) => c.solve(&neg_q),
        None => match nalgebra::SVD::new(problem.p.clone(), true, true).solve(&neg_q, 1e-12) {
            Ok(s) => s,
            Err(_) => {
                return QpSolution {
                    x: DVector::zeros(k),
                    iterations: 0,
                    primal_residual: f64::INFINITY,
                    dual_residual: f64::INFINITY,
                    status: QpStatus::NumericalFailure,
                    y: DVector::zeros(0),
                }
            }
        },
    };
    let dual = (&problem.p * &x + &problem.q).amax();
    let tol = settings.eps_abs + settings.eps_rel * problem.q.amax().max(1.0);
    let status = if x.iter().all(|v| v.is_finite()) && dual <= tol.max(1e-6) {
        QpStatus::Solved
    } else {
        QpStatus::NumericalFailure
    };
    QpSolution {
        x,
        iterations: 0,
        primal_residual: 0.0,
        dual_residual: dual,
        status,
        y: DVector::zeros(0),
    }
}

fn equilibration_scalings(problem: &QpProblem) -> (DVector<f64>, DVector<f64>) {
    let k = problem.nvars();
    let m = problem.nconstraints();
    let mut d = DVector::from_element(k, 1.0);
    for j in 0..k {
        let mut max = 0.0f64;
        for i in 0..k {
            max = max.max(problem.p[(i, j)].abs());
        }
        for i in 0..m {
            max = max.max(problem.g[(i, j)].abs());
        }
        if max > 0.0 {
            d[j] = 1.0 / max.sqrt();
        }
    }
    let mut e = DVector::from_element(m, 1.0);
    for i in 0..m {
        let mut max = 0.0f64;
        for j in 0..k {
            max = max.max((problem.g[(i, j)] * d[j]).abs());
        }
        if max > 0.0 {
            e[i] = 1.0 / max.sqrt();
        }
    }
    (d, e)
}

fn unscaled_residuals(
    problem: &QpProblem,
    x_scaled: &DVector<f64>,
    z_scaled: &DVector<f64>,
    y_scaled: &DVector<f64>,
    d: &DVector<f64>,
    e: &DVector<f64>,
    cost: f64,
) -> (f64, f64, f64, f64) {
    let k = problem.nvars();
    let m = problem.nconstraints();
    let x = DVector::from_iterator(k, x_scaled.iter().zip(d.iter()).map(|(x, d)| x * d));
    let z = DVector::from_iterator(m, z_scaled.iter().zip(e.iter()).map(|(z, e)| z / e));
    let y = DVector::from_iterator(m, y_scaled.iter().zip(e.iter()).map(|(y, e)| y * e / cost));
    let gx = &problem.g * &x;
    let px = &problem.p * &x;
    let gty = problem.g.transpose() * &y;
    let r_prim = (&gx - &z).amax();
    let r_dual = (&px + &problem.q + &gty).amax();
    let scale_prim = gx.amax().max(z.amax());
    let scale_dual = px.amax().max(problem.q.amax()).max(gty.amax());
    (r_prim, r_dual, scale_prim, scale_dual)
}
