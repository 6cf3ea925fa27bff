//! The test engine: projection statistic, shifted bootstrap functional,
//! data-driven tuning parameter, critical value, and the end-to-end
//! three-step procedure.
//!
//! Step 1 computes `r_n * ||theta_hat - proj(theta_hat)||` on the grid.
//! Step 2 generates score-bootstrap draws, picks the tuning parameter
//! `kappa = r_n c_n / tau` from their norm quantile, and takes the
//! `(1-alpha)` quantile of the shifted, re-projected draw norms as the
//! critical value. Step 3 rejects when the statistic exceeds it.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cones::{build_plan, project_with_plan, ConeError, ConeSpec, ProjectionPlan};
use crate::grid::{FunctionGrid, Grid, GridError};
use crate::qp::QpSettings;
use crate::sieve::{self, BootstrapConfig, Dataset, SieveBasis, SieveError};

#[derive(Debug, Error)]
pub enum TestError {
    #[error("all bootstrap draw norms at the tuning quantile are zero")]
    DegenerateTau,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Sieve(#[from] SieveError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone)]
pub struct TestConfig {
    /// Significance level.
    pub alpha: f64,
    /// Quantile level for the tuning parameter; `None` uses `0.01 / log n`.
    pub gamma_n: Option<f64>,
    pub bootstrap: BootstrapConfig,
    pub cone: ConeSpec,
    pub grid: Arc<Grid>,
    /// Fixed tuning parameter overriding the data-driven choice
    /// (0 gives the least favorable test).
    pub kappa_override: Option<f64>,
    pub qp: QpSettings,
}

impl TestConfig {
    pub fn new(cone: ConeSpec, grid: Arc<Grid>, b: usize, seed: u64) -> Self {
        TestConfig {
            alpha: 0.05,
            gamma_n: None,
            bootstrap: BootstrapConfig::new(b, seed),
            cone,
            grid,
            kappa_override: None,
            qp: QpSettings::default(),
        }
    }

    fn validate(&self) -> Result<(), TestError> {
        if self.alpha.is_nan() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(TestError::InvalidConfig("alpha must lie in (0,1)".into()));
        }
        if let Some(g) = self.gamma_n {
            if g.is_nan() || g <= 0.0 || g >= 1.0 {
                return Err(TestError::InvalidConfig("gamma must lie in (0,1)".into()));
            }
        }
        if self.bootstrap.b < 2 {
            return Err(TestError::InvalidConfig(
                "at least two bootstrap draws are required".into(),
            ));
        }
        if let Some(k) = self.kappa_override {
            if k.is_nan() || k < 0.0 {
                return Err(TestError::InvalidConfig("kappa must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Recommended default tuning quantile level `0.01 / log n`.
    pub fn default_gamma(n: usize) -> f64 {
        0.01 / (n.max(2) as f64).ln()
    }
}

/// Everything the test produces, echoing the sample quantities it used.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub tau_hat: f64,
    pub kappa_hat: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub r_n: f64,
    pub c_n: f64,
    pub k_n: usize,
    pub n: usize,
    pub seed: u64,
    pub shape: String,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub flags: Vec<String>,
    #[serde(skip)]
    pub psi_values: Vec<f64>,
}

/// Scaled distance from the estimate to the cone:
/// `r_n * ||theta_hat - proj(theta_hat)||`.
pub fn test_statistic(
    theta_hat: &FunctionGrid,
    cone: &ConeSpec,
    r_n: f64,
    qp: &QpSettings,
) -> Result<f64, TestError> {
    if !r_n.is_finite() || r_n <= 0.0 {
        return Err(TestError::InvalidConfig("r_n must be positive".into()));
    }
    let plan = build_plan(cone, theta_hat.grid())?;
    let projected = project_with_plan(&plan, theta_hat, qp)?;
    Ok(r_n * theta_hat.sub(&projected)?.l2_norm())
}

/// Shifted projection residual `||h + a*pi - proj(h + a*pi)||`, where `pi`
/// is the projected estimate. Weakly decreasing in `a >= 0` because the cone
/// is convex and conic.
pub fn psi_hat(
    h: &FunctionGrid,
    a: f64,
    pi_theta: &FunctionGrid,
    cone: &ConeSpec,
    qp: &QpSettings,
) -> Result<f64, TestError> {
    let plan = build_plan(cone, h.grid())?;
    psi_hat_with_plan(h, a, pi_theta, &plan, qp)
}

fn psi_hat_with_plan(
    h: &FunctionGrid,
    a: f64,
    pi_theta: &FunctionGrid,
    plan: &ProjectionPlan,
    qp: &QpSettings,
) -> Result<f64, TestError> {
    let shifted = h.axpy(a, pi_theta)?;
    let projected = project_with_plan(plan, &shifted, qp)?;
    Ok(shifted.sub(&projected)?.l2_norm())
}

/// Index (1-based) of the empirical `q`-quantile of `m` values: the
/// `ceil(m*q)`-th order statistic. Guards against floating-point fuzz when
/// `m*q` lands on an integer.
fn quantile_index(m: usize, q: f64) -> usize {
    let t = m as f64 * q;
    let nearest = t.round();
    let idx = if (t - nearest).abs() < 1e-9 {
        nearest
    } else {
        t.ceil()
    };
    (idx as usize).clamp(1, m)
}

/// The `(1-gamma)` empirical quantile of the bootstrap draw norms.
pub fn tau_hat(draw_norms: &[f64], gamma_n: f64) -> Result<f64, TestError> {
    if draw_norms.is_empty() {
        return Err(TestError::InvalidConfig("no draw norms".into()));
    }
    if gamma_n.is_nan() || gamma_n <= 0.0 || gamma_n >= 1.0 {
        return Err(TestError::InvalidConfig("gamma must lie in (0,1)".into()));
    }
    if draw_norms.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(TestError::InvalidConfig(
            "draw norms must be nonnegative".into(),
        ));
    }
    let mut sorted = draw_norms.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let value = sorted[quantile_index(sorted.len(), 1.0 - gamma_n) - 1];
    if value == 0.0 {
        return Err(TestError::DegenerateTau);
    }
    Ok(value)
}

/// Data-driven tuning parameter `r_n * c_n / tau`.
pub fn kappa_hat(r_n: f64, c_n: f64, tau: f64) -> f64 {
    r_n * c_n / tau
}

/// Critical value: the `(1-alpha)` quantile of the shifted, re-projected
/// draw norms, together with the raw values in draw order.
pub fn critical_value(
    draws: &[FunctionGrid],
    pi_theta: &FunctionGrid,
    kappa: f64,
    cone: &ConeSpec,
    alpha: f64,
    qp: &QpSettings,
) -> Result<(f64, Vec<f64>), TestError> {
    if kappa.is_nan() || kappa < 0.0 {
        return Err(TestError::InvalidConfig("kappa must be nonnegative".into()));
    }
    if draws.is_empty() {
        return Err(TestError::InvalidConfig("no bootstrap draws".into()));
    }
    let plan = build_plan(cone, pi_theta.grid())?;
    let psi_values: Vec<f64> = draws
        .par_iter()
        .map(|draw| psi_hat_with_plan(draw, kappa, pi_theta, &plan, qp))
        .collect::<Result<_, _>>()?;
    let mut sorted = psi_values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c_hat = sorted[quantile_index(sorted.len(), 1.0 - alpha) - 1];
    Ok((c_hat, psi_values))
}

/// Sample quantities the grid-level engine needs alongside the draws.
#[derive(Debug, Clone, Copy)]
pub struct SampleInfo {
    pub r_n: f64,
    pub c_n: f64,
    pub k_n: usize,
    pub n: usize,
}

/// Run the test given the estimate and its bootstrap draws on the grid.
///
/// This is the core of the procedure and works for any estimator that
/// supplies a grid evaluation and draw generator, scalar- or matrix-valued.
pub fn run_test_on_grids(
    theta_hat: &FunctionGrid,
    draws: &[FunctionGrid],
    info: SampleInfo,
    config: &TestConfig,
) -> Result<TestReport, TestError> {
    config.validate()?;
    let gamma = config
        .gamma_n
        .unwrap_or_else(|| TestConfig::default_gamma(info.n));
    let plan = build_plan(&config.cone, theta_hat.grid())?;
    let pi_theta = project_with_plan(&plan, theta_hat, &config.qp)?;
    let statistic = info.r_n * theta_hat.sub(&pi_theta)?.l2_norm();

    let norms: Vec<f64> = draws.iter().map(FunctionGrid::l2_norm).collect();
    let mut flags = Vec::new();
    // a quantile that is zero, or pure rounding noise relative to the
    // estimate (zero residuals in exact arithmetic), marks the bootstrap as
    // degenerate
    let noise_floor = 1e-12 * theta_hat.l2_norm();
    let (tau, kappa) = match tau_hat(&norms, gamma) {
        Ok(tau) if tau > noise_floor => {
            let kappa = config
                .kappa_override
                .unwrap_or_else(|| kappa_hat(info.r_n, info.c_n, tau));
            (tau, kappa)
        }
        Ok(_) | Err(TestError::DegenerateTau) => {
            // fall back to the least favorable test
            flags.push("degenerate_tau_least_favorable".to_string());
            (0.0, config.kappa_override.unwrap_or(0.0))
        }
        Err(other) => return Err(other),
    };

    let (c_hat, psi_values) = critical_value(
        draws,
        &pi_theta,
        kappa,
        &config.cone,
        config.alpha,
        &config.qp,
    )?;
    let exceed = psi_values.iter().filter(|&&p| p >= statistic).count();
    let p_value = exceed as f64 / psi_values.len() as f64;
    Ok(TestReport {
        statistic,
        tau_hat: tau,
        kappa_hat: kappa,
        critical_value: c_hat,
        p_value,
        reject: statistic > c_hat,
        r_n: info.r_n,
        c_n: info.c_n,
        k_n: info.k_n,
        n: info.n,
        seed: config.bootstrap.seed,
        shape: config.cone.label(),
        alpha: config.alpha,
        gamma,
        b: config.bootstrap.b,
        flags,
        psi_values,
    })
}

/// Draw the `B x n` bootstrap weight matrix from the seeded generator,
/// draw-major so each draw's weights are contiguous.
pub fn draw_weights(bootstrap: &BootstrapConfig, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(bootstrap.seed);
    (0..bootstrap.b)
        .map(|_| (0..n).map(|_| bootstrap.weight_law.sample(&mut rng)).collect())
        .collect()
}

/// Three-step test for a scalar nonparametric regression: fit the sieve,
/// evaluate it on the grid, generate score-bootstrap draws, and compare the
/// statistic to the bootstrap critical value.
pub fn run_test(
    dataset: &Dataset,
    basis: SieveBasis,
    config: &TestConfig,
) -> Result<TestReport, TestError> {
    config.validate()?;
    let fit = sieve::fit(dataset, basis)?;
    let theta_hat = sieve::eval_fit(&fit, &config.grid)?;
    let info = SampleInfo {
        r_n: fit.r_n(),
        c_n: fit.c_n(),
        k_n: fit.k_n(),
        n: fit.n(),
    };
    let draw_map = fit.draw_map(&config.grid)?;
    let weights = draw_weights(&config.bootstrap, fit.n());
    let draws: Vec<FunctionGrid> = weights
        .par_iter()
        .map(|w| {
            let values = &draw_map * nalgebra::DVector::from_column_slice(w);
            FunctionGrid::scalar(config.grid.clone(), values.iter().copied().collect())
        })
        .collect::<Result<_, _>>()
        .map_err(TestError::Grid)?;
    run_test_on_grids(&theta_hat, &draws, info, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::ConeSpec;
    use crate::grid::Grid;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn qp() -> QpSettings {
        QpSettings::default()
    }

    #[test]
    fn statistic_vanishes_on_the_cone() {
        let grid = Grid::new(&[(0.0, 1.0)], &[5]).unwrap();
        let f = FunctionGrid::from_fn(grid, |p| p[0]).unwrap();
        let s = test_statistic(&f, &ConeSpec::monotone_increasing(1), 3.0, &qp()).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn statistic_on_two_point_grid() {
        // projection pools to (0.5, 0.5); weighted norm of (0.5,-0.5) is 0.5
        let grid = Grid::new(&[(0.0, 1.0)], &[2]).unwrap();
        let f = FunctionGrid::scalar(grid, vec![1.0, 0.0]).unwrap();
        let s = test_statistic(&f, &ConeSpec::monotone_increasing(1), 1.0, &qp()).unwrap();
        assert_relative_eq!(s, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn statistic_is_positively_homogeneous() {
        let grid = Grid::new(&[(0.0, 1.0)], &[9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = FunctionGrid::from_fn(grid, |_| rng.random_range(-1.0..1.0)).unwrap();
        let cone = ConeSpec::monotone_increasing(1);
        let s1 = test_statistic(&f, &cone, 1.0, &qp()).unwrap();
        let s2 = test_statistic(&f.scale(2.0), &cone, 1.0, &qp()).unwrap();
        assert_relative_eq!(s2, 2.0 * s1, epsilon = 1e-8);
    }

    #[test]
    fn psi_reduces_to_projection_residual_at_zero() {
        let grid = Grid::new(&[(0.0, 1.0)], &[7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = FunctionGrid::from_fn(grid.clone(), |_| rng.random_range(-1.0..1.0)).unwrap();
        let theta = FunctionGrid::from_fn(grid, |p| p[0]).unwrap();
        let cone = ConeSpec::monotone_increasing(1);
        let pi = crate::cones::project(&cone, &theta, &qp()).unwrap();
        let psi0 = psi_hat(&h, 0.0, &pi, &cone, &qp()).unwrap();
        let direct = test_statistic(&h, &cone, 1.0, &qp()).unwrap();
        assert_relative_eq!(psi0, direct, epsilon = 1e-10);
    }

    #[test]
    fn psi_vanishes_for_cone_members() {
        let grid = Grid::new(&[(0.0, 1.0)], &[7]).unwrap();
        let h = FunctionGrid::from_fn(grid.clone(), |p| 2.0 * p[0]).unwrap();
        let theta = FunctionGrid::from_fn(grid, |p| p[0]).unwrap();
        let cone = ConeSpec::monotone_increasing(1);
        let pi = crate::cones::project(&cone, &theta, &qp()).unwrap();
        for a in [0.0, 1.0, 5.0] {
            let psi = psi_hat(&h, a, &pi, &cone, &qp()).unwrap();
            assert!(psi < 1e-10, "psi {psi} at a={a}");
        }
    }

    #[test]
    fn psi_is_weakly_decreasing_in_the_shift() {
        let grid = Grid::new(&[(0.0, 1.0)], &[9]).unwrap();
        let cone = ConeSpec::monotone_increasing(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let h =
                FunctionGrid::from_fn(grid.clone(), |_| rng.random_range(-1.0..1.0)).unwrap();
            let theta =
                FunctionGrid::from_fn(grid.clone(), |_| rng.random_range(-1.0..1.0)).unwrap();
            let pi = crate::cones::project(&cone, &theta, &qp()).unwrap();
            let mut last = f64::INFINITY;
            for a in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0] {
                let psi = psi_hat(&h, a, &pi, &cone, &qp()).unwrap();
                assert!(psi <= last + 1e-6, "psi increased at a={a}");
                last = psi;
            }
        }
    }

    #[test]
    fn tau_hat_order_statistic_convention() {
        assert_relative_eq!(tau_hat(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap(), 3.0);
        assert_relative_eq!(tau_hat(&[1.0, 2.0, 3.0, 4.0], 1e-9).unwrap(), 4.0);
        assert_relative_eq!(tau_hat(&[2.5, 2.5, 2.5], 0.5).unwrap(), 2.5);
        assert!(matches!(
            tau_hat(&[0.0, 0.0], 0.5),
            Err(TestError::DegenerateTau)
        ));
    }

    #[test]
    fn kappa_hat_formula() {
        assert_relative_eq!(kappa_hat(10.0, 0.5, 2.0), 2.5);
        // least-favorable limit as tau grows
        assert!(kappa_hat(10.0, 0.5, 1e12) < 1e-10);
    }

    #[test]
    fn critical_value_contract() {
        let grid = Grid::new(&[(0.0, 1.0)], &[5]).unwrap();
        let cone = ConeSpec::monotone_increasing(1);
        let theta = FunctionGrid::from_fn(grid.clone(), |p| p[0]).unwrap();
        let pi = crate::cones::project(&cone, &theta, &qp()).unwrap();

        // all-zero draws give a zero critical value
        let zeros: Vec<FunctionGrid> =
            (0..8).map(|_| FunctionGrid::zeros(grid.clone(), crate::grid::ValueShape::Scalar)).collect();
        let (c, psis) = critical_value(&zeros, &pi, 1.0, &cone, 0.05, &qp()).unwrap();
        assert!(c < 1e-12);
        assert_eq!(psis.len(), 8);

        // kappa = 0 dominates any positive kappa on the same draws
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws: Vec<FunctionGrid> = (0..16)
            .map(|_| {
                FunctionGrid::from_fn(grid.clone(), |_| rng.random_range(-1.0..1.0)).unwrap()
            })
            .collect();
        let (c0, _) = critical_value(&draws, &pi, 0.0, &cone, 0.05, &qp()).unwrap();
        for kappa in [0.3, 1.0, 4.0] {
            let (ck, _) = critical_value(&draws, &pi, kappa, &cone, 0.05, &qp()).unwrap();
            assert!(c0 >= ck - 1e-8, "dominance violated at kappa={kappa}");
        }
    }

    fn monotone_dataset(n: usize, noise: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = z
            .column(0)
            .iter()
            .map(|z| z + noise * rng.random_range(-1.0..1.0))
            .collect();
        Dataset::new(y, z).unwrap()
    }

    #[test]
    fn deep_interior_null_is_not_rejected() {
        let dataset = monotone_dataset(400, 0.01, 5);
        let basis = SieveBasis::from_data(dataset.z(), 3, 4).unwrap();
        let grid = Grid::new(&[(-0.9, 0.9)], &[37]).unwrap();
        let config = TestConfig::new(ConeSpec::monotone_increasing(1), grid, 100, 42);
        let report = run_test(&dataset, basis, &config).unwrap();
        assert!(!report.reject);
        assert!(report.statistic < 1e-6, "statistic {}", report.statistic);
        assert_eq!(report.k_n, 7);
        assert_eq!(report.n, 400);
    }

    #[test]
    fn identical_runs_are_identical() {
        let dataset = monotone_dataset(150, 1.0, 6);
        let basis = SieveBasis::from_data(dataset.z(), 3, 4).unwrap();
        let grid = Grid::new(&[(-0.9, 0.9)], &[19]).unwrap();
        let config = TestConfig::new(ConeSpec::monotone_increasing(1), grid, 50, 7);
        let a = run_test(&dataset, basis.clone(), &config).unwrap();
        let b = run_test(&dataset, basis, &config).unwrap();
        assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
        assert_eq!(a.critical_value.to_bits(), b.critical_value.to_bits());
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.reject, b.reject);
    }

    #[test]
    fn perfect_fit_falls_back_to_least_favorable() {
        // interpolation leaves zero residuals, so every draw is zero
        let z = DMatrix::from_column_slice(4, 1, &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let y = vec![0.0, 0.1, 0.2, 0.9];
        let dataset = Dataset::new(y, z).unwrap();
        let knots = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let basis = SieveBasis::new(vec![
            crate::sieve::UnivariateBasis::new(4, knots).unwrap(),
        ])
        .unwrap();
        let grid = Grid::new(&[(0.1, 0.9)], &[9]).unwrap();
        let config = TestConfig::new(ConeSpec::monotone_increasing(1), grid, 20, 3);
        let report = run_test(&dataset, basis, &config).unwrap();
        assert!(report
            .flags
            .iter()
            .any(|f| f == "degenerate_tau_least_favorable"));
        assert_eq!(report.kappa_hat, 0.0);
    }

    #[test]
    fn p_value_and_decision_are_coherent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..10 {
            let dataset = monotone_dataset(120, 1.5, 100 + trial);
            let basis = SieveBasis::from_data(dataset.z(), 3, 4).unwrap();
            let grid = Grid::new(&[(-0.9, 0.9)], &[19]).unwrap();
            let mut config = TestConfig::new(
                ConeSpec::monotone_increasing(1),
                grid,
                rng.random_range(10..80),
                trial,
            );
            config.alpha = rng.random_range(0.01..0.2);
            let report = run_test(&dataset, basis, &config).unwrap();
            let b = report.b;
            let m = quantile_index(b, 1.0 - report.alpha);
            let threshold = (b - m + 1) as f64 / b as f64;
            assert_eq!(
                report.reject,
                report.p_value < threshold,
                "decision and p-value disagree (p={}, threshold={})",
                report.p_value,
                threshold
            );
        }
    }

    #[test]
    fn scale_equivariance_with_fixed_kappa() {
        let dataset = monotone_dataset(200, 1.0, 9);
        let basis = SieveBasis::from_data(dataset.z(), 3, 4).unwrap();
        let grid = Grid::new(&[(-0.9, 0.9)], &[19]).unwrap();
        let mut config = TestConfig::new(ConeSpec::monotone_increasing(1), grid, 60, 11);
        config.kappa_override = Some(0.7);
        let base = run_test(&dataset, basis.clone(), &config).unwrap();
        for c in [0.5, 2.0] {
            let scaled_y: Vec<f64> = dataset.y().iter().map(|y| c * y).collect();
            let scaled = Dataset::new(scaled_y, dataset.z().clone()).unwrap();
            let report = run_test(&scaled, basis.clone(), &config).unwrap();
            assert_relative_eq!(report.statistic, c * base.statistic, epsilon = 1e-8);
            for (s, b) in report.psi_values.iter().zip(&base.psi_values) {
                assert_relative_eq!(*s, c * b, epsilon = 1e-7);
            }
            assert_eq!(report.reject, base.reject);
        }
    }

    #[test]
    fn data_driven_kappa_keeps_decision_invariant_on_scaling() {
        let dataset = monotone_dataset(200, 1.0, 12);
        let basis = SieveBasis::from_data(dataset.z(), 3, 4).unwrap();
        let grid = Grid::new(&[(-0.9, 0.9)], &[19]).unwrap();
        let config = TestConfig::new(ConeSpec::monotone_increasing(1), grid, 60, 13);
        let base = run_test(&dataset, basis.clone(), &config).unwrap();
        for c in [0.5, 2.0] {
            let scaled_y: Vec<f64> = dataset.y().iter().map(|y| c * y).collect();
            let scaled = Dataset::new(scaled_y, dataset.z().clone()).unwrap();
            let report = run_test(&scaled, basis.clone(), &config).unwrap();
            assert_relative_eq!(report.statistic, c * base.statistic, epsilon = 1e-8);
            assert_relative_eq!(report.kappa_hat * c, base.kappa_hat, epsilon = 1e-8);
            assert_eq!(report.reject, base.reject);
        }
    }

    #[test]
    fn quantile_index_convention() {
        assert_eq!(quantile_index(4, 0.75), 3);
        assert_eq!(quantile_index(200, 0.95), 190);
        assert_eq!(quantile_index(200, 1.0 - 0.01 / (500f64).ln()), 200);
        assert_eq!(quantile_index(200, 0.99), 198);
        assert_eq!(quantile_index(4, 1.0 - 1e-12), 4);
    }
}
