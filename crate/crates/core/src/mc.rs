//! Monte Carlo study harness: the simulation designs used to validate the
//! test, seeded data generation, and a replication driver that reports
//! rejection rates.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erf;

use crate::cones::ConeSpec;
use crate::grid::Grid;
use crate::sieve::{self, Dataset, DemandDataset, SieveBasis};
use crate::testing::{self, SampleInfo, TestConfig, TestError};

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// One data-generating design.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignKind {
    /// Univariate regression `theta0(z) = a*z - b*phi(c*z)` with
    /// `z = -1 + 2*Phi(z*)` on `[-1, 1]`.
    Mc1 { a: f64, b: f64, c: f64 },
    /// Bivariate regression
    /// `theta0(z) = a*(z1^b/2 + z2^b/2)^(1/b) + c*log(1 + s*(z1+z2))`
    /// on `[0,1]^2`, with `s = 5` for the steeper variant and the first term
    /// collapsing to `a*sqrt(z1*z2)` at `b = 0`.
    Mc2 { a: f64, b: f64, c: f64, steep_log: bool },
    /// Demand system with two goods whose Slutsky matrix is NSD:
    /// `g_j = a*p_j^(1/(b-1)) * y / (p1^(b/(b-1)) + p2^(b/(b-1))) + c`.
    SlutskyNull { a: f64, b: f64, c: f64 },
    /// Demand system violating the restriction:
    /// `g = (exp((p1-1.5)*0.1*delta), exp(-(p2-1.5)*0.1*delta))`.
    SlutskyAlt { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub kind: DesignKind,
    pub n: usize,
}

impl Design {
    pub fn mc1(a: f64, b: f64, c: f64, n: usize) -> Design {
        Design {
            kind: DesignKind::Mc1 { a, b, c },
            n,
        }
    }

    /// Null presets D1, D2, D3 for the univariate design.
    pub fn mc1_null(which: usize, n: usize) -> Design {
        let (a, b, c) = match which {
            1 => (0.0, 0.0, 0.0),
            2 => (0.1, 0.5, 0.5),
            3 => (0.5, 2.0, 1.0),
            other => panic!("no null preset {other}"),
        };
        Design::mc1(a, b, c, n)
    }

    /// Alternative family indexed by `delta = 1..=10`.
    pub fn mc1_alternative(delta: f64, n: usize) -> Design {
        Design::mc1(0.0, 0.2 * delta, 5.0 + 0.1 * delta, n)
    }

    pub fn mc2(a: f64, b: f64, c: f64, steep_log: bool, n: usize) -> Design {
        Design {
            kind: DesignKind::Mc2 { a, b, c, steep_log },
            n,
        }
    }

    pub fn mc2_null(which: usize, n: usize) -> Design {
        let (a, b, c) = match which {
            1 => (0.0, 0.0, 0.0),
            2 => (0.2, 1.0, 0.0),
            3 => (0.5, 0.0, 0.5),
            other => panic!("no null preset {other}"),
        };
        Design::mc2(a, b, c, false, n)
    }

    /// Alternatives set `b = 0` and `a = c = -step * delta` with `step`
    /// 0.05 (plain) or 0.2 (steeper log variant).
    pub fn mc2_alternative(delta: f64, steep_log: bool, n: usize) -> Design {
        let step = if steep_log { 0.2 } else { 0.05 };
        Design::mc2(-step * delta, 0.0, -step * delta, steep_log, n)
    }

    pub fn slutsky_null(which: usize, n: usize) -> Design {
        let (a, b, c) = match which {
            1 => (0.0, 0.5, 0.5),
            2 => (0.5, 0.0, 0.0),
            3 => (1.0, 0.5, 0.0),
            other => panic!("no null preset {other}"),
        };
        Design {
            kind: DesignKind::SlutskyNull { a, b, c },
            n,
        }
    }

    pub fn slutsky_alternative(delta: f64, n: usize) -> Design {
        Design {
            kind: DesignKind::SlutskyAlt { delta },
            n,
        }
    }

    pub fn dims(&self) -> usize {
        match self.kind {
            DesignKind::Mc1 { .. } => 1,
            DesignKind::Mc2 { .. } => 2,
            DesignKind::SlutskyNull { .. } | DesignKind::SlutskyAlt { .. } => 3,
        }
    }

    pub fn is_demand(&self) -> bool {
        matches!(
            self.kind,
            DesignKind::SlutskyNull { .. } | DesignKind::SlutskyAlt { .. }
        )
    }

    /// The restriction each design is built to exercise.
    pub fn default_cone(&self) -> ConeSpec {
        match self.kind {
            DesignKind::Mc1 { .. } => ConeSpec::monotone_increasing(1),
            DesignKind::Mc2 { .. } => ConeSpec::monotone_increasing(2),
            _ => ConeSpec::slutsky(2),
        }
    }

    /// Evaluation window matching the design: the full-resolution grids for the
    /// regression designs and the reduced (step 0.1) demand grid.
    pub fn default_grid(&self) -> Arc<Grid> {
        match self.kind {
            DesignKind::Mc1 { .. } => Grid::new(&[(-0.9, 0.9)], &[37]).unwrap(),
            DesignKind::Mc2 { .. } => Grid::new(&[(0.1, 0.9), (0.1, 0.9)], &[17, 17]).unwrap(),
            _ => Grid::new(&[(1.1, 1.9), (1.1, 1.9), (0.1, 0.9)], &[9, 9, 9]).unwrap(),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            DesignKind::Mc1 { a, b, c } => format!("mc1({a},{b},{c})"),
            DesignKind::Mc2 { a, b, c, steep_log } => {
                if *steep_log {
                    format!("mc2-steep({a},{b},{c})")
                } else {
                    format!("mc2({a},{b},{c})")
                }
            }
            DesignKind::SlutskyNull { a, b, c } => format!("slutsky({a},{b},{c})"),
            DesignKind::SlutskyAlt { delta } => format!("slutsky-alt({delta})"),
        }
    }

    /// Regression function for the scalar designs.
    pub fn theta0(&self, z: &[f64]) -> f64 {
        match self.kind {
            DesignKind::Mc1 { a, b, c } => a * z[0] - b * normal_pdf(c * z[0]),
            DesignKind::Mc2 { a, b, c, steep_log } => {
                let (z1, z2) = (z[0], z[1]);
                let ces = if a == 0.0 {
                    0.0
                } else if b == 0.0 {
                    // limit of the CES aggregate
                    a * (z1 * z2).sqrt()
                } else {
                    a * (0.5 * z1.powf(b) + 0.5 * z2.powf(b)).powf(1.0 / b)
                };
                let scale = if steep_log { 5.0 } else { 1.0 };
                ces + c * (1.0 + scale * (z1 + z2)).ln()
            }
            _ => panic!("demand designs have no scalar regression function"),
        }
    }

    /// Budget-share functions for the demand designs.
    pub fn g0(&self, p1: f64, p2: f64, y: f64) -> [f64; 2] {
        match self.kind {
            DesignKind::SlutskyNull { a, b, c } => {
                let share = |pj: f64| {
                    if a == 0.0 {
                        c
                    } else {
                        let own = pj.powf(1.0 / (b - 1.0));
                        let denom = p1.powf(b / (b - 1.0)) + p2.powf(b / (b - 1.0));
                        a * own * y / denom + c
                    }
                };
                [share(p1), share(p2)]
            }
            DesignKind::SlutskyAlt { delta } => [
                ((p1 - 1.5) * 0.1 * delta).exp(),
                (-(p2 - 1.5) * 0.1 * delta).exp(),
            ],
            _ => panic!("regression designs have no demand system"),
        }
    }
}

/// Data simulated from a design.
#[derive(Debug, Clone)]
pub enum SimulatedData {
    Regression(Dataset),
    Demand(DemandDataset),
}

/// Draw one sample. Covariates come from probability integral transforms of
/// standard normals; errors are standard normal, independent per equation
/// in the demand designs.
pub fn generate(design: &Design, rng: &mut impl Rng) -> SimulatedData {
    let n = design.n;
    let normal = StandardNormal;
    match design.kind {
        DesignKind::Mc1 { .. } => {
            let mut z = DMatrix::zeros(n, 1);
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                let zs: f64 = normal.sample(rng);
                let u: f64 = normal.sample(rng);
                let zi = -1.0 + 2.0 * normal_cdf(zs);
                z[(i, 0)] = zi;
                y.push(design.theta0(&[zi]) + u);
            }
            SimulatedData::Regression(Dataset::new(y, z).expect("finite draws"))
        }
        DesignKind::Mc2 { .. } => {
            let mut z = DMatrix::zeros(n, 2);
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                let z1s: f64 = normal.sample(rng);
                let z2s: f64 = normal.sample(rng);
                let u: f64 = normal.sample(rng);
                let z1 = normal_cdf(z1s);
                let z2 = normal_cdf(z2s);
                z[(i, 0)] = z1;
                z[(i, 1)] = z2;
                y.push(design.theta0(&[z1, z2]) + u);
            }
            SimulatedData::Regression(Dataset::new(y, z).expect("finite draws"))
        }
        DesignKind::SlutskyNull { .. } | DesignKind::SlutskyAlt { .. } => {
            let mut q = DMatrix::zeros(n, 2);
            let mut t = DMatrix::zeros(n, 3);
            let mut z = DMatrix::zeros(n, 1);
            for i in 0..n {
                let p1s: f64 = normal.sample(rng);
                let p2s: f64 = normal.sample(rng);
                let ys: f64 = normal.sample(rng);
                let zs: f64 = normal.sample(rng);
                let u1: f64 = normal.sample(rng);
                let u2: f64 = normal.sample(rng);
                let p1 = 1.0 + normal_cdf(p1s);
                let p2 = 1.0 + normal_cdf(p2s);
                let y = normal_cdf(ys);
                let zi = normal_cdf(zs);
                let g = design.g0(p1, p2, y);
                t[(i, 0)] = p1;
                t[(i, 1)] = p2;
                t[(i, 2)] = y;
                z[(i, 0)] = zi;
                // demographics load with unit coefficients on both equations
                q[(i, 0)] = g[0] + zi + u1;
                q[(i, 1)] = g[1] + zi + u2;
            }
            SimulatedData::Demand(DemandDataset { q, t, z })
        }
    }
}

/// B-spline configuration shared by every dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    pub order: usize,
    pub interior_knots: usize,
}

impl BasisSpec {
    /// Cubic splines with 3 interior knots: basis dimension 7 per covariate.
    pub fn cubic3() -> BasisSpec {
        BasisSpec {
            order: 4,
            interior_knots: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub design: String,
    pub n: usize,
    pub k_n: usize,
    pub gamma: f64,
    pub replications: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub mean_statistic: f64,
    pub mean_critical_value: f64,
    pub failures: usize,
    pub wall_time_secs: f64,
    pub seed: u64,
}

/// Run `reps` replications. Replication `r` draws its data from the stream
/// seeded with `base_seed + r` and its bootstrap weights from a seed drawn
/// off that stream, so results do not depend on scheduling.
pub fn run_study(
    design: &Design,
    basis_spec: &BasisSpec,
    config: &TestConfig,
    reps: usize,
    base_seed: u64,
) -> StudyResult {
    let start = Instant::now();
    let outcomes: Vec<Result<(bool, f64, f64, usize), TestError>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed + r);
            let data = generate(design, &mut rng);
            let bootstrap_seed: u64 = rng.random();
            let mut rep_config = config.clone();
            rep_config.bootstrap.seed = bootstrap_seed;
            let report = match data {
                SimulatedData::Regression(dataset) => {
                    let basis = SieveBasis::from_data(
                        dataset.z(),
                        basis_spec.interior_knots,
                        basis_spec.order,
                    )?;
                    testing::run_test(&dataset, basis, &rep_config)?
                }
                SimulatedData::Demand(data) => {
                    let basis = SieveBasis::from_data(
                        &data.t,
                        basis_spec.interior_knots,
                        basis_spec.order,
                    )?;
                    let fit = sieve::fit_demand(&data, basis)?;
                    let theta = fit.theta_hat(&rep_config.grid)?;
                    let weights = testing::draw_weights(&rep_config.bootstrap, fit.n());
                    let draws = weights
                        .iter()
                        .map(|w| fit.slutsky_draw(w, &rep_config.grid))
                        .collect::<Result<Vec<_>, _>>()?;
                    let info = SampleInfo {
                        r_n: fit.r_n(),
                        c_n: fit.c_n(),
                        k_n: fit.basis().k_n(),
                        n: fit.n(),
                    };
                    testing::run_test_on_grids(&theta, &draws, info, &rep_config)?
                }
            };
            Ok((
                report.reject,
                report.statistic,
                report.critical_value,
                report.k_n,
            ))
        })
        .collect();

    let mut rejections = 0;
    let mut failures = 0;
    let mut stat_sum = 0.0;
    let mut crit_sum = 0.0;
    let mut k_n = 0;
    let mut completed = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok((reject, stat, crit, k)) => {
                completed += 1;
                k_n = k;
                if reject {
                    rejections += 1;
                }
                stat_sum += stat;
                crit_sum += crit;
            }
            Err(_) => failures += 1,
        }
    }
    let denom = completed.max(1) as f64;
    StudyResult {
        design: design.label(),
        n: design.n,
        k_n,
        gamma: config
            .gamma_n
            .unwrap_or_else(|| TestConfig::default_gamma(design.n)),
        replications: reps,
        rejections,
        rejection_rate: rejections as f64 / denom,
        mean_statistic: stat_sum / denom,
        mean_critical_value: crit_sum / denom,
        failures,
        wall_time_secs: start.elapsed().as_secs_f64(),
        seed: base_seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mc1_regression_functions() {
        let d1 = Design::mc1_null(1, 10);
        assert_eq!(d1.theta0(&[0.3]), 0.0);
        let d3 = Design::mc1_null(3, 10);
        // at z = 0: -2 * phi(0)
        assert_relative_eq!(d3.theta0(&[0.0]), -0.7978845608028654, epsilon = 1e-12);
        let alt = Design::mc1_alternative(10.0, 10);
        assert_eq!(alt.kind, DesignKind::Mc1 { a: 0.0, b: 2.0, c: 6.0 });
    }

    #[test]
    fn mc2_collapses_at_b_zero() {
        let d = Design::mc2(0.7, 0.0, 0.0, false, 10);
        assert_relative_eq!(
            d.theta0(&[0.4, 0.9]),
            0.7 * (0.4f64 * 0.9).sqrt(),
            epsilon = 1e-12
        );
        let d2 = Design::mc2_null(2, 10);
        assert_relative_eq!(d2.theta0(&[0.4, 0.8]), 0.2 * 0.6, epsilon = 1e-12);
    }

    #[test]
    fn mc1_d1_is_pure_noise() {
        let design = Design::mc1_null(1, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let SimulatedData::Regression(data) = generate(&design, &mut rng) else {
            panic!("mc1 generates regression data");
        };
        assert_eq!(data.n(), 200);
        assert!(data.z().iter().all(|z| (-1.0..=1.0).contains(z)));
        let mean = data.y().iter().sum::<f64>() / 200.0;
        assert!(mean.abs() < 0.3, "pure noise should be centered: {mean}");
    }

    #[test]
    fn slutsky_d1_shares_are_constant() {
        let design = Design::slutsky_null(1, 50);
        assert_eq!(design.g0(1.3, 1.7, 0.5), [0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let SimulatedData::Demand(data) = generate(&design, &mut rng) else {
            panic!("slutsky designs generate demand data");
        };
        assert!(data.t.column(0).iter().all(|p| (1.0..=2.0).contains(p)));
        assert!(data.t.column(2).iter().all(|y| (0.0..=1.0).contains(y)));
    }

    #[test]
    fn slutsky_null_matrices_are_nsd_on_the_grid() {
        use nalgebra::DMatrix as M;
        for which in 1..=3 {
            let design = Design::slutsky_null(which, 10);
            for &(p1, p2, y) in &[(1.1, 1.1, 0.1), (1.5, 1.8, 0.5), (1.9, 1.2, 0.9)] {
                // analytic Slutsky matrix by finite differences of g0
                let eps = 1e-6;
                let g = design.g0(p1, p2, y);
                let gp1 = design.g0(p1 + eps, p2, y);
                let gp2 = design.g0(p1, p2 + eps, y);
                let gy = design.g0(p1, p2, y + eps);
                let dp = [
                    [(gp1[0] - g[0]) / eps, (gp2[0] - g[0]) / eps],
                    [(gp1[1] - g[1]) / eps, (gp2[1] - g[1]) / eps],
                ];
                let dy = [(gy[0] - g[0]) / eps, (gy[1] - g[1]) / eps];
                let mut theta = M::zeros(2, 2);
                for j in 0..2 {
                    for l in 0..2 {
                        theta[(j, l)] = dp[j][l] + dy[j] * g[l] + g[j] * g[l];
                        if j == l {
                            theta[(j, l)] -= g[j];
                        }
                    }
                }
                let sym = (&theta + theta.transpose()) * 0.5;
                let eigs = sym.symmetric_eigen().eigenvalues;
                for e in eigs.iter() {
                    assert!(
                        *e <= 1e-6,
                        "null design {which} not NSD at ({p1},{p2},{y}): eigenvalue {e}"
                    );
                }
            }
        }
    }

    #[test]
    fn slutsky_alternative_has_a_positive_eigenvalue() {
        let design = Design::slutsky_alternative(10.0, 10);
        let (p1, p2, y) = (1.5, 1.5, 0.5);
        let eps = 1e-6;
        let g = design.g0(p1, p2, y);
        let gp1 = design.g0(p1 + eps, p2, y);
        let gp2 = design.g0(p1, p2 + eps, y);
        let gy = design.g0(p1, p2, y + eps);
        let mut theta = DMatrix::zeros(2, 2);
        let dp = [
            [(gp1[0] - g[0]) / eps, (gp2[0] - g[0]) / eps],
            [(gp1[1] - g[1]) / eps, (gp2[1] - g[1]) / eps],
        ];
        let dy = [(gy[0] - g[0]) / eps, (gy[1] - g[1]) / eps];
        for j in 0..2 {
            for l in 0..2 {
                theta[(j, l)] = dp[j][l] + dy[j] * g[l] + g[j] * g[l];
                if j == l {
                    theta[(j, l)] -= g[j];
                }
            }
        }
        let sym = (&theta + theta.transpose()) * 0.5;
        let eigs = sym.symmetric_eigen().eigenvalues;
        assert!(eigs.iter().any(|e| *e > 1e-3), "alternative should violate");
    }

    #[test]
    fn study_is_deterministic() {
        let design = Design::mc1_null(1, 80);
        let basis = BasisSpec::cubic3();
        let config = TestConfig::new(design.default_cone(), design.default_grid(), 30, 0);
        let a = run_study(&design, &basis, &config, 8, 77);
        let b = run_study(&design, &basis, &config, 8, 77);
        assert_eq!(a.rejections, b.rejections);
        assert_eq!(a.mean_statistic.to_bits(), b.mean_statistic.to_bits());
        assert_eq!(a.failures, 0);
        assert_eq!(a.k_n, 7);
    }

    #[test]
    fn small_demand_study_runs() {
        let design = Design::slutsky_null(1, 120);
        let basis = BasisSpec {
            order: 3,
            interior_knots: 0,
        };
        let mut config = TestConfig::new(design.default_cone(), design.default_grid(), 20, 0);
        config.gamma_n = Some(0.01);
        let result = run_study(&design, &basis, &config, 2, 5);
        assert_eq!(result.failures, 0);
        assert_eq!(result.k_n, 27);
        assert!(result.rejection_rate <= 1.0);
    }
}
