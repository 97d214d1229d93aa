//! Carleman weight exp(2λ|(z+r)/b|^β) and a numerical probe of the weighted
//! inequality that makes the least-squares functional convex: for admissible
//! u (zero on the boundary, zero z-derivative on the top edge),
//!
//! ```text
//! ∫ w |Δu|²  ≥  C [ λ³β²(β-1) b^(-3β) (r-R)^(2β) ∫ w |u|²
//!                 + λ(β-1) b^(-β) ∫ w |∇u|² ],    w = exp(2λ((z+r)/b)^β).
//! ```
//!
//! The constants C and the λ threshold are not computable in closed form, so
//! the harness reports the empirical ratio lhs / (rhs_u + rhs_grad) for each
//! requested λ instead of asserting a fixed constant. Quadrature is the plain
//! node sum × h² over interior stencil values, matching the discrete
//! objective's Riemann sum.
//!
//! The inequality's hypotheses require r > R + 1 and b > R + r. The benchmark
//! parameter set (r = 1.2 with R = 1) sits outside them; [`CarlemanParams::permissive`]
//! accepts such values with a logged warning while [`CarlemanParams::strict`]
//! rejects them. At the benchmark parameters the weight stays within
//! [1, 1 + 3e-5] on the square, so plain f64 arithmetic is ample (see the
//! `weight_range_at_benchmark_parameters` test).

use crate::grid::{Grid, ScalarField};
use crate::pairwise::pairwise_sum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CarlemanError {
    #[error("carleman parameter {name} = {value} is invalid: {why}")]
    BadParameter { name: &'static str, value: f64, why: &'static str },
    #[error("parameters violate the estimate hypotheses for half-width {half_width}: {why}")]
    HypothesisViolation { half_width: f64, why: String },
    #[error("test function violates the admissibility boundary conditions: {0}")]
    InadmissibleTestFunction(String),
    #[error("top-edge derivative samples have length {got}, expected {expected}")]
    BadDzLength { got: usize, expected: usize },
}

/// Parameters (λ, β, r, b) of the weight exp(2λ|(z+r)/b|^β).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanParams {
    pub lambda: f64,
    pub beta: f64,
    pub r: f64,
    pub b: f64,
}

impl CarlemanParams {
    /// Validates the structural constraints only (β > 1, λ ≥ 0, r, b > 0).
    /// λ = 0 is allowed and degenerates the weight to 1 everywhere.
    pub fn new(lambda: f64, beta: f64, r: f64, b: f64) -> Result<Self, CarlemanError> {
        let check = |name: &'static str, value: f64, ok: bool, why: &'static str| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(CarlemanError::BadParameter { name, value, why })
            }
        };
        check("lambda", lambda, lambda >= 0.0, "must be nonnegative")?;
        check("beta", beta, beta > 1.0, "must exceed 1")?;
        check("r", r, r > 0.0, "must be positive")?;
        check("b", b, b > 0.0, "must be positive")?;
        Ok(Self { lambda, beta, r, b })
    }

    /// Constructor for the estimate-verification path: additionally enforces
    /// the hypotheses r > R + 1 and b > R + r.
    pub fn strict(
        lambda: f64,
        beta: f64,
        r: f64,
        b: f64,
        half_width: f64,
    ) -> Result<Self, CarlemanError> {
        let params = Self::new(lambda, beta, r, b)?;
        params.check_hypotheses(half_width)?;
        Ok(params)
    }

    /// Constructor for the solver path: accepts parameters outside the
    /// estimate hypotheses (the benchmark set r = 1.2, R = 1 is one such)
    /// but logs a warning so runs are labeled.
    pub fn permissive(
        lambda: f64,
        beta: f64,
        r: f64,
        b: f64,
        half_width: f64,
    ) -> Result<Self, CarlemanError> {
        let params = Self::new(lambda, beta, r, b)?;
        if let Err(e) = params.check_hypotheses(half_width) {
            log::warn!("carleman parameters outside estimate hypotheses: {e}");
        }
        Ok(params)
    }

    pub fn check_hypotheses(&self, half_width: f64) -> Result<(), CarlemanError> {
        if self.r <= half_width + 1.0 {
            return Err(CarlemanError::HypothesisViolation {
                half_width,
                why: format!("r = {} must exceed R + 1 = {}", self.r, half_width + 1.0),
            });
        }
        if self.b <= half_width + self.r {
            return Err(CarlemanError::HypothesisViolation {
                half_width,
                why: format!("b = {} must exceed R + r = {}", self.b, half_width + self.r),
            });
        }
        Ok(())
    }

    /// The weight exp(2λ|(z+r)/b|^β). The absolute value matches the printed
    /// discrete objective; it is inert whenever z + r > 0.
    ///
    /// At the parameter scales this crate works with (λ ≤ O(100), b > z + r)
    /// the exponent stays far below the f64 overflow threshold of ~709; a
    /// pathological combination saturates to +inf rather than wrapping, and
    /// the objective reports the offending node.
    pub fn weight(&self, z: f64) -> f64 {
        (2.0 * self.lambda * ((z + self.r) / self.b).abs().powf(self.beta)).exp()
    }

    /// Pointwise weight at every node. Strictly increasing in z along each
    /// column whenever λ > 0.
    pub fn weight_field(&self, grid: &Grid) -> ScalarField {
        ScalarField::from_fn(grid, |_, z| self.weight(z))
    }

    /// One weight per grid row; the objective's inner sums are row-constant.
    pub fn row_weights(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.n()).map(|j| self.weight(grid.z(j))).collect()
    }

    fn rhs_u_coefficient(&self, lambda: f64, half_width: f64) -> f64 {
        lambda.powi(3)
            * self.beta.powi(2)
            * (self.beta - 1.0)
            * self.b.powf(-3.0 * self.beta)
            * (self.r - half_width).powf(2.0 * self.beta)
    }

    fn rhs_grad_coefficient(&self, lambda: f64) -> f64 {
        lambda * (self.beta - 1.0) * self.b.powf(-self.beta)
    }
}

/// An admissible test function for the inequality probe: u itself plus its
/// analytic z-derivative, so the boundary conditions u = 0 on the boundary
/// and u_z = 0 on the top edge can be checked at the 1e-10 level (a grid
/// difference could not certify that).
pub struct CarlemanTestFunction {
    value: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    dz: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl CarlemanTestFunction {
    pub fn new(
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dz: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { value: Box::new(value), dz: Box::new(dz) }
    }

    /// u = (R²-x²)(z+R)(R-z)²·q(x,z): the (R-z)² factor forces u = u_z = 0 at
    /// the top edge, the other factors force u = 0 on the remaining edges.
    /// `q` and its z-derivative `q_z` must be supplied analytically.
    pub fn from_envelope(
        half_width: f64,
        q: impl Fn(f64, f64) -> f64 + Send + Sync + Clone + 'static,
        q_z: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let rr = half_width;
        let env = move |x: f64, z: f64| (rr * rr - x * x) * (z + rr) * (rr - z) * (rr - z);
        let env_dz = move |x: f64, z: f64| {
            (rr * rr - x * x) * (rr - z) * ((rr - z) - 2.0 * (z + rr))
        };
        let q2 = q.clone();
        Self::new(
            move |x, z| env(x, z) * q(x, z),
            move |x, z| env_dz(x, z) * q2(x, z) + env(x, z) * q_z(x, z),
        )
    }

    /// A seeded family of admissible functions: the smooth envelope
    /// (R²-x²)³(z+R)³(R-z)⁸ times low-order trigonometric factors
    /// q(x,z) = 1 + Σ c_k sin(a_k x + b_k z + φ_k).
    ///
    /// The envelope orders are higher than the minimal (R-z)² construction on
    /// purpose: the interior node-sum quadrature omits the boundary ring, so
    /// the integrands (|Δu|² in particular) must vanish on every edge for the
    /// N = 50 and N = 100 sums to be comparable, and at theorem-compliant
    /// parameters the weight's e-folding length at the top edge drops below
    /// the grid spacing unless the top factor damps it to high order (with
    /// (R-z)² the two resolutions disagree by ~50% at λ = 40; with this
    /// envelope by well under 5%).
    pub fn random_family(half_width: f64, count: usize, seed: u64) -> Vec<Self> {
        let rr = half_width;
        let env = move |x: f64, z: f64| {
            (rr * rr - x * x).powi(3) * (z + rr).powi(3) * (rr - z).powi(8)
        };
        let env_dz = move |x: f64, z: f64| {
            (rr * rr - x * x).powi(3)
                * (z + rr).powi(2)
                * (rr - z).powi(7)
                * (3.0 * (rr - z) - 8.0 * (z + rr))
        };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let terms: Vec<[f64; 4]> = (0..3)
                    .map(|_| {
                        [
                            rng.gen_range(-1.0..1.0),   // coefficient
                            rng.gen_range(0.5..3.0),    // x frequency
                            rng.gen_range(0.5..3.0),    // z frequency
                            rng.gen_range(0.0..std::f64::consts::TAU), // phase
                        ]
                    })
                    .collect();
                let t2 = terms.clone();
                let q = move |x: f64, z: f64| {
                    1.0 + terms.iter().map(|[c, a, b, p]| c * (a * x + b * z + p).sin()).sum::<f64>()
                };
                let q_z = move |x: f64, z: f64| {
                    t2.iter().map(|[c, a, b, p]| c * b * (a * x + b * z + p).cos()).sum::<f64>()
                };
                let q2 = q.clone();
                Self::new(
                    move |x, z| env(x, z) * q(x, z),
                    move |x, z| env_dz(x, z) * q2(x, z) + env(x, z) * q_z(x, z),
                )
            })
            .collect()
    }

    pub fn value(&self, x: f64, z: f64) -> f64 {
        (self.value)(x, z)
    }

    pub fn dz(&self, x: f64, z: f64) -> f64 {
        (self.dz)(x, z)
    }
}

/// Per-λ record of both sides of the inequality and their ratio.
#[derive(Debug, Clone)]
pub struct CarlemanRow {
    pub lambda: f64,
    /// h²·Σ w |Δ^h u|² over interior nodes.
    pub lhs: f64,
    /// λ³-term: coefficient × h²·Σ w |u|².
    pub rhs_u: f64,
    /// λ-term: coefficient × h²·Σ w |∇^h u|².
    pub rhs_grad: f64,
    /// lhs / (rhs_u + rhs_grad); `None` when the denominator is zero
    /// (degenerate test function).
    pub ratio: Option<f64>,
}

impl CarlemanRow {
    pub fn rhs(&self) -> f64 {
        self.rhs_u + self.rhs_grad
    }
}

#[derive(Debug, Clone, Default)]
pub struct CarlemanReport {
    pub rows: Vec<CarlemanRow>,
}

impl CarlemanReport {
    pub fn min_ratio(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.ratio).fold(None, |m, r| {
            Some(match m {
                None => r,
                Some(m) => m.min(r),
            })
        })
    }

    /// CSV with columns (lambda, lhs, rhs, ratio); degenerate ratios print empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,lhs,rhs,ratio\n");
        for row in &self.rows {
            let ratio = row.ratio.map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", row.lambda, row.lhs, row.rhs(), ratio));
        }
        out
    }
}

const BC_TOLERANCE: f64 = 1e-10;

/// Samples the test function on the grid, checks admissibility, and evaluates
/// both sides of the inequality for each λ (λ overrides the one in `params`).
pub fn verify_carleman(
    test_fn: &CarlemanTestFunction,
    grid: &Grid,
    params: &CarlemanParams,
    lambdas: &[f64],
) -> Result<CarlemanReport, CarlemanError> {
    let u = ScalarField::from_fn(grid, |x, z| test_fn.value(x, z));
    let top = grid.z(grid.n() - 1);
    let dz_top: Vec<f64> = (0..grid.n()).map(|i| test_fn.dz(grid.x(i), top)).collect();
    verify_carleman_field(&u, &dz_top, grid, params, lambdas)
}

/// Field-level variant; the caller supplies the z-derivative samples on the
/// top edge so the admissibility check is well-posed.
pub fn verify_carleman_field(
    u: &ScalarField,
    top_dz: &[f64],
    grid: &Grid,
    params: &CarlemanParams,
    lambdas: &[f64],
) -> Result<CarlemanReport, CarlemanError> {
    let n = grid.n();
    if top_dz.len() != n {
        return Err(CarlemanError::BadDzLength { got: top_dz.len(), expected: n });
    }
    for (i, j) in grid.boundary_nodes() {
        let v = u.get(i, j);
        if v.abs() > BC_TOLERANCE {
            return Err(CarlemanError::InadmissibleTestFunction(format!(
                "u({}, {}) = {v} on the boundary exceeds {BC_TOLERANCE}",
                i + 1,
                j + 1
            )));
        }
    }
    for (i, &d) in top_dz.iter().enumerate() {
        if d.abs() > BC_TOLERANCE {
            return Err(CarlemanError::InadmissibleTestFunction(format!(
                "u_z({}, {n}) = {d} on the top edge exceeds {BC_TOLERANCE}",
                i + 1
            )));
        }
    }

    let lap = grid.laplacian(u);
    let dx = grid.dx(u);
    let dz = grid.dz(u);
    let h2 = grid.spacing() * grid.spacing();

    let interior = (n - 2) * (n - 2);
    let mut lap_terms = Vec::with_capacity(interior);
    let mut u_terms = Vec::with_capacity(interior);
    let mut grad_terms = Vec::with_capacity(interior);

    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let p = CarlemanParams { lambda, ..*params };
        let w = p.row_weights(grid);
        lap_terms.clear();
        u_terms.clear();
        grad_terms.clear();
        #[allow(clippy::needless_range_loop)] // i and j index the 2-D fields
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let wj = w[j];
                let l = lap.get(i, j);
                let v = u.get(i, j);
                let gx = dx.get(i, j);
                let gz = dz.get(i, j);
                lap_terms.push(wj * l * l);
                u_terms.push(wj * v * v);
                grad_terms.push(wj * (gx * gx + gz * gz));
            }
        }
        let lhs = h2 * pairwise_sum(&lap_terms);
        let rhs_u = p.rhs_u_coefficient(lambda, grid.half_width()) * h2 * pairwise_sum(&u_terms);
        let rhs_grad = p.rhs_grad_coefficient(lambda) * h2 * pairwise_sum(&grad_terms);
        let denom = rhs_u + rhs_grad;
        let ratio = if denom > 0.0 { Some(lhs / denom) } else { None };
        rows.push(CarlemanRow { lambda, lhs, rhs_u, rhs_grad, ratio });
    }
    Ok(CarlemanReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_params() -> CarlemanParams {
        CarlemanParams::new(2.0, 8.0, 1.2, 10.0).unwrap()
    }

    #[test]
    fn constructor_validation() {
        assert!(CarlemanParams::new(2.0, 1.0, 1.2, 10.0).is_err());
        assert!(CarlemanParams::new(-1.0, 8.0, 1.2, 10.0).is_err());
        assert!(CarlemanParams::new(2.0, 8.0, -0.5, 10.0).is_err());
        assert!(CarlemanParams::new(0.0, 8.0, 1.2, 10.0).is_ok());
        // benchmark r = 1.2 violates r > R + 1 for R = 1
        assert!(CarlemanParams::strict(2.0, 8.0, 1.2, 10.0, 1.0).is_err());
        assert!(CarlemanParams::strict(5.0, 8.0, 2.5, 4.0, 1.0).is_ok());
        assert!(CarlemanParams::permissive(2.0, 8.0, 1.2, 10.0, 1.0).is_ok());
    }

    #[test]
    fn zero_lambda_weight_is_one() {
        let p = CarlemanParams::new(0.0, 8.0, 1.2, 10.0).unwrap();
        for z in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(p.weight(z), 1.0);
        }
        let g = Grid::new(1.0, 6).unwrap();
        let w = p.weight_field(&g);
        assert!(w.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn weight_values_at_benchmark_parameters() {
        let p = paper_params();
        // z = 1: exp(4 · 0.22⁸) = exp(2.195e-5)
        let w_top = p.weight(1.0);
        let exact_top = (4.0 * 0.22f64.powi(8)).exp();
        assert!((w_top - exact_top).abs() < 1e-14);
        assert!((w_top - 1.0000220).abs() < 1e-6, "w(1) = {w_top}");
        // z = -1: exp(4 · 0.02⁸) ≈ 1 + 1.0e-13
        let w_bot = p.weight(-1.0);
        assert!((w_bot - 1.0) > 0.5e-13 && (w_bot - 1.0) < 2.0e-13, "w(-1)-1 = {}", w_bot - 1.0);
    }

    #[test]
    fn weight_range_at_benchmark_parameters() {
        // the weights are O(1) at the benchmark parameter set, so f64 is ample
        let p = paper_params();
        let g = Grid::new(1.0, 50).unwrap();
        let w = p.weight_field(&g);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in w.as_slice() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(lo >= 1.0);
        let ratio = hi / lo;
        let expected = (4.0 * 0.22f64.powi(8)).exp() / (4.0 * 0.02f64.powi(8)).exp();
        assert!((ratio - expected).abs() < 1e-12, "ratio {ratio} vs {expected}");
        assert!((ratio - 1.0000220).abs() < 1e-6);
    }

    #[test]
    fn weight_monotone_in_z_and_lambda() {
        let p = paper_params();
        let g = Grid::new(1.0, 30).unwrap();
        let w = p.weight_field(&g);
        for j in 0..29 {
            for i in 0..30 {
                assert!(w.get(i, j + 1) > w.get(i, j), "not increasing at row {j}");
            }
        }
        let p_hi = CarlemanParams { lambda: 4.0, ..p };
        for z in [-0.9, 0.0, 0.9] {
            assert!(p_hi.weight(z) > p.weight(z));
        }
    }

    fn canonical_test_fn() -> CarlemanTestFunction {
        CarlemanTestFunction::from_envelope(1.0, |_, _| 1.0, |_, _| 0.0)
    }

    #[test]
    fn degenerate_zero_function_reports_no_ratio() {
        let g = Grid::new(1.0, 20).unwrap();
        let zero = CarlemanTestFunction::new(|_, _| 0.0, |_, _| 0.0);
        let report = verify_carleman(&zero, &g, &paper_params(), &[5.0, 10.0]).unwrap();
        for row in &report.rows {
            assert_eq!(row.lhs, 0.0);
            assert_eq!(row.rhs(), 0.0);
            assert!(row.ratio.is_none());
        }
    }

    #[test]
    fn rejects_inadmissible_test_functions() {
        let g = Grid::new(1.0, 12).unwrap();
        let bad_boundary = CarlemanTestFunction::new(|_, _| 1.0, |_, _| 0.0);
        assert!(matches!(
            verify_carleman(&bad_boundary, &g, &paper_params(), &[5.0]),
            Err(CarlemanError::InadmissibleTestFunction(_))
        ));
        // vanishes on the boundary but u_z ≠ 0 on the top edge
        let bad_top = CarlemanTestFunction::new(
            |x, z| (1.0 - x * x) * (1.0 - z * z),
            |x, z| (1.0 - x * x) * (-2.0 * z),
        );
        assert!(matches!(
            verify_carleman(&bad_top, &g, &paper_params(), &[5.0]),
            Err(CarlemanError::InadmissibleTestFunction(_))
        ));
    }

    #[test]
    fn ratio_positive_and_resolution_stable_for_canonical_function() {
        // benchmark parameters: the weight is O(1) flat, so the interior
        // node-sum quadrature of the canonical (1-x²)(z+1)(1-z)² function is
        // resolution-stable as is
        let params = paper_params();
        let lambdas = [5.0, 10.0, 20.0, 40.0];
        let f = canonical_test_fn();
        let g50 = Grid::new(1.0, 50).unwrap();
        let g100 = Grid::new(1.0, 100).unwrap();
        let r50 = verify_carleman(&f, &g50, &params, &lambdas).unwrap();
        let r100 = verify_carleman(&f, &g100, &params, &lambdas).unwrap();
        for (a, b) in r50.rows.iter().zip(&r100.rows) {
            let (ra, rb) = (a.ratio.unwrap(), b.ratio.unwrap());
            assert!(ra > 0.0 && rb > 0.0);
            assert!(
                (ra - rb).abs() / rb <= 0.05,
                "λ={}: N=50 ratio {ra} vs N=100 ratio {rb}",
                a.lambda
            );
        }
    }

    #[test]
    fn ratio_invariant_under_scaling() {
        // both sides are quadratic in u, so 3u leaves the ratio unchanged
        let g = Grid::new(1.0, 30).unwrap();
        let f = canonical_test_fn();
        let scaled = CarlemanTestFunction::from_envelope(1.0, |_, _| 3.0, |_, _| 0.0);
        let p = paper_params();
        let r1 = verify_carleman(&f, &g, &p, &[7.0]).unwrap();
        let r3 = verify_carleman(&scaled, &g, &p, &[7.0]).unwrap();
        let (a, b) = (r1.rows[0].ratio.unwrap(), r3.rows[0].ratio.unwrap());
        assert!((a - b).abs() / b < 1e-12, "{a} vs {b}");
        assert!((r3.rows[0].lhs / r1.rows[0].lhs - 9.0).abs() < 1e-9);
    }

    #[test]
    fn random_family_ratios_bounded_below_at_benchmark_parameters() {
        let g = Grid::new(1.0, 30).unwrap();
        let p = paper_params();
        let family = CarlemanTestFunction::random_family(1.0, 20, 9001);
        let mut min_ratio = f64::INFINITY;
        for f in &family {
            let report = verify_carleman(f, &g, &p, &[5.0, 10.0, 20.0, 40.0]).unwrap();
            min_ratio = min_ratio.min(report.min_ratio().unwrap());
        }
        assert!(min_ratio > 1e-6, "family min ratio {min_ratio}");
    }

    #[test]
    fn csv_shape() {
        let g = Grid::new(1.0, 16).unwrap();
        let report =
            verify_carleman(&canonical_test_fn(), &g, &paper_params(), &[5.0, 10.0]).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "lambda,lhs,rhs,ratio");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("5,"));
    }
}
