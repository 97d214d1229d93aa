//! Uniform Cartesian grid on [-R, R]², scalar fields on it, and the three
//! finite-difference stencils (five-point Laplacian, central first
//! differences) used by the discrete objective.
//!
//! Nodes are (x_i, z_j) with x_i = -R + i·h, z_j = -R + j·h for 0 ≤ i, j < N
//! and h = 2R/(N-1). Indices are 0-based in code; file dumps and error
//! messages use the 1-based convention of the accompanying docs.
//!
//! Stencil outputs are defined on the interior 1 ≤ i, j ≤ N-2 and set to zero
//! on the boundary ring; the objective only ever reads interior values, so no
//! ghost nodes are needed.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least 4 nodes per axis, got {0}")]
    TooFewNodes(usize),
    #[error("grid half-width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("field size {got} does not match grid with {expected} nodes per axis")]
    SizeMismatch { got: usize, expected: usize },
    #[error("reference field is identically zero; relative error undefined")]
    ZeroReference,
}

/// Classification of a grid node with respect to the boundary constraints.
///
/// `NeumannRow` marks the row just below the top edge, nodes (i, N-2) for
/// 1 ≤ i ≤ N-2 (0-based): when Neumann data on the top edge is in play those
/// values are determined by the data and carry no degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Dirichlet,
    NeumannRow,
}

/// Uniform N×N grid on [-R, R]².
#[derive(Debug, Clone)]
pub struct Grid {
    half_width: f64,
    n: usize,
    h: f64,
    coords: Vec<f64>,
}

impl Grid {
    /// Builds the grid; rejects N < 4 (the stencils plus the eliminated
    /// Neumann row need two interior rows) and nonpositive R.
    pub fn new(half_width: f64, n: usize) -> Result<Self, GridError> {
        if half_width <= 0.0 || !half_width.is_finite() {
            return Err(GridError::BadHalfWidth(half_width));
        }
        if n < 4 {
            return Err(GridError::TooFewNodes(n));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        let coords = (0..n).map(|i| -half_width + i as f64 * h).collect();
        Ok(Self { half_width, n, h, coords })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// x-coordinate of column i (same array serves z since the grid is square).
    pub fn x(&self, i: usize) -> f64 {
        self.coords[i]
    }

    /// z-coordinate of row j.
    pub fn z(&self, j: usize) -> f64 {
        self.coords[j]
    }

    pub fn node_class(&self, i: usize, j: usize) -> NodeClass {
        let last = self.n - 1;
        if i == 0 || j == 0 || i == last || j == last {
            NodeClass::Dirichlet
        } else if j == last - 1 {
            NodeClass::NeumannRow
        } else {
            NodeClass::Interior
        }
    }

    /// Boundary nodes in canonical (row-major) order; this order defines the
    /// layout of Dirichlet data vectors and the draw order of boundary noise.
    pub fn boundary_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |j| (0..n).map(move |i| (i, j))).filter(move |&(i, j)| {
            i == 0 || j == 0 || i == n - 1 || j == n - 1
        })
    }

    /// Columns of the Neumann-coupled row, i = 1..N-2 (0-based).
    pub fn neumann_columns(&self) -> std::ops::Range<usize> {
        1..self.n - 1
    }

    /// Five-point Laplacian [u(i,j-1)+u(i,j+1)+u(i-1,j)+u(i+1,j)-4u(i,j)]/h²
    /// on interior nodes; zero on the boundary ring.
    pub fn laplacian(&self, u: &ScalarField) -> ScalarField {
        self.check(u);
        let n = self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        let v = &u.values;
        let mut out = ScalarField::zeros(n);
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let c = j * n + i;
                out.values[c] =
                    (v[c - n] + v[c + n] + v[c - 1] + v[c + 1] - 4.0 * v[c]) * inv_h2;
            }
        }
        out
    }

    /// Central difference [u(i+1,j)-u(i-1,j)]/(2h) on interior nodes.
    pub fn dx(&self, u: &ScalarField) -> ScalarField {
        self.check(u);
        let n = self.n;
        let inv_2h = 0.5 / self.h;
        let v = &u.values;
        let mut out = ScalarField::zeros(n);
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let c = j * n + i;
                out.values[c] = (v[c + 1] - v[c - 1]) * inv_2h;
            }
        }
        out
    }

    /// Central difference [u(i,j+1)-u(i,j-1)]/(2h) on interior nodes.
    pub fn dz(&self, u: &ScalarField) -> ScalarField {
        self.check(u);
        let n = self.n;
        let inv_2h = 0.5 / self.h;
        let v = &u.values;
        let mut out = ScalarField::zeros(n);
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let c = j * n + i;
                out.values[c] = (v[c + n] - v[c - n]) * inv_2h;
            }
        }
        out
    }

    fn check(&self, u: &ScalarField) {
        assert_eq!(u.n, self.n, "field does not match grid size");
    }
}

/// One real value per grid node, row-major: index (i, j) lives at j·N + i.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    n: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; n * n] }
    }

    /// Samples a function of (x, z) at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                values.push(f(grid.x(i), grid.z(j)));
            }
        }
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        j * self.n + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.values[k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// max|u - v| / max|v| over all nodes; errors when v is identically zero.
pub fn linf_rel_error(u: &ScalarField, v: &ScalarField) -> Result<f64, GridError> {
    if u.n != v.n {
        return Err(GridError::SizeMismatch { got: u.n, expected: v.n });
    }
    let denom = v.max_abs();
    if denom == 0.0 {
        return Err(GridError::ZeroReference);
    }
    let num = u
        .values
        .iter()
        .zip(&v.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_scale_grid_has_expected_spacing() {
        let g = Grid::new(1.0, 50).unwrap();
        assert!((g.spacing() - 2.0 / 49.0).abs() < 1e-15);
        assert!((g.spacing() * 49.0 - 2.0).abs() < 1e-14 * 2.0);
        assert_eq!(g.x(0), -1.0);
        assert!((g.x(49) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(matches!(Grid::new(1.0, 2), Err(GridError::TooFewNodes(2))));
        assert!(matches!(Grid::new(1.0, 3), Err(GridError::TooFewNodes(3))));
        assert!(matches!(Grid::new(0.0, 10), Err(GridError::BadHalfWidth(_))));
        assert!(matches!(Grid::new(-1.0, 10), Err(GridError::BadHalfWidth(_))));
    }

    #[test]
    fn five_node_grid_nodes_are_integers() {
        let g = Grid::new(2.0, 5).unwrap();
        let expect = [-2.0, -1.0, 0.0, 1.0, 2.0];
        for (i, &e) in expect.iter().enumerate() {
            assert!((g.x(i) - e).abs() < 1e-15, "node {i}");
        }
    }

    #[test]
    fn node_class_counts() {
        for n in [4usize, 7, 50] {
            let g = Grid::new(1.0, n).unwrap();
            let mut dirichlet = 0;
            let mut neumann = 0;
            let mut interior = 0;
            for j in 0..n {
                for i in 0..n {
                    match g.node_class(i, j) {
                        NodeClass::Dirichlet => dirichlet += 1,
                        NodeClass::NeumannRow => neumann += 1,
                        NodeClass::Interior => interior += 1,
                    }
                }
            }
            assert_eq!(dirichlet, 4 * (n - 1), "dirichlet count at n={n}");
            assert_eq!(neumann, n - 2, "neumann-row count at n={n}");
            assert_eq!(interior, n * n - 4 * (n - 1) - (n - 2));
        }
    }

    #[test]
    fn boundary_node_order_is_row_major_and_complete() {
        let g = Grid::new(1.0, 5).unwrap();
        let nodes: Vec<_> = g.boundary_nodes().collect();
        assert_eq!(nodes.len(), 4 * 4);
        assert_eq!(nodes[0], (0, 0));
        assert_eq!(nodes[4], (4, 0));
        assert_eq!(nodes[5], (0, 1));
        assert_eq!(*nodes.last().unwrap(), (4, 4));
    }

    #[test]
    fn laplacian_exact_on_quadratic() {
        let g = Grid::new(1.0, 20).unwrap();
        let u = ScalarField::from_fn(&g, |x, z| x * x + z * z);
        let lap = g.laplacian(&u);
        for j in 1..19 {
            for i in 1..19 {
                assert!((lap.get(i, j) - 4.0).abs() < 1e-10, "node ({i},{j})");
            }
        }
        // boundary ring is zero by convention
        assert_eq!(lap.get(0, 3), 0.0);
        assert_eq!(lap.get(19, 19), 0.0);
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = Grid::new(1.0, 12).unwrap();
        let u = ScalarField::from_fn(&g, |_, _| 7.25);
        let lap = g.laplacian(&u);
        assert_eq!(lap.max_abs(), 0.0);
    }

    #[test]
    fn laplacian_of_plane_wave_matches_taylor_bound() {
        // u = sin(2π(x+z)): Δu = -8π² sin(2π(x+z)); the five-point stencil error
        // per axis is bounded by h²/12 · max|∂⁴u| = h²/12 · 16π⁴.
        let g = Grid::new(1.0, 50).unwrap();
        let f = |x: f64, z: f64| (2.0 * std::f64::consts::PI * (x + z)).sin();
        let u = ScalarField::from_fn(&g, f);
        let lap = g.laplacian(&u);
        let h = g.spacing();
        let pi = std::f64::consts::PI;
        let bound = 2.0 * 16.0 * pi.powi(4) * h * h / 12.0;
        let mut max_dev = 0.0f64;
        for j in 1..49 {
            for i in 1..49 {
                let exact = -8.0 * pi * pi * f(g.x(i), g.z(j));
                max_dev = max_dev.max((lap.get(i, j) - exact).abs());
            }
        }
        assert!(max_dev <= bound, "max deviation {max_dev} exceeds Taylor bound {bound}");
        assert!(max_dev > bound / 100.0, "deviation suspiciously small: {max_dev}");
    }

    #[test]
    fn central_differences_exact_on_low_degree() {
        let g = Grid::new(1.0, 15).unwrap();
        let u = ScalarField::from_fn(&g, |x, _| x);
        let dx = g.dx(&u);
        let dz = g.dz(&u);
        for j in 1..14 {
            for i in 1..14 {
                assert!((dx.get(i, j) - 1.0).abs() < 1e-12);
                assert!(dz.get(i, j).abs() < 1e-12);
            }
        }
        let v = ScalarField::from_fn(&g, |_, z| z * z);
        let dzv = g.dz(&v);
        for j in 1..14 {
            for i in 1..14 {
                assert!((dzv.get(i, j) - 2.0 * g.z(j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dx_matches_analytic_derivative_near_half_half() {
        // u = exp(sin(π(x²+z²))); ∂x u = 2πx cos(π(x²+z²)) exp(sin(π(x²+z²))).
        let g = Grid::new(1.0, 50).unwrap();
        let f = |x: f64, z: f64| (std::f64::consts::PI * (x * x + z * z)).sin().exp();
        let dfx = |x: f64, z: f64| {
            let t = std::f64::consts::PI * (x * x + z * z);
            2.0 * std::f64::consts::PI * x * t.cos() * t.sin().exp()
        };
        let u = ScalarField::from_fn(&g, f);
        let dx = g.dx(&u);
        // nearest node to (0.5, 0.5)
        let i = (0..g.n()).min_by(|&a, &b| {
            (g.x(a) - 0.5).abs().partial_cmp(&(g.x(b) - 0.5).abs()).unwrap()
        }).unwrap();
        let h = g.spacing();
        let err = (dx.get(i, i) - dfx(g.x(i), g.z(i))).abs();
        // third derivative of u is bounded by ~4·10² on the square
        assert!(err <= 500.0 * h * h, "central-difference error {err} too large");
    }

    #[test]
    fn stencil_error_decays_second_order() {
        let f = |x: f64, z: f64| (x * 1.3).sin() * (z * 0.7).cos() + (x + z).exp() * 0.1;
        let lap_f = |x: f64, z: f64| {
            -(1.3f64 * 1.3) * (x * 1.3).sin() * (z * 0.7).cos()
                - (0.7f64 * 0.7) * (x * 1.3).sin() * (z * 0.7).cos()
                + 2.0 * (x + z).exp() * 0.1
        };
        let max_err = |n: usize| {
            let g = Grid::new(1.0, n).unwrap();
            let u = ScalarField::from_fn(&g, f);
            let lap = g.laplacian(&u);
            let mut m = 0.0f64;
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    m = m.max((lap.get(i, j) - lap_f(g.x(i), g.z(j))).abs());
                }
            }
            m
        };
        // doubling N-1 should shrink the max error by roughly 4
        let e1 = max_err(25);
        let e2 = max_err(49);
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "convergence ratio {ratio} outside [3, 5]");
    }

    #[test]
    fn linf_rel_error_examples() {
        let g = Grid::new(1.0, 8).unwrap();
        let v = ScalarField::from_fn(&g, |x, z| 1.0 + x * x + z * z);
        assert_eq!(linf_rel_error(&v, &v).unwrap(), 0.0);
        let mut u = v.clone();
        for w in u.as_mut_slice() {
            *w *= 1.1;
        }
        let e = linf_rel_error(&u, &v).unwrap();
        assert!((e - 0.1).abs() < 1e-12, "scaling error {e}");
        let zero = ScalarField::zeros(8);
        assert!(matches!(linf_rel_error(&u, &zero), Err(GridError::ZeroReference)));
    }

    proptest! {
        #[test]
        fn stencils_exact_on_random_quadratics(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0,
            d in -3.0f64..3.0, e in -3.0f64..3.0, f0 in -3.0f64..3.0,
        ) {
            let g = Grid::new(1.0, 11).unwrap();
            let q = |x: f64, z: f64| a * x * x + b * x * z + c * z * z + d * x + e * z + f0;
            let u = ScalarField::from_fn(&g, q);
            let lap = g.laplacian(&u);
            let dx = g.dx(&u);
            let dz = g.dz(&u);
            for j in 1..10 {
                for i in 1..10 {
                    let (x, z) = (g.x(i), g.z(j));
                    prop_assert!((lap.get(i, j) - (2.0 * a + 2.0 * c)).abs() < 1e-9);
                    prop_assert!((dx.get(i, j) - (2.0 * a * x + b * z + d)).abs() < 1e-9);
                    prop_assert!((dz.get(i, j) - (b * x + 2.0 * c * z + e)).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn stencils_are_linear(
            alpha in -2.0f64..2.0, beta in -2.0f64..2.0,
            k1 in 1.0f64..3.0, k2 in 1.0f64..3.0,
        ) {
            let g = Grid::new(1.0, 9).unwrap();
            let u = ScalarField::from_fn(&g, |x, z| (k1 * x).sin() + z * z);
            let v = ScalarField::from_fn(&g, |x, z| (k2 * z).cos() * x);
            let mut combo = ScalarField::zeros(9);
            for j in 0..9 {
                for i in 0..9 {
                    combo.set(i, j, alpha * u.get(i, j) + beta * v.get(i, j));
                }
            }
            for (op_u, op_v, op_c) in [
                (g.laplacian(&u), g.laplacian(&v), g.laplacian(&combo)),
                (g.dx(&u), g.dx(&v), g.dx(&combo)),
                (g.dz(&u), g.dz(&v), g.dz(&combo)),
            ] {
                for j in 1..8 {
                    for i in 1..8 {
                        let lin = alpha * op_u.get(i, j) + beta * op_v.get(i, j);
                        prop_assert!((op_c.get(i, j) - lin).abs() < 1e-8);
                    }
                }
            }
        }
    }
}
