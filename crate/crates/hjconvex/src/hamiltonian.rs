//! The Hamiltonian interface F(x, s, p) with generalized first derivatives,
//! plus the built-in benchmark problems (ids 1-5) and the eikonal problem
//! (id 6), each bundled with Dirichlet data, top-edge Neumann data where the
//! equation determines it, and the exact solution where one is known.
//!
//! Nonsmooth terms use deterministic subgradient selections: the derivative
//! of |q| at q = 0 is 0 (for the euclidean norm of p, the zero vector), and
//! min{a, b} takes the a-branch at ties. Problems whose data part is
//! discontinuous across a vertical line (ids 3 and 5) evaluate each node on
//! the branch of its own x-coordinate, taking the left branch exactly on the
//! line; the benchmark grids never place nodes there.
//!
//! An optional smoothing parameter μ > 0 replaces |q| by sqrt(q² + μ²) in the
//! p-dependent terms (the terms the gradient differentiates); it defaults to
//! 0, which is what all benchmark runs use.

use crate::grid::{Grid, ScalarField};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown builtin problem id {0}; valid ids are 1..=6")]
    UnknownId(u32),
    #[error("unknown builtin problem name {0:?}")]
    UnknownName(String),
}

/// A point (x, z) of the square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub z: f64,
}

/// A gradient-slot vector (p₁, p₂) paired with (∂x, ∂z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, z: 0.0 };

    pub fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.z * o.z
    }
}

/// F(x, s, p) with a deterministic selection from its generalized gradient.
pub trait Hamiltonian: Send + Sync {
    fn eval(&self, x: Point, s: f64, p: Vec2) -> f64;

    /// Generalized ∂F/∂s.
    fn d_s(&self, x: Point, s: f64, p: Vec2) -> f64;

    /// Generalized ∇_p F; finite everywhere, including nondifferentiable
    /// points (see the module-level selection rules).
    fn d_p(&self, x: Point, s: f64, p: Vec2) -> Vec2;

    fn smoothing_mu(&self) -> f64 {
        0.0
    }
}

#[inline]
fn sign0(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn abs_mu(t: f64, mu: f64) -> f64 {
    if mu == 0.0 {
        t.abs()
    } else {
        (t * t + mu * mu).sqrt()
    }
}

#[inline]
fn dabs_mu(t: f64, mu: f64) -> f64 {
    if mu == 0.0 {
        sign0(t)
    } else {
        t / (t * t + mu * mu).sqrt()
    }
}

#[inline]
fn norm_mu(p: Vec2, mu: f64) -> f64 {
    (p.x * p.x + p.z * p.z + mu * mu).sqrt()
}

#[inline]
fn dnorm_mu(p: Vec2, mu: f64) -> Vec2 {
    let n = norm_mu(p, mu);
    if n == 0.0 {
        Vec2::ZERO
    } else {
        Vec2::new(p.x / n, p.z / n)
    }
}

/// Adapter for user-supplied Hamiltonians built from closures.
pub struct FnHamiltonian<E, S, P> {
    pub eval: E,
    pub d_s: S,
    pub d_p: P,
    pub smoothing_mu: f64,
}

impl<E, S, P> Hamiltonian for FnHamiltonian<E, S, P>
where
    E: Fn(Point, f64, Vec2) -> f64 + Send + Sync,
    S: Fn(Point, f64, Vec2) -> f64 + Send + Sync,
    P: Fn(Point, f64, Vec2) -> Vec2 + Send + Sync,
{
    fn eval(&self, x: Point, s: f64, p: Vec2) -> f64 {
        (self.eval)(x, s, p)
    }

    fn d_s(&self, x: Point, s: f64, p: Vec2) -> f64 {
        (self.d_s)(x, s, p)
    }

    fn d_p(&self, x: Point, s: f64, p: Vec2) -> Vec2 {
        (self.d_p)(x, s, p)
    }

    fn smoothing_mu(&self) -> f64 {
        self.smoothing_mu
    }
}

// --- benchmark 1: smooth paraboloid, F = s/150 + |p| + (x²+z²)/150 - 2√(x²+z²)

struct Paraboloid {
    mu: f64,
}

impl Hamiltonian for Paraboloid {
    fn eval(&self, x: Point, s: f64, p: Vec2) -> f64 {
        let r2 = x.x * x.x + x.z * x.z;
        s / 150.0 + norm_mu(p, self.mu) + r2 / 150.0 - 2.0 * r2.sqrt()
    }

    fn d_s(&self, _x: Point, _s: f64, _p: Vec2) -> f64 {
        1.0 / 150.0
    }

    fn d_p(&self, _x: Point, _s: f64, p: Vec2) -> Vec2 {
        dnorm_mu(p, self.mu)
    }

    fn smoothing_mu(&self) -> f64 {
        self.mu
    }
}

// --- benchmark 2: eikonal with cross-shaped kinks, F = |p| - √2

struct CrossEikonal {
    mu: f64,
}

impl Hamiltonian for CrossEikonal {
    fn eval(&self, _x: Point, _s: f64, p: Vec2) -> f64 {
        norm_mu(p, self.mu) - std::f64::consts::SQRT_2
    }

    fn d_s(&self, _x: Point, _s: f64, _p: Vec2) -> f64 {
        0.0
    }

    fn d_p(&self, _x: Point, _s: f64, p: Vec2) -> Vec2 {
        dnorm_mu(p, self.mu)
    }

    fn smoothing_mu(&self) -> f64 {
        self.mu
    }
}

// --- benchmark 3: nonconvex, noncoercive, discontinuous saddle Hamiltonian
//     F = 20s + |p₁| - |p₂| - D(x, z)

fn bench3_radial(x: f64, z: f64) -> (f64, f64) {
    let t = PI * (x * x + z * z);
    (t.sin().exp(), t.cos())
}

fn bench3_solution(x: f64, z: f64) -> f64 {
    let (e, _) = bench3_radial(x, z);
    -(x - 0.5).abs() + e
}

/// dz of the exact solution; smooth everywhere.
fn bench3_dz(x: f64, z: f64) -> f64 {
    let (e, c) = bench3_radial(x, z);
    2.0 * PI * z * c * e
}

fn bench3_data(x: f64, z: f64) -> f64 {
    let (e, c) = bench3_radial(x, z);
    let smooth_dx = 2.0 * PI * x * c * e;
    // |∂x of the solution| on the branch of this x; left branch on the line
    let g = if x <= 0.5 { (1.0 + smooth_dx).abs() } else { (-1.0 + smooth_dx).abs() };
    20.0 * bench3_solution(x, z) + g - bench3_dz(x, z).abs()
}

struct SaddleGame {
    mu: f64,
}

impl Hamiltonian for SaddleGame {
    fn eval(&self, x: Point, s: f64, p: Vec2) -> f64 {
        20.0 * s + abs_mu(p.x, self.mu) - abs_mu(p.z, self.mu) - bench3_data(x.x, x.z)
    }

    fn d_s(&self, _x: Point, _s: f64, _p: Vec2) -> f64 {
        20.0
    }

    fn d_p(&self, _x: Point, _s: f64, p: Vec2) -> Vec2 {
        Vec2::new(dabs_mu(p.x, self.mu), -dabs_mu(p.z, self.mu))
    }

    fn smoothing_mu(&self) -> f64 {
        self.mu
    }
}

// --- benchmark 4: G-equation (flame front), F = s + |p| - x·p₁

struct GEquation {
    mu: f64,
}

impl Hamiltonian for GEquation {
    fn eval(&self, x: Point, s: f64, p: Vec2) -> f64 {
        s + norm_mu(p, self.mu) - x.x * p.x
    }

    fn d_s(&self, _x: Point, _s: f64, _p: Vec2) -> f64 {
        1.0
    }

    fn d_p(&self, x: Point, _s: f64, p: Vec2) -> Vec2 {
        let d = dnorm_mu(p, self.mu);
        Vec2::new(d.x - x.x, d.z)
    }

    fn smoothing_mu(&self) -> f64 {
        self.mu
    }
}

// --- benchmark 5: nonconvex multi-well Hamiltonian
//     F = 15s + min{|p|, ||p|-10| + 6} - D(x, z)

fn multiwell(norm: f64, mu: f64) -> f64 {
    let a = norm;
    let b = abs_mu(norm - 10.0, mu) + 6.0;
    if a <= b {
        a
    } else {
        b
    }
}

fn bench5_solution(x: f64, z: f64) -> f64 {
    -x.abs() + (2.0 * PI * (x + z)).sin()
}

fn bench5_data(x: f64, z: f64) -> f64 {
    let c = (2.0 * PI * (x + z)).cos();
    // ∂x of the solution on the branch of this x; left branch on the line
    let gx = if x <= 0.0 { 1.0 + 2.0 * PI * c } else { -1.0 + 2.0 * PI * c };
    let gz = 2.0 * PI * c;
    let q = (gx * gx + gz * gz).sqrt();
    15.0 * bench5_solution(x, z) + multiwell(q, 0.0)
}

struct MultiWell {
    mu: f64,
}

impl Hamiltonian for MultiWell {
    fn eval(&self, x: Point, s: f64, p: Vec2) -> f64 {
        15.0 * s + multiwell(norm_mu(p, self.mu), self.mu) - bench5_data(x.x, x.z)
    }

    fn d_s(&self, _x: Point, _s: f64, _p: Vec2) -> f64 {
        15.0
    }

    fn d_p(&self, _x: Point, _s: f64, p: Vec2) -> Vec2 {
        let n = norm_mu(p, self.mu);
        let dn = dnorm_mu(p, self.mu);
        let b = abs_mu(n - 10.0, self.mu) + 6.0;
        if n <= b {
            dn
        } else {
            let db = dabs_mu(n - 10.0, self.mu);
            Vec2::new(db * dn.x, db * dn.z)
        }
    }

    fn smoothing_mu(&self) -> f64 {
        self.mu
    }
}

// --- problem 6: eikonal equation c(x)²|p|² - 1 with zero boundary data

struct Eikonal {
    speed: Box<dyn Fn(Point) -> f64 + Send + Sync>,
}

impl Hamiltonian for Eikonal {
    fn eval(&self, x: Point, _s: f64, p: Vec2) -> f64 {
        let c = (self.speed)(x);
        c * c * (p.x * p.x + p.z * p.z) - 1.0
    }

    fn d_s(&self, _x: Point, _s: f64, _p: Vec2) -> f64 {
        0.0
    }

    fn d_p(&self, x: Point, _s: f64, p: Vec2) -> Vec2 {
        let c = (self.speed)(x);
        Vec2::new(2.0 * c * c * p.x, 2.0 * c * c * p.z)
    }
}

type BoundaryFn = Box<dyn Fn(Point) -> f64 + Send + Sync>;

/// A boundary-value problem: Hamiltonian, Dirichlet data on the whole
/// boundary, optional Neumann data on the top edge, and, for benchmarks, the
/// exact solution.
pub struct Problem {
    name: String,
    id: Option<u32>,
    hamiltonian: Box<dyn Hamiltonian>,
    dirichlet_f: BoundaryFn,
    neumann_g: Option<BoundaryFn>,
    true_solution: Option<BoundaryFn>,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        hamiltonian: Box<dyn Hamiltonian>,
        dirichlet_f: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            id: None,
            hamiltonian,
            dirichlet_f: Box::new(dirichlet_f),
            neumann_g: None,
            true_solution: None,
        }
    }

    pub fn with_neumann(mut self, g: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.neumann_g = Some(Box::new(g));
        self
    }

    pub fn with_true_solution(
        mut self,
        u: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.true_solution = Some(Box::new(u));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn id(&self) -> Option<u32> {
        self.id
    }

    pub fn hamiltonian(&self) -> &dyn Hamiltonian {
        self.hamiltonian.as_ref()
    }

    pub fn dirichlet(&self, p: Point) -> f64 {
        (self.dirichlet_f)(p)
    }

    pub fn has_neumann(&self) -> bool {
        self.neumann_g.is_some()
    }

    pub fn neumann(&self, p: Point) -> Option<f64> {
        self.neumann_g.as_ref().map(|g| g(p))
    }

    pub fn true_solution(&self, p: Point) -> Option<f64> {
        self.true_solution.as_ref().map(|u| u(p))
    }

    /// Dirichlet data in the canonical boundary-node order of the grid.
    pub fn sample_dirichlet(&self, grid: &Grid) -> Vec<f64> {
        grid.boundary_nodes()
            .map(|(i, j)| self.dirichlet(Point { x: grid.x(i), z: grid.z(j) }))
            .collect()
    }

    /// Neumann data at (x_i, R) for the interior columns, when present.
    pub fn sample_neumann(&self, grid: &Grid) -> Option<Vec<f64>> {
        self.neumann_g.as_ref().map(|g| {
            let top = grid.z(grid.n() - 1);
            grid.neumann_columns().map(|i| g(Point { x: grid.x(i), z: top })).collect()
        })
    }

    pub fn sample_true(&self, grid: &Grid) -> Option<ScalarField> {
        self.true_solution
            .as_ref()
            .map(|u| ScalarField::from_fn(grid, |x, z| u(Point { x, z })))
    }

    /// (∂F/∂s, ∇_p F) at a point, using the selection rules of the module.
    pub fn generalized_derivatives(&self, x: Point, s: f64, p: Vec2) -> (f64, Vec2) {
        (self.hamiltonian.d_s(x, s, p), self.hamiltonian.d_p(x, s, p))
    }

    /// The regularized equation residual -ε₀Δ^h u + F(x, u, ∇^h u) on interior
    /// nodes; zero on the boundary ring.
    pub fn residual_field(&self, u: &ScalarField, grid: &Grid, eps0: f64) -> ScalarField {
        let n = grid.n();
        let lap = grid.laplacian(u);
        let dx = grid.dx(u);
        let dz = grid.dz(u);
        let mut out = ScalarField::zeros(n);
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let x = Point { x: grid.x(i), z: grid.z(j) };
                let p = Vec2::new(dx.get(i, j), dz.get(i, j));
                let f = self.hamiltonian.eval(x, u.get(i, j), p);
                out.set(i, j, -eps0 * lap.get(i, j) + f);
            }
        }
        out
    }
}

/// The benchmark problems by id:
///
/// 1. smooth paraboloid solution -(x²+z²), Dirichlet + Neumann;
/// 2. eikonal |∇u| = √2 with solution -(|x|+|z|), Dirichlet + Neumann;
/// 3. discontinuous nonconvex saddle with solution
///    -|x-0.5| + exp(sin(π(x²+z²))), Dirichlet + Neumann;
/// 4. G-equation with solution -|x|-1, Dirichlet only;
/// 5. nonconvex multi-well with solution -|x| + sin(2π(x+z)), Dirichlet only;
/// 6. eikonal c(x)²|∇u|² = 1 with unit speed, zero Dirichlet data and
///    u_z = -1/c on the top edge; no exact solution registered.
pub fn builtin_problem(id: u32) -> Result<Problem, ProblemError> {
    builtin_problem_with_smoothing(id, 0.0)
}

/// Same as [`builtin_problem`] with a nonzero smoothing parameter μ for the
/// |·| terms in p (robustness knob; the benchmarks all run with μ = 0).
pub fn builtin_problem_with_smoothing(id: u32, mu: f64) -> Result<Problem, ProblemError> {
    let mut problem = match id {
        1 => Problem::new("test1", Box::new(Paraboloid { mu }), |p| -(p.x * p.x + p.z * p.z))
            .with_neumann(|p| -2.0 * p.z)
            .with_true_solution(|p| -(p.x * p.x + p.z * p.z)),
        2 => Problem::new("test2", Box::new(CrossEikonal { mu }), |p| -(p.x.abs() + p.z.abs()))
            .with_neumann(|p| if p.z > 0.0 { -1.0 } else { 1.0 })
            .with_true_solution(|p| -(p.x.abs() + p.z.abs())),
        3 => Problem::new("test3", Box::new(SaddleGame { mu }), |p| bench3_solution(p.x, p.z))
            .with_neumann(|p| bench3_dz(p.x, p.z))
            .with_true_solution(|p| bench3_solution(p.x, p.z)),
        4 => Problem::new("test4", Box::new(GEquation { mu }), |p| -p.x.abs() - 1.0)
            .with_true_solution(|p| -p.x.abs() - 1.0),
        5 => Problem::new("test5", Box::new(MultiWell { mu }), |p| bench5_solution(p.x, p.z))
            .with_true_solution(|p| bench5_solution(p.x, p.z)),
        6 => eikonal_problem(|_| 1.0),
        other => return Err(ProblemError::UnknownId(other)),
    };
    problem.id = Some(id);
    Ok(problem)
}

/// Problem id by its CLI name ("test1".."test5", "eikonal").
pub fn builtin_problem_by_name(name: &str) -> Result<Problem, ProblemError> {
    match name {
        "test1" => builtin_problem(1),
        "test2" => builtin_problem(2),
        "test3" => builtin_problem(3),
        "test4" => builtin_problem(4),
        "test5" => builtin_problem(5),
        "eikonal" => builtin_problem(6),
        other => Err(ProblemError::UnknownName(other.to_string())),
    }
}

/// The travel-time eikonal problem c(x)²|∇u|² = 1, u = 0 on the boundary,
/// with the top-edge derivative u_z = -1/c determined by the equation.
pub fn eikonal_problem(speed: impl Fn(Point) -> f64 + Send + Sync + Clone + 'static) -> Problem {
    let g_speed = speed.clone();
    Problem::new("eikonal", Box::new(Eikonal { speed: Box::new(speed) }), |_| 0.0)
        .with_neumann(move |p| -1.0 / g_speed(p))
}
