//! Two-dimensional quadratic `f(w) = wᵀAw + bᵀw + c` and the three descent
//! rules compared on it: gradient descent, first-order extragradient and
//! extragradient with the exact Hessian term.

mod render;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use render::{render_csv, render_svg, ContourGrid};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Gradient-norm threshold used for convergence reports.
pub const CONVERGENCE_TOL: f64 = 1e-3;
pub const DEFAULT_STEPS: usize = 200;
pub const REFERENCE_START: Vec2 = [0.0, -0.15];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    a: Mat2,
    b: Vec2,
    c: f64,
}

fn mat_vec(m: &Mat2, v: &Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub fn norm(v: &Vec2) -> f64 {
    v[0].hypot(v[1])
}

impl Quadratic {
    /// `a` must be symmetric within 1e-12 and positive definite.
    pub fn new(a: Mat2, b: Vec2, c: f64) -> Result<Self> {
        let all = [a[0][0], a[0][1], a[1][0], a[1][1], b[0], b[1], c];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("quadratic coefficients must be finite".into()));
        }
        if (a[0][1] - a[1][0]).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("A is not symmetric: {a:?}")));
        }
        let q = Quadratic { a, b, c };
        let (lo, _) = q.eigenvalues();
        if !(lo > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "A must be positive definite, smallest eigenvalue {lo}"
            )));
        }
        Ok(q)
    }

    /// `A = Rᵀ diag(λ₁, λ₂) R` with `R` a rotation by `angle` radians and `b`
    /// placing the minimizer at `minimizer`.
    pub fn rotated(eigenvalues: Vec2, angle: f64, minimizer: Vec2, c: f64) -> Result<Self> {
        let (s, co) = angle.sin_cos();
        let r = [[co, -s], [s, co]];
        let mut a = [[0.0; 2]; 2];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..2).map(|k| r[k][i] * eigenvalues[k] * r[k][j]).sum();
            }
        }
        // exact symmetry despite rounding
        a[1][0] = a[0][1];
        let aw = mat_vec(&a, &minimizer);
        Quadratic::new(a, [-2.0 * aw[0], -2.0 * aw[1]], c)
    }

    /// Reconstructed test function: eigenvalues 38 and 0.95 (condition
    /// number 40), axes rotated by 30°, minimizer at (0.4, 0).
    pub fn reference() -> Self {
        Quadratic::rotated([38.0, 0.95], 30f64.to_radians(), [0.4, 0.0], 0.0)
            .expect("fixed coefficients are valid")
    }

    pub fn a(&self) -> &Mat2 {
        &self.a
    }

    pub fn b(&self) -> &Vec2 {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eval(&self, w: &Vec2) -> f64 {
        let aw = mat_vec(&self.a, w);
        w[0] * aw[0] + w[1] * aw[1] + self.b[0] * w[0] + self.b[1] * w[1] + self.c
    }

    /// `∇f = (A + Aᵀ) w + b`.
    pub fn grad(&self, w: &Vec2) -> Vec2 {
        let a = &self.a;
        [
            2.0 * a[0][0] * w[0] + (a[0][1] + a[1][0]) * w[1] + self.b[0],
            (a[0][1] + a[1][0]) * w[0] + 2.0 * a[1][1] * w[1] + self.b[1],
        ]
    }

    /// `H = A + Aᵀ`.
    pub fn hessian(&self) -> Mat2 {
        let a = &self.a;
        let off = a[0][1] + a[1][0];
        [[2.0 * a[0][0], off], [off, 2.0 * a[1][1]]]
    }

    /// Eigenvalues of `A`, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let [[p, q], [_, r]] = self.a;
        let mean = 0.5 * (p + r);
        let rad = (0.5 * (p - r)).hypot(q);
        (mean - rad, mean + rad)
    }

    pub fn condition_number(&self) -> f64 {
        let (lo, hi) = self.eigenvalues();
        hi / lo
    }

    /// `w* = -(2A)⁻¹ b`.
    pub fn minimizer(&self) -> Vec2 {
        let h = self.hessian();
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        [
            -(h[1][1] * self.b[0] - h[0][1] * self.b[1]) / det,
            -(-h[1][0] * self.b[0] + h[0][0] * self.b[1]) / det,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Vanilla gradient descent.
    Gd,
    /// Extragradient with the Hessian term dropped.
    Eg1,
    /// Extragradient with the exact total derivative.
    Eg2,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gd, Method::Eg1, Method::Eg2];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Eg1 => "eg1",
            Method::Eg2 => "eg2",
        }
    }

    /// Contraction factor of one step along an eigen-direction of `A` with
    /// eigenvalue `lambda`.
    pub fn mode_factor(self, lambda: f64, eta: f64, gamma: f64) -> f64 {
        match self {
            Method::Gd => 1.0 - 2.0 * eta * lambda,
            Method::Eg1 => 1.0 - 2.0 * eta * lambda * (1.0 - 2.0 * gamma * lambda),
            Method::Eg2 => 1.0 - 2.0 * eta * lambda * (1.0 - 2.0 * gamma * lambda).powi(2),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}; expected gd, eg1 or eg2")))
    }
}

/// Look-ahead point `w - γ∇f(w)`.
pub fn lookahead(q: &Quadratic, w: &Vec2, gamma: f64) -> Vec2 {
    let g = q.grad(w);
    [w[0] - gamma * g[0], w[1] - gamma * g[1]]
}

/// One update of `method` from `w`.
pub fn step(q: &Quadratic, method: Method, w: &Vec2, eta: f64, gamma: f64) -> Vec2 {
    match method {
        Method::Gd => {
            let g = q.grad(w);
            [w[0] - eta * g[0], w[1] - eta * g[1]]
        }
        Method::Eg1 => {
            let g = q.grad(&lookahead(q, w, gamma));
            [w[0] - eta * g[0], w[1] - eta * g[1]]
        }
        Method::Eg2 => {
            // d/dw f(w - γ∇f(w)) = (I - γH) ∇f(w')
            let g = q.grad(&lookahead(q, w, gamma));
            let hg = mat_vec(&q.hessian(), &g);
            [
                w[0] - eta * (g[0] - gamma * hg[0]),
                w[1] - eta * (g[1] - gamma * hg[1]),
            ]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub method: Method,
    pub eta: f64,
    pub gamma: f64,
    pub points: Vec<Vec2>,
    pub f_values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Set when an iterate became non-finite; the run stops before it.
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Vec2 {
        *self.points.last().expect("trajectory holds its start")
    }

    /// First step index whose gradient norm is below `tol`.
    pub fn steps_to_converge(&self, tol: f64) -> Option<usize> {
        self.grad_norms.iter().position(|&g| g < tol)
    }
}

pub fn trajectory(
    q: &Quadratic,
    method: Method,
    start: Vec2,
    eta: f64,
    gamma: f64,
    steps: usize,
) -> Result<Trajectory> {
    if !start[0].is_finite() || !start[1].is_finite() || !eta.is_finite() || !gamma.is_finite() {
        return Err(Error::InvalidArgument("start, eta and gamma must be finite".into()));
    }
    let mut t = Trajectory {
        method,
        eta,
        gamma,
        points: vec![start],
        f_values: vec![q.eval(&start)],
        grad_norms: vec![norm(&q.grad(&start))],
        truncated: false,
    };
    let mut w = start;
    for _ in 0..steps {
        let next = step(q, method, &w, eta, gamma);
        let (f, g) = (q.eval(&next), norm(&q.grad(&next)));
        if !(next[0].is_finite() && next[1].is_finite() && f.is_finite() && g.is_finite()) {
            t.truncated = true;
            break;
        }
        t.points.push(next);
        t.f_values.push(f);
        t.grad_norms.push(g);
        w = next;
    }
    Ok(t)
}

pub fn gd_trajectory(q: &Quadratic, start: Vec2, eta: f64, steps: usize) -> Result<Trajectory> {
    trajectory(q, Method::Gd, start, eta, 0.0, steps)
}

pub fn eg_first_order_trajectory(
    q: &Quadratic,
    start: Vec2,
    eta: f64,
    gamma: f64,
    steps: usize,
) -> Result<Trajectory> {
    trajectory(q, Method::Eg1, start, eta, gamma, steps)
}

pub fn eg_full_hessian_trajectory(
    q: &Quadratic,
    start: Vec2,
    eta: f64,
    gamma: f64,
    steps: usize,
) -> Result<Trajectory> {
    trajectory(q, Method::Eg2, start, eta, gamma, steps)
}

/// The three panels of the reference comparison: GD at η=0.025, first-order
/// EG at η=0.025, γ=0.01 and full EG at η=0.1, γ=0.01.
pub fn reference_trajectories(steps: usize) -> Result<Vec<Trajectory>> {
    let q = Quadratic::reference();
    Ok(vec![
        gd_trajectory(&q, REFERENCE_START, 0.025, steps)?,
        eg_first_order_trajectory(&q, REFERENCE_START, 0.025, 0.01, steps)?,
        eg_full_hessian_trajectory(&q, REFERENCE_START, 0.1, 0.01, steps)?,
    ])
}
