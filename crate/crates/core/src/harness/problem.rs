//! Polynomial manufactured solutions and their exact nonlocal forcing.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::assembly::Kernel;
use crate::geometry::Point;

/// Multivariate polynomial as a map from exponent tuples to coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub terms: BTreeMap<[u32; 3], f64>,
}

impl Polynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = ([u32; 3], f64)>) -> Self {
        let mut p = Self::new();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, exponents: [u32; 3], coefficient: f64) {
        let c = self.terms.entry(exponents).or_insert(0.0);
        *c += coefficient;
        if *c == 0.0 {
            self.terms.remove(&exponents);
        }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        const TABLE: usize = 8;
        let mut pw = [[1.0; TABLE]; 3];
        for k in 0..3 {
            for j in 1..TABLE {
                pw[k][j] = pw[k][j - 1] * p[k];
            }
        }
        let power = |k: usize, e: u32| if (e as usize) < TABLE { pw[k][e as usize] } else { p[k].powi(e as i32) };
        self.terms.iter().map(|(e, c)| c * power(0, e[0]) * power(1, e[1]) * power(2, e[2])).sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term([a[0] + b[0], a[1] + b[1], a[2] + b[2]], ca * cb);
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(e, c)| (*e, c * s)))
    }

    /// `∂^α p`.
    pub fn derivative(&self, alpha: [u32; 3]) -> Polynomial {
        let mut out = Polynomial::new();
        for (e, c) in &self.terms {
            if (0..3).any(|k| e[k] < alpha[k]) {
                continue;
            }
            let mut coef = *c;
            for k in 0..3 {
                for j in 0..alpha[k] {
                    coef *= (e[k] - j) as f64;
                }
            }
            out.add_term([e[0] - alpha[0], e[1] - alpha[1], e[2] - alpha[2]], coef);
        }
        out
    }
}

impl fmt::Display for Polynomial {
    /// One term per line: `coefficient e1 e2 e3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (e, c) in &self.terms {
            writeln!(f, "{c:?} {} {} {}", e[0], e[1], e[2])?;
        }
        Ok(())
    }
}

impl FromStr for Polynomial {
    type Err = String;

    /// Parses lines `coefficient e1 e2 [e3]`; blank lines and `#` comments are skipped.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Polynomial::new();
        for (n, line) in s.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 3 || f.len() > 4 {
                return Err(format!("line {}: expected `coefficient e1 e2 [e3]`", n + 1));
            }
            let c: f64 = f[0].parse().map_err(|e| format!("line {}: {e}", n + 1))?;
            let mut e = [0u32; 3];
            for (k, tok) in f[1..].iter().enumerate() {
                e[k] = tok.parse().map_err(|err| format!("line {}: {err}", n + 1))?;
            }
            p.add_term(e, c);
        }
        Ok(p)
    }
}

/// `Γ(m / 2)` for a positive integer `m`.
fn gamma_half(m: u32) -> f64 {
    let (mut x, mut g) = if m.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, std::f64::consts::PI.sqrt()) };
    while 2.0 * x < m as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// `∫_{B_δ(0)} z^α dz` in `dim` dimensions; zero unless every exponent is even.
pub fn ball_moment(dim: usize, delta: f64, alpha: [u32; 3]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) || alpha[dim..].iter().any(|&a| a != 0) {
        return 0.0;
    }
    let total: u32 = alpha[..dim].iter().sum();
    let num: f64 = alpha[..dim].iter().map(|&a| gamma_half(a + 1)).product();
    delta.powi((total as usize + dim) as i32) * num / gamma_half(total + dim as u32 + 2)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `Lu(x) = 2 ∫_{B_δ(x)} (u(y) − u(x)) γ dy` as a polynomial in `x`, from the
/// Taylor expansion of `u` about `x` and the even moments of the ball.
pub fn nonlocal_apply_polynomial(u: &Polynomial, kernel: &Kernel) -> Polynomial {
    let dim = kernel.dim;
    let d = u.degree();
    let mut out = Polynomial::new();
    for a0 in (0..=d).step_by(2) {
        for a1 in (0..=d - a0).step_by(2) {
            let rest = if dim == 3 { d - a0 - a1 } else { 0 };
            for a2 in (0..=rest).step_by(2) {
                let alpha = [a0, a1, a2];
                if alpha == [0, 0, 0] {
                    continue;
                }
                let m = ball_moment(dim, kernel.delta, alpha);
                let w = 2.0 * kernel.constant * m / (factorial(a0) * factorial(a1) * factorial(a2));
                for (e, c) in u.derivative(alpha).terms {
                    out.add_term(e, c * w);
                }
            }
        }
    }
    out
}

/// Exact solution `u`, forcing `f = −Lu` and constraint `g = u` on `(0,1)^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedProblem {
    pub dim: usize,
    pub exact: Polynomial,
    pub kernel: Kernel,
    pub forcing: Polynomial,
    exact_dense: DenseEval,
    forcing_dense: DenseEval,
}

/// Dense coefficient tensor evaluated by nested Horner steps.
#[derive(Debug, Clone, PartialEq)]
struct DenseEval {
    shape: [usize; 3],
    coef: Vec<f64>,
}

impl DenseEval {
    fn new(p: &Polynomial) -> Self {
        let mut shape = [1; 3];
        for e in p.terms.keys() {
            for k in 0..3 {
                shape[k] = shape[k].max(e[k] as usize + 1);
            }
        }
        let mut coef = vec![0.0; shape[0] * shape[1] * shape[2]];
        for (e, c) in &p.terms {
            coef[(e[0] as usize * shape[1] + e[1] as usize) * shape[2] + e[2] as usize] = *c;
        }
        Self { shape, coef }
    }

    fn eval(&self, p: &Point) -> f64 {
        let [_, ny, nz] = self.shape;
        let mut x_acc = 0.0;
        for plane in self.coef.chunks_exact(ny * nz).rev() {
            let mut y_acc = 0.0;
            for line in plane.chunks_exact(nz).rev() {
                let z_acc = line.iter().rev().fold(0.0, |acc, c| acc * p.z + c);
                y_acc = y_acc * p.y + z_acc;
            }
            x_acc = x_acc * p.x + y_acc;
        }
        x_acc
    }
}

impl ManufacturedProblem {
    pub fn new(exact: Polynomial, kernel: Kernel) -> Self {
        let forcing = nonlocal_apply_polynomial(&exact, &kernel).scaled(-1.0);
        let (exact_dense, forcing_dense) = (DenseEval::new(&exact), DenseEval::new(&forcing));
        Self { dim: kernel.dim, exact, kernel, forcing, exact_dense, forcing_dense }
    }

    /// `u = x₁²x₂ + x₂²`.
    pub fn poly2d(kernel: Kernel) -> Self {
        Self::new(Polynomial::from_terms([([2, 1, 0], 1.0), ([0, 2, 0], 1.0)]), kernel)
    }

    /// `u = Π xᵢ(1 − xᵢ)`.
    pub fn poly3d(kernel: Kernel) -> Self {
        let factor = |k: usize| {
            let mut e1 = [0; 3];
            let mut e2 = [0; 3];
            e1[k] = 1;
            e2[k] = 2;
            Polynomial::from_terms([(e1, 1.0), (e2, -1.0)])
        };
        Self::new(factor(0).mul(&factor(1)).mul(&factor(2)), kernel)
    }

    pub fn u(&self, p: &Point) -> f64 {
        self.exact_dense.eval(p)
    }

    pub fn f(&self, p: &Point) -> f64 {
        self.forcing_dense.eval(p)
    }

    pub fn g(&self, p: &Point) -> f64 {
        self.exact_dense.eval(p)
    }
}
