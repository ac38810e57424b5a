//! Gauss rules on the reference segment `[0, 1]` and collapsed (Duffy)
//! product rules on the reference triangle `(0,0), (1,0), (0,1)`.

use std::sync::OnceLock;

use super::FeError;
use super::ORDER_MAX;

/// Highest polynomial degree for which rules are tabulated.
pub const MAX_DEGREE: usize = 2 * ORDER_MAX + 4;

/// Triangle rule index for the degree-`MAX_DEGREE` rule repeated on
/// `FINE_SPLIT^2` congruent sub-triangles, used for non-polynomial data.
pub const FINE_RULE: usize = MAX_DEGREE + 1;
pub const FINE_SPLIT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Triangle,
    Segment,
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Reference coordinates: `(xi, eta)` on the triangle, `(s, 0)` on the
    /// segment.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Barycentric coordinates of a triangle point.
    pub fn barycentric(p: [f64; 2]) -> [f64; 3] {
        [1.0 - p[0] - p[1], p[0], p[1]]
    }
}

/// Legendre polynomial `P_n(z)` and its derivative, `n >= 1`.
fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = if n == 1 {
        1.0
    } else {
        n as f64 * (z * p1 - p0) / (z * z - 1.0)
    };
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration, `n >= 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn build(domain: Domain, degree: usize) -> QuadratureRule {
    match domain {
        Domain::Segment => {
            let n = degree / 2 + 1;
            let (x, w) = gauss_legendre(n);
            QuadratureRule {
                points: x.iter().map(|&t| [0.5 * (t + 1.0), 0.0]).collect(),
                weights: w.iter().map(|&wi| 0.5 * wi).collect(),
                exact_degree: 2 * n - 1,
            }
        }
        Domain::Triangle => {
            // the collapsed direction carries one extra degree from the Jacobian
            let n = (degree + 2).div_ceil(2);
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (&tv, &wv) in x.iter().zip(&w) {
                let v = 0.5 * (tv + 1.0);
                for (&tu, &wu) in x.iter().zip(&w) {
                    let u = 0.5 * (tu + 1.0);
                    points.push([u * (1.0 - v), v]);
                    weights.push(0.25 * wu * wv * (1.0 - v));
                }
            }
            QuadratureRule {
                points,
                weights,
                exact_degree: 2 * n - 2,
            }
        }
    }
}

/// A rule copied onto the `s^2` sub-triangles of a uniform split.
fn composite(base: &QuadratureRule, s: usize) -> QuadratureRule {
    let h = 1.0 / s as f64;
    let mut points = Vec::with_capacity(base.len() * s * s);
    let mut weights = Vec::with_capacity(base.len() * s * s);
    let mut push = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        for (p, w) in base.points.iter().zip(&base.weights) {
            points.push([o[0] + a[0] * p[0] + b[0] * p[1], o[1] + a[1] * p[0] + b[1] * p[1]]);
            weights.push(w * h * h);
        }
    };
    for j in 0..s {
        for i in 0..(s - j) {
            let o = [i as f64 * h, j as f64 * h];
            push(o, [h, 0.0], [0.0, h]);
            if i + j + 1 < s {
                push([o[0] + h, o[1] + h], [-h, 0.0], [0.0, -h]);
            }
        }
    }
    QuadratureRule {
        points,
        weights,
        exact_degree: base.exact_degree,
    }
}

fn table(domain: Domain) -> &'static [QuadratureRule] {
    static TRI: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    static SEG: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    let cell = match domain {
        Domain::Triangle => &TRI,
        Domain::Segment => &SEG,
    };
    cell.get_or_init(|| {
        let mut rules: Vec<QuadratureRule> = (0..=MAX_DEGREE).map(|d| build(domain, d)).collect();
        if domain == Domain::Triangle {
            rules.push(composite(&rules[MAX_DEGREE], FINE_SPLIT));
        }
        rules
    })
}

/// Rule exact for polynomials up to `degree` on the given reference domain;
/// [`FINE_RULE`] selects the composite triangle rule.
pub fn quadrature_rule(domain: Domain, degree: usize) -> Result<&'static QuadratureRule, FeError> {
    let cap = if domain == Domain::Triangle { FINE_RULE } else { MAX_DEGREE };
    if degree > cap {
        return Err(FeError::QuadratureDegree {
            degree,
            cap: MAX_DEGREE,
        });
    }
    Ok(&table(domain)[degree])
}
