//! First-order jets (value and gradient) and the hierarchical polynomial
//! families built from them: scaled Legendre, scaled integrated Legendre,
//! and the Dubiner family on the reference triangle.

use std::ops::{Add, Mul, Neg, Sub};

/// A scalar field value together with its gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 2],
}

impl Jet {
    pub const ZERO: Jet = Jet { v: 0.0, d: [0.0, 0.0] };
    pub const ONE: Jet = Jet { v: 1.0, d: [0.0, 0.0] };

    pub fn constant(v: f64) -> Self {
        Jet { v, d: [0.0, 0.0] }
    }

    pub fn scale(self, s: f64) -> Self {
        Jet {
            v: self.v * s,
            d: [self.d[0] * s, self.d[1] * s],
        }
    }

    /// Barycentric coordinates of the reference triangle as jets.
    pub fn barycentric(p: [f64; 2]) -> [Jet; 3] {
        [
            Jet { v: 1.0 - p[0] - p[1], d: [-1.0, -1.0] },
            Jet { v: p[0], d: [1.0, 0.0] },
            Jet { v: p[1], d: [0.0, 1.0] },
        ]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1]],
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            d: [self.d[0] - o.d[0], self.d[1] - o.d[1]],
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d: [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
            ],
        }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(s)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Scaled Legendre polynomials `s^n P_n(x / s)` for `n = 0..=order`.
pub fn scaled_legendre(x: Jet, s: Jet, order: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(Jet::ONE);
    if order == 0 {
        return out;
    }
    out.push(x);
    let s2 = s * s;
    for n in 1..order {
        let nf = n as f64;
        let next = (x * out[n] * (2.0 * nf + 1.0) - s2 * out[n - 1] * nf) * (1.0 / (nf + 1.0));
        out.push(next);
    }
    out
}

/// Scaled integrated Legendre polynomials `s^n L_n(x / s)` with
/// `L_n(x) = int_{-1}^{x} P_{n-1}`, for `n = 2..=order` (index 0 is `n = 2`).
/// They vanish at `x = +-s`.
pub fn scaled_integrated_legendre(x: Jet, s: Jet, order: usize) -> Vec<Jet> {
    if order < 2 {
        return Vec::new();
    }
    let p = scaled_legendre(x, s, order);
    let s2 = s * s;
    (2..=order)
        .map(|n| (p[n] - s2 * p[n - 2]) * (1.0 / (2.0 * n as f64 - 1.0)))
        .collect()
}

/// Jacobi polynomials `P_n^{(a, 0)}(x)` for `n = 0..=order`.
pub fn jacobi(x: Jet, a: f64, order: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(Jet::ONE);
    if order == 0 {
        return out;
    }
    out.push((x * (a + 2.0) + Jet::constant(a)) * 0.5);
    for n in 1..order {
        let nf = n as f64;
        let n1 = nf + 1.0;
        let c = 2.0 * nf + a;
        let a1 = 2.0 * n1 * (n1 + a) * (c);
        let a2 = (c + 1.0) * a * a;
        let a3 = c * (c + 1.0) * (c + 2.0);
        let a4 = 2.0 * nf * (nf + a) * (c + 2.0);
        let next = ((x * a3 + Jet::constant(a2)) * out[n] - out[n - 1] * a4) * (1.0 / a1);
        out.push(next);
    }
    out
}

/// Number of polynomials of total degree `<= k` in two variables.
pub const fn dim_p(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Dubiner (orthogonal, hierarchical) basis of `P_k` on the reference
/// triangle, ordered by total degree. The first `dim_p(j)` entries span
/// `P_j` for every `j <= k`.
pub fn dubiner(p: [f64; 2], k: usize) -> Vec<Jet> {
    let [l0, l1, l2] = Jet::barycentric(p);
    let x = l1 - l0;
    let s = l0 + l1;
    let leg = scaled_legendre(x, s, k);
    let b = l2 * 2.0 - Jet::ONE;
    let mut out = Vec::with_capacity(dim_p(k));
    let jac: Vec<Vec<Jet>> = (0..=k).map(|i| jacobi(b, 2.0 * i as f64 + 1.0, k - i)).collect();
    for deg in 0..=k {
        for i in (0..=deg).rev() {
            let j = deg - i;
            out.push(leg[i] * jac[i][j]);
        }
    }
    out
}

/// Values only.
pub fn dubiner_values(p: [f64; 2], k: usize) -> Vec<f64> {
    dubiner(p, k).into_iter().map(|j| j.v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::quadrature::{quadrature_rule, Domain};

    #[test]
    fn jet_product_rule_matches_finite_differences() {
        let f = |p: [f64; 2]| {
            let [a, b, c] = Jet::barycentric(p);
            scaled_integrated_legendre(b - a, a + b, 5)[3] * c + a * b
        };
        let p = [0.21, 0.37];
        let h = 1e-6;
        let j = f(p);
        let dx = (f([p[0] + h, p[1]]).v - f([p[0] - h, p[1]]).v) / (2.0 * h);
        let dy = (f([p[0], p[1] + h]).v - f([p[0], p[1] - h]).v) / (2.0 * h);
        assert!((dx - j.d[0]).abs() < 1e-8);
        assert!((dy - j.d[1]).abs() < 1e-8);
    }

    #[test]
    fn legendre_on_unit_scale() {
        let x = Jet::constant(0.3);
        let p = scaled_legendre(x, Jet::ONE, 3);
        assert!((p[2].v - 0.5 * (3.0 * 0.09 - 1.0)).abs() < 1e-15);
        assert!((p[3].v - 0.5 * (5.0 * 0.027 - 3.0 * 0.3)).abs() < 1e-15);
        for end in [-1.0, 1.0] {
            for l in scaled_integrated_legendre(Jet::constant(end), Jet::ONE, 7) {
                assert!(l.v.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dubiner_is_orthogonal() {
        let k = 6;
        let r = quadrature_rule(Domain::Triangle, 2 * k).unwrap();
        let n = dim_p(k);
        let mut g = vec![0.0; n * n];
        for (p, w) in r.points.iter().zip(&r.weights) {
            let v = dubiner_values(*p, k);
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] += w * v[i] * v[j];
                }
            }
        }
        for i in 0..n {
            assert!(g[i * n + i] > 1e-6);
            for j in 0..n {
                if i != j {
                    assert!(g[i * n + j].abs() < 1e-13, "({i},{j}) = {}", g[i * n + j]);
                }
            }
        }
    }
}
