//! Discontinuous scalar basis: the hierarchical Dubiner family of `P_k`.

use std::sync::OnceLock;

use super::poly::{dim_p, dubiner, Jet};
use super::quadrature::{quadrature_rule, Domain, FINE_RULE};
use super::{FeError, ORDER_MAX};

/// Values of the `(k+1)(k+2)/2` basis functions of `P_k` at a reference point.
pub fn l2_basis(order: usize, xi: [f64; 2]) -> Vec<f64> {
    l2_basis_jets(order, xi).into_iter().map(|j| j.v).collect()
}

/// Values and reference gradients.
pub fn l2_basis_jets(order: usize, xi: [f64; 2]) -> Vec<Jet> {
    let out = dubiner(xi, order);
    debug_assert_eq!(out.len(), dim_p(order));
    out
}

type Table = Vec<Vec<f64>>;

/// Basis values at every point of the triangle rule of `degree`, cached.
pub fn l2_tabulated(order: usize, degree: usize) -> Result<&'static [Vec<f64>], FeError> {
    static CACHE: OnceLock<Vec<OnceLock<Table>>> = OnceLock::new();
    if order > ORDER_MAX {
        return Err(FeError::UnsupportedOrder(order));
    }
    let rule = quadrature_rule(Domain::Triangle, degree)?;
    let cache = CACHE.get_or_init(|| (0..(ORDER_MAX + 1) * (FINE_RULE + 1)).map(|_| OnceLock::new()).collect());
    let slot = &cache[order * (FINE_RULE + 1) + degree];
    Ok(slot.get_or_init(|| rule.points.iter().map(|p| l2_basis(order, *p)).collect()))
}
