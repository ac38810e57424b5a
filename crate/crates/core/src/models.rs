//! Reaction kinetics and manufactured solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("interaction matrix is {rows}x{cols} for {species} species")]
    Dimension { rows: usize, cols: usize, species: usize },
    #[error("mu2 + m vanishes at m = {0}")]
    Singular(f64),
    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// `m (1 - m)`.
#[inline]
pub fn fisher(m: f64) -> f64 {
    m * (1.0 - m)
}

/// Lotka-Volterra competition `f_i = m_i (1 - sum_j a_ij m_j)`.
pub fn competition(m: &[f64], a: &[Vec<f64>], out: &mut [f64]) -> Result<(), ModelError> {
    let n = m.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) || out.len() != n {
        return Err(ModelError::Dimension {
            rows: a.len(),
            cols: a.first().map_or(0, Vec::len),
            species: n,
        });
    }
    for i in 0..n {
        let s: f64 = a[i].iter().zip(m).map(|(a, m)| a * m).sum();
        out[i] = m[i] * (1.0 - s);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlievPanfilovParams {
    pub alpha: f64,
    pub gamma: f64,
    pub b: f64,
    pub c: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for AlievPanfilovParams {
    /// Literature values.
    fn default() -> Self {
        Self {
            alpha: 0.01,
            gamma: 0.002,
            b: 0.15,
            c: 8.0,
            mu1: 0.2,
            mu2: 0.3,
        }
    }
}

impl AlievPanfilovParams {
    /// Values of the published re-entry table, without its diffusivity.
    pub fn reentry_table() -> Self {
        Self {
            alpha: 0.01,
            gamma: 0.01,
            b: 1.0,
            c: 2.0,
            mu1: 7.0,
            mu2: 7.0,
        }
    }
}

/// `(f, dr/dtau)` of the Aliev-Panfilov model.
pub fn aliev_panfilov(m: f64, r: f64, p: &AlievPanfilovParams) -> Result<(f64, f64), ModelError> {
    let den = p.mu2 + m;
    if den == 0.0 {
        return Err(ModelError::Singular(m));
    }
    let f = p.c * m * (m - p.alpha) * (1.0 - m) - r * m;
    let dr = (p.gamma + p.mu1 * r / den) * (-r - p.c * m * (m - p.b - 1.0));
    Ok((f, dr))
}

/// Membrane potential in mV.
pub fn potential_map(m: f64) -> f64 {
    100.0 * m - 80.0
}

/// Inverse of [`potential_map`].
pub fn potential_to_m(e: f64) -> f64 {
    (e + 80.0) / 100.0
}

/// Dimensionless time to ms.
pub fn time_map(tau: f64) -> f64 {
    12.9 * tau
}

/// ms to dimensionless time.
pub fn time_from_ms(t: f64) -> f64 {
    t / 12.9
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        x[0] > self.x0 && x[0] < self.x1 && x[1] > self.y0 && x[1] < self.y1
    }
}

/// Time-gated additive source on a rectangle; the window is in model time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stimulus {
    pub magnitude: f64,
    pub start: f64,
    pub end: f64,
    pub region: Rect,
    #[serde(default)]
    pub species: usize,
}

impl Stimulus {
    pub fn value(&self, x: [f64; 2], t: f64) -> f64 {
        if t >= self.start && t <= self.end && self.region.contains(x) {
            self.magnitude
        } else {
            0.0
        }
    }
}

/// Spatial profile of a manufactured solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "shape")]
pub enum Profile {
    /// `1 + sin(2 pi x) sin(2 pi y)`.
    Smooth,
    /// `exp(-rho^2 / (r^2 - rho^2))` inside radius `r`, zero outside.
    Bump { radius: f64 },
    /// Polynomial of total degree `degree` with fixed coefficients.
    Polynomial { degree: usize },
}

/// Time profile multiplying the spatial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum TimeProfile {
    /// `t` before `t_star`, 1 afterwards.
    Ramp { t_star: f64 },
    /// `2 + cos(omega t)`.
    Oscillating { omega: f64 },
    Steady,
}

/// Exact scalar solution `m = T(t) g(x)` with `h = -d grad m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedCase {
    pub profile: Profile,
    pub time: TimeProfile,
    pub d: f64,
}

/// Value, gradient and Laplacian of a spatial profile.
fn profile_eval(p: Profile, x: [f64; 2]) -> (f64, [f64; 2], f64) {
    match p {
        Profile::Smooth => {
            let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
            let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
            let w = 2.0 * PI;
            (1.0 + sx * sy, [w * cx * sy, w * sx * cy], -2.0 * w * w * sx * sy)
        }
        Profile::Bump { radius } => {
            let r2 = radius * radius;
            let rho2 = x[0] * x[0] + x[1] * x[1];
            if rho2 >= r2 {
                return (0.0, [0.0; 2], 0.0);
            }
            // g = exp(phi), phi = -rho2 / (r2 - rho2) = 1 - r2 / (r2 - rho2)
            let s = r2 - rho2;
            let g = (-rho2 / s).exp();
            // dphi/d(rho2) = -r2 / s^2
            let dphi = -r2 / (s * s);
            let d2phi = -2.0 * r2 / (s * s * s);
            let grad = [g * dphi * 2.0 * x[0], g * dphi * 2.0 * x[1]];
            // lap g = g [ 4 dphi + 4 rho2 (d2phi + dphi^2) ]
            let lap = g * (4.0 * dphi + 4.0 * rho2 * (d2phi + dphi * dphi));
            (g, grad, lap)
        }
        Profile::Polynomial { degree } => {
            // sum_{i+j<=k} c_ij x^i y^j with c_ij = 1/(1+i+2j)
            let mut v = 0.0;
            let mut g = [0.0; 2];
            let mut lap = 0.0;
            let pw = |a: f64, n: i32| if n < 0 { 0.0 } else { a.powi(n) };
            for i in 0..=degree as i32 {
                for j in 0..=(degree as i32 - i) {
                    let c = 1.0 / (1 + i + 2 * j) as f64;
                    let (fi, fj) = (i as f64, j as f64);
                    v += c * pw(x[0], i) * pw(x[1], j);
                    g[0] += c * fi * pw(x[0], i - 1) * pw(x[1], j);
                    g[1] += c * fj * pw(x[0], i) * pw(x[1], j - 1);
                    lap += c * (fi * (fi - 1.0) * pw(x[0], i - 2) * pw(x[1], j)
                        + fj * (fj - 1.0) * pw(x[0], i) * pw(x[1], j - 2));
                }
            }
            (v, g, lap)
        }
    }
}

impl ManufacturedCase {
    /// Named cases: `smooth` and `bump`, both with the ramp in time.
    pub fn named(name: &str, d: f64, t_star: f64) -> Result<Self, ModelError> {
        let profile = match name {
            "smooth" => Profile::Smooth,
            "bump" => Profile::Bump { radius: 0.75 },
            other => return Err(ModelError::UnknownCase(other.to_string())),
        };
        Ok(Self {
            profile,
            time: TimeProfile::Ramp { t_star },
            d,
        })
    }

    fn time_eval(&self, t: f64) -> (f64, f64) {
        match self.time {
            TimeProfile::Ramp { t_star } => {
                if t < t_star {
                    (t / t_star, 1.0 / t_star)
                } else {
                    (1.0, 0.0)
                }
            }
            TimeProfile::Oscillating { omega } => (2.0 + (omega * t).cos(), -omega * (omega * t).sin()),
            TimeProfile::Steady => (1.0, 0.0),
        }
    }

    pub fn m(&self, x: [f64; 2], t: f64) -> f64 {
        self.time_eval(t).0 * profile_eval(self.profile, x).0
    }

    pub fn grad_m(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let s = self.time_eval(t).0;
        let g = profile_eval(self.profile, x).1;
        [s * g[0], s * g[1]]
    }

    /// `h = -d grad m`.
    pub fn flux(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = self.grad_m(x, t);
        [-self.d * g[0], -self.d * g[1]]
    }

    /// `div h = -d lap m`.
    pub fn div_flux(&self, x: [f64; 2], t: f64) -> f64 {
        -self.d * self.time_eval(t).0 * profile_eval(self.profile, x).2
    }

    /// `dm/dt - div(d grad m)`.
    pub fn source(&self, x: [f64; 2], t: f64) -> f64 {
        let (s, ds) = self.time_eval(t);
        let (g, _, lap) = profile_eval(self.profile, x);
        ds * g - self.d * s * lap
    }
}

/// Kinetics selected for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// `f = 0` for `species` fields.
    Zero { species: usize },
    Fisher,
    Competition { a: Vec<Vec<f64>> },
    AlievPanfilov {
        params: AlievPanfilovParams,
        stimuli: Vec<Stimulus>,
    },
    /// Source of an exact solution, independent of the state.
    Manufactured(ManufacturedCase),
}

impl Model {
    pub fn competition(a: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let n = a.len();
        if n == 0 || a.iter().any(|r| r.len() != n) {
            return Err(ModelError::Dimension {
                rows: n,
                cols: a.first().map_or(0, Vec::len),
                species: n,
            });
        }
        Ok(Model::Competition { a })
    }

    pub fn n_species(&self) -> usize {
        match self {
            Model::Zero { species } => *species,
            Model::Competition { a } => a.len(),
            _ => 1,
        }
    }

    /// Number of pointwise internal state variables.
    pub fn n_internal(&self) -> usize {
        usize::from(matches!(self, Model::AlievPanfilov { .. }))
    }

    pub fn exact(&self) -> Option<&ManufacturedCase> {
        match self {
            Model::Manufactured(c) => Some(c),
            _ => None,
        }
    }

    /// Rates `f_i(m, r, x, t)` into `out`.
    pub fn rates(&self, m: &[f64], r: &[f64], x: [f64; 2], t: f64, out: &mut [f64]) -> Result<(), ModelError> {
        match self {
            Model::Zero { .. } => out.fill(0.0),
            Model::Fisher => out[0] = fisher(m[0]),
            Model::Competition { a } => competition(m, a, out)?,
            Model::AlievPanfilov { params, stimuli } => {
                let (f, _) = aliev_panfilov(m[0], r[0], params)?;
                out[0] = f;
                for s in stimuli {
                    out[s.species] += s.value(x, t);
                }
            }
            Model::Manufactured(c) => out[0] = c.source(x, t),
        }
        Ok(())
    }

    /// Right-hand side of the internal state ODE.
    pub fn internal_rates(&self, m: &[f64], r: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        if let Model::AlievPanfilov { params, .. } = self {
            out[0] = aliev_panfilov(m[0], r[0], params)?.1;
        }
        Ok(())
    }

    /// Advances the internal state over `dt` with `substeps` explicit
    /// midpoint steps, interpolating `m` linearly from `m0` to `m1`.
    pub fn advance_internal(
        &self,
        m0: &[f64],
        m1: &[f64],
        r: &mut [f64],
        dt: f64,
        substeps: usize,
    ) -> Result<(), ModelError> {
        let ni = self.n_internal();
        if ni == 0 {
            return Ok(());
        }
        let h = dt / substeps as f64;
        let mut mm = vec![0.0; m0.len()];
        let mut k1 = vec![0.0; ni];
        let mut k2 = vec![0.0; ni];
        let mut mid = vec![0.0; ni];
        let lerp = |s: f64, out: &mut [f64]| {
            for ((o, a), b) in out.iter_mut().zip(m0).zip(m1) {
                *o = a + s * (b - a);
            }
        };
        for i in 0..substeps {
            let s0 = i as f64 / substeps as f64;
            lerp(s0, &mut mm);
            self.internal_rates(&mm, r, &mut k1)?;
            for j in 0..ni {
                mid[j] = r[j] + 0.5 * h * k1[j];
            }
            lerp(s0 + 0.5 / substeps as f64, &mut mm);
            self.internal_rates(&mm, &mid, &mut k2)?;
            for j in 0..ni {
                r[j] += h * k2[j];
            }
        }
        Ok(())
    }
}

/// Segregation parameters: `a_ii = 1`, `a_ij = 3`.
pub fn segregation_matrix() -> Vec<Vec<f64>> {
    (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { 3.0 }).collect()).collect()
}

/// Cyclic interaction matrix.
pub fn cyclic_matrix() -> Vec<Vec<f64>> {
    vec![vec![1.0, 2.0, 7.0], vec![7.0, 1.0, 2.0], vec![2.0, 7.0, 1.0]]
}

/// Integrates the kinetics without diffusion by classical RK4.
pub fn integrate_homogeneous(model: &Model, m0: &[f64], dt: f64, steps: usize) -> Result<Vec<f64>, ModelError> {
    let n = m0.len();
    let mut m = m0.to_vec();
    let mut k = vec![vec![0.0; n]; 4];
    let mut tmp = vec![0.0; n];
    for s in 0..steps {
        let t = s as f64 * dt;
        model.rates(&m, &[], [0.0; 2], t, &mut k[0])?;
        for (stage, c) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..n {
                tmp[i] = m[i] + c * dt * k[stage - 1][i];
            }
            let (done, rest) = k.split_at_mut(stage);
            let _ = done;
            model.rates(&tmp, &[], [0.0; 2], t + c * dt, &mut rest[0])?;
        }
        for i in 0..n {
            m[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
    }
    Ok(m)
}
