use serde::{Deserialize, Serialize};

use crate::domain_geometry::RadialGrid;

use super::coefficient::CoefficientH;
use super::fields::ScalarFieldRadial;
use super::ode::{integrate, OdeOptions};
use super::EllipticError;

/// Settings for [`radial_shoot`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShootOptions {
    /// Output radii; the last node is the shooting endpoint.
    pub grid: RadialGrid,
    pub ode: OdeOptions,
}

impl ShootOptions {
    /// `n` uniform nodes on `(0, radius]`.
    pub fn uniform(radius: f64, n: usize) -> Self {
        let nodes = (1..=n).map(|i| radius * i as f64 / n as f64).collect();
        Self { grid: RadialGrid::new(nodes).expect("uniform grid with at least 1000 nodes"), ode: OdeOptions::default() }
    }
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self::uniform(1.0, 10_000)
    }
}

/// Trajectory of `Δu + hu = u⁵` with `u(0) = a`, `u′(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootResult {
    pub initial_height: f64,
    /// `u(R)`; infinite when the trajectory diverged.
    pub endpoint_value: f64,
    /// Profile on the output grid with exact ODE derivatives; `None` on divergence.
    pub profile: Option<ScalarFieldRadial>,
    /// No zero crossing strictly before the endpoint.
    pub stayed_positive: bool,
    pub diverged_at: Option<f64>,
}

fn radial_h(h: &CoefficientH) -> Result<impl Fn(f64) -> f64 + '_, EllipticError> {
    if !h.is_radial() {
        return Err(EllipticError::NotRadial);
    }
    Ok(move |r: f64| h.eval_radial(r).unwrap())
}

/// Integrates `u″ + 2u′/r = hu − u⁵` (that is `Δu + hu = u⁵`) from the origin with
/// `u(0) = a`, starting from the series `u ≈ a + (h(0)a − a⁵)r²/6`.
pub fn radial_shoot(h: &CoefficientH, a: f64, opts: &ShootOptions) -> Result<ShootResult, EllipticError> {
    shoot_on(h, a, &opts.grid.nodes, &opts.ode).map(|(res, states)| {
        let profile = states.map(|s| {
            let values = s.iter().map(|y| y[0]).collect();
            let derivs = s.iter().map(|y| y[1]).collect();
            ScalarFieldRadial::from_samples(opts.grid.clone(), values, derivs)
        });
        ShootResult { profile, ..res }
    })
}

type States = Option<Vec<[f64; 2]>>;

fn shoot_on(h: &CoefficientH, a: f64, outputs: &[f64], ode: &OdeOptions) -> Result<(ShootResult, States), EllipticError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(EllipticError::Input(format!("initial height must be positive, got {a}")));
    }
    let hr = radial_h(h)?;
    let c = (hr(0.0) * a - a.powi(5)) / 6.0;
    let rs = (0.5 * outputs[0]).min(1e-3 / (a * a));
    let y0 = [a + c * rs * rs, 2.0 * c * rs];
    let rhs = |r: f64, y: &[f64; 2]| [y[1], hr(r) * y[0] - y[0].powi(5) - 2.0 * y[1] / r];
    let tr = integrate(rhs, rs, y0, outputs, ode)?;
    if let Some(t) = tr.diverged_at {
        let res = ShootResult {
            initial_height: a,
            endpoint_value: f64::INFINITY,
            profile: None,
            stayed_positive: false,
            diverged_at: Some(t),
        };
        return Ok((res, None));
    }
    let s = tr.states;
    let n = s.len();
    let stayed_positive = s[..n - 1].iter().all(|y| y[0] > 0.0);
    let res = ShootResult {
        initial_height: a,
        endpoint_value: s[n - 1][0],
        profile: None,
        stayed_positive,
        diverged_at: None,
    };
    Ok((res, Some(s)))
}

/// Settings for [`find_radial_solution`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub a_min: f64,
    pub a_max: f64,
    /// Log-spaced probes of the initial height before bracketing.
    pub probes: usize,
    /// Bisection stops when the bracket is this small relative to `a`.
    pub a_tolerance: f64,
    pub shoot: ShootOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { a_min: 1e-2, a_max: 1e3, probes: 200, a_tolerance: 1e-13, shoot: ShootOptions::default() }
    }
}

/// One probe of the sweep: initial height, endpoint value, positivity before the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub a: f64,
    pub endpoint_value: f64,
    pub stayed_positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RadialSearch {
    Found { initial_height: f64, profile: ScalarFieldRadial, log: Vec<ProbeRecord> },
    /// No bracket at sweep resolution; this is evidence, not proof, of non-existence.
    NotFound { log: Vec<ProbeRecord> },
}

impl RadialSearch {
    pub fn is_found(&self) -> bool {
        matches!(self, Self::Found { .. })
    }

    pub fn log(&self) -> &[ProbeRecord] {
        match self {
            Self::Found { log, .. } | Self::NotFound { log } => log,
        }
    }
}

/// Positive radial solution of `Δu + hu = u⁵` on the ball of radius `R` with `u(R) = 0`,
/// bracketed as the first probe where the endpoint value turns non-positive.
pub fn find_radial_solution(h: &CoefficientH, opts: &SearchOptions) -> Result<RadialSearch, EllipticError> {
    let end = [opts.shoot.grid.outer_radius()];
    let ode = &opts.shoot.ode;
    let n = opts.probes.max(2);
    let ratio = (opts.a_max / opts.a_min).ln();
    let mut log = Vec::with_capacity(n);
    for k in 0..n {
        let a = opts.a_min * (ratio * k as f64 / (n - 1) as f64).exp();
        let (r, _) = shoot_on(h, a, &end, ode)?;
        log.push(ProbeRecord { a, endpoint_value: r.endpoint_value, stayed_positive: r.stayed_positive });
    }
    let good = |p: &ProbeRecord| p.endpoint_value > 0.0 && p.endpoint_value.is_finite();
    let Some(k) = log.windows(2).position(|w| good(&w[0]) && !good(&w[1]) && w[1].endpoint_value.is_finite()) else {
        return Ok(RadialSearch::NotFound { log });
    };
    let (mut lo, mut hi) = (log[k].a, log[k + 1].a);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (r, _) = shoot_on(h, mid, &end, ode)?;
        if r.endpoint_value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= opts.a_tolerance * hi {
            break;
        }
    }
    let a = if shoot_on(h, lo, &end, ode)?.0.endpoint_value.abs() <= shoot_on(h, hi, &end, ode)?.0.endpoint_value.abs() {
        lo
    } else {
        hi
    };
    let res = radial_shoot(h, a, &opts.shoot)?;
    let profile = res.profile.expect("bracketed trajectory does not diverge");
    Ok(RadialSearch::Found { initial_height: a, profile, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_height_gives_standard_bubble() {
        let r = radial_shoot(&CoefficientH::zero(), 1.0, &ShootOptions::default()).unwrap();
        let p = r.profile.unwrap();
        for (&x, &v) in p.grid.nodes.iter().zip(&p.values).step_by(97) {
            assert!((v - (1.0 + x * x / 3.0).powf(-0.5)).abs() < 1e-9);
        }
        assert!(r.stayed_positive);
    }

    #[test]
    fn brezis_nirenberg_solution_exists() {
        let s = find_radial_solution(&CoefficientH::Constant(-PI * PI / 2.0), &SearchOptions::default()).unwrap();
        match s {
            RadialSearch::Found { profile, .. } => {
                assert!(profile.values.last().unwrap().abs() < 1e-8);
                assert!(profile.values[..profile.values.len() - 1].iter().all(|&v| v > 0.0));
            }
            RadialSearch::NotFound { .. } => panic!("no solution found"),
        }
    }

    #[test]
    fn rejects_nonpositive_height() {
        assert!(radial_shoot(&CoefficientH::zero(), 0.0, &ShootOptions::default()).is_err());
    }
}
