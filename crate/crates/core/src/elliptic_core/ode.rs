//! Adaptive Dormand–Prince 5(4) integration of small fixed-size systems.

use super::EllipticError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Smallest admissible step, relative to the current abscissa scale.
    pub min_step: f64,
    /// Any state component exceeding this magnitude stops the integration.
    pub blowup: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { atol: 1e-10, rtol: 1e-10, min_step: 1e-14, blowup: 1e12 }
    }
}

/// Outcome of [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    /// States at the requested output abscissae reached before stopping.
    pub states: Vec<[f64; N]>,
    /// Abscissa where a state exceeded the blow-up bound, if any.
    pub diverged_at: Option<f64>,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y′ = f(t, y)` from `(t0, y0)` through the increasing abscissae `outputs`,
/// landing exactly on each one.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    outputs: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory<N>, EllipticError> {
    let mut t = t0;
    let mut y = y0;
    let mut states = Vec::with_capacity(outputs.len());
    let span = outputs.last().map_or(0.0, |&e| (e - t0).abs());
    let mut h = (span * 1e-3).max(1e-12);
    let mut k1 = f(t, &y);
    for &target in outputs {
        while t < target {
            let last = h >= target - t;
            let step = if last { target - t } else { h };
            let k2 = f(t + C2 * step, &comb(&y, step, &[(A21, &k1)]));
            let k3 = f(t + C3 * step, &comb(&y, step, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * step, &comb(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(t + C5 * step, &comb(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(t + step, &comb(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y5 = comb(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + step, &y5);
            let mut err = 0.0f64;
            for i in 0..N {
                let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                err = 1e10;
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = y5;
                k1 = k7;
                if y.iter().any(|v| !v.is_finite() || v.abs() > opts.blowup) {
                    return Ok(Trajectory { states, diverged_at: Some(t) });
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = step * fac;
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
            if h < opts.min_step * t.abs().max(1e-300) {
                return Err(EllipticError::StepUnderflow(t));
            }
        }
        states.push(y);
    }
    Ok(Trajectory { states, diverged_at: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let ts: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let tr = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], &ts, &OdeOptions::default()).unwrap();
        for (t, s) in ts.iter().zip(&tr.states) {
            assert!((s[0] - t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn detects_blowup() {
        let tr = integrate(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], &[2.0], &OdeOptions::default()).unwrap();
        let t = tr.diverged_at.unwrap();
        assert!(t < 1.0 && t > 0.99);
        assert!(tr.states.is_empty());
    }
}
