//! Adaptive Dormand-Prince 5(4) integrator for complex-valued linear systems.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::ZERO;

/// Right-hand side of dy/dt = f(t, y).
pub trait OdeRhs: Sync {
    fn len(&self) -> usize;
    fn eval(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step relative to max(1, |t|).
    pub min_step: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            min_step: 1e-13,
            max_steps: 50_000_000,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub enum OdeError {
    /// The step size fell below the floor; `worst_component` carries the index
    /// that dominated the last error estimate.
    StepCollapse { t: f64, h: f64, worst_component: usize },
    MaxSteps { t: f64 },
    NonFinite { t: f64 },
}

// Dormand-Prince coefficients
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

const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;
const SAFETY: f64 = 0.9;

struct Work {
    k: [Vec<Complex64>; 7],
    tmp: Vec<Complex64>,
    ynew: Vec<Complex64>,
}

fn axpy_stage(tmp: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for i in 0..y.len() {
        let mut acc = ZERO;
        for (coef, k) in terms {
            acc += k[i] * *coef;
        }
        tmp[i] = y[i] + acc * h;
    }
}

/// Integrate from `times[0]` through every entry of `times` (ascending),
/// calling `on_output(index, t, y)` at each output time including the first.
pub fn integrate<R, F>(
    rhs: &R,
    mut y: Vec<Complex64>,
    times: &[f64],
    cfg: &IntegratorConfig,
    mut on_output: F,
) -> Result<IntegrationStats, OdeError>
where
    R: OdeRhs + ?Sized,
    F: FnMut(usize, f64, &[Complex64]),
{
    let n = rhs.len();
    assert_eq!(y.len(), n, "state length mismatch");
    let mut stats = IntegrationStats::default();
    if times.is_empty() {
        return Ok(stats);
    }
    let mut w = Work {
        k: std::array::from_fn(|_| vec![ZERO; n]),
        tmp: vec![ZERO; n],
        ynew: vec![ZERO; n],
    };
    let mut t = times[0];
    on_output(0, t, &y);
    if times.len() == 1 {
        return Ok(stats);
    }

    rhs.eval(t, &y, &mut w.k[0]);
    stats.evaluations += 1;
    let mut h = match cfg.initial_step {
        Some(h0) => h0,
        None => initial_step(rhs, t, &y, &w.k[0], cfg, &mut stats),
    };
    let mut err_prev: f64 = 1e-4;

    for (idx, &t_out) in times.iter().enumerate().skip(1) {
        while t < t_out {
            if stats.accepted + stats.rejected >= cfg.max_steps {
                return Err(OdeError::MaxSteps { t });
            }
            let remaining = t_out - t;
            let clamped = h >= remaining;
            let h_try = if clamped { remaining } else { h };
            let (err, worst) = step(rhs, t, &y, h_try, &mut w, cfg);
            stats.evaluations += 6;
            if !err.is_finite() {
                if h_try < cfg.min_step * t.abs().max(1.0) {
                    return Err(OdeError::NonFinite { t });
                }
                h = h_try * 0.1;
                stats.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                t = if clamped { t_out } else { t + h_try };
                std::mem::swap(&mut y, &mut w.ynew);
                // FSAL: stage 7 is f(t+h, y_new)
                w.k.swap(0, 6);
                stats.accepted += 1;
                let fac = SAFETY * err.max(1e-10).powf(-ALPHA) * err_prev.powf(BETA);
                let grown = h_try * fac.clamp(0.2, 10.0);
                h = if clamped { h.max(grown) } else { grown };
                err_prev = err.max(1e-4);
            } else {
                stats.rejected += 1;
                let fac = (SAFETY * err.powf(-ALPHA)).clamp(0.2, 1.0);
                h = h_try * fac;
                if h < cfg.min_step * t.abs().max(1.0) {
                    return Err(OdeError::StepCollapse { t, h, worst_component: worst });
                }
            }
        }
        on_output(idx, t, &y);
    }
    Ok(stats)
}

fn step<R: OdeRhs + ?Sized>(
    rhs: &R,
    t: f64,
    y: &[Complex64],
    h: f64,
    w: &mut Work,
    cfg: &IntegratorConfig,
) -> (f64, usize) {
    let Work { k, tmp, ynew } = w;
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    axpy_stage(tmp, y, h, &[(A21, k1)]);
    rhs.eval(t + C2 * h, tmp, k2);
    axpy_stage(tmp, y, h, &[(A31, k1), (A32, k2)]);
    rhs.eval(t + C3 * h, tmp, k3);
    axpy_stage(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    rhs.eval(t + C4 * h, tmp, k4);
    axpy_stage(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    rhs.eval(t + C5 * h, tmp, k5);
    axpy_stage(tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
    rhs.eval(t + h, tmp, k6);
    axpy_stage(ynew, y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
    rhs.eval(t + h, ynew, k7);

    let mut acc = 0.0;
    let mut worst = 0usize;
    let mut worst_val = -1.0;
    for i in 0..y.len() {
        let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        let scale = cfg.atol + cfg.rtol * y[i].norm().max(ynew[i].norm());
        let r = e.norm() / scale;
        if r > worst_val {
            worst_val = r;
            worst = i;
        }
        acc += r * r;
    }
    ((acc / y.len() as f64).sqrt(), worst)
}

fn initial_step<R: OdeRhs + ?Sized>(
    rhs: &R,
    t: f64,
    y: &[Complex64],
    f0: &[Complex64],
    cfg: &IntegratorConfig,
    stats: &mut IntegrationStats,
) -> f64 {
    let n = y.len() as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..y.len() {
        let sc = cfg.atol + cfg.rtol * y[i].norm();
        d0 += (y[i].norm() / sc).powi(2);
        d1 += (f0[i].norm() / sc).powi(2);
    }
    d0 = (d0 / n).sqrt();
    d1 = (d1 / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<Complex64> = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![ZERO; y.len()];
    rhs.eval(t + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let mut d2 = 0.0;
    for i in 0..y.len() {
        let sc = cfg.atol + cfg.rtol * y[i].norm();
        d2 += ((f1[i] - f0[i]).norm() / sc).powi(2);
    }
    d2 = (d2 / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

/// Uniform output grid 0, dt, 2 dt, ..., t_end (last point snapped to t_end).
pub fn uniform_grid(t_end: f64, dt: f64) -> Vec<f64> {
    assert!(t_end >= 0.0 && dt > 0.0);
    let steps = (t_end / dt + 1e-9).floor().max(0.0) as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    if let Some(last) = grid.last_mut() {
        if (t_end - *last).abs() < 1e-9 * dt {
            *last = t_end;
        } else if *last < t_end {
            grid.push(t_end);
        }
    }
    grid
}
