//! Dominant oscillation frequency of an observable by windowed FFT.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiEstimate {
    /// angular frequency
    pub omega: f64,
    /// sinusoid amplitude implied by the peak height
    pub amplitude: f64,
    /// FFT bin width (angular) after zero padding
    pub bin_width: f64,
}

/// Simulation length covering six periods of the collective estimate
/// 2 sqrt(2) g.
pub fn rabi_window(g: f64) -> f64 {
    6.0 * 2.0 * PI / (2.0 * 2f64.sqrt() * g)
}

/// Peak of the Hann-windowed, mean-removed signal on a uniform grid, with
/// quadratic interpolation of the log magnitude around the peak bin.
/// `min_amplitude` is the noise floor below which no oscillation is reported.
pub fn dominant_frequency(times: &[f64], signal: &[f64], min_amplitude: f64) -> Result<RabiEstimate> {
    let n = signal.len();
    if n < 8 || times.len() != n {
        return Err(Error::MisalignedGrids);
    }
    let dt = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        // the last step of a uniform grid may be short; drop it
        if n > 8 && times.windows(2).take(n - 2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt) {
            return dominant_frequency(&times[..n - 1], &signal[..n - 1], min_amplitude);
        }
        return Err(Error::Domain("Rabi extraction needs a uniform time grid".into()));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let window: Vec<f64> = (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()).collect();
    let gain: f64 = window.iter().sum();
    let padded = (4 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = (0..padded)
        .map(|k| if k < n { Complex64::new((signal[k] - mean) * window[k], 0.0) } else { Complex64::new(0.0, 0.0) })
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mag: Vec<f64> = buf[..padded / 2].iter().map(|z| z.norm()).collect();
    // skip the DC lobe of the Hann window (two raw bins wide)
    let start = 2 * padded / n + 1;
    if start + 2 >= mag.len() {
        return Err(Error::NoOscillation("signal too short".into()));
    }
    let (k, &peak) = mag[start..]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i + start, v))
        .expect("non-empty");
    let amplitude = 2.0 * peak / gain;
    if amplitude < min_amplitude {
        return Err(Error::NoOscillation(format!("peak amplitude {amplitude:.2e} below {min_amplitude:.1e}")));
    }
    let bin = 2.0 * PI / (padded as f64 * dt);
    let shift = if k + 1 < mag.len() && mag[k - 1] > 0.0 && mag[k + 1] > 0.0 {
        let (a, b, c) = (mag[k - 1].ln(), peak.ln(), mag[k + 1].ln());
        let den = a - 2.0 * b + c;
        if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 }
    } else {
        0.0
    };
    let omega = (k as f64 + shift) * bin;
    let periods = omega * dt * (n - 1) as f64 / (2.0 * PI);
    if periods < 3.0 {
        return Err(Error::NoOscillation(format!("only {periods:.1} periods resolved (need 3)")));
    }
    Ok(RabiEstimate { omega, amplitude, bin_width: bin })
}

pub fn extract_rabi_frequency(traj: &Trajectory, observable: &str, min_amplitude: f64) -> Result<RabiEstimate> {
    let signal = traj.observable(observable)?;
    dominant_frequency(&traj.times, &signal, min_amplitude)
        .map_err(|e| match e {
            Error::NoOscillation(msg) => Error::NoOscillation(format!("{observable}: {msg}")),
            other => other,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_cosine() {
        for omega in [0.37, 1.0, 2.9] {
            let times: Vec<f64> = (0..2000).map(|k| k as f64 * 0.05).collect();
            let sig: Vec<f64> = times.iter().map(|t| 0.3 + 0.2 * (omega * t).cos()).collect();
            let est = dominant_frequency(&times, &sig, 1e-3).unwrap();
            assert!((est.omega - omega).abs() < est.bin_width, "{} vs {omega}", est.omega);
            assert!((est.amplitude - 0.2).abs() < 0.03);
        }
    }

    #[test]
    fn flat_signal_has_no_oscillation() {
        let times: Vec<f64> = (0..500).map(|k| k as f64).collect();
        let sig: Vec<f64> = times.iter().map(|t| 1.0 - 1e-6 * (0.3 * t).sin()).collect();
        assert!(matches!(dominant_frequency(&times, &sig, 1e-3), Err(Error::NoOscillation(_))));
    }

    #[test]
    fn too_few_periods() {
        let times: Vec<f64> = (0..500).map(|k| k as f64 * 0.01).collect();
        let sig: Vec<f64> = times.iter().map(|t| (2.0 * t).cos()).collect();
        assert!(dominant_frequency(&times, &sig, 1e-3).is_err());
    }
}
