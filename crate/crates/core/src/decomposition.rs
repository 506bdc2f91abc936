//! Exponential decompositions C(t) = sum_k c_k exp(-nu_k t) of bath correlation
//! functions: Matsubara series, least-squares compression and the exact
//! series of a discrete mode set.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::ModeSet;
use crate::error::{Error, Result};
use crate::spectra::DrudeLorentzBath;
use crate::special::thermal_coth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesOrigin {
    Matsubara,
    Compressed,
    DiscreteModes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub coefficient: Complex64,
    pub rate: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SeriesJson", try_from = "SeriesJson")]
pub struct CorrelationSeries {
    terms: Vec<ExpTerm>,
    pub origin: SeriesOrigin,
    /// Relative L2 misfit for compressed series.
    pub residual: Option<f64>,
}

impl CorrelationSeries {
    pub fn new(terms: Vec<ExpTerm>, origin: SeriesOrigin, residual: Option<f64>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidSeries("series has no terms".into()));
        }
        for (k, t) in terms.iter().enumerate() {
            if !(t.rate.re >= 0.0) || !t.rate.is_finite() || !t.coefficient.is_finite() {
                return Err(Error::InvalidSeries(format!(
                    "term {k} has rate {} (Re nu must be >= 0) and coefficient {}",
                    t.rate, t.coefficient
                )));
            }
            if origin == SeriesOrigin::DiscreteModes && t.rate.re != 0.0 {
                return Err(Error::InvalidSeries(format!("discrete-mode term {k} is damped")));
            }
        }
        Ok(Self { terms, origin, residual })
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.terms.iter().map(|k| k.coefficient * (-k.rate * t).exp()).sum()
    }

    /// Same series with all coefficients multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm { coefficient: t.coefficient * factor, rate: t.rate })
                .collect(),
            ..self.clone()
        }
    }

    /// Replace term `k` by two copies carrying half its coefficient.
    pub fn split_term(&self, k: usize) -> Self {
        let mut terms = self.terms.clone();
        let half = ExpTerm { coefficient: terms[k].coefficient * 0.5, rate: terms[k].rate };
        terms[k] = half;
        terms.insert(k + 1, half);
        Self { terms, ..self.clone() }
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    re_c: f64,
    im_c: f64,
    re_nu: f64,
    im_nu: f64,
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    origin: SeriesOrigin,
    residual: Option<f64>,
    terms: Vec<TermJson>,
}

impl From<CorrelationSeries> for SeriesJson {
    fn from(s: CorrelationSeries) -> Self {
        SeriesJson {
            origin: s.origin,
            residual: s.residual,
            terms: s
                .terms
                .iter()
                .map(|t| TermJson {
                    re_c: t.coefficient.re,
                    im_c: t.coefficient.im,
                    re_nu: t.rate.re,
                    im_nu: t.rate.im,
                })
                .collect(),
        }
    }
}

impl TryFrom<SeriesJson> for CorrelationSeries {
    type Error = Error;
    fn try_from(s: SeriesJson) -> Result<Self> {
        let terms = s
            .terms
            .iter()
            .map(|t| ExpTerm {
                coefficient: Complex64::new(t.re_c, t.im_c),
                rate: Complex64::new(t.re_nu, t.im_nu),
            })
            .collect();
        CorrelationSeries::new(terms, s.origin, s.residual)
    }
}

/// Drude-Lorentz Matsubara decomposition with `n_matsubara` thermal poles.
pub fn matsubara_series(bath: &DrudeLorentzBath, n_matsubara: usize) -> Result<CorrelationSeries> {
    let temp = bath.temperature();
    if temp <= 0.0 {
        return Err(Error::Domain(
            "Matsubara expansion needs theta > 0; compress a sampled C(t) at zero temperature".into(),
        ));
    }
    let (lam, gam) = (bath.lambda, bath.gamma);
    let ratio = gam / (2.0 * PI * temp);
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() < 1e-9 * ratio.max(1.0) {
        return Err(Error::DegeneratePole { k: nearest as usize });
    }
    let mut terms = Vec::with_capacity(n_matsubara + 1);
    let cot = 1.0 / (gam / (2.0 * temp)).tan();
    terms.push(ExpTerm {
        coefficient: Complex64::new(lam * gam * cot, -lam * gam),
        rate: Complex64::new(gam, 0.0),
    });
    for k in 1..=n_matsubara {
        let nu = 2.0 * PI * temp * k as f64;
        terms.push(ExpTerm {
            coefficient: Complex64::new(4.0 * lam * gam * temp * nu / (nu * nu - gam * gam), 0.0),
            rate: Complex64::new(nu, 0.0),
        });
    }
    CorrelationSeries::new(terms, SeriesOrigin::Matsubara, None)
}

/// Exact two-term-per-mode series of a discrete mode set. `temperature` is
/// k_B T / hbar in the units of the mode frequencies.
pub fn discrete_series(sector: &ModeSet, temperature: f64) -> Result<CorrelationSeries> {
    let mut terms = Vec::with_capacity(2 * sector.len());
    for m in sector.modes() {
        let g2 = m.coupling * m.coupling;
        let coth = thermal_coth(m.omega, temperature);
        terms.push(ExpTerm {
            coefficient: Complex64::new(g2 * (coth + 1.0) / 2.0, 0.0),
            rate: Complex64::new(0.0, m.omega),
        });
        if temperature > 0.0 {
            terms.push(ExpTerm {
                coefficient: Complex64::new(g2 * (coth - 1.0) / 2.0, 0.0),
                rate: Complex64::new(0.0, -m.omega),
            });
        }
    }
    CorrelationSeries::new(terms, SeriesOrigin::DiscreteModes, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesError {
    pub max_abs: f64,
    pub rel_l2: f64,
}

/// Error of `series` against samples `(t_i, C(t_i))`.
pub fn series_error(series: &CorrelationSeries, reference: &[(f64, Complex64)]) -> Result<SeriesError> {
    if reference.is_empty() {
        return Err(Error::MisalignedGrids);
    }
    let mut max_abs: f64 = 0.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(t, c) in reference {
        let d = (series.eval(t) - c).norm();
        max_abs = max_abs.max(d);
        num += d * d;
        den += c.norm_sqr();
    }
    let rel_l2 = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(SeriesError { max_abs, rel_l2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Relative L2 residual above which the fit is reported as failed.
    pub threshold: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { threshold: 1e-3, restarts: 10, seed: 0x5eed, max_iterations: 300 }
    }
}

/// Samples of `f` on the default compression grid: 20 points per 1/gamma on
/// (0, window], excluding t = 0 where Re C of a continuum bath diverges.
pub fn sample_grid(window: f64, gamma: f64) -> Vec<f64> {
    let n = ((20.0 * gamma * window).ceil() as usize).max(200);
    let dt = window / n as f64;
    (1..=n).map(|i| i as f64 * dt).collect()
}

struct VarPro<'a> {
    t: &'a [f64],
    y_re: DVector<f64>,
    y_im: DVector<f64>,
    norm: f64,
}

impl VarPro<'_> {
    /// Linear coefficients and residual vector for log-rates `p`.
    fn solve(&self, p: &[f64]) -> (Vec<Complex64>, DVector<f64>) {
        let m = self.t.len();
        let k = p.len();
        let phi = DMatrix::from_fn(m, k, |i, j| (-p[j].exp() * self.t[i]).exp());
        let svd = phi.clone().svd(true, true);
        let cre = svd.solve(&self.y_re, 1e-14).unwrap_or_else(|_| DVector::zeros(k));
        let cim = svd.solve(&self.y_im, 1e-14).unwrap_or_else(|_| DVector::zeros(k));
        let rre = &self.y_re - &phi * &cre;
        let rim = &self.y_im - &phi * &cim;
        let mut r = DVector::zeros(2 * m);
        r.rows_mut(0, m).copy_from(&rre);
        r.rows_mut(m, m).copy_from(&rim);
        let coeffs = (0..k).map(|j| Complex64::new(cre[j], cim[j])).collect();
        (coeffs, r)
    }

    /// Levenberg-Marquardt on the log-rates with a forward-difference Jacobian.
    fn refine(&self, p0: &[f64], max_iterations: usize) -> (Vec<f64>, f64) {
        let k = p0.len();
        let mut p = p0.to_vec();
        let mut r = self.solve(&p).1;
        let mut cost = r.norm_squared();
        let mut mu = 1e-3;
        for _ in 0..max_iterations {
            let mut jac = DMatrix::zeros(r.len(), k);
            for j in 0..k {
                let h = 1e-7 * p[j].abs().max(1.0);
                let mut q = p.clone();
                q[j] += h;
                let rq = self.solve(&q).1;
                jac.set_column(j, &((rq - &r) / h));
            }
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * &r;
            let mut improved = false;
            for _ in 0..20 {
                let mut a = jtj.clone();
                for d in 0..k {
                    a[(d, d)] += mu * (jtj[(d, d)].max(1e-12));
                }
                let Some(step) = a.lu().solve(&(-&jtr)) else {
                    mu *= 10.0;
                    continue;
                };
                let q: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b.clamp(-2.0, 2.0)).collect();
                let rq = self.solve(&q).1;
                let cq = rq.norm_squared();
                if cq < cost {
                    let gain = (cost - cq) / cost.max(1e-300);
                    p = q;
                    r = rq;
                    cost = cq;
                    mu = (mu / 3.0).max(1e-12);
                    improved = true;
                    if gain < 1e-12 {
                        return (p, cost.sqrt() / self.norm);
                    }
                    break;
                }
                mu *= 4.0;
            }
            if !improved {
                break;
            }
        }
        (p, cost.sqrt() / self.norm)
    }
}

/// Prony estimate of K decay rates from the real part on a uniform grid.
fn prony_rates(t: &[f64], y: &[f64], k: usize) -> Option<Vec<f64>> {
    let n = t.len();
    if n < 2 * k + 2 {
        return None;
    }
    let dt = t[1] - t[0];
    let rows = n - k;
    let a = DMatrix::from_fn(rows, k, |i, j| y[i + k - 1 - j]);
    let b = DVector::from_fn(rows, |i, _| y[i + k]);
    let coef = a.svd(true, true).solve(&b, 1e-14).ok()?;
    // companion matrix of z^k - a_1 z^{k-1} - ... - a_k
    let mut comp = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        comp[(0, j)] = coef[j];
    }
    for i in 1..k {
        comp[(i, i - 1)] = 1.0;
    }
    let roots = comp.complex_eigenvalues();
    let mut rates: Vec<f64> = roots
        .iter()
        .map(|z| {
            let mag = z.norm();
            if mag > 0.0 && mag < 1.0 {
                -mag.ln() / dt
            } else {
                1.0 / (t[n - 1] - t[0])
            }
        })
        .collect();
    rates.sort_by(|x, y| x.total_cmp(y));
    Some(rates)
}

/// Least-squares compression of sampled C(t) to K damped exponentials with
/// real non-negative rates and complex coefficients (variable projection).
pub fn compress_series(reference: &[(f64, Complex64)], k: usize, cfg: &FitConfig) -> Result<CorrelationSeries> {
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    if reference.len() < 2 * k + 2 {
        return Err(Error::Domain("reference grid too coarse for the requested K".into()));
    }
    let t: Vec<f64> = reference.iter().map(|s| s.0).collect();
    let y_re = DVector::from_iterator(t.len(), reference.iter().map(|s| s.1.re));
    let y_im = DVector::from_iterator(t.len(), reference.iter().map(|s| s.1.im));
    let norm = (y_re.norm_squared() + y_im.norm_squared()).sqrt();
    if norm == 0.0 {
        return Err(Error::Domain("reference correlation is identically zero".into()));
    }
    let vp = VarPro { t: &t, y_re, y_im, norm };
    let span = t[t.len() - 1] - t[0].min(0.0);
    let fastest = 1.0 / (t[1] - t[0]).max(1e-300);
    let slowest = 1.0 / span;

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let yr: Vec<f64> = reference.iter().map(|s| s.1.re).collect();
    if let Some(r) = prony_rates(&t, &yr, k) {
        starts.push(r.iter().map(|v| v.max(slowest * 1e-3).ln()).collect());
    }
    starts.push(
        (0..k)
            .map(|j| {
                let f = if k == 1 { 0.5 } else { j as f64 / (k - 1) as f64 };
                (slowest.ln() * (1.0 - f) + fastest.ln() * f) + (0.5f64).ln() * (1.0 - f)
            })
            .collect(),
    );

    let mut best: Option<(Vec<f64>, f64)> = None;
    let consider = |p0: &[f64], best: &mut Option<(Vec<f64>, f64)>| {
        let (p, res) = vp.refine(p0, cfg.max_iterations);
        if best.as_ref().is_none_or(|b| res < b.1) {
            *best = Some((p, res));
        }
    };
    for s in &starts {
        consider(s, &mut best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.restarts {
        if best.as_ref().is_some_and(|b| b.1 <= cfg.threshold * 0.1) {
            break;
        }
        let mut p0: Vec<f64> = (0..k)
            .map(|_| rng.random_range(slowest.ln() - 1.0..fastest.ln()))
            .collect();
        p0.sort_by(|a, b| a.total_cmp(b));
        consider(&p0, &mut best);
    }
    let (p, residual) = best.expect("at least one start");
    let (coeffs, _) = vp.solve(&p);
    let mut terms: Vec<ExpTerm> = coeffs
        .iter()
        .zip(&p)
        .map(|(c, lp)| ExpTerm { coefficient: *c, rate: Complex64::new(lp.exp(), 0.0) })
        .collect();
    terms.sort_by(|a, b| a.rate.re.total_cmp(&b.rate.re));
    let series = CorrelationSeries::new(terms, SeriesOrigin::Compressed, Some(residual))?;
    if residual > cfg.threshold {
        return Err(Error::FitFailure { residual, threshold: cfg.threshold, best: Box::new(series) });
    }
    Ok(series)
}

/// Reference samples of a Drude-Lorentz correlation on the compression grid
/// over (0, window], by closed form (any temperature, including zero).
pub fn sample_continuum(bath: &DrudeLorentzBath, window: f64) -> Result<Vec<(f64, Complex64)>> {
    use crate::spectra::{correlation_continuum, CorrelationMethod};
    sample_grid(window, bath.gamma)
        .into_iter()
        .map(|t| Ok((t, correlation_continuum(bath, t, CorrelationMethod::MatsubaraClosedForm)?)))
        .collect()
}

/// Compressed K-term series of a continuum Drude-Lorentz bath on the default
/// window [0, 10/gamma].
pub fn compress_bath(bath: &DrudeLorentzBath, k: usize, cfg: &FitConfig) -> Result<CorrelationSeries> {
    let samples = sample_continuum(bath, 10.0 / bath.gamma)?;
    compress_series(&samples, k, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{mode_set_two_qubit, DerivedScales, Parity};
    use crate::spectra::{correlation_continuum, correlation_discrete, CorrelationMethod};

    #[test]
    fn matsubara_structure() {
        let b = DrudeLorentzBath::new(0.1, 7.0, 7.0).unwrap();
        let s = matsubara_series(&b, 5).unwrap();
        assert_eq!(s.len(), 6);
        for t in s.terms().iter().skip(1) {
            assert_eq!(t.coefficient.im, 0.0);
        }
        for &t in &[0.1, 0.5, 2.0] {
            assert!((s.eval(t).im + 0.7 * (-7.0 * t).exp()).abs() < 1e-15);
        }
        assert!(matches!(
            matsubara_series(&DrudeLorentzBath::new(0.1, 1.0, 0.0).unwrap(), 3),
            Err(Error::Domain(_))
        ));
        let pole = DrudeLorentzBath::new(0.1, 4.0 * PI * 0.3, 0.3).unwrap();
        assert!(matches!(matsubara_series(&pole, 3), Err(Error::DegeneratePole { k: 2 })));
    }

    #[test]
    fn matsubara_converges_to_quadrature() {
        let b = DrudeLorentzBath::new(0.1, 7.0, 7.0).unwrap();
        let t = 1.0 / 7.0;
        let exact = correlation_continuum(&b, t, CorrelationMethod::Quadrature).unwrap();
        let err = |n| (matsubara_series(&b, n).unwrap().eval(t) - exact).norm() / exact.norm();
        // beyond n = 2 the truncation error is below the quadrature accuracy
        assert!(err(0) > err(1) && err(1) > err(2));
        assert!(err(50) < 1e-4);
    }

    #[test]
    fn high_temperature_leading_term() {
        let b = DrudeLorentzBath::new(0.1, 1.0, 100.0).unwrap();
        let s = matsubara_series(&b, 10).unwrap();
        let c0 = s.terms()[0].coefficient;
        assert!((c0.re / (0.1 * 200.0) - 1.0).abs() < 1e-3);
        for t in s.terms().iter().skip(1) {
            assert!(t.coefficient.norm() < 0.01 * c0.norm());
        }
    }

    #[test]
    fn discrete_series_equals_direct_sum() {
        let s = DerivedScales::from_frequencies(1.0, 0.3, 2.0, 0.05).unwrap();
        let modes = mode_set_two_qubit(&s, 9).unwrap().sector(Parity::Odd).unwrap();
        let zero = discrete_series(&modes, 0.0).unwrap();
        assert_eq!(zero.len(), modes.len());
        let warm = discrete_series(&modes, 0.4).unwrap();
        assert!(warm.terms().iter().all(|t| t.coefficient.re >= 0.0 && t.rate.re == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let tau: f64 = rng.random_range(0.0..200.0);
            for (series, temp) in [(&zero, 0.0), (&warm, 0.4)] {
                let d = (series.eval(tau) - correlation_discrete(&modes, temp, tau)).norm();
                assert!(d < 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn invalid_rates_rejected() {
        let bad = vec![ExpTerm { coefficient: Complex64::new(1.0, 0.0), rate: Complex64::new(-0.1, 0.0) }];
        assert!(CorrelationSeries::new(bad, SeriesOrigin::Compressed, None).is_err());
    }

    #[test]
    fn error_metrics() {
        let terms = vec![
            ExpTerm { coefficient: Complex64::new(1.0, -0.5), rate: Complex64::new(1.0, 0.0) },
            ExpTerm { coefficient: Complex64::new(0.3, 0.0), rate: Complex64::new(3.0, 0.0) },
            ExpTerm { coefficient: Complex64::new(-0.2, 0.1), rate: Complex64::new(0.5, 0.0) },
        ];
        let s = CorrelationSeries::new(terms.clone(), SeriesOrigin::Compressed, None).unwrap();
        let grid: Vec<(f64, Complex64)> = (0..2000).map(|i| {
            let t = i as f64 * 0.01;
            (t, s.eval(t))
        }).collect();
        let e = series_error(&s, &grid).unwrap();
        assert_eq!((e.max_abs, e.rel_l2), (0.0, 0.0));
        // dropping term 0: the misfit is exactly that term on the grid
        let dropped = CorrelationSeries::new(terms[1..].to_vec(), SeriesOrigin::Compressed, None).unwrap();
        let e = series_error(&dropped, &grid).unwrap();
        let num: f64 = grid.iter().map(|(t, _)| (terms[0].coefficient.norm() * (-t).exp()).powi(2)).sum();
        let den: f64 = grid.iter().map(|(_, c)| c.norm_sqr()).sum();
        assert!((e.rel_l2 - (num / den).sqrt()).abs() < 1e-12);
        assert!(series_error(&s, &[]).is_err());
    }

    #[test]
    fn recovers_two_exponentials() {
        let truth = CorrelationSeries::new(
            vec![
                ExpTerm { coefficient: Complex64::new(0.8, -0.3), rate: Complex64::new(0.7, 0.0) },
                ExpTerm { coefficient: Complex64::new(-0.25, 0.1), rate: Complex64::new(4.0, 0.0) },
            ],
            SeriesOrigin::Compressed,
            None,
        )
        .unwrap();
        let grid: Vec<(f64, Complex64)> = sample_grid(10.0, 1.0).into_iter().map(|t| (t, truth.eval(t))).collect();
        let fit = compress_series(&grid, 2, &FitConfig::default()).unwrap();
        for (a, b) in fit.terms().iter().zip(truth.terms()) {
            assert!((a.rate - b.rate).norm() < 1e-8, "{:?}", fit.terms());
            assert!((a.coefficient - b.coefficient).norm() < 1e-8);
        }
    }

    #[test]
    fn json_round_trip() {
        let b = DrudeLorentzBath::new(0.1, 2.0, 1.0).unwrap();
        let s = matsubara_series(&b, 3).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("re_nu"));
        let back: CorrelationSeries = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
