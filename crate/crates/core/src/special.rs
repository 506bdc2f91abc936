//! Scalar special functions used by the bath expressions.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Hyperbolic cotangent; `coth(x) -> sign(x)` for large |x|.
pub fn coth(x: f64) -> f64 {
    if x.abs() > 20.0 {
        return x.signum() * (1.0 + 2.0 * (-2.0 * x.abs()).exp());
    }
    1.0 / x.tanh()
}

/// Thermal factor coth(omega / (2 theta)) with theta = kT/(hbar omega_ref).
/// At theta = 0 this is 1 for omega > 0.
pub fn thermal_coth(omega: f64, theta: f64) -> f64 {
    if theta <= 0.0 {
        return 1.0;
    }
    coth(omega / (2.0 * theta))
}

/// Bose occupation 1/(e^{omega/theta} - 1); zero at theta = 0.
pub fn bose(omega: f64, theta: f64) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    let x = omega / theta;
    if x > 700.0 {
        return 0.0;
    }
    1.0 / x.exp_m1()
}

/// e^x E1(x) for x > 0.
pub fn e1_scaled(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires x > 0");
    if x <= 1.0 {
        // power series
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return x.exp() * (-EULER_GAMMA - x.ln() - sum);
    }
    // continued fraction (modified Lentz)
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut cc = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        cc = b + an / cc;
        let del = cc * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// e^{-x} Ei(x) for x > 0.
pub fn ei_scaled(x: f64) -> f64 {
    assert!(x > 0.0, "Ei requires x > 0");
    if x < 40.0 {
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 1..400 {
            fact *= x / k as f64;
            let term = fact / k as f64;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        return (-x).exp() * (EULER_GAMMA + x.ln() + sum);
    }
    // asymptotic series, truncated at the smallest term
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..100 {
        let next = term * k as f64 / x;
        if next > term {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 {
            break;
        }
    }
    sum / x
}

/// Binomial coefficient as u128; `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_reference_values() {
        // E1(0.5) = 0.5597735947761608, E1(2) = 0.04890051070806112
        assert!((e1_scaled(0.5) * (-0.5f64).exp() - 0.559_773_594_776_160_8).abs() < 1e-14);
        assert!((e1_scaled(2.0) * (-2.0f64).exp() - 0.048_900_510_708_061_12).abs() < 1e-15);
    }

    #[test]
    fn ei_reference_values() {
        // Ei(1) = 1.8951178163559368, Ei(50) = 1.0585636897131690e20
        assert!((ei_scaled(1.0) * 1f64.exp() - 1.895_117_816_355_936_8).abs() < 1e-13);
        let ei50 = ei_scaled(50.0) * 50f64.exp();
        assert!((ei50 / 1.058_563_689_713_169e20 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), Some(20));
        assert_eq!(binomial(9, 3), Some(84));
        assert_eq!(binomial(200, 100).is_none(), true);
    }

    #[test]
    fn thermal_factors() {
        assert_eq!(thermal_coth(1.0, 0.0), 1.0);
        assert!((thermal_coth(1.0, 0.5) - 1.0 / 1f64.tanh()).abs() < 1e-15);
        assert!((2.0 * bose(0.3, 0.7) + 1.0 - thermal_coth(0.3, 0.7)).abs() < 1e-13);
    }
}
