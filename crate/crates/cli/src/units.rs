//! Quantities written as "<number> <prefix><unit>", e.g. "100 fF" or "5 GHz".

use std::sync::OnceLock;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Farad,
    Henry,
    Ohm,
    Hertz,
    RadPerSecond,
    Kelvin,
    Metre,
    MetrePerSecond,
    Second,
}

impl Unit {
    fn symbol(self) -> &'static str {
        match self {
            Unit::Farad => "F",
            Unit::Henry => "H",
            Unit::Ohm => "Ohm",
            Unit::Hertz => "Hz",
            Unit::RadPerSecond => "rad/s",
            Unit::Kelvin => "K",
            Unit::Metre => "m",
            Unit::MetrePerSecond => "m/s",
            Unit::Second => "s",
        }
    }

    fn aliases(self) -> &'static [&'static str] {
        match self {
            Unit::Farad => &["F"],
            Unit::Henry => &["H"],
            Unit::Ohm => &["Ohm", "ohm", "Ω"],
            Unit::Hertz => &["Hz"],
            Unit::RadPerSecond => &["rad/s"],
            Unit::Kelvin => &["K"],
            Unit::Metre => &["m"],
            Unit::MetrePerSecond => &["m/s"],
            Unit::Second => &["s"],
        }
    }
}

fn prefix_factor(p: &str) -> Option<f64> {
    Some(match p {
        "" => 1.0,
        "a" => 1e-18,
        "f" => 1e-15,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" | "µ" | "μ" => 1e-6,
        "m" => 1e-3,
        "c" => 1e-2,
        "k" => 1e3,
        "M" => 1e6,
        "G" => 1e9,
        "T" => 1e12,
        _ => return None,
    })
}

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$").expect("valid regex")
    })
}

/// Parse `text` into SI units of `unit`.
pub fn parse_quantity(text: &str, unit: Unit) -> Result<f64, String> {
    let caps = pattern()
        .captures(text)
        .ok_or_else(|| format!("'{text}': expected '<number> <unit>' with unit {}", unit.symbol()))?;
    let value: f64 = caps[1].parse().map_err(|_| format!("'{text}': bad number"))?;
    let suffix = &caps[2];
    for alias in unit.aliases() {
        if let Some(prefix) = suffix.strip_suffix(alias) {
            // "m" alone is metres, not milli-nothing
            if let Some(f) = prefix_factor(prefix) {
                return Ok(value * f);
            }
        }
    }
    Err(format!("'{text}': unit '{suffix}' is not a (prefixed) {}", unit.symbol()))
}

/// SI value back to a string with the same unit, for reports.
pub fn format_quantity(value: f64, unit: Unit) -> String {
    format!("{value:e} {}", unit.symbol())
}
