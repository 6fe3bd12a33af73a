//! Quantities written as plain numbers in canonical units (Hz, ps, W) or as
//! strings with a unit suffix, e.g. `"75GHz"`, `"7.78ps"`, `"700mW"`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// Suffix and power of ten relative to the canonical unit.
type Units = &'static [(&'static str, i32)];

const FREQUENCY: Units = &[("THz", 12), ("GHz", 9), ("MHz", 6), ("kHz", 3), ("Hz", 0)];
const TIME: Units = &[
    ("fs", -3),
    ("ps", 0),
    ("ns", 3),
    ("us", 6),
    ("µs", 6),
    ("ms", 9),
    ("s", 12),
];
const POWER: Units = &[("mW", -3), ("kW", 3), ("W", 0)];

/// Parses `text` against a suffix table. A bare number is taken as canonical.
fn parse(text: &str, units: Units, what: &str) -> Result<f64, String> {
    let text = text.trim();
    let (number, exp) = units
        .iter()
        .find_map(|&(suffix, exp)| text.strip_suffix(suffix).map(|n| (n, exp)))
        .unwrap_or((text, 0));
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("cannot read {what} from {text:?}"))?;
    if !value.is_finite() {
        return Err(format!("{what} {text:?} is not finite"));
    }
    // dividing by an exact power of ten keeps "700mW" at exactly 0.7
    Ok(if exp < 0 {
        value / 10f64.powi(-exp)
    } else {
        value * 10f64.powi(exp)
    })
}

pub fn parse_frequency(text: &str) -> Result<f64, String> {
    parse(text, FREQUENCY, "a frequency")
}

pub fn parse_time(text: &str) -> Result<f64, String> {
    parse(text, TIME, "a time")
}

pub fn parse_power(text: &str) -> Result<f64, String> {
    parse(text, POWER, "a power")
}

struct QuantityVisitor(fn(&str) -> Result<f64, String>, &'static str);

impl Visitor<'_> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a number in {} or a string with a unit suffix", self.1)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        (self.0)(v).map_err(E::custom)
    }
}

macro_rules! quantity {
    ($name:ident, $parse:ident, $unit:literal) => {
        #[doc = concat!("Stored in ", $unit, ".")]
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                d.deserialize_any(QuantityVisitor($parse, $unit)).map($name)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }
    };
}

quantity!(Frequency, parse_frequency, "Hz");
quantity!(Time, parse_time, "ps");
quantity!(Power, parse_power, "W");

impl Time {
    /// Whole picoseconds; tag times are integers.
    pub fn whole_ps(self, field: &str) -> Result<i64, String> {
        let r = self.0.round();
        if (self.0 - r).abs() > 1e-6 {
            return Err(format!(
                "{field} must be a whole number of picoseconds, got {} ps",
                self.0
            ));
        }
        Ok(r as i64)
    }

    pub fn seconds(self) -> f64 {
        self.0 * 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_frequency("75GHz").unwrap(), 75e9);
        assert_eq!(parse_frequency("2 THz").unwrap(), 2e12);
        assert_eq!(parse_frequency("1.5e6").unwrap(), 1.5e6);
        assert_eq!(parse_time("7.78ps").unwrap(), 7.78);
        assert_eq!(parse_time("2ns").unwrap(), 2000.0);
        assert_eq!(parse_time("500fs").unwrap(), 0.5);
        assert_eq!(parse_time("1s").unwrap(), 1e12);
        assert_eq!(parse_power("700mW").unwrap(), 0.7);
        assert_eq!(parse_power("35W").unwrap(), 35.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_frequency("fast").is_err());
        assert!(parse_time("3 parsecs").is_err());
        assert!(parse_power("inf W").is_err());
        // a frequency suffix is not a time
        assert!(parse_time("5GHz").is_err());
    }

    #[test]
    fn json_forms() {
        let f: Vec<Frequency> = serde_json::from_str(r#"[105e9, "105GHz", 105000000000]"#).unwrap();
        assert!(f.iter().all(|x| x.0 == 105e9));
        assert!(serde_json::from_str::<Time>("true").is_err());
        assert_eq!(serde_json::to_string(&Time(7.5)).unwrap(), "7.5");
    }

    #[test]
    fn whole_picoseconds() {
        assert_eq!(Time(2000.0).whole_ps("x").unwrap(), 2000);
        assert!(Time(0.5).whole_ps("x").is_err());
    }
}
