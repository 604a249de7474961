//! Suffixed physical literals such as `1e-8m`, `10nm` or `1e-30kg`.

use geomforce_core::{Error, Result};

/// A parsed literal. `value` is in SI units; `unit` is set when a suffix was given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Option<&'static str>,
}

impl Quantity {
    pub fn has_unit(&self) -> bool {
        self.unit.is_some()
    }
}

const LENGTHS: [(&str, f64); 6] = [("nm", 1e-9), ("um", 1e-6), ("mm", 1e-3), ("pm", 1e-12), ("cm", 1e-2), ("m", 1.0)];
const MASSES: [(&str, f64); 2] = [("kg", 1.0), ("g", 1e-3)];

fn split(text: &str, table: &[(&'static str, f64)], what: &str) -> Result<Quantity> {
    let t = text.trim();
    for (suffix, factor) in table {
        if let Some(num) = t.strip_suffix(suffix) {
            if let Ok(v) = num.trim().parse::<f64>() {
                return Ok(Quantity {
                    value: v * factor,
                    unit: Some(suffix),
                });
            }
        }
    }
    t.parse::<f64>().map(|value| Quantity { value, unit: None }).map_err(|_| {
        Error::InvalidInput(format!("cannot read `{text}` as a {what}"))
    })
}

pub fn parse_length(text: &str) -> Result<Quantity> {
    split(text, &LENGTHS, "length")
}

pub fn parse_mass(text: &str) -> Result<Quantity> {
    split(text, &MASSES, "mass")
}

pub fn positive(q: Quantity, name: &str) -> Result<f64> {
    if q.value.is_finite() && q.value > 0.0 {
        Ok(q.value)
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {}", q.value)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_length("1e-8m").unwrap().value, 1e-8);
        assert!((parse_length("10nm").unwrap().value - 1e-8).abs() < 1e-24);
        assert_eq!(parse_length("2.5").unwrap(), Quantity { value: 2.5, unit: None });
        assert_eq!(parse_mass("1e-30kg").unwrap().value, 1e-30);
        assert_eq!(parse_mass("1e-30").unwrap().unit, None);
        assert!(parse_mass("3 stone").is_err());
        assert!(parse_length("nm").is_err());
    }
}
