//! Serde helpers for reals that may be infinite.
//!
//! JSON has no infinity literal, so `±∞` is written as the strings `"inf"` and
//! `"-inf"`; finite values stay numbers.

use serde::{de, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Text(t) => parse_real(&t)
            .ok_or_else(|| de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
    }
}

/// Parses a real number, accepting `inf`, `+inf`, `-inf` and `infinity` in any case.
pub fn parse_real(text: &str) -> Option<f64> {
    let t = text.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => t.parse::<f64>().ok().filter(|v| !v.is_nan()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Wrap(#[serde(with = "super")] f64);

    #[test]
    fn round_trips() {
        for v in [1.5, -3.0, f64::INFINITY, f64::NEG_INFINITY] {
            let text = serde_json::to_string(&Wrap(v)).unwrap();
            assert_eq!(serde_json::from_str::<Wrap>(&text).unwrap(), Wrap(v));
        }
        assert_eq!(
            serde_json::to_string(&Wrap(f64::INFINITY)).unwrap(),
            "\"inf\""
        );
        assert!(serde_json::from_str::<Wrap>("\"abc\"").is_err());
    }

    #[test]
    fn parses_text() {
        assert_eq!(parse_real(" Inf "), Some(f64::INFINITY));
        assert_eq!(parse_real("-infinity"), Some(f64::NEG_INFINITY));
        assert_eq!(parse_real("2.5e-3"), Some(2.5e-3));
        assert_eq!(parse_real("nan"), None);
        assert_eq!(parse_real("x"), None);
    }
}
