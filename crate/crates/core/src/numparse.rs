//! Numeric literal extraction and decade decomposition.
//!
//! Every supported number lives in `[1, 1e16]` and is written as
//! `mantissa * 10^exponent` with `mantissa` in `[1, 10)`. The single closed
//! upper boundary `1e16` gets exponent 16, so there are 17 exponent classes.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_EXPONENT: u32 = 16;
pub const N_EXPONENTS: usize = MAX_EXPONENT as usize + 1;
pub const MAX_VALUE: f64 = 1e16;

/// Exact powers of ten, `10^0 ..= 10^17`.
pub(crate) const POW10: [f64; 18] = [
    1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15, 1e16,
    1e17,
];

pub(crate) fn pow10(k: usize) -> f64 {
    POW10[k]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsedNumber {
    pub value: f64,
    pub exponent: u32,
    pub mantissa: f64,
}

pub fn in_range(value: f64) -> bool {
    value.is_finite() && (1.0..=MAX_VALUE).contains(&value)
}

/// Splits `value` into its decade exponent and mantissa.
pub fn decompose(value: f64) -> Result<ParsedNumber> {
    if !in_range(value) {
        return Err(Error::OutOfRange(value));
    }
    // log10 can land a hair below an exact power of ten; fix up by comparing
    // against the exact table.
    let mut e = (value.log10().floor() as i64).clamp(0, MAX_EXPONENT as i64) as usize;
    while e > 0 && POW10[e] > value {
        e -= 1;
    }
    while e < MAX_EXPONENT as usize && POW10[e + 1] <= value {
        e += 1;
    }
    let mut mantissa = value / POW10[e];
    if mantissa >= 10.0 {
        mantissa = f64::from_bits(10f64.to_bits() - 1);
    }
    Ok(ParsedNumber { value, exponent: e as u32, mantissa })
}

pub fn recompose(exponent: u32, mantissa: f64) -> Result<f64> {
    let valid_mantissa = if exponent == MAX_EXPONENT {
        mantissa == 1.0
    } else {
        (1.0..10.0).contains(&mantissa)
    };
    if exponent > MAX_EXPONENT || !valid_mantissa {
        return Err(Error::OutOfRange(mantissa * 10f64.powi(exponent as i32)));
    }
    Ok(mantissa * POW10[exponent as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanStatus {
    Ok,
    /// Positive but below 1 or above 1e16 (or too large to be finite).
    OutOfRange,
    Zero,
    Negative,
}

impl SpanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SpanStatus::Ok => "ok",
            SpanStatus::OutOfRange => "out_of_range",
            SpanStatus::Zero => "zero",
            SpanStatus::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub value: f64,
    pub status: SpanStatus,
    pub parsed: Option<ParsedNumber>,
}

const CURRENCY: [char; 4] = ['$', '€', '£', '¥'];

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn digits_end(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    i
}

/// Scans one literal whose first digit is at `start`; returns its end.
fn scan_literal(bytes: &[u8], start: usize) -> usize {
    let mut i = digits_end(bytes, start);
    // Thousands groups are only legal after a 1-3 digit head and must be
    // exactly three digits wide.
    if i - start <= 3 {
        loop {
            if i < bytes.len() && bytes[i] == b',' {
                let group_end = digits_end(bytes, i + 1);
                if group_end - (i + 1) == 3 {
                    i = group_end;
                    continue;
                }
            }
            break;
        }
    }
    if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
        i = digits_end(bytes, i + 1);
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let exp_end = digits_end(bytes, j);
        let followed_by_word = exp_end < bytes.len() && is_word_byte(bytes[exp_end]);
        if exp_end > j && !followed_by_word {
            i = exp_end;
        }
    }
    i
}

/// Finds every maximal numeric literal in `text`, left to right.
///
/// A leading currency symbol is not part of the span. A leading `-` is,
/// and marks the span as negative. Literals glued to a preceding letter or
/// digit (`FY2018`) are not numbers.
pub fn extract(text: &str) -> Vec<NumberSpan> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() || (i > 0 && is_word_byte(bytes[i - 1])) {
            i += 1;
            continue;
        }
        let mut start = i;
        // ".5" style literal: keep the dot unless it trails another number.
        if i > 0 && bytes[i - 1] == b'.' && (i < 2 || !bytes[i - 2].is_ascii_digit()) {
            start = i - 1;
        } else if i > 0 && bytes[i - 1] == b'.' {
            // remainder of something like "1.2.3"; skip it
            i = digits_end(bytes, i);
            continue;
        }
        let mut negative = false;
        if start > 0 && bytes[start - 1] == b'-' {
            let before = text[..start - 1].chars().next_back();
            let sign_ok = match before {
                None => true,
                Some(c) => !c.is_alphanumeric() || CURRENCY.contains(&c),
            };
            if sign_ok {
                start -= 1;
                negative = true;
            }
        }
        let end = scan_literal(bytes, i);
        let surface = &text[start..end];
        let cleaned: String = surface.chars().filter(|&c| c != ',').collect();
        let value = cleaned.parse::<f64>().unwrap_or(f64::NAN);
        let status = if negative && value != 0.0 {
            SpanStatus::Negative
        } else if value == 0.0 {
            SpanStatus::Zero
        } else if in_range(value) {
            SpanStatus::Ok
        } else {
            SpanStatus::OutOfRange
        };
        let parsed = match status {
            SpanStatus::Ok => decompose(value).ok(),
            _ => None,
        };
        spans.push(NumberSpan { start, end, surface: surface.to_string(), value, status, parsed });
        i = end;
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_examples() {
        let p = decompose(600.0).unwrap();
        assert_eq!((p.exponent, p.mantissa), (2, 6.0));
        let p = decompose(1.0).unwrap();
        assert_eq!((p.exponent, p.mantissa), (0, 1.0));
        let p = decompose(999_999.0).unwrap();
        assert_eq!(p.exponent, 5);
        assert!((p.mantissa - 9.99999).abs() < 1e-12);
    }

    #[test]
    fn decade_boundaries_are_exact() {
        for (k, &b) in POW10[..17].iter().enumerate() {
            let p = decompose(b).unwrap();
            assert_eq!(p.exponent as usize, k);
            assert_eq!(p.mantissa, 1.0);
        }
        let below = f64::from_bits(1000f64.to_bits() - 1);
        let p = decompose(below).unwrap();
        assert_eq!(p.exponent, 2);
        assert!(p.mantissa < 10.0);
    }

    #[test]
    fn decompose_rejects_out_of_range() {
        for v in [0.0, 0.999, -5.0, 1.0000000000000002e16, f64::NAN, f64::INFINITY] {
            assert!(matches!(decompose(v), Err(Error::OutOfRange(_))), "{v}");
        }
    }

    #[test]
    fn recompose_examples() {
        assert_eq!(recompose(2, 6.0).unwrap(), 600.0);
        assert_eq!(recompose(0, 1.0).unwrap(), 1.0);
        let v = recompose(2, 3.1622776601).unwrap();
        assert!((v - 316.22776601).abs() < 1e-9);
        assert_eq!(recompose(16, 1.0).unwrap(), 1e16);
        assert!(recompose(16, 2.0).is_err());
        assert!(recompose(17, 1.0).is_err());
        assert!(recompose(3, 10.0).is_err());
        assert!(recompose(3, 0.5).is_err());
    }

    fn values(text: &str) -> Vec<f64> {
        extract(text).into_iter().map(|s| s.value).collect()
    }

    #[test]
    fn extract_examples() {
        let spans = extract("Cohen paid her $130000 via");
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].value, 130000.0);
        assert_eq!(spans[0].surface, "130000");
        assert!(extract("An adult tiger can weigh [MASK] pounds.").is_empty());
        assert_eq!(values("from 1,700,000 onward"), vec![1_700_000.0]);
    }

    #[test]
    fn extract_grammar() {
        assert_eq!(values("pi is 3.25."), vec![3.25]);
        assert_eq!(values("about 6e2 or 1.5E3 units"), vec![600.0, 1500.0]);
        assert_eq!(values("1,70 and 1,7000"), vec![1.0, 70.0, 1.0, 7000.0]);
        assert_eq!(values("1234,567"), vec![1234.0, 567.0]);
        assert_eq!(values("FY2018 view"), Vec::<f64>::new());
        assert_eq!(values("10km 3rd"), vec![10.0, 3.0]);
        assert_eq!(values("2017-2018"), vec![2017.0, 2018.0]);
        assert_eq!(values("1e5x"), vec![1.0]);
    }

    #[test]
    fn extract_flags_bad_values() {
        let spans = extract("lost -5 then 0 and 0.25 then 20000000000000000 and .5");
        let statuses: Vec<_> = spans.iter().map(|s| s.status).collect();
        assert_eq!(
            statuses,
            vec![
                SpanStatus::Negative,
                SpanStatus::Zero,
                SpanStatus::OutOfRange,
                SpanStatus::OutOfRange,
                SpanStatus::OutOfRange
            ]
        );
        assert_eq!(spans[0].surface, "-5");
        assert_eq!(spans[4].surface, ".5");
        assert!(spans.iter().all(|s| s.parsed.is_none()));
    }

    #[test]
    fn extract_offsets_with_multibyte_text() {
        let text = "€1,250 für Käse, £30 später";
        for s in extract(text) {
            assert_eq!(&text[s.start..s.end], s.surface);
        }
        assert_eq!(values(text), vec![1250.0, 30.0]);
    }
}
