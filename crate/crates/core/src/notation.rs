//! Token renderings of numbers and their strict inverses.
//!
//! Every scheme renders a number into a fixed-length sequence right-padded
//! with a reserved pad token. Parsing accepts exactly what the renderer can
//! produce: a candidate is decoded, re-rendered, and compared token for token.

use serde::{Deserialize, Serialize};

use crate::numparse::{self, ParsedNumber};
use crate::{Error, Result};

pub const PAD: &str = "[PAD]";
/// Continuation marker for subword pieces.
pub const CONT: &str = "##";
pub const SCIENTIFIC_DIGITS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Decimal string split into pieces of at most two characters with
    /// `##` continuation markers (a fixed subword vocabulary).
    Decimal,
    Digits,
    Scientific,
    #[serde(rename = "numbert")]
    NumBert,
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "decimal" | "subword" => Ok(SchemeKind::Decimal),
            "digits" => Ok(SchemeKind::Digits),
            "scientific" => Ok(SchemeKind::Scientific),
            "numbert" => Ok(SchemeKind::NumBert),
            other => Err(Error::Usage(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotationScheme {
    pub kind: SchemeKind,
    pub pad_len: usize,
    pub pad_token: String,
    pub exp_separator: String,
    /// NumBERT only: write `329` as `3 x 29 2` (lead digit, separator, the
    /// remaining mantissa digits, exponent) instead of `329 [EXP] 2`.
    #[serde(default)]
    pub lead_split: bool,
}

impl NotationScheme {
    pub fn new(kind: SchemeKind) -> Self {
        match kind {
            SchemeKind::Decimal => Self::decimal(),
            SchemeKind::Digits => Self::digits(),
            SchemeKind::Scientific => Self::scientific(),
            SchemeKind::NumBert => Self::numbert(),
        }
    }

    pub fn decimal() -> Self {
        Self::with(SchemeKind::Decimal, 8, "")
    }

    pub fn digits() -> Self {
        Self::with(SchemeKind::Digits, 17, "")
    }

    pub fn scientific() -> Self {
        Self::with(SchemeKind::Scientific, 8, "e")
    }

    pub fn numbert() -> Self {
        Self::with(SchemeKind::NumBert, 8, "[EXP]")
    }

    pub fn numbert_lead_split() -> Self {
        NotationScheme { lead_split: true, ..Self::with(SchemeKind::NumBert, 8, "x") }
    }

    fn with(kind: SchemeKind, pad_len: usize, sep: &str) -> Self {
        NotationScheme {
            kind,
            pad_len,
            pad_token: PAD.to_string(),
            exp_separator: sep.to_string(),
            lead_split: false,
        }
    }

    pub fn with_pad(mut self, pad_len: usize) -> Self {
        self.pad_len = pad_len;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.pad_len == 0 {
            return Err(Error::InvalidParam("pad_len must be positive".into()));
        }
        if self.pad_token.is_empty() || self.pad_token.chars().any(|c| c.is_ascii_digit()) {
            return Err(Error::InvalidParam("pad token must be non-empty and digit-free".into()));
        }
        let needs_sep = matches!(self.kind, SchemeKind::Scientific | SchemeKind::NumBert);
        if needs_sep
            && (self.exp_separator.is_empty()
                || self.exp_separator.chars().any(|c| c.is_ascii_digit() || c == '.')
                || self.exp_separator == self.pad_token)
        {
            return Err(Error::InvalidParam(format!(
                "bad exponent separator {:?}",
                self.exp_separator
            )));
        }
        Ok(())
    }

    /// Closed token vocabulary, pad token first. `None` for NumBERT whose
    /// mantissa tokens are multi-digit integers.
    pub fn vocabulary(&self) -> Option<Vec<String>> {
        let digits = || (0..10).map(|d| d.to_string());
        let mut vocab = vec![self.pad_token.clone()];
        match self.kind {
            SchemeKind::Digits => {
                vocab.extend(digits());
                vocab.push(".".into());
            }
            SchemeKind::Scientific => {
                vocab.extend(digits());
                vocab.push(".".into());
                vocab.push(self.exp_separator.clone());
            }
            SchemeKind::Decimal => {
                vocab.push(".".into());
                vocab.extend((1..100).map(|n| n.to_string()));
                vocab.extend((0..10).map(|n| format!("{CONT}{n}")));
                vocab.extend((0..100).map(|n| format!("{CONT}{n:02}")));
            }
            SchemeKind::NumBert => return None,
        }
        Some(vocab)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberToken {
    pub tokens: Vec<String>,
    pub scheme: NotationScheme,
}

impl NumberToken {
    /// Tokens with trailing padding removed.
    pub fn content(&self) -> &[String] {
        let n = self.tokens.iter().rposition(|t| *t != self.scheme.pad_token).map_or(0, |i| i + 1);
        &self.tokens[..n]
    }
}

/// Shortest decimal string that round-trips; never uses exponent notation.
pub fn canonical_decimal(value: f64) -> String {
    format!("{value}")
}

/// Mantissa (without trailing zeros) and exponent strings at
/// [`SCIENTIFIC_DIGITS`] significant digits.
fn scientific_parts(value: f64) -> (String, String) {
    let s = format!("{:.*e}", SCIENTIFIC_DIGITS - 1, value);
    let (mant, exp) = s.split_once('e').expect("LowerExp always has an exponent");
    let mant = mant.trim_end_matches('0').trim_end_matches('.');
    (mant.to_string(), exp.to_string())
}

/// Rounds to the precision the scientific schemes can carry.
pub fn quantize_scientific(value: f64) -> f64 {
    let (m, e) = scientific_parts(value);
    format!("{m}e{e}").parse().expect("formatted float parses")
}

fn split_pairs(s: &str) -> impl Iterator<Item = &str> {
    (0..s.len()).step_by(2).map(move |i| &s[i..(i + 2).min(s.len())])
}

fn render_content(value: f64, scheme: &NotationScheme) -> Vec<String> {
    let chars = |s: &str| s.chars().map(String::from).collect::<Vec<_>>();
    match scheme.kind {
        SchemeKind::Digits => chars(&canonical_decimal(value)),
        SchemeKind::Decimal => {
            let s = canonical_decimal(value);
            let (int, frac) = match s.split_once('.') {
                Some((i, f)) => (i.to_string(), Some(f.to_string())),
                None => (s, None),
            };
            let mut out: Vec<String> = Vec::new();
            for (i, piece) in split_pairs(&int).enumerate() {
                out.push(if i == 0 { piece.to_string() } else { format!("{CONT}{piece}") });
            }
            if let Some(frac) = frac {
                out.push(".".into());
                out.extend(split_pairs(&frac).map(|p| format!("{CONT}{p}")));
            }
            out
        }
        SchemeKind::Scientific => {
            let (m, e) = scientific_parts(value);
            let mut out = chars(&m);
            out.push(scheme.exp_separator.clone());
            out.extend(chars(&e));
            out
        }
        SchemeKind::NumBert => {
            let (m, e) = scientific_parts(value);
            let digits: String = m.chars().filter(|c| *c != '.').collect();
            if scheme.lead_split {
                let (lead, rest) = digits.split_at(1);
                let mut out = vec![lead.to_string(), scheme.exp_separator.clone()];
                if !rest.is_empty() {
                    out.push(rest.to_string());
                }
                out.push(e);
                out
            } else {
                vec![digits, scheme.exp_separator.clone(), e]
            }
        }
    }
}

/// Renders `n` under `scheme`, padded to `scheme.pad_len`.
pub fn render(n: &ParsedNumber, scheme: &NotationScheme) -> Result<NumberToken> {
    scheme.validate()?;
    let mut tokens = render_content(n.value, scheme);
    if tokens.len() > scheme.pad_len {
        return Err(Error::Overflow { needed: tokens.len(), pad_len: scheme.pad_len });
    }
    tokens.resize(scheme.pad_len, scheme.pad_token.clone());
    Ok(NumberToken { tokens, scheme: scheme.clone() })
}

pub fn to_digits(n: &ParsedNumber) -> Result<NumberToken> {
    render(n, &NotationScheme::digits())
}

pub fn to_scientific(n: &ParsedNumber) -> Result<NumberToken> {
    render(n, &NotationScheme::scientific())
}

pub fn to_numbert(n: &ParsedNumber) -> Result<NumberToken> {
    render(n, &NotationScheme::numbert())
}

/// Candidate decimal string for a content sequence, before the canonical
/// re-render check.
fn assemble(content: &[String], scheme: &NotationScheme) -> Option<String> {
    let sep = scheme.exp_separator.as_str();
    match scheme.kind {
        SchemeKind::Digits => Some(content.concat()),
        SchemeKind::Decimal => Some(content.iter().map(|t| t.trim_start_matches(CONT)).collect()),
        SchemeKind::Scientific => {
            let pos = content.iter().position(|t| t == sep)?;
            let mant = content[..pos].concat();
            let exp = content[pos + 1..].concat();
            if mant.is_empty() || exp.is_empty() {
                return None;
            }
            Some(format!("{mant}e{exp}"))
        }
        SchemeKind::NumBert => {
            let (digits, exp) = if scheme.lead_split {
                match content {
                    [lead, s, exp] if s == sep => (lead.clone(), exp),
                    [lead, s, rest, exp] if s == sep => (format!("{lead}{rest}"), exp),
                    _ => return None,
                }
            } else {
                match content {
                    [digits, s, exp] if s == sep => (digits.clone(), exp),
                    _ => return None,
                }
            };
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let (lead, rest) = digits.split_at(1);
            Some(format!("{lead}.{rest}0e{exp}"))
        }
    }
}

/// Strict inverse of [`render`]. `None` means the sequence is not a valid
/// rendering of any in-range number.
pub fn parse_tokens(t: &NumberToken) -> Option<ParsedNumber> {
    parse_token_slice(&t.tokens, &t.scheme)
}

pub fn parse_token_slice(tokens: &[String], scheme: &NotationScheme) -> Option<ParsedNumber> {
    if tokens.len() != scheme.pad_len || scheme.validate().is_err() {
        return None;
    }
    let end = tokens.iter().rposition(|t| *t != scheme.pad_token).map_or(0, |i| i + 1);
    let content = &tokens[..end];
    if content.is_empty() || content.contains(&scheme.pad_token) {
        return None;
    }
    let candidate = assemble(content, scheme)?;
    if !candidate.bytes().all(|b| b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'-') {
        return None;
    }
    let value: f64 = candidate.parse().ok()?;
    let parsed = numparse::decompose(value).ok()?;
    if render_content(value, scheme) != content {
        return None;
    }
    Some(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose;

    fn toks(t: &NumberToken) -> Vec<&str> {
        t.tokens.iter().map(String::as_str).collect()
    }

    fn padded(content: &[&str], scheme: &NotationScheme) -> NumberToken {
        let mut tokens: Vec<String> = content.iter().map(|s| s.to_string()).collect();
        tokens.resize(scheme.pad_len, scheme.pad_token.clone());
        NumberToken { tokens, scheme: scheme.clone() }
    }

    #[test]
    fn digits_examples() {
        let t = to_digits(&decompose(600.0).unwrap()).unwrap();
        assert_eq!(toks(&t)[..3], ["6", "0", "0"]);
        assert!(t.tokens[3..].iter().all(|x| x == PAD));
        assert_eq!(t.tokens.len(), 17);
        let t = to_digits(&decompose(1.0).unwrap()).unwrap();
        assert_eq!(t.content(), ["1"]);
        let t = to_digits(&decompose(1e16).unwrap()).unwrap();
        assert_eq!(t.content().len(), 17);
        assert_eq!(t.tokens[0], "1");
        assert!(t.tokens[1..].iter().all(|x| x == "0"));
        let t = to_digits(&decompose(1.63).unwrap()).unwrap();
        assert_eq!(t.content(), ["1", ".", "6", "3"]);
    }

    #[test]
    fn digits_overflow() {
        let err = render(&decompose(123456.789).unwrap(), &NotationScheme::digits().with_pad(8));
        assert!(matches!(err, Err(Error::Overflow { needed: 10, pad_len: 8 })));
    }

    #[test]
    fn scientific_examples() {
        let t = to_scientific(&decompose(600.0).unwrap()).unwrap();
        assert_eq!(toks(&t), ["6", "e", "2", PAD, PAD, PAD, PAD, PAD]);
        let t = to_scientific(&decompose(1.0).unwrap()).unwrap();
        assert_eq!(t.content(), ["1", "e", "0"]);
        let t = to_numbert(&decompose(329.0).unwrap()).unwrap();
        assert_eq!(t.content(), ["329", "[EXP]", "2"]);
        let t = to_scientific(&decompose(9_876_543_210_123_456.0 / 1.0 / 10.0).unwrap()).unwrap();
        assert_eq!(t.content(), ["9", ".", "8", "7", "7", "e", "1", "4"]);
    }

    #[test]
    fn lead_split_variant() {
        let s = NotationScheme::numbert_lead_split();
        let t = render(&decompose(329.0).unwrap(), &s).unwrap();
        assert_eq!(t.content(), ["3", "x", "29", "2"]);
        let t6 = render(&decompose(600.0).unwrap(), &s).unwrap();
        assert_eq!(t6.content(), ["6", "x", "2"]);
        assert_eq!(parse_tokens(&t).unwrap().value, 329.0);
        assert_eq!(parse_tokens(&t6).unwrap().value, 600.0);
    }

    #[test]
    fn decimal_pieces() {
        let s = NotationScheme::decimal();
        let t = render(&decompose(600.0).unwrap(), &s).unwrap();
        assert_eq!(t.content(), ["60", "##0"]);
        let t = render(&decompose(1.635).unwrap(), &s).unwrap();
        assert_eq!(t.content(), ["1", ".", "##63", "##5"]);
        let t = render(&decompose(9_999_999_999_999_998.0).unwrap(), &s).unwrap();
        assert_eq!(t.content().len(), 8);
        assert!(matches!(render(&decompose(1e16).unwrap(), &s), Err(Error::Overflow { .. })));
        let vocab = s.vocabulary().unwrap();
        for v in [600.0, 1.635, 12345.0, 2017.0] {
            let t = render(&decompose(v).unwrap(), &s).unwrap();
            assert!(t.tokens.iter().all(|x| vocab.contains(x)), "{v}");
        }
    }

    #[test]
    fn parse_examples() {
        let sci = NotationScheme::scientific();
        assert_eq!(parse_tokens(&padded(&["6", "e", "2"], &sci)).unwrap().value, 600.0);
        assert!(parse_tokens(&padded(&["e", "2"], &sci)).is_none());
        let dig = NotationScheme::digits();
        assert_eq!(parse_tokens(&padded(&["6", "0", "0"], &dig)).unwrap().value, 600.0);
    }

    #[test]
    fn parse_rejects_non_canonical() {
        let sci = NotationScheme::scientific();
        let dig = NotationScheme::digits();
        let dec = NotationScheme::decimal();
        let bad = [
            padded(&["6", "e", "e", "2"], &sci),
            padded(&["6", ".", "0", "e", "2"], &sci),
            padded(&["6", "e"], &sci),
            padded(&["6", "e", "2", "0"], &sci),
            padded(&["6", "e", "1", "7"], &sci),
            padded(&["0", "6"], &dig),
            padded(&["1", ".", "5", "0"], &dig),
            padded(&[".", "5"], &dig),
            padded(&["0"], &dig),
            padded(&["##60", "##0"], &dec),
            padded(&["6", "##00"], &dec),
            padded(&["60", "##0", "."], &dec),
            padded(&[], &dig),
        ];
        for t in &bad {
            assert!(parse_tokens(t).is_none(), "{:?}", t.tokens);
        }
        let mut mid_pad = padded(&["6", "0", "0"], &dig);
        mid_pad.tokens[1] = PAD.into();
        assert!(parse_tokens(&mid_pad).is_none());
        let short = NumberToken { tokens: vec!["6".into()], scheme: dig.clone() };
        assert!(parse_tokens(&short).is_none());
        let nb = NotationScheme::numbert();
        assert!(parse_tokens(&padded(&["0329", "[EXP]", "2"], &nb)).is_none());
        assert!(parse_tokens(&padded(&["3290", "[EXP]", "2"], &nb)).is_none());
        assert!(parse_tokens(&padded(&["329", "[EXP]", "-2"], &nb)).is_none());
    }

    #[test]
    fn quantize_matches_scientific_render() {
        assert_eq!(quantize_scientific(123456.0), 123500.0);
        assert_eq!(quantize_scientific(99996.0), 100000.0);
        assert_eq!(quantize_scientific(600.0), 600.0);
    }

    #[test]
    fn invalid_schemes_rejected() {
        let mut s = NotationScheme::scientific();
        s.exp_separator = "1".into();
        assert!(render(&decompose(5.0).unwrap(), &s).is_err());
        let mut s = NotationScheme::digits();
        s.pad_token = "0".into();
        assert!(s.validate().is_err());
    }
}
