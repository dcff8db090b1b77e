//! Exact numbers for IR tokens.
//!
//! All formulation arithmetic runs on [`Rational`] (arbitrary precision), so
//! "a third" stays exactly 1/3 until it is rendered.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

/// Where a numeric token appears; ratio limits accept bare percents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumberContext {
    Param,
    Limit,
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse number from {token:?}")]
pub struct NumberParseError {
    pub token: String,
}

const UNITS: &[(&str, i64)] = &[
    ("zero", 0),
    ("one", 1),
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
    ("eight", 8),
    ("nine", 9),
    ("ten", 10),
    ("eleven", 11),
    ("twelve", 12),
    ("thirteen", 13),
    ("fourteen", 14),
    ("fifteen", 15),
    ("sixteen", 16),
    ("seventeen", 17),
    ("eighteen", 18),
    ("nineteen", 19),
];

const TENS: &[(&str, i64)] = &[
    ("twenty", 20),
    ("thirty", 30),
    ("forty", 40),
    ("fifty", 50),
    ("sixty", 60),
    ("seventy", 70),
    ("eighty", 80),
    ("ninety", 90),
];

const MULTIPLES: &[(&str, i64)] = &[
    ("twice", 2),
    ("double", 2),
    ("thrice", 3),
    ("triple", 3),
    ("quadruple", 4),
];

/// Denominators spelled as ordinals; both singular and plural forms.
const ORDINALS: &[(&str, i64)] = &[
    ("half", 2),
    ("halves", 2),
    ("third", 3),
    ("thirds", 3),
    ("quarter", 4),
    ("quarters", 4),
    ("fourth", 4),
    ("fourths", 4),
    ("fifth", 5),
    ("fifths", 5),
    ("sixth", 6),
    ("sixths", 6),
    ("tenth", 10),
    ("tenths", 10),
];

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Converts a PARAM/LIMIT token to an exact value.
///
/// Accepts digits with thousands separators, a leading currency sign, a
/// trailing `%` or `percent`, simple fractions (`1/3`), and English number
/// words (`three`, `ONE`, `a third`, `twenty-five`, `twice`). In
/// [`NumberContext::Ratio`] a bare value in (1, 100] is read as a percent.
pub fn normalize_number(token: &str, context: NumberContext) -> Result<Rational, NumberParseError> {
    let err = || NumberParseError {
        token: token.to_string(),
    };
    let mut text = token.trim().to_lowercase();
    if text.is_empty() {
        return Err(err());
    }
    let mut percent = false;
    for suffix in ["%", "percent", "per cent"] {
        if let Some(rest) = text.strip_suffix(suffix) {
            text = rest.trim_end().to_string();
            percent = true;
            break;
        }
    }
    for prefix in ["$", "€", "£"] {
        if let Some(rest) = text.strip_prefix(prefix) {
            text = rest.trim_start().to_string();
        }
    }
    let mut value = parse_numeral(&text).or_else(|| parse_words(&text)).ok_or_else(err)?;
    // a bare 15 read as a ratio means 15%
    let ratio_percent = context == NumberContext::Ratio && value > int(1) && value <= int(100);
    if percent || ratio_percent {
        value /= int(100);
    }
    Ok(value)
}

fn parse_numeral(text: &str) -> Option<Rational> {
    if let Some((num, den)) = text.split_once('/') {
        let n = parse_numeral(num.trim())?;
        let d = parse_numeral(den.trim())?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = strip_thousands(int_part)?;
    let mut all = String::with_capacity(digits.len() + frac_part.len());
    all.push_str(&digits);
    all.push_str(frac_part);
    if all.is_empty() {
        return None;
    }
    let numer: BigInt = all.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let v = Rational::new(numer, denom);
    Some(if negative { -v } else { v })
}

/// Validates `60,000`-style grouping and returns the bare digits.
fn strip_thousands(int_part: &str) -> Option<String> {
    if !int_part.contains(',') {
        return int_part
            .chars()
            .all(|c| c.is_ascii_digit())
            .then(|| int_part.to_string());
    }
    let groups: Vec<&str> = int_part.split(',').collect();
    let first = groups[0];
    if first.is_empty() || first.len() > 3 || !first.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    for g in &groups[1..] {
        if g.len() != 3 || !g.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
    }
    Some(groups.concat())
}

fn lookup(table: &[(&str, i64)], word: &str) -> Option<i64> {
    table.iter().find(|(w, _)| *w == word).map(|(_, v)| *v)
}

fn parse_words(text: &str) -> Option<Rational> {
    let words: Vec<&str> = text
        .split(|c: char| c.is_whitespace() || c == '-')
        .filter(|w| !w.is_empty())
        .collect();
    match words.as_slice() {
        [] => None,
        [w] => {
            if let Some(v) = lookup(MULTIPLES, w) {
                return Some(int(v));
            }
            if let Some(d) = lookup(ORDINALS, w) {
                // bare "half", "third": one part
                return Some(ratio(1, d));
            }
            cardinal(&words)
        }
        [head, ordinal] if lookup(ORDINALS, ordinal).is_some() => {
            let d = lookup(ORDINALS, ordinal)?;
            let n = match *head {
                "a" | "an" | "one" => 1,
                other => cardinal(&[other])?.to_integer().to_i64()?,
            };
            Some(ratio(n, d))
        }
        _ => cardinal(&words),
    }
}

/// Integer number words: "twenty five", "three hundred", "two thousand five hundred".
fn cardinal(words: &[&str]) -> Option<Rational> {
    let mut total: i64 = 0;
    let mut current: i64 = 0;
    let mut seen = false;
    for w in words {
        if *w == "and" && seen {
            continue;
        }
        if let Some(v) = lookup(UNITS, w).or_else(|| lookup(TENS, w)) {
            current += v;
        } else if *w == "hundred" {
            current = current.max(1) * 100;
        } else if *w == "thousand" {
            total += current.max(1) * 1000;
            current = 0;
        } else if *w == "million" {
            total += current.max(1) * 1_000_000;
            current = 0;
        } else {
            return None;
        }
        seen = true;
    }
    seen.then(|| int(total + current))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion from the shortest decimal that round-trips `v`.
///
/// `0.3` becomes 3/10 rather than the binary expansion of the double.
pub fn from_f64(v: f64) -> Option<Rational> {
    if !v.is_finite() {
        return None;
    }
    let text = format!("{v}");
    if text.contains('e') || text.contains('E') {
        return Rational::from_float(v);
    }
    parse_numeral(&text)
}

/// Shortest exact decimal text when the value terminates, otherwise
/// `places` decimals.
pub fn decimal_text(r: &Rational, places: usize) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut digits = 0usize;
    while (&d % &two).is_zero() || (&d % &five).is_zero() {
        if (&d % &two).is_zero() {
            d /= &two;
        }
        if (&d % &five).is_zero() {
            d /= &five;
        }
        digits += 1;
    }
    if d.is_one() && digits <= 12 {
        return fixed(r, digits.max(1));
    }
    fixed(r, places)
}

/// Round-half-away-from-zero to a fixed number of decimals, trailing zeros kept.
pub fn fixed(r: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = r * Rational::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let negative = rounded.is_negative();
    let mag = rounded.abs().to_string();
    let mag = if mag.len() <= places {
        format!("{}{}", "0".repeat(places + 1 - mag.len()), mag)
    } else {
        mag
    };
    let (i, f) = mag.split_at(mag.len() - places);
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{i}")
    } else {
        format!("{sign}{i}.{f}")
    }
}

pub(crate) mod serde_f64 {
    use super::{from_f64, to_f64, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(to_f64(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let v = f64::deserialize(d)?;
        from_f64(v).ok_or_else(|| D::Error::custom("non-finite number"))
    }
}
