//! Exact lifting bounds for hybrid and noisy query algorithms, plus a small
//! statevector simulator that checks them on desk-scale instances.

pub mod adversaries;
pub mod bounds;
pub mod relations;
pub mod reprogram;
pub mod statevec;
pub mod verify;

use num_bigint::BigInt;
use num_rational::BigRational;

/// Parses `"a/b"`, an integer, or a finite decimal such as `"0.25"` into an
/// exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    let text = text.trim();
    let bad = || format!("cannot parse {text:?} as a rational");
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d == BigInt::from(0) {
            return Err(format!("zero denominator in {text:?}"));
        }
        return Ok(BigRational::new(n, d));
    }
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, text),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|ch| ch.is_ascii_digit()) {
        return Err(bad());
    }
    let numer: BigInt = digits.parse().map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    Ok(BigRational::new(numer * sign, denom))
}

/// Renders a rational as `"n"` or `"n/d"`.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}


#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/games.md")]
    mod games {}
    #[doc = include_str!("../../../book/src/circuits.md")]
    mod circuits {}
    #[doc = include_str!("../../../book/src/reprogramming.md")]
    mod reprogramming {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
