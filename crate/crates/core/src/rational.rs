//! Parsing and formatting of exact rationals as `"p/q"` strings.
//!
//! Canonical form: reduced, `q > 0`; integers are printed bare.

use num_traits::{One, Signed, Zero};

use crate::{Int, Rat};

/// Format a rational in canonical `"p/q"` (or bare integer) form.
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse a `"p/q"` string or a bare integer.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let n: Int = num
        .parse()
        .map_err(|_| format!("invalid integer `{num}`"))?;
    let d: Int = match den {
        Some(d) => d.parse().map_err(|_| format!("invalid integer `{d}`"))?,
        None => Int::one(),
    };
    if d.is_zero() {
        return Err(format!("zero denominator in `{s}`"));
    }
    Ok(Rat::new(n, d))
}

/// Integer-to-rational shorthand.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(Int::from(n))
}

/// Exact integer extraction; `None` when the rational is not an integer.
pub fn to_int(r: &Rat) -> Option<Int> {
    if r.denom().is_one() {
        Some(r.numer().clone())
    } else {
        None
    }
}

/// Sign as -1, 0 or 1.
pub fn sign(r: &Rat) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        for s in ["0", "7", "-3", "1/2", "-5/3"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(fmt_rat(&r), s);
        }
    }

    #[test]
    fn canonicalizes() {
        assert_eq!(fmt_rat(&parse_rat("2/4").unwrap()), "1/2");
        assert_eq!(fmt_rat(&parse_rat("3/-6").unwrap()), "-1/2");
        assert_eq!(fmt_rat(&parse_rat("4/2").unwrap()), "2");
    }

    #[test]
    fn rejects_zero_denominator() {
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }
}
