//! Exact rational helpers on top of `num-rational`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn ceil_u64(r: &Rational) -> u64 {
    r.ceil()
        .to_integer()
        .to_u64()
        .expect("ceiling does not fit in u64")
}

pub fn to_f64(r: &Rational) -> f64 {
    // BigRational::to_f64 handles large numerators/denominators without overflow.
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// Smallest multiple of `1/2^bits` that is `>= r`.
pub fn round_up_dyadic(r: &Rational, bits: u32) -> Rational {
    let scale = BigInt::one() << bits;
    let scaled = r * Rational::from_integer(scale.clone());
    Rational::new(scaled.ceil().to_integer(), scale)
}

pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Bits needed to write any value in `0..=max`.
pub fn bit_width(max: u64) -> u32 {
    (64 - max.leading_zeros()).max(1)
}

pub fn bits_of(n: &BigInt) -> u64 {
    n.abs().bits().max(1)
}

pub fn is_unit_interval(r: &Rational) -> bool {
    !r.is_negative() && *r <= Rational::one()
}

pub fn gcd_reduce(num: BigInt, den: BigInt) -> Rational {
    let g = num.gcd(&den);
    if g.is_zero() {
        Rational::zero()
    } else {
        Rational::new_raw(&num / &g, &den / &g)
    }
}

/// Parses "a", "a/b" or a finite decimal like "0.25".
pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().ok()?;
        let b: BigInt = b.trim().parse().ok()?;
        if b.is_zero() {
            return None;
        }
        return Some(Rational::new(a, b));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let neg = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches('-'), frac);
        let num: BigInt = digits.parse().ok()?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(num, den);
        return Some(if neg { -r } else { r });
    }
    s.parse::<BigInt>().ok().map(Rational::from_integer)
}

/// Serializes a rational as `"num/den"` (or `"num"` for integers).
pub fn serialize<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(16), 4);
        assert_eq!(ceil_log2(17), 5);
    }

    #[test]
    fn dyadic_round_up_never_decreases() {
        let r = ratio(2, 3);
        let up = round_up_dyadic(&r, 32);
        assert!(up >= r);
        assert!(&up - &r < ratio(1, 1 << 31));
        assert_eq!(round_up_dyadic(&ratio(1, 4), 32), ratio(1, 4));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse("3"), Some(int(3)));
        assert_eq!(parse("1/4"), Some(ratio(1, 4)));
        assert_eq!(parse("0.25"), Some(ratio(1, 4)));
        assert_eq!(parse("x"), None);
        assert_eq!(parse("1/0"), None);
    }
}
