//! Exact rationals with power-of-two denominators.
//!
//! Every probability and measure in this crate is a count divided by a power
//! of two, so a dedicated dyadic type keeps all comparisons exact. Numerators
//! are arbitrary-precision: stage-measure products like (1 - 2^-9)^355 exceed
//! any fixed-width integer.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// `num / 2^den_exp`, stored reduced: `num` odd, or zero with `den_exp == 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigInt,
    den_exp: u64,
}

impl Dyadic {
    pub fn new(num: BigInt, den_exp: u64) -> Self {
        let mut d = Dyadic { num, den_exp };
        d.reduce();
        d
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    /// `num / 2^den_exp` from machine integers.
    pub fn over_pow2(num: i64, den_exp: u64) -> Self {
        Dyadic::new(BigInt::from(num), den_exp)
    }

    pub fn zero() -> Self {
        Dyadic { num: BigInt::zero(), den_exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { num: BigInt::one(), den_exp: 0 }
    }

    /// 2^e for any integer e (negative allowed).
    pub fn pow2(e: i64) -> Self {
        if e >= 0 {
            Dyadic::new(BigInt::one() << e as u64, 0)
        } else {
            Dyadic { num: BigInt::one(), den_exp: (-e) as u64 }
        }
    }

    fn reduce(&mut self) {
        if self.num.is_zero() {
            self.den_exp = 0;
            return;
        }
        while self.den_exp > 0 && !self.num.bit(0) {
            self.num >>= 1;
            self.den_exp -= 1;
        }
    }

    pub fn num(&self) -> &BigInt {
        &self.num
    }

    pub fn den_exp(&self) -> u64 {
        self.den_exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { num: self.num.abs(), den_exp: self.den_exp }
    }

    pub fn pow(&self, e: u64) -> Dyadic {
        let mut acc = Dyadic::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Nearest double; loses precision for large operands, used only for display
    /// and float-tolerance comparisons.
    pub fn to_f64(&self) -> f64 {
        // Scale the numerator down first so huge exponents do not overflow.
        let bits = self.num.bits() as i64;
        if bits <= 52 {
            return self.num.to_f64().unwrap_or(f64::NAN) / 2f64.powi(self.den_exp as i32);
        }
        let shift = bits - 52;
        let scaled = (&self.num >> shift).to_f64().unwrap_or(f64::NAN);
        scaled * 2f64.powi((shift - self.den_exp as i64) as i32)
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let e = self.den_exp.max(rhs.den_exp);
        let a = &self.num << (e - self.den_exp);
        let b = &rhs.num << (e - rhs.den_exp);
        Dyadic::new(a + b, e)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        self + &(-rhs.clone())
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &rhs.num, self.den_exp + rhs.den_exp)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { num: -self.num, den_exp: self.den_exp }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.den_exp.max(other.den_exp);
        let a = &self.num << (e - self.den_exp);
        let b = &other.num << (e - other.den_exp);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den_exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.den_exp)
        }
    }
}

impl serde::Serialize for Dyadic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Dyadic", 2)?;
        // Numerators that fit in i64 stay JSON numbers; larger ones become
        // decimal strings so nothing is silently rounded.
        match self.num.to_i64() {
            Some(v) => st.serialize_field("num", &v)?,
            None => st.serialize_field("num", &self.num.to_string())?,
        }
        st.serialize_field("den_exp", &self.den_exp)?;
        st.end()
    }
}

impl<'de> serde::Deserialize<'de> for Dyadic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        struct Raw {
            num: serde_json::Value,
            den_exp: u64,
        }
        let raw = Raw::deserialize(d)?;
        let num = match &raw.num {
            serde_json::Value::Number(n) => {
                let v = n.as_i64().ok_or_else(|| serde::de::Error::custom("num out of i64 range"))?;
                BigInt::from(v)
            }
            serde_json::Value::String(s) => {
                s.parse::<BigInt>().map_err(|e| serde::de::Error::custom(format!("bad num: {e}")))?
            }
            _ => return Err(serde::de::Error::custom("num must be a number or string")),
        };
        Ok(Dyadic::new(num, raw.den_exp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction() {
        let d = Dyadic::over_pow2(4, 3);
        assert_eq!(d.num().to_i64(), Some(1));
        assert_eq!(d.den_exp(), 1);
        assert!(Dyadic::over_pow2(0, 7).is_zero());
        assert_eq!(Dyadic::over_pow2(0, 7).den_exp(), 0);
    }

    #[test]
    fn arithmetic() {
        let half = Dyadic::over_pow2(1, 1);
        let quarter = Dyadic::over_pow2(1, 2);
        assert_eq!(&half + &quarter, Dyadic::over_pow2(3, 2));
        assert_eq!(&half - &quarter, quarter);
        assert_eq!(&half * &half, Dyadic::over_pow2(1, 2));
        assert_eq!(half.pow(10), Dyadic::pow2(-10));
        assert!(Dyadic::over_pow2(1, 2) < Dyadic::over_pow2(1, 1));
        assert!((&quarter - &half).is_negative());
    }

    #[test]
    fn big_powers_stay_exact() {
        // (1 - 2^-9)^355 < 1/2 but (1 - 2^-9)^354 >= 1/2: the comparison needs
        // thousands of bits, which is exactly why the numerator is a BigInt.
        let one = Dyadic::one();
        let eta1 = Dyadic::pow2(-9);
        let base = &one - &eta1;
        let half = Dyadic::over_pow2(1, 1);
        assert!(base.pow(355) < half);
        assert!(base.pow(354) >= half);
    }

    #[test]
    fn json_roundtrip() {
        let d = Dyadic::over_pow2(-3, 5);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"num":-3,"den_exp":5}"#);
        let back: Dyadic = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let big = Dyadic::new(num_bigint::BigInt::from(511).pow(355), 9 * 355);
        let s = serde_json::to_string(&big).unwrap();
        let back: Dyadic = serde_json::from_str(&s).unwrap();
        assert_eq!(back, big);
    }

    #[test]
    fn to_f64_scales() {
        assert!((Dyadic::over_pow2(3, 2).to_f64() - 0.75).abs() < 1e-15);
        let big = Dyadic::new(num_bigint::BigInt::from(511).pow(355), 9 * 355);
        let expect = 355.0 * (511f64.ln() - 9.0 * 2f64.ln());
        assert!((big.to_f64().ln() - expect).abs() < 1e-9);
    }
}
