use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An element p + q·√D of the real quadratic field Q(√D).
///
/// When `q == 0` the radicand is irrelevant: plain rationals compare equal
/// regardless of the stored `d`, and combine freely with any ring.
#[derive(Clone, Debug)]
pub struct QuadScalar {
    p: BigRational,
    q: BigRational,
    d: i64,
}

pub fn is_square_free(d: i64) -> bool {
    if d < 2 {
        return false;
    }
    let mut k = 2i64;
    while k * k <= d {
        if d % (k * k) == 0 {
            return false;
        }
        k += 1;
    }
    true
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl QuadScalar {
    /// Panics if `q != 0` and `d` is not a square-free integer ≥ 2.
    pub fn new(p: BigRational, q: BigRational, d: i64) -> Self {
        assert!(
            q.is_zero() || is_square_free(d),
            "radicand {d} must be a square-free integer >= 2"
        );
        QuadScalar { p, q, d }
    }

    pub fn try_new(p: BigRational, q: BigRational, d: i64) -> Option<Self> {
        if q.is_zero() || is_square_free(d) {
            Some(QuadScalar { p, q, d })
        } else {
            None
        }
    }

    pub fn rational(p: BigRational) -> Self {
        QuadScalar { p, q: BigRational::zero(), d: 2 }
    }

    pub fn int(n: i64) -> Self {
        Self::rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, den: i64) -> Self {
        Self::rational(rat(n, den))
    }

    /// `p + q√d` with small integer parts.
    pub fn from_ints(p: i64, q: i64, d: i64) -> Self {
        Self::new(rat(p, 1), rat(q, 1), d)
    }

    pub fn sqrt(d: i64) -> Self {
        Self::from_ints(0, 1, d)
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    pub fn p(&self) -> &BigRational {
        &self.p
    }

    pub fn q(&self) -> &BigRational {
        &self.q
    }

    pub fn radicand(&self) -> i64 {
        self.d
    }

    /// The radicand if the value is irrational.
    pub fn ring(&self) -> Option<i64> {
        if self.q.is_zero() {
            None
        } else {
            Some(self.d)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_zero() && self.q.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.q.is_zero()
    }

    pub fn with_radicand(mut self, d: i64) -> Self {
        if self.q.is_zero() {
            self.d = d;
        } else {
            assert_eq!(self.d, d, "mixed quadratic rings");
        }
        self
    }

    fn joint_radicand(&self, other: &Self) -> i64 {
        match (self.ring(), other.ring()) {
            (Some(a), Some(b)) => {
                assert_eq!(a, b, "mixed quadratic rings Q(√{a}) and Q(√{b})");
                a
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => self.d,
        }
    }

    pub fn sign(&self) -> Ordering {
        let sp = self.p.cmp(&BigRational::zero());
        let sq = self.q.cmp(&BigRational::zero());
        if sq == Ordering::Equal {
            return sp;
        }
        if sp == Ordering::Equal || sp == sq {
            return sq;
        }
        let pp = &self.p * &self.p;
        let qq = &self.q * &self.q * BigRational::from_integer(BigInt::from(self.d));
        if pp > qq {
            sp
        } else {
            sq
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign() == Ordering::Greater
    }

    pub fn is_negative(&self) -> bool {
        self.sign() == Ordering::Less
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// Galois conjugate p − q√D.
    pub fn conj(&self) -> Self {
        QuadScalar { p: self.p.clone(), q: -&self.q, d: self.d }
    }

    /// Field norm p² − D q².
    pub fn norm(&self) -> BigRational {
        &self.p * &self.p - &self.q * &self.q * BigRational::from_integer(BigInt::from(self.d))
    }

    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm();
        Some(QuadScalar { p: &self.p / &n, q: -&self.q / &n, d: self.d })
    }

    pub fn to_f64(&self) -> f64 {
        let p = self.p.to_f64().unwrap_or(f64::NAN);
        if self.q.is_zero() {
            return p;
        }
        let q = self.q.to_f64().unwrap_or(f64::NAN);
        p + q * (self.d as f64).sqrt()
    }

    pub fn floor(&self) -> BigInt {
        if self.q.is_zero() {
            return self.p.floor().to_integer();
        }
        let approx = self.to_f64().floor();
        let mut k = if approx.is_finite() && approx.abs() < 1e15 {
            BigInt::from(approx as i64)
        } else {
            let root = BigRational::from_integer(BigInt::from(self.d).sqrt());
            (&self.p + &self.q * root).floor().to_integer()
        };
        loop {
            let kq = QuadScalar::rational(BigRational::from_integer(k.clone()));
            if kq > *self {
                k -= 1;
                continue;
            }
            let k1 = QuadScalar::rational(BigRational::from_integer(&k + 1));
            if k1 <= *self {
                k += 1;
                continue;
            }
            return k;
        }
    }

    /// Nearest integer, ties rounded up.
    pub fn round(&self) -> BigInt {
        (self + &QuadScalar::ratio(1, 2)).floor()
    }

    /// Representative of `self` modulo `m·Z` in `[0, m)`; `m > 0`.
    pub fn rem_euclid(&self, m: &QuadScalar) -> QuadScalar {
        let k = (self / m).floor();
        self - &(m * &QuadScalar::rational(BigRational::from_integer(k)))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Self::rational(BigRational::from_integer(n))
    }

    /// Parses `p`, `p+q√D` or `q√D`, where p and q are integers, fractions
    /// `n/d` or decimals.
    pub fn parse(text: &str) -> Option<Self> {
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let t = t.replace("sqrt", "√");
        let Some(root) = t.find('√') else {
            return parse_rational(&t).map(Self::rational);
        };
        let d: i64 = t[root + '√'.len_utf8()..].trim_matches(|c| c == '(' || c == ')').parse().ok()?;
        let head = t[..root].trim_end_matches('*');
        let split = head
            .char_indices()
            .filter(|&(i, c)| (c == '+' || c == '-') && i > 0 && !head[..i].ends_with(['e', 'E']))
            .map(|(i, _)| i)
            .last();
        let (p, q) = match split {
            Some(i) => (&head[..i], &head[i..]),
            None => ("", head),
        };
        let p = if p.is_empty() { BigRational::zero() } else { parse_rational(p)? };
        let q = match q {
            "" | "+" => BigRational::one(),
            "-" => -BigRational::one(),
            other => parse_rational(other.trim_start_matches('+'))?,
        };
        Self::try_new(p, q, d)
    }
}

/// Parses an integer, a fraction `n/d` or a plain decimal exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        return (!d.is_zero()).then(|| BigRational::new(n, d));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(digits);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

impl PartialEq for QuadScalar {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q && (self.q.is_zero() || self.d == other.d)
    }
}

impl Eq for QuadScalar {}

impl Hash for QuadScalar {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.p.hash(state);
        self.q.hash(state);
        if !self.q.is_zero() {
            self.d.hash(state);
        }
    }
}

impl PartialOrd for QuadScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuadScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).sign()
    }
}

impl<'a> Add<&'a QuadScalar> for &'a QuadScalar {
    type Output = QuadScalar;
    fn add(self, o: &QuadScalar) -> QuadScalar {
        let d = self.joint_radicand(o);
        QuadScalar { p: &self.p + &o.p, q: &self.q + &o.q, d }
    }
}

impl<'a> Sub<&'a QuadScalar> for &'a QuadScalar {
    type Output = QuadScalar;
    fn sub(self, o: &QuadScalar) -> QuadScalar {
        let d = self.joint_radicand(o);
        QuadScalar { p: &self.p - &o.p, q: &self.q - &o.q, d }
    }
}

impl<'a> Mul<&'a QuadScalar> for &'a QuadScalar {
    type Output = QuadScalar;
    fn mul(self, o: &QuadScalar) -> QuadScalar {
        let d = self.joint_radicand(o);
        let dd = BigRational::from_integer(BigInt::from(d));
        QuadScalar {
            p: &self.p * &o.p + &self.q * &o.q * dd,
            q: &self.p * &o.q + &self.q * &o.p,
            d,
        }
    }
}

impl<'a> Div<&'a QuadScalar> for &'a QuadScalar {
    type Output = QuadScalar;
    fn div(self, o: &QuadScalar) -> QuadScalar {
        let inv = o.recip().expect("division by zero in Q(√D)");
        self * &inv
    }
}

impl Neg for &QuadScalar {
    type Output = QuadScalar;
    fn neg(self) -> QuadScalar {
        QuadScalar { p: -&self.p, q: -&self.q, d: self.d }
    }
}

impl Neg for QuadScalar {
    type Output = QuadScalar;
    fn neg(self) -> QuadScalar {
        -&self
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<QuadScalar> for QuadScalar {
            type Output = QuadScalar;
            fn $m(self, o: QuadScalar) -> QuadScalar {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a QuadScalar> for QuadScalar {
            type Output = QuadScalar;
            fn $m(self, o: &QuadScalar) -> QuadScalar {
                (&self).$m(o)
            }
        }
        impl<'a> $tr<QuadScalar> for &'a QuadScalar {
            type Output = QuadScalar;
            fn $m(self, o: QuadScalar) -> QuadScalar {
                self.$m(&o)
            }
        }
    };
}

owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);
owned_binop!(Div, div);

impl Zero for QuadScalar {
    fn zero() -> Self {
        QuadScalar::int(0)
    }
    fn is_zero(&self) -> bool {
        QuadScalar::is_zero(self)
    }
}

impl One for QuadScalar {
    fn one() -> Self {
        QuadScalar::int(1)
    }
}

impl From<i64> for QuadScalar {
    fn from(n: i64) -> Self {
        QuadScalar::int(n)
    }
}

impl From<BigRational> for QuadScalar {
    fn from(p: BigRational) -> Self {
        QuadScalar::rational(p)
    }
}

fn fmt_rat(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for QuadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q.is_zero() {
            return write!(f, "{}", fmt_rat(&self.p));
        }
        let root = format!("√{}", self.d);
        let qabs = self.q.abs();
        let qpart = if qabs.is_one() {
            root
        } else {
            format!("{}{}", fmt_rat(&qabs), root)
        };
        if self.p.is_zero() {
            if self.q.is_negative() {
                write!(f, "-{qpart}")
            } else {
                write!(f, "{qpart}")
            }
        } else {
            let op = if self.q.is_negative() { '-' } else { '+' };
            write!(f, "{}{}{}", fmt_rat(&self.p), op, qpart)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parsing() {
        assert_eq!(QuadScalar::parse("20.2"), Some(QuadScalar::ratio(101, 5)));
        assert_eq!(QuadScalar::parse("-3/4"), Some(QuadScalar::ratio(-3, 4)));
        assert_eq!(QuadScalar::parse("2-√2"), Some(QuadScalar::from_ints(2, -1, 2)));
        assert_eq!(QuadScalar::parse("sqrt2"), Some(QuadScalar::sqrt(2)));
        assert_eq!(QuadScalar::parse("1/2 + 3/2*sqrt(3)"), Some(&QuadScalar::ratio(1, 2) + &(&QuadScalar::ratio(3, 2) * &QuadScalar::sqrt(3))));
        assert_eq!(QuadScalar::parse("1e-3"), Some(QuadScalar::ratio(1, 1000)));
        assert_eq!(QuadScalar::parse("1√4"), None);
        assert_eq!(QuadScalar::parse("x"), None);
    }

    fn qs(p: i64, q: i64) -> QuadScalar {
        QuadScalar::from_ints(p, q, 2)
    }

    #[test]
    fn sign_of_near_cancellations() {
        assert!(qs(-1, 1).is_positive());
        assert!(qs(2, -1).is_positive());
        assert!(qs(1, -1).is_negative());
        assert!(qs(-3, 2).is_negative());
        assert_eq!(qs(0, 0).sign(), Ordering::Equal);
    }

    #[test]
    fn inverse_and_floor() {
        let x = qs(1, 1);
        let y = x.recip().unwrap();
        assert_eq!(y, qs(-1, 1));
        assert_eq!(qs(10, -4).floor(), BigInt::from(4));
        assert_eq!(qs(-1, 0).floor(), BigInt::from(-1));
        assert_eq!(QuadScalar::sqrt(2).rem_euclid(&QuadScalar::int(1)), qs(-1, 1));
    }

    #[test]
    fn display() {
        assert_eq!(QuadScalar::sqrt(2).to_string(), "√2");
        assert_eq!(qs(2, -1).to_string(), "2-√2");
        assert_eq!(QuadScalar::ratio(3, 4).to_string(), "3/4");
    }

    #[test]
    fn rationals_ignore_radicand() {
        let a = QuadScalar::ratio(1, 2);
        let b = QuadScalar::new(rat(1, 2), rat(0, 1), 3);
        assert_eq!(a, b);
        let c = &QuadScalar::sqrt(3) + &a;
        assert_eq!(c.radicand(), 3);
    }

    proptest! {
        #[test]
        fn order_matches_embedding(a in -50i64..50, b in -50i64..50, c in -50i64..50, e in -50i64..50) {
            let x = qs(a, b);
            let y = qs(c, e);
            let (fx, fy) = (x.to_f64(), y.to_f64());
            if (fx - fy).abs() > 1e-9 {
                prop_assert_eq!(x.cmp(&y), fx.partial_cmp(&fy).unwrap());
            } else {
                prop_assert_eq!(x, y);
            }
        }

        #[test]
        fn field_identities(a in -20i64..20, b in -20i64..20, c in 1i64..20, e in -20i64..20) {
            let x = qs(a, b);
            let y = qs(c, e);
            let s = &(&x * &y) / &y;
            prop_assert_eq!(s, x.clone());
            let f = x.floor();
            let fq = QuadScalar::from_bigint(f.clone());
            prop_assert!(fq <= x && x < &fq + &QuadScalar::one());
        }
    }
}
