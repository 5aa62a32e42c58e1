//! Exact p-adic scalars with explicit precision tracking.
//!
//! A nonzero value is stored as `p^v * u` where `u` is a unit residue known
//! modulo `p^N`; `N` is the relative precision. A value that is
//! indistinguishable from zero is stored as "zero modulo `p^d`" for a known
//! absolute precision `d`. Every operation propagates precision pessimally,
//! so a residue digit is only ever reported when it is certain.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative precision, in p-adic digits, used across the toolkit.
pub const DEFAULT_PRECISION: u32 = 32;

// ---- primality -------------------------------------------------------------

/// Deterministic Miller-Rabin, valid for the whole u64 range.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &w in &WITNESSES {
        if n == w {
            return true;
        }
        if n.is_multiple_of(w) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &w in &WITNESSES {
        let mut x = pow_mod(w, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub(crate) fn check_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::NotPrime(p))
    }
}

// ---- valuations ------------------------------------------------------------

/// Value of ν_p: either a finite integer or +∞ (the valuation of zero).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Valuation::Infinite)
    }

    /// ν(x) - c for finite shifts; ∞ stays ∞.
    pub fn shift(self, c: i64) -> Valuation {
        match self {
            Valuation::Finite(v) => Valuation::Finite(v - c),
            Valuation::Infinite => Valuation::Infinite,
        }
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Valuation::Finite(a), Valuation::Finite(b)) => a.cmp(b),
            (Valuation::Finite(_), Valuation::Infinite) => Ordering::Less,
            (Valuation::Infinite, Valuation::Finite(_)) => Ordering::Greater,
            (Valuation::Infinite, Valuation::Infinite) => Ordering::Equal,
        }
    }
}

impl std::ops::Add for Valuation {
    type Output = Valuation;
    fn add(self, rhs: Valuation) -> Valuation {
        match (self, rhs) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinite,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Valuation::Finite(v) => s.serialize_i64(*v),
            Valuation::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Valuation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Valuation;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "an integer or the string \"inf\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Valuation, E> {
                Ok(Valuation::Finite(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Valuation, E> {
                i64::try_from(v)
                    .map(Valuation::Finite)
                    .map_err(|_| E::custom("valuation out of range"))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Valuation, E> {
                match s {
                    "inf" => Ok(Valuation::Infinite),
                    _ => s
                        .parse::<i64>()
                        .map(Valuation::Finite)
                        .map_err(|_| E::custom("expected an integer or \"inf\"")),
                }
            }
        }
        d.deserialize_any(V)
    }
}

pub(crate) fn int_valuation_unchecked(n: &BigInt, p: u64) -> Valuation {
    if n.is_zero() {
        return Valuation::Infinite;
    }
    let p = BigInt::from(p);
    let mut m = n.clone();
    let mut v = 0i64;
    loop {
        let (q, r) = m.div_rem(&p);
        if r.is_zero() {
            v += 1;
            m = q;
        } else {
            return Valuation::Finite(v);
        }
    }
}

/// ν_p of an integer; ν_p(0) = ∞.
pub fn int_valuation(n: &BigInt, p: u64) -> Result<Valuation> {
    check_prime(p)?;
    Ok(int_valuation_unchecked(n, p))
}

/// ν_p of a rational; ν_p(0) = ∞.
pub fn valuation(r: &BigRational, p: u64) -> Result<Valuation> {
    check_prime(p)?;
    Ok(rational_valuation_unchecked(r, p))
}

pub(crate) fn rational_valuation_unchecked(r: &BigRational, p: u64) -> Valuation {
    if r.is_zero() {
        return Valuation::Infinite;
    }
    let vn = match int_valuation_unchecked(r.numer(), p) {
        Valuation::Finite(v) => v,
        Valuation::Infinite => unreachable!("nonzero rational has nonzero numerator"),
    };
    let vd = match int_valuation_unchecked(r.denom(), p) {
        Valuation::Finite(v) => v,
        Valuation::Infinite => unreachable!("denominator is never zero"),
    };
    Valuation::Finite(vn - vd)
}

/// The p-adic absolute value ‖r‖_p, kept exact as a power of p.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PadicAbs {
    /// ‖0‖_p = 0.
    Zero,
    /// ‖r‖_p = p^exponent, exponent = -ν_p(r).
    PowerOfP(i64),
}

impl PadicAbs {
    pub fn exponent(self) -> Option<i64> {
        match self {
            PadicAbs::PowerOfP(e) => Some(e),
            PadicAbs::Zero => None,
        }
    }
}

/// ‖r‖_p as an exact power of p; ‖0‖_p = 0.
pub fn padic_abs(r: &BigRational, p: u64) -> Result<PadicAbs> {
    Ok(match valuation(r, p)? {
        Valuation::Finite(v) => PadicAbs::PowerOfP(-v),
        Valuation::Infinite => PadicAbs::Zero,
    })
}

// ---- the scalar type -------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum Kind {
    /// Known to vanish modulo p^min_valuation; nothing else is known.
    Zero { min_valuation: i64 },
    /// p^valuation * unit with gcd(unit, p) = 1, unit known modulo p^precision.
    Unit {
        valuation: i64,
        unit: BigUint,
        precision: u32,
    },
}

/// A p-adic number tracked to finite precision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PAdic {
    p: u64,
    kind: Kind,
}

pub(crate) fn p_pow(p: u64, e: u32) -> BigUint {
    BigUint::from(p).pow(e)
}

/// Inverse of `a` modulo `m`, when gcd(a, m) = 1.
pub(crate) fn mod_inverse(a: &BigInt, m: &BigUint) -> Option<BigUint> {
    let mb = BigInt::from(m.clone());
    let a = a.mod_floor(&mb);
    let ext = a.extended_gcd(&mb);
    if ext.gcd.is_one() {
        Some(ext.x.mod_floor(&mb).to_biguint().expect("mod_floor is nonnegative"))
    } else {
        None
    }
}

impl PAdic {
    /// The additive zero, known to vanish modulo p^digits.
    pub fn zero(p: u64, digits: i64) -> Result<PAdic> {
        check_prime(p)?;
        Ok(PAdic {
            p,
            kind: Kind::Zero { min_valuation: digits },
        })
    }

    /// The unit 1 carried to `digits` relative digits.
    pub fn one(p: u64, digits: u32) -> Result<PAdic> {
        check_prime(p)?;
        if digits == 0 {
            return Err(Error::ZeroPrecision);
        }
        Ok(PAdic {
            p,
            kind: Kind::Unit {
                valuation: 0,
                unit: BigUint::one(),
                precision: digits,
            },
        })
    }

    /// Embed a rational into Q_p with `digits` relative digits of precision.
    pub fn embed(r: &BigRational, p: u64, digits: u32) -> Result<PAdic> {
        check_prime(p)?;
        if digits == 0 {
            return Err(Error::ZeroPrecision);
        }
        if r.is_zero() {
            return PAdic::zero(p, digits as i64);
        }
        let v = match rational_valuation_unchecked(r, p) {
            Valuation::Finite(v) => v,
            Valuation::Infinite => unreachable!(),
        };
        let unit = rational_unit_residue(r, p, digits);
        Ok(PAdic {
            p,
            kind: Kind::Unit {
                valuation: v,
                unit,
                precision: digits,
            },
        })
    }

    /// Embed an integer with `digits` relative digits of precision.
    pub fn embed_int(n: &BigInt, p: u64, digits: u32) -> Result<PAdic> {
        PAdic::embed(&BigRational::from(n.clone()), p, digits)
    }

    /// Reinterpret a plain residue: the value is ≡ `residue` (mod p^digits)
    /// and nothing more is known about it.
    pub fn from_residue(residue: BigUint, p: u64, digits: u32) -> Result<PAdic> {
        check_prime(p)?;
        if digits == 0 {
            return Err(Error::ZeroPrecision);
        }
        let residue = residue % p_pow(p, digits);
        if residue.is_zero() {
            return PAdic::zero(p, digits as i64);
        }
        let v = match int_valuation_unchecked(&BigInt::from(residue.clone()), p) {
            Valuation::Finite(v) => v as u32,
            Valuation::Infinite => unreachable!(),
        };
        let unit = &residue / p_pow(p, v);
        Ok(PAdic {
            p,
            kind: Kind::Unit {
                valuation: v as i64,
                unit,
                precision: digits - v,
            },
        })
    }

    /// Embed a rational given a target absolute precision instead of a
    /// relative one. Values with ν ≥ abs collapse to zero-to-precision.
    pub(crate) fn from_rational_abs(r: &BigRational, p: u64, abs: i64) -> Result<PAdic> {
        check_prime(p)?;
        if r.is_zero() {
            return PAdic::zero(p, abs);
        }
        let v = match rational_valuation_unchecked(r, p) {
            Valuation::Finite(v) => v,
            Valuation::Infinite => unreachable!(),
        };
        if v >= abs {
            return PAdic::zero(p, abs);
        }
        let digits = u32::try_from(abs - v)
            .map_err(|_| Error::PrecisionExhausted("absolute precision overflow".into()))?;
        let unit = rational_unit_residue(r, p, digits);
        Ok(PAdic {
            p,
            kind: Kind::Unit {
                valuation: v,
                unit,
                precision: digits,
            },
        })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn valuation(&self) -> Valuation {
        match &self.kind {
            Kind::Zero { .. } => Valuation::Infinite,
            Kind::Unit { valuation, .. } => Valuation::Finite(*valuation),
        }
    }

    /// The unit part, when the value is nonzero to precision.
    pub fn unit(&self) -> Option<&BigUint> {
        match &self.kind {
            Kind::Zero { .. } => None,
            Kind::Unit { unit, .. } => Some(unit),
        }
    }

    /// Relative precision in digits; zero-to-precision values have none.
    pub fn rel_precision(&self) -> Option<u32> {
        match &self.kind {
            Kind::Zero { .. } => None,
            Kind::Unit { precision, .. } => Some(*precision),
        }
    }

    /// The value is pinned down modulo p^abs_precision.
    pub fn abs_precision(&self) -> i64 {
        match &self.kind {
            Kind::Zero { min_valuation } => *min_valuation,
            Kind::Unit {
                valuation,
                precision,
                ..
            } => valuation + *precision as i64,
        }
    }

    pub fn is_zero_to_precision(&self) -> bool {
        matches!(self.kind, Kind::Zero { .. })
    }

    fn require_same_prime(&self, other: &PAdic) -> Result<()> {
        if self.p == other.p {
            Ok(())
        } else {
            Err(Error::PrimeMismatch {
                left: self.p,
                right: other.p,
            })
        }
    }

    pub fn add(&self, other: &PAdic) -> Result<PAdic> {
        self.require_same_prime(other)?;
        let p = self.p;
        let kind = match (&self.kind, &other.kind) {
            (Kind::Zero { min_valuation: a }, Kind::Zero { min_valuation: b }) => Kind::Zero {
                min_valuation: (*a).min(*b),
            },
            (Kind::Zero { min_valuation }, Kind::Unit { valuation, unit, precision })
            | (Kind::Unit { valuation, unit, precision }, Kind::Zero { min_valuation }) => {
                let abs = (*min_valuation).min(valuation + *precision as i64);
                if *valuation < abs {
                    let digits = (abs - valuation) as u32;
                    Kind::Unit {
                        valuation: *valuation,
                        unit: unit % p_pow(p, digits),
                        precision: digits,
                    }
                } else {
                    Kind::Zero { min_valuation: abs }
                }
            }
            (
                Kind::Unit { valuation: v1, unit: u1, precision: n1 },
                Kind::Unit { valuation: v2, unit: u2, precision: n2 },
            ) => {
                let abs = (v1 + *n1 as i64).min(v2 + *n2 as i64);
                let base = (*v1).min(*v2);
                // abs > base because each relative precision is at least 1
                let digits = (abs - base) as u32;
                let m = p_pow(p, digits);
                let lift =
                    |v: i64, u: &BigUint| -> BigUint { u * p_pow(p, (v - base) as u32) % &m };
                let sum = (lift(*v1, u1) + lift(*v2, u2)) % &m;
                if sum.is_zero() {
                    Kind::Zero { min_valuation: abs }
                } else {
                    let w = match int_valuation_unchecked(&BigInt::from(sum.clone()), p) {
                        Valuation::Finite(w) => w as u32,
                        Valuation::Infinite => unreachable!(),
                    };
                    Kind::Unit {
                        valuation: base + w as i64,
                        unit: &sum / p_pow(p, w),
                        precision: digits - w,
                    }
                }
            }
        };
        Ok(PAdic { p, kind })
    }

    pub fn neg(&self) -> PAdic {
        let kind = match &self.kind {
            Kind::Zero { min_valuation } => Kind::Zero {
                min_valuation: *min_valuation,
            },
            Kind::Unit { valuation, unit, precision } => Kind::Unit {
                valuation: *valuation,
                unit: p_pow(self.p, *precision) - unit,
                precision: *precision,
            },
        };
        PAdic { p: self.p, kind }
    }

    pub fn sub(&self, other: &PAdic) -> Result<PAdic> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &PAdic) -> Result<PAdic> {
        self.require_same_prime(other)?;
        let p = self.p;
        let kind = match (&self.kind, &other.kind) {
            (Kind::Zero { min_valuation: a }, Kind::Zero { min_valuation: b }) => {
                Kind::Zero { min_valuation: a + b }
            }
            (Kind::Zero { min_valuation }, Kind::Unit { valuation, .. })
            | (Kind::Unit { valuation, .. }, Kind::Zero { min_valuation }) => Kind::Zero {
                min_valuation: min_valuation + valuation,
            },
            (
                Kind::Unit { valuation: v1, unit: u1, precision: n1 },
                Kind::Unit { valuation: v2, unit: u2, precision: n2 },
            ) => {
                let digits = (*n1).min(*n2);
                Kind::Unit {
                    valuation: v1 + v2,
                    unit: u1 * u2 % p_pow(p, digits),
                    precision: digits,
                }
            }
        };
        Ok(PAdic { p, kind })
    }

    pub fn mul_int(&self, n: &BigInt) -> Result<PAdic> {
        let digits = match &self.kind {
            Kind::Zero { .. } => DEFAULT_PRECISION,
            Kind::Unit { precision, .. } => *precision,
        };
        self.mul(&PAdic::embed_int(n, self.p, digits.max(1))?)
    }

    /// Multiplicative inverse; fails on zero-to-precision values.
    pub fn invert(&self) -> Result<PAdic> {
        match &self.kind {
            Kind::Zero { .. } => Err(Error::ZeroInversion),
            Kind::Unit { valuation, unit, precision } => {
                let m = p_pow(self.p, *precision);
                let inv = mod_inverse(&BigInt::from(unit.clone()), &m)
                    .expect("unit is coprime to p by construction");
                Ok(PAdic {
                    p: self.p,
                    kind: Kind::Unit {
                        valuation: -valuation,
                        unit: inv,
                        precision: *precision,
                    },
                })
            }
        }
    }

    pub fn pow(&self, e: u32) -> PAdic {
        if e == 0 {
            let digits = self.rel_precision().unwrap_or_else(|| {
                self.abs_precision().clamp(1, DEFAULT_PRECISION as i64) as u32
            });
            return PAdic::one(self.p, digits.max(1)).expect("prime already validated");
        }
        let mut acc = self.clone();
        for _ in 1..e {
            acc = acc.mul(self).expect("same prime");
        }
        acc
    }

    /// Drop relative precision down to `digits`.
    pub fn truncate_rel(&self, digits: u32) -> PAdic {
        let kind = match &self.kind {
            Kind::Zero { min_valuation } => Kind::Zero {
                min_valuation: (*min_valuation).min(digits as i64),
            },
            Kind::Unit { valuation, unit, precision } => {
                let n = (*precision).min(digits.max(1));
                Kind::Unit {
                    valuation: *valuation,
                    unit: unit % p_pow(self.p, n),
                    precision: n,
                }
            }
        };
        PAdic { p: self.p, kind }
    }

    /// The residue of the value modulo p^digits. Requires ν ≥ 0 and enough
    /// tracked precision.
    pub fn residue(&self, digits: u32) -> Result<BigUint> {
        if (digits as i64) > self.abs_precision() {
            return Err(Error::PrecisionExhausted(format!(
                "residue modulo {}^{} requested but only {} absolute digits are tracked",
                self.p,
                digits,
                self.abs_precision()
            )));
        }
        match &self.kind {
            Kind::Zero { .. } => Ok(BigUint::zero()),
            Kind::Unit { valuation, unit, .. } => {
                if *valuation < 0 {
                    return Err(Error::InvalidArgument(
                        "residue of a value with negative valuation".into(),
                    ));
                }
                if *valuation >= digits as i64 {
                    return Ok(BigUint::zero());
                }
                Ok(unit * p_pow(self.p, *valuation as u32) % p_pow(self.p, digits))
            }
        }
    }

    /// Whether self ≡ other (mod p^digits), as far as tracked precision can tell.
    pub fn eq_mod(&self, other: &PAdic, digits: u32) -> Result<bool> {
        let diff = self.sub(other)?;
        if diff.abs_precision() < digits as i64 {
            return Err(Error::PrecisionExhausted(format!(
                "comparison modulo {}^{} exceeds tracked precision {}",
                self.p,
                digits,
                diff.abs_precision()
            )));
        }
        Ok(match diff.valuation() {
            Valuation::Finite(v) => v >= digits as i64,
            Valuation::Infinite => true,
        })
    }
}

fn rational_unit_residue(r: &BigRational, p: u64, digits: u32) -> BigUint {
    let pb = BigInt::from(p);
    let mut num = r.numer().clone();
    while (&num % &pb).is_zero() {
        num /= &pb;
    }
    let mut den = r.denom().clone();
    while (&den % &pb).is_zero() {
        den /= &pb;
    }
    let m = p_pow(p, digits);
    let inv = mod_inverse(&den, &m).expect("p-free denominator is invertible");
    (num * BigInt::from(inv))
        .mod_floor(&BigInt::from(m.clone()))
        .to_biguint()
        .expect("mod_floor is nonnegative")
}

impl fmt::Display for PAdic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Zero { min_valuation } => write!(f, "O({}^{})", self.p, min_valuation),
            Kind::Unit { valuation, unit, precision } => write!(
                f,
                "{}*{}^{} + O({}^{})",
                unit,
                self.p,
                valuation,
                self.p,
                valuation + *precision as i64
            ),
        }
    }
}

impl Serialize for PAdic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("PAdic", 4)?;
        st.serialize_field("p", &self.p)?;
        match &self.kind {
            Kind::Zero { min_valuation } => {
                st.serialize_field("valuation", &Valuation::Infinite)?;
                st.serialize_field("unit", &Option::<String>::None)?;
                st.serialize_field("precision", min_valuation)?;
            }
            Kind::Unit { valuation, unit, precision } => {
                st.serialize_field("valuation", &Valuation::Finite(*valuation))?;
                st.serialize_field("unit", &Some(unit.to_string()))?;
                st.serialize_field("precision", &(*precision as i64))?;
            }
        }
        st.end()
    }
}

impl<'de> Deserialize<'de> for PAdic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            p: u64,
            valuation: Valuation,
            #[serde(default)]
            unit: Option<String>,
            precision: i64,
        }
        let w = Wire::deserialize(d)?;
        if !is_prime(w.p) {
            return Err(de::Error::custom(format!("{} is not prime", w.p)));
        }
        match w.valuation {
            Valuation::Infinite => {
                if w.unit.is_some() {
                    return Err(de::Error::custom("zero-to-precision value carries a unit"));
                }
                Ok(PAdic {
                    p: w.p,
                    kind: Kind::Zero { min_valuation: w.precision },
                })
            }
            Valuation::Finite(v) => {
                let digits = u32::try_from(w.precision)
                    .ok()
                    .filter(|d| *d >= 1)
                    .ok_or_else(|| de::Error::custom("relative precision must be >= 1"))?;
                let unit_str = w
                    .unit
                    .ok_or_else(|| de::Error::custom("nonzero value needs a unit residue"))?;
                let unit: BigUint = unit_str
                    .parse()
                    .map_err(|_| de::Error::custom("unit is not a decimal integer"))?;
                if unit.is_zero() || unit >= p_pow(w.p, digits) {
                    return Err(de::Error::custom("unit residue out of range"));
                }
                if (&unit % w.p).is_zero() {
                    return Err(de::Error::custom("unit residue is divisible by p"));
                }
                Ok(PAdic {
                    p: w.p,
                    kind: Kind::Unit { valuation: v, unit, precision: digits },
                })
            }
        }
    }
}

// ---- tests -----------------------------------------------------------------
