//! p-adic analytic machinery: exp_p, log_p, exponential polynomials and
//! Hensel (Newton) root lifting.
//!
//! Both series are evaluated as exact partial sums over the rationals, using
//! an integer lift of the argument's residue; the truncation index is chosen
//! so that every dropped term sits provably below the target precision, with
//! a fixed guard of extra digits on top.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{PAdic, Valuation};

/// Extra digits carried through every series evaluation.
pub const SERIES_GUARD: u32 = 8;

/// Smallest argument valuation inside the shared convergence disc of exp_p
/// and log_p (radius p^(-1/(p-1))): 1 for odd p, 2 for p = 2.
pub fn min_convergent_valuation(p: u64) -> i64 {
    if p == 2 {
        2
    } else {
        1
    }
}

// ν_p(n!) = (n - s_p(n))/(p-1) ≤ (n-1)/(p-1), so the n-th exp term has
// valuation at least n·v - (n-1)/(p-1); nondecreasing in n when v ≥ 1.
fn exp_cutoff(v: i64, p: u64, abs_target: i64) -> u64 {
    let target = abs_target + SERIES_GUARD as i64;
    let pm1 = (p - 1).max(1) as i64;
    let mut t: i64 = 1;
    loop {
        if t * v - (t - 1) / pm1 > target {
            return t as u64;
        }
        t += 1;
    }
}

// ν_p(n-th log term) ≥ n·v - floor(log_p n), also nondecreasing for v ≥ 1.
fn log_cutoff(v: i64, p: u64, abs_target: i64) -> u64 {
    let target = abs_target + SERIES_GUARD as i64;
    let mut t: i64 = 1;
    loop {
        if t * v - floor_log(t, p) > target {
            return t as u64;
        }
        t += 1;
    }
}

fn floor_log(n: i64, p: u64) -> i64 {
    let mut k = 0i64;
    let mut m = p as i128;
    while n as i128 >= m {
        k += 1;
        m *= p as i128;
    }
    k
}

/// ν_p(t!) by Legendre's formula.
fn factorial_valuation(t: u64, p: u64) -> u64 {
    let mut v = 0;
    let mut q = t / p;
    while q > 0 {
        v += q;
        q /= p;
    }
    v
}

/// ν_p(lcm(1..=t)): the largest e with p^e ≤ t.
fn lcm_valuation(t: u64, p: u64) -> u64 {
    let mut v = 0;
    let mut pe = p;
    while pe <= t {
        v += 1;
        pe = match pe.checked_mul(p) {
            Some(next) => next,
            None => break,
        };
    }
    v
}

/// p^(abs_out + vden). A series numerator over a denominator of valuation
/// vden determines the value mod p^abs_out exactly through this modulus; a
/// shift (or ν_p above abs_out) the reduction introduces is past the digits
/// kept. None when the exponent does not fit, in which case callers skip
/// reducing.
fn series_modulus(p: u64, abs_out: i64, vden: u64) -> Option<BigInt> {
    let e = u32::try_from(abs_out.max(0) as u64 + vden).ok()?;
    Some(BigInt::from(crate::padic::p_pow(p, e)))
}

/// exp_p(z) = Σ zⁿ/n!, defined for ν_p(z) ≥ 1 (odd p) or ≥ 2 (p = 2).
///
/// The result is correct modulo p^min(digits, tracked precision of z).
pub fn exp_p(z: &PAdic, digits: u32) -> Result<PAdic> {
    let p = z.prime();
    let vmin = min_convergent_valuation(p);
    if digits == 0 {
        return Err(Error::ZeroPrecision);
    }
    match z.valuation() {
        Valuation::Finite(v) if v < vmin => {
            return Err(Error::DomainViolation(format!(
                "exp_{p} needs ν_{p}(z) ≥ {vmin}, got {v}"
            )));
        }
        Valuation::Infinite if z.abs_precision() < vmin => {
            return Err(Error::DomainViolation(format!(
                "exp_{p} needs ν_{p}(z) ≥ {vmin}, but z is only known modulo {p}^{}",
                z.abs_precision()
            )));
        }
        _ => {}
    }
    let abs_out = (digits as i64).min(z.abs_precision());
    if z.is_zero_to_precision() {
        // exp(0 + O(p^a)) = 1 + O(p^a)
        return PAdic::one(p, abs_out as u32);
    }
    let v = z.valuation().finite().expect("nonzero case");
    let w = BigInt::from(z.residue(abs_out as u32)?);
    let top = exp_cutoff(v, p, abs_out) - 1;
    // Σ_{n≤T} wⁿ/n! = A_T/T! with A_T = T·A_{T-1} + w^T; integer Horner
    // avoids a gcd reduction per term. A_T is only needed modulo
    // p^(abs_out + ν_p(T!)), so reduce as we go to keep operands small.
    let modulus = series_modulus(p, abs_out, factorial_valuation(top, p));
    let mut acc = BigInt::one();
    let mut wpow = BigInt::one();
    let mut fact = BigInt::one();
    for t in 1..=top {
        wpow *= &w;
        acc = acc * t + &wpow;
        if let Some(m) = &modulus {
            wpow %= m;
            acc %= m;
        }
        fact *= t;
    }
    PAdic::from_rational_abs(&BigRational::new(acc, fact), p, abs_out)
}

/// log_p(z) = Σ (-1)^(n-1)(z-1)ⁿ/n, defined for ν_p(z-1) ≥ 1 (odd p) or
/// ≥ 2 (p = 2).
pub fn log_p(z: &PAdic, digits: u32) -> Result<PAdic> {
    let p = z.prime();
    let vmin = min_convergent_valuation(p);
    if digits == 0 {
        return Err(Error::ZeroPrecision);
    }
    let one = PAdic::one(p, z.abs_precision().clamp(1, u32::MAX as i64) as u32)?;
    let w = z.sub(&one)?;
    match w.valuation() {
        Valuation::Finite(v) if v < vmin => {
            return Err(Error::DomainViolation(format!(
                "log_{p} needs ν_{p}(z-1) ≥ {vmin}, got {v}"
            )));
        }
        Valuation::Infinite => {
            if w.abs_precision() < vmin {
                return Err(Error::DomainViolation(format!(
                    "log_{p} needs ν_{p}(z-1) ≥ {vmin}, but z-1 is only known modulo {p}^{}",
                    w.abs_precision()
                )));
            }
            // z ≡ 1 to full tracked precision, so the log vanishes there too
            return PAdic::zero(p, (digits as i64).min(w.abs_precision()));
        }
        _ => {}
    }
    let v = w.valuation().finite().expect("nonzero case");
    let abs_out = (digits as i64).min(w.abs_precision());
    let lift = BigInt::from(w.residue(abs_out as u32)?);
    let top = log_cutoff(v, p, abs_out) - 1;
    // Σ_{n≤T} ±wⁿ/n over the common denominator lcm(1..T); the sum is only
    // needed modulo p^(abs_out + ν_p(lcm)), so reduce as we go
    let common = (1..=top).fold(BigInt::one(), |l, n| l.lcm(&BigInt::from(n)));
    let modulus = series_modulus(p, abs_out, lcm_valuation(top, p));
    let mut acc = BigInt::zero();
    let mut wpow = BigInt::one();
    for n in 1..=top {
        wpow *= &lift;
        if let Some(m) = &modulus {
            wpow %= m;
        }
        let term = &wpow * (&common / BigInt::from(n));
        if n % 2 == 1 {
            acc += term;
        } else {
            acc -= term;
        }
        if let Some(m) = &modulus {
            acc %= m;
        }
    }
    PAdic::from_rational_abs(&BigRational::new(acc, common), p, abs_out)
}

// ---- exponential polynomials ------------------------------------------------

/// One summand c · z^degree · exp_p(rate · z).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub coefficient: PAdic,
    pub degree: u32,
    pub rate: PAdic,
}

/// A finite sum of terms c · z^j · exp_p(λz) over one prime, with every
/// rate λ inside the convergence disc. Closed under differentiation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentialPolynomial {
    p: u64,
    terms: Vec<ExpTerm>,
}

impl ExponentialPolynomial {
    pub fn new(p: u64, terms: Vec<ExpTerm>) -> Result<Self> {
        crate::padic::check_prime(p)?;
        if terms.is_empty() {
            return Err(Error::InvalidArgument(
                "exponential polynomial needs at least one term".into(),
            ));
        }
        let vmin = min_convergent_valuation(p);
        for t in &terms {
            if t.coefficient.prime() != p || t.rate.prime() != p {
                return Err(Error::PrimeMismatch {
                    left: p,
                    right: if t.coefficient.prime() != p {
                        t.coefficient.prime()
                    } else {
                        t.rate.prime()
                    },
                });
            }
            let ok = match t.rate.valuation() {
                Valuation::Finite(v) => v >= vmin,
                Valuation::Infinite => t.rate.abs_precision() >= vmin,
            };
            if !ok {
                return Err(Error::DomainViolation(format!(
                    "rate has ν_{p} below {vmin}; exp_{p}(rate·z) would diverge"
                )));
            }
        }
        Ok(ExponentialPolynomial { p, terms })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    /// Evaluate at z ∈ Z_p. Precision follows from the tracked precision of
    /// the coefficients, the rates and z.
    pub fn eval(&self, z: &PAdic) -> Result<PAdic> {
        if z.prime() != self.p {
            return Err(Error::PrimeMismatch {
                left: self.p,
                right: z.prime(),
            });
        }
        let integral = match z.valuation() {
            Valuation::Finite(v) => v >= 0,
            Valuation::Infinite => z.abs_precision() >= 0,
        };
        if !integral {
            return Err(Error::DomainViolation(
                "exponential polynomials are evaluated on Z_p only".into(),
            ));
        }
        let mut acc: Option<PAdic> = None;
        for t in &self.terms {
            let rz = t.rate.mul(z)?;
            let edigits = rz.abs_precision().clamp(1, u32::MAX as i64) as u32;
            let mut val = t.coefficient.mul(&exp_p(&rz, edigits)?)?;
            if t.degree > 0 {
                val = val.mul(&z.pow(t.degree))?;
            }
            acc = Some(match acc {
                None => val,
                Some(a) => a.add(&val)?,
            });
        }
        Ok(acc.expect("terms are non-empty"))
    }

    /// Exact term-by-term derivative:
    /// (c, j, λ) ↦ (c·j, j-1, λ) ⊕ (c·λ, j, λ).
    pub fn derivative(&self) -> ExponentialPolynomial {
        let mut out = Vec::with_capacity(self.terms.len() * 2);
        for t in &self.terms {
            if t.degree >= 1 {
                out.push(ExpTerm {
                    coefficient: t
                        .coefficient
                        .mul_int(&BigInt::from(t.degree))
                        .expect("same prime"),
                    degree: t.degree - 1,
                    rate: t.rate.clone(),
                });
            }
            out.push(ExpTerm {
                coefficient: t.coefficient.mul(&t.rate).expect("same prime"),
                degree: t.degree,
                rate: t.rate.clone(),
            });
        }
        ExponentialPolynomial {
            p: self.p,
            terms: out,
        }
    }
}

// ---- Hensel lifting ----------------------------------------------------------

/// Newton-iterate b ← b - f(b)/f'(b) from `start` until f(b) ≡ 0 mod p^digits.
///
/// Preconditions (checked): ν_p(f(start)) ≥ 1 and f'(start) a unit. If
/// f(start) already vanishes to the requested precision the start point is
/// returned as-is, with no condition on the derivative.
///
/// The returned root satisfies root ≡ start (mod p) and
/// ν_p(root - start) ≥ ν_p(f(start)).
pub fn hensel_lift(f: &ExponentialPolynomial, start: &PAdic, digits: u32) -> Result<PAdic> {
    if digits == 0 {
        return Err(Error::ZeroPrecision);
    }
    let resolved = |fb: &PAdic| -> Result<bool> {
        match fb.valuation() {
            Valuation::Finite(v) => Ok(v >= digits as i64),
            Valuation::Infinite => {
                if fb.abs_precision() >= digits as i64 {
                    Ok(true)
                } else {
                    Err(Error::PrecisionExhausted(format!(
                        "f(b) vanishes to only {} tracked digits; {} requested",
                        fb.abs_precision(),
                        digits
                    )))
                }
            }
        }
    };

    let f0 = f.eval(start)?;
    if resolved(&f0)? {
        return Ok(start.clone());
    }
    match f0.valuation() {
        Valuation::Finite(v) if v >= 1 => {}
        v => {
            return Err(Error::HenselPrecondition(format!(
                "ν_p(f(start)) = {v}, need ≥ 1"
            )));
        }
    }
    let fp = f.derivative();
    let d0 = fp.eval(start)?;
    if d0.valuation() != Valuation::Finite(0) {
        return Err(Error::HenselPrecondition(format!(
            "ν_p(f'(start)) = {}, need 0 (a unit)",
            d0.valuation()
        )));
    }

    // valuation of f(b) at least doubles per step, so ⌈log₂ digits⌉ + 2 is enough
    let budget = 32 - (digits.max(2) - 1).leading_zeros() + 2;
    let mut b = start.clone();
    let mut fb = f0;
    for _ in 0..=budget {
        if resolved(&fb)? {
            return Ok(b);
        }
        let db = fp.eval(&b)?;
        if db.valuation() != Valuation::Finite(0) {
            return Err(Error::HenselPrecondition(
                "derivative stopped being a unit along the iteration".into(),
            ));
        }
        let delta = fb.mul(&db.invert()?)?;
        b = b.sub(&delta)?;
        fb = f.eval(&b)?;
    }
    Err(Error::HenselDiverged(format!(
        "no root to {digits} digits within {budget} Newton steps"
    )))
}

// ---- tests -------------------------------------------------------------------
