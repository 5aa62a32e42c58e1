//! Integer linear recurrences x_n = b₁x_{n-1} + … + b_k x_{n-k}: exact term
//! evaluation, modular term streams with certified valuations, root
//! factorizations of the characteristic polynomial, and exact closed forms
//! x_n = Σ_i (Σ_j c_{i,j} n^j) a_iⁿ solved through fraction-free elimination.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::padic::{check_prime, int_valuation_unchecked, p_pow, Valuation};

// ---- the recurrence itself ---------------------------------------------------

/// Coefficients b₁..b_k and initial values x₀..x_{k-1}; b_k ≠ 0 so no lower
/// order recurrence generates the same sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrenceSpec {
    coeffs: Vec<BigInt>,
    initials: Vec<BigInt>,
}

impl RecurrenceSpec {
    pub fn new(coeffs: Vec<BigInt>, initials: Vec<BigInt>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidRecurrence(format!(
                "order must be at least 2, got {}",
                coeffs.len()
            )));
        }
        if initials.len() != coeffs.len() {
            return Err(Error::InvalidRecurrence(format!(
                "{} coefficients but {} initial values",
                coeffs.len(),
                initials.len()
            )));
        }
        if coeffs.last().expect("nonempty").is_zero() {
            return Err(Error::InvalidRecurrence(
                "trailing coefficient b_k must be nonzero".into(),
            ));
        }
        Ok(RecurrenceSpec { coeffs, initials })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn initials(&self) -> &[BigInt] {
        &self.initials
    }

    pub fn is_identically_zero(&self) -> bool {
        self.initials.iter().all(|x| x.is_zero())
    }

    /// Monic characteristic polynomial x^k - b₁x^{k-1} - … - b_k,
    /// coefficients in descending degree order.
    pub fn char_poly(&self) -> Vec<BigInt> {
        let mut out = Vec::with_capacity(self.order() + 1);
        out.push(BigInt::one());
        out.extend(self.coeffs.iter().map(|b| -b));
        out
    }

    /// Exact n-th term.
    pub fn term(&self, n: u64) -> BigInt {
        let k = self.order() as u64;
        if n < k {
            return self.initials[n as usize].clone();
        }
        let mut ring = self.initials.clone();
        for i in k..=n {
            let mut s = BigInt::zero();
            for (j, b) in self.coeffs.iter().enumerate() {
                s += b * &ring[((i - 1 - j as u64) % k) as usize];
            }
            ring[(i % k) as usize] = s;
        }
        ring[(n % k) as usize].clone()
    }

    /// x₀..x_{n_max}, inclusive.
    pub fn terms_upto(&self, n_max: u64) -> Vec<BigInt> {
        let k = self.order() as u64;
        let mut out: Vec<BigInt> = self
            .initials
            .iter()
            .take((n_max + 1).min(k) as usize)
            .cloned()
            .collect();
        let mut i = k;
        while i <= n_max {
            let mut s = BigInt::zero();
            for (j, b) in self.coeffs.iter().enumerate() {
                s += b * &out[(i - 1 - j as u64) as usize];
            }
            out.push(s);
            i += 1;
        }
        out
    }
}

// ---- modular term streams ----------------------------------------------------

/// Valuation of a single term as certified by the modular stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermValuation {
    Finite(i64),
    /// The term is exactly zero.
    Infinite,
    /// Residues vanished at every precision tried; only ν ≥ checked_digits
    /// is certified.
    Undetermined { checked_digits: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermResidue {
    pub residue: BigUint,
    pub valuation: TermValuation,
}

/// Escalation policy for terms whose residue vanishes: double the modulus up
/// to `max_digits`, then fall back to exact evaluation for indices up to
/// `exact_index_limit`.
#[derive(Clone, Copy, Debug)]
pub struct EscalationConfig {
    pub max_digits: u32,
    pub exact_index_limit: u64,
}

impl Default for EscalationConfig {
    fn default() -> Self {
        EscalationConfig {
            max_digits: 4096,
            exact_index_limit: 10_000,
        }
    }
}

fn residues_at(spec: &RecurrenceSpec, p: u64, digits: u32, n_max: u64) -> Vec<BigUint> {
    let m = BigInt::from(p_pow(p, digits));
    let coeffs: Vec<BigInt> = spec.coeffs().iter().map(|b| b.mod_floor(&m)).collect();
    let k = spec.order() as u64;
    let mut out: Vec<BigInt> = spec
        .initials()
        .iter()
        .take((n_max + 1).min(k) as usize)
        .map(|x| x.mod_floor(&m))
        .collect();
    let mut i = k;
    while i <= n_max {
        let mut s = BigInt::zero();
        for (j, b) in coeffs.iter().enumerate() {
            s += b * &out[(i - 1 - j as u64) as usize];
        }
        out.push(s.mod_floor(&m));
        i += 1;
    }
    out.into_iter()
        .map(|x| x.to_biguint().expect("mod_floor is nonnegative"))
        .collect()
}

/// Residues of x₀..x_{n_max} modulo p^digits together with certified
/// valuations. A vanishing residue is never reported as a valuation guess:
/// the modulus escalates, then exact evaluation takes over, and if both run
/// out the entry is marked undetermined.
pub fn terms_mod(spec: &RecurrenceSpec, p: u64, digits: u32, n_max: u64) -> Result<Vec<TermResidue>> {
    terms_mod_with(spec, p, digits, n_max, &EscalationConfig::default())
}

pub fn terms_mod_with(
    spec: &RecurrenceSpec,
    p: u64,
    digits: u32,
    n_max: u64,
    cfg: &EscalationConfig,
) -> Result<Vec<TermResidue>> {
    check_prime(p)?;
    if digits == 0 {
        return Err(Error::ZeroPrecision);
    }
    let base = residues_at(spec, p, digits, n_max);
    let mut vals: Vec<Option<TermValuation>> = base
        .iter()
        .map(|r| {
            if r.is_zero() {
                None
            } else {
                match int_valuation_unchecked(&BigInt::from(r.clone()), p) {
                    Valuation::Finite(v) => Some(TermValuation::Finite(v)),
                    Valuation::Infinite => unreachable!("nonzero residue"),
                }
            }
        })
        .collect();

    let mut d = digits;
    while vals.iter().any(Option::is_none) && d < cfg.max_digits {
        d = d.saturating_mul(2).min(cfg.max_digits);
        let finer = residues_at(spec, p, d, n_max);
        for (i, slot) in vals.iter_mut().enumerate() {
            if slot.is_none() && !finer[i].is_zero() {
                if let Valuation::Finite(v) =
                    int_valuation_unchecked(&BigInt::from(finer[i].clone()), p)
                {
                    *slot = Some(TermValuation::Finite(v));
                }
            }
        }
    }
    for (i, slot) in vals.iter_mut().enumerate() {
        if slot.is_some() {
            continue;
        }
        *slot = Some(if (i as u64) <= cfg.exact_index_limit {
            match int_valuation_unchecked(&spec.term(i as u64), p) {
                Valuation::Finite(v) => TermValuation::Finite(v),
                Valuation::Infinite => TermValuation::Infinite,
            }
        } else {
            TermValuation::Undetermined { checked_digits: d }
        });
    }

    Ok(base
        .into_iter()
        .zip(vals)
        .map(|(residue, v)| TermResidue {
            residue,
            valuation: v.expect("every slot filled"),
        })
        .collect())
}

/// x_n mod p^digits for a single (possibly astronomically large) index,
/// via companion-matrix exponentiation: O(k³ log n) modular products.
pub fn term_residue_at(spec: &RecurrenceSpec, p: u64, digits: u32, n: u128) -> Result<BigUint> {
    check_prime(p)?;
    if digits == 0 {
        return Err(Error::ZeroPrecision);
    }
    let m = BigInt::from(p_pow(p, digits));
    let k = spec.order();
    if n < k as u128 {
        return Ok(spec.initials()[n as usize]
            .mod_floor(&m)
            .to_biguint()
            .expect("mod_floor is nonnegative"));
    }
    // companion matrix: (x_i, …, x_{i-k+1}) ↦ (x_{i+1}, …, x_{i-k+2})
    let mut c = vec![vec![BigInt::zero(); k]; k];
    for (j, b) in spec.coeffs().iter().enumerate() {
        c[0][j] = b.mod_floor(&m);
    }
    for r in 1..k {
        c[r][r - 1] = BigInt::one();
    }
    let pow = mat_pow_mod(&c, n - (k as u128 - 1), &m);
    // the state at index k-1 is (x_{k-1}, …, x_0)
    let mut acc = BigInt::zero();
    for (j, x) in spec.initials().iter().rev().enumerate() {
        acc += &pow[0][j] * x.mod_floor(&m);
    }
    Ok(acc.mod_floor(&m).to_biguint().expect("mod_floor is nonnegative"))
}

fn mat_mul_mod(a: &[Vec<BigInt>], b: &[Vec<BigInt>], m: &BigInt) -> Vec<Vec<BigInt>> {
    let k = a.len();
    let mut out = vec![vec![BigInt::zero(); k]; k];
    for i in 0..k {
        for (l, al) in a[i].iter().enumerate() {
            if al.is_zero() {
                continue;
            }
            for j in 0..k {
                out[i][j] += al * &b[l][j];
            }
        }
        for cell in &mut out[i] {
            *cell = cell.mod_floor(m);
        }
    }
    out
}

fn mat_pow_mod(c: &[Vec<BigInt>], mut e: u128, m: &BigInt) -> Vec<Vec<BigInt>> {
    let k = c.len();
    let mut result: Vec<Vec<BigInt>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect();
    let mut base = c.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = mat_mul_mod(&result, &base, m);
        }
        e >>= 1;
        if e > 0 {
            base = mat_mul_mod(&base, &base, m);
        }
    }
    result
}

// ---- root factorizations -------------------------------------------------------

/// Distinct integer roots with multiplicities; claims the characteristic
/// polynomial equals ∏(x - a_i)^{m_i}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootFactorization {
    pairs: Vec<(BigInt, u32)>,
}

impl RootFactorization {
    pub fn new(pairs: Vec<(BigInt, u32)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidFactorization("no roots given".into()));
        }
        for (a, m) in &pairs {
            if a.is_zero() {
                return Err(Error::InvalidFactorization(
                    "zero roots cannot occur when b_k ≠ 0".into(),
                ));
            }
            if *m == 0 {
                return Err(Error::InvalidFactorization(
                    "multiplicities must be at least 1".into(),
                ));
            }
        }
        for i in 0..pairs.len() {
            for j in i + 1..pairs.len() {
                if pairs[i].0 == pairs[j].0 {
                    return Err(Error::InvalidFactorization(format!(
                        "root {} listed twice",
                        pairs[i].0
                    )));
                }
            }
        }
        Ok(RootFactorization { pairs })
    }

    pub fn pairs(&self) -> &[(BigInt, u32)] {
        &self.pairs
    }

    pub fn order(&self) -> usize {
        self.pairs.iter().map(|(_, m)| *m as usize).sum()
    }

    pub fn distinct_count(&self) -> usize {
        self.pairs.len()
    }
}

/// Whether ∏(x - a_i)^{m_i} literally equals the characteristic polynomial.
pub fn validate_factorization(spec: &RecurrenceSpec, fact: &RootFactorization) -> bool {
    if fact.order() != spec.order() {
        return false;
    }
    let mut poly = vec![BigInt::one()];
    for (a, m) in fact.pairs() {
        for _ in 0..*m {
            poly = poly_mul_linear(&poly, a);
        }
    }
    poly == spec.char_poly()
}

// poly · (x - a), descending coefficients
fn poly_mul_linear(poly: &[BigInt], a: &BigInt) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); poly.len() + 1];
    for (i, c) in poly.iter().enumerate() {
        out[i] += c;
        out[i + 1] -= c * a;
    }
    out
}

fn horner(poly: &[BigInt], x: &BigInt) -> BigInt {
    let mut acc = BigInt::zero();
    for c in poly {
        acc = acc * x + c;
    }
    acc
}

// quotient of poly by (x - a), assuming zero remainder
fn synthetic_div(poly: &[BigInt], a: &BigInt) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(poly.len() - 1);
    let mut carry = BigInt::zero();
    for c in &poly[..poly.len() - 1] {
        carry = carry * a + c;
        out.push(carry.clone());
    }
    debug_assert!((horner(poly, a)).is_zero(), "division leaves a remainder");
    out
}

const TRIAL_DIVISION_LIMIT: u64 = 1_000_000;
const DIVISOR_BUDGET: usize = 10_000;

// all positive divisors, or None when |n| resists factoring at desk scale
fn positive_divisors(n: &BigInt) -> Option<Vec<BigInt>> {
    let mut rest = n.abs();
    if rest.is_zero() {
        return None;
    }
    let mut primes: Vec<(BigInt, u32)> = vec![];
    let mut d = 2u64;
    while d <= TRIAL_DIVISION_LIMIT {
        let db = BigInt::from(d);
        if &db * &db > rest {
            break;
        }
        let mut e = 0u32;
        loop {
            let (q, r) = rest.div_rem(&db);
            if r.is_zero() {
                rest = q;
                e += 1;
            } else {
                break;
            }
        }
        if e > 0 {
            primes.push((db, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if !rest.is_one() {
        match rest.to_u64_digits().1.as_slice() {
            [x] if rest.bits() <= 64 && crate::padic::is_prime(*x) => {
                primes.push((rest.clone(), 1));
            }
            _ => return None,
        }
    }
    let mut divisors = vec![BigInt::one()];
    for (q, e) in primes {
        let mut next = Vec::with_capacity(divisors.len() * (e as usize + 1));
        for base in &divisors {
            let mut acc = base.clone();
            next.push(acc.clone());
            for _ in 0..e {
                acc = &acc * &q;
                next.push(acc.clone());
            }
        }
        if next.len() > DIVISOR_BUDGET {
            return None;
        }
        divisors = next;
    }
    divisors.sort();
    Some(divisors)
}

/// Full integer factorization of the characteristic polynomial by rational
/// root extraction, or None when it does not split over Z (or resists
/// factoring). Roots come out smallest magnitude first, positive before
/// negative.
pub fn find_integer_roots(spec: &RecurrenceSpec) -> Option<RootFactorization> {
    let mut poly = spec.char_poly();
    let mut found: Vec<(BigInt, u32)> = vec![];
    while poly.len() > 1 {
        let constant = poly.last().expect("nonempty");
        if constant.is_zero() {
            return None; // zero root contradicts b_k ≠ 0
        }
        let divisors = positive_divisors(constant)?;
        let mut hit: Option<BigInt> = None;
        'search: for d in &divisors {
            for cand in [d.clone(), -d.clone()] {
                if horner(&poly, &cand).is_zero() {
                    hit = Some(cand);
                    break 'search;
                }
            }
        }
        let root = hit?;
        let mut mult = 0u32;
        while horner(&poly, &root).is_zero() {
            poly = synthetic_div(&poly, &root);
            mult += 1;
        }
        found.push((root, mult));
    }
    RootFactorization::new(found).ok()
}

// ---- closed forms ---------------------------------------------------------------

/// One root's share of the closed form: (Σ_j coefficients[j]·n^j) · rootⁿ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedFormPart {
    pub root: BigInt,
    pub coefficients: Vec<BigRational>,
}

/// Exact closed form of the sequence, together with the confluent
/// Vandermonde system that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedForm {
    parts: Vec<ClosedFormPart>,
    det: BigInt,
    matrix: Vec<Vec<BigInt>>,
}

impl ClosedForm {
    pub fn parts(&self) -> &[ClosedFormPart] {
        &self.parts
    }

    /// Determinant of the interpolation matrix (nonzero for distinct roots).
    pub fn det(&self) -> &BigInt {
        &self.det
    }

    pub fn matrix(&self) -> &[Vec<BigInt>] {
        &self.matrix
    }

    /// Coefficients flattened in matrix-column order.
    pub fn flat_coefficients(&self) -> Vec<&BigRational> {
        self.parts
            .iter()
            .flat_map(|p| p.coefficients.iter())
            .collect()
    }

    /// Exact value of the closed form at n.
    pub fn evaluate(&self, n: u64) -> BigRational {
        let nq = BigInt::from(n);
        let mut acc = BigRational::zero();
        for part in &self.parts {
            let mut inner = BigRational::zero();
            let mut npow = BigInt::one();
            for c in &part.coefficients {
                inner += c * BigRational::from(npow.clone());
                npow *= &nq;
            }
            let root_pow = part.root.pow(n as u32);
            acc += inner * BigRational::from(root_pow);
        }
        acc
    }
}

/// Solve the confluent Vandermonde system A·c = (x₀..x_{k-1}) whose columns
/// are n^j·a_iⁿ, grouped per root in factorization order.
pub fn solve_closed_form(spec: &RecurrenceSpec, fact: &RootFactorization) -> Result<ClosedForm> {
    if !validate_factorization(spec, fact) {
        return Err(Error::InvalidFactorization(
            "claimed roots do not multiply back to the characteristic polynomial".into(),
        ));
    }
    let k = spec.order();
    let mut matrix = Vec::with_capacity(k);
    for n in 0..k as u64 {
        let mut row = Vec::with_capacity(k);
        let nb = BigInt::from(n);
        for (a, m) in fact.pairs() {
            let apow = a.pow(n as u32);
            let mut njpow = BigInt::one(); // n^j with 0^0 = 1
            for _ in 0..*m {
                row.push(&njpow * &apow);
                njpow *= &nb;
            }
        }
        matrix.push(row);
    }
    let (det, solution) = bareiss_solve(&matrix, spec.initials())?;

    let mut parts = Vec::with_capacity(fact.distinct_count());
    let mut offset = 0usize;
    for (a, m) in fact.pairs() {
        parts.push(ClosedFormPart {
            root: a.clone(),
            coefficients: solution[offset..offset + *m as usize].to_vec(),
        });
        offset += *m as usize;
    }
    let cf = ClosedForm { parts, det, matrix };
    debug_assert!((0..k as u64).all(|n| cf.evaluate(n) == BigRational::from(spec.term(n))));
    Ok(cf)
}

/// Fraction-free Gaussian elimination (Bareiss). Returns the exact
/// determinant and the rational solution of A·x = rhs.
fn bareiss_solve(a: &[Vec<BigInt>], rhs: &[BigInt]) -> Result<(BigInt, Vec<BigRational>)> {
    let n = a.len();
    let mut m: Vec<Vec<BigInt>> = a
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    let mut sign = 1i32;
    let mut prev = BigInt::one();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !m[r][col].is_zero())
            .ok_or_else(|| Error::SingularSystem(format!("no pivot in column {col}")))?;
        if pivot != col {
            m.swap(pivot, col);
            sign = -sign;
        }
        for r in col + 1..n {
            for c in col + 1..=n {
                let num = &m[col][col] * &m[r][c] - &m[r][col] * &m[col][c];
                let (q, rem) = num.div_rem(&prev);
                debug_assert!(rem.is_zero(), "fraction-free division failed");
                m[r][c] = q;
            }
            m[r][col] = BigInt::zero();
        }
        prev = m[col][col].clone();
    }
    let det = if sign < 0 {
        -m[n - 1][n - 1].clone()
    } else {
        m[n - 1][n - 1].clone()
    };
    let mut x = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut s = BigRational::from(m[i][n].clone());
        for j in i + 1..n {
            s -= BigRational::from(m[i][j].clone()) * &x[j];
        }
        x[i] = s / BigRational::from(m[i][i].clone());
    }
    Ok((det, x))
}

// ---- closed-form shortcuts for cubic shapes --------------------------------------

/// Coefficients (c₀, c₁, c₂) with x_n = (c₀ + c₁n + c₂n²)aⁿ for a triple
/// root a of a cubic characteristic polynomial.
pub fn triple_root_coefficients(
    a: &BigInt,
    x0: &BigInt,
    x1: &BigInt,
    x2: &BigInt,
) -> Result<[BigRational; 3]> {
    if a.is_zero() {
        return Err(Error::InvalidFactorization("zero root".into()));
    }
    let two_a2 = BigInt::from(2) * a * a;
    let c0 = BigRational::from(x0.clone());
    let c1 = BigRational::new(BigInt::from(4) * a * x1 - x2 - BigInt::from(3) * a * a * x0, two_a2.clone());
    let c2 = BigRational::new(x2 - BigInt::from(2) * a * x1 + a * a * x0, two_a2);
    Ok([c0, c1, c2])
}

/// Coefficients (c₀, c₁, c₂) with x_n = (c₀ + c₁n)aⁿ + c₂bⁿ for a cubic
/// with roots a, a, b (a ≠ b).
pub fn double_pair_coefficients(
    a: &BigInt,
    b: &BigInt,
    x0: &BigInt,
    x1: &BigInt,
    x2: &BigInt,
) -> Result<[BigRational; 3]> {
    if a.is_zero() || b.is_zero() || a == b {
        return Err(Error::InvalidFactorization(
            "need distinct nonzero roots a ≠ b".into(),
        ));
    }
    let bma2 = (b - a) * (b - a);
    let c0 = BigRational::new(
        b * b * x0 - BigInt::from(2) * a * b * x0 - x2 + BigInt::from(2) * a * x1,
        bma2.clone(),
    );
    let c1 = BigRational::new(x2 - x1 * (a + b) + x0 * a * b, a * (a - b));
    let c2 = BigRational::new(x2 - BigInt::from(2) * a * x1 + a * a * x0, bma2);
    Ok([c0, c1, c2])
}

// ---- tests ------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(coeffs: &[i64], initials: &[i64]) -> RecurrenceSpec {
        RecurrenceSpec::new(
            coeffs.iter().map(|&c| BigInt::from(c)).collect(),
            initials.iter().map(|&x| BigInt::from(x)).collect(),
        )
        .unwrap()
    }

    fn fact(pairs: &[(i64, u32)]) -> RootFactorization {
        RootFactorization::new(pairs.iter().map(|&(a, m)| (BigInt::from(a), m)).collect())
            .unwrap()
    }

    fn fib() -> RecurrenceSpec {
        spec(&[1, 1], &[0, 1])
    }

    #[test]
    fn construction_is_validated() {
        assert!(matches!(
            RecurrenceSpec::new(vec![BigInt::one()], vec![BigInt::one()]),
            Err(Error::InvalidRecurrence(_))
        ));
        assert!(matches!(
            RecurrenceSpec::new(
                vec![BigInt::one(), BigInt::zero()],
                vec![BigInt::zero(), BigInt::one()]
            ),
            Err(Error::InvalidRecurrence(_))
        ));
        assert!(matches!(
            RecurrenceSpec::new(vec![BigInt::one(), BigInt::one()], vec![BigInt::zero()]),
            Err(Error::InvalidRecurrence(_))
        ));
    }

    #[test]
    fn fibonacci_terms() {
        let f = fib();
        assert_eq!(f.term(0), BigInt::from(0));
        assert_eq!(f.term(1), BigInt::from(1));
        assert_eq!(f.term(10), BigInt::from(55));
        let upto = f.terms_upto(10);
        assert_eq!(upto.len(), 11);
        assert_eq!(upto[10], BigInt::from(55));
        assert_eq!(upto[6], BigInt::from(8));
    }

    #[test]
    fn pure_power_plus_polynomial_sequence() {
        // b = (4,-5,2) with impulse initials gives x_n = 2^n - n - 1
        let s = spec(&[4, -5, 2], &[0, 0, 1]);
        assert_eq!(s.term(5), BigInt::from(26));
        for n in 0..20u64 {
            let expect = BigInt::from(2).pow(n as u32) - BigInt::from(n) - 1;
            assert_eq!(s.term(n), expect, "n = {n}");
        }
        assert_eq!(
            s.terms_upto(7),
            [0i64, 0, 1, 4, 11, 26, 57, 120]
                .iter()
                .map(|&x| BigInt::from(x))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn terms_mod_matches_exact_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7e65_04d5);
        for _ in 0..20 {
            let k = rng.gen_range(2..5usize);
            let coeffs: Vec<i64> = (0..k)
                .map(|i| {
                    let c = rng.gen_range(-6..7i64);
                    if i == k - 1 && c == 0 {
                        1
                    } else {
                        c
                    }
                })
                .collect();
            let initials: Vec<i64> = (0..k).map(|_| rng.gen_range(-9..10i64)).collect();
            let s = spec(&coeffs, &initials);
            let p = [2u64, 3, 5][rng.gen_range(0..3)];
            let digits = rng.gen_range(1..6u32);
            let rows = terms_mod(&s, p, digits, 300).unwrap();
            let m = BigInt::from(p_pow(p, digits));
            let exact = s.terms_upto(300);
            for (n, row) in rows.iter().enumerate() {
                assert_eq!(
                    BigInt::from(row.residue.clone()),
                    exact[n].mod_floor(&m),
                    "residue mismatch at n={n}"
                );
                match row.valuation {
                    TermValuation::Finite(v) => {
                        assert_eq!(
                            int_valuation_unchecked(&exact[n], p),
                            Valuation::Finite(v)
                        );
                    }
                    TermValuation::Infinite => assert!(exact[n].is_zero()),
                    TermValuation::Undetermined { .. } => {
                        panic!("n ≤ 300 never exceeds the exact fallback")
                    }
                }
            }
        }
    }

    #[test]
    fn single_index_residue_agrees_with_streamed_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0a57_f00d);
        for _ in 0..15 {
            let k = rng.gen_range(2..5usize);
            let coeffs: Vec<i64> = (0..k)
                .map(|i| {
                    let c = rng.gen_range(-6..7i64);
                    if i == k - 1 && c == 0 {
                        1
                    } else {
                        c
                    }
                })
                .collect();
            let initials: Vec<i64> = (0..k).map(|_| rng.gen_range(-9..10i64)).collect();
            let s = spec(&coeffs, &initials);
            let p = [3u64, 5, 7][rng.gen_range(0..3)];
            let digits = rng.gen_range(1..8u32);
            let m = BigInt::from(p_pow(p, digits));
            let exact = s.terms_upto(120);
            for n in 0..=120u128 {
                assert_eq!(
                    BigInt::from(term_residue_at(&s, p, digits, n).unwrap()),
                    exact[n as usize].mod_floor(&m),
                    "index {n}"
                );
            }
        }
    }

    #[test]
    fn single_index_residue_handles_huge_indices() {
        // Fibonacci mod 10⁰-ish moduli is periodic: π(2³) = 24, so
        // F(24·10¹⁸ + 10) ≡ F(10) = 55 (mod 8)
        let idx = 24u128 * 1_000_000_000_000_000_000 + 10;
        let r = term_residue_at(&fib(), 2, 3, idx).unwrap();
        assert_eq!(r, BigUint::from(55u32 % 8));
    }

    #[test]
    fn terms_mod_escalates_through_vanishing_residues() {
        // x_n = n² (triple root 1); x₉ = 81 vanishes mod 3² and mod 3⁴
        let s = spec(&[3, -3, 1], &[0, 1, 4]);
        let rows = terms_mod(&s, 3, 2, 10).unwrap();
        assert_eq!(rows[9].residue, BigUint::zero());
        assert_eq!(rows[9].valuation, TermValuation::Finite(4));
        assert_eq!(rows[0].valuation, TermValuation::Infinite);
        assert_eq!(rows[3].valuation, TermValuation::Finite(2));
    }

    #[test]
    fn terms_mod_reports_undetermined_when_capped() {
        let s = spec(&[3, -3, 1], &[0, 1, 4]);
        let cfg = EscalationConfig {
            max_digits: 3,
            exact_index_limit: 0,
        };
        let rows = terms_mod_with(&s, 3, 2, 10, &cfg).unwrap();
        assert_eq!(
            rows[9].valuation,
            TermValuation::Undetermined { checked_digits: 3 }
        );
        // index 0 sits inside the exact fallback window
        assert_eq!(rows[0].valuation, TermValuation::Infinite);
    }

    #[test]
    fn fibonacci_residues_mod_powers_of_two() {
        let rows = terms_mod(&fib(), 2, 8, 6).unwrap();
        let expect: Vec<u64> = vec![0, 1, 1, 2, 3, 5, 8];
        for (n, row) in rows.iter().enumerate() {
            assert_eq!(row.residue, BigUint::from(expect[n]));
        }
        assert_eq!(rows[6].valuation, TermValuation::Finite(3));
        assert_eq!(rows[0].valuation, TermValuation::Infinite);
    }

    #[test]
    fn factorization_validation() {
        let s = spec(&[10, -31, 30], &[0, 1, 0]);
        assert!(validate_factorization(&s, &fact(&[(2, 1), (3, 1), (5, 1)])));
        assert!(!validate_factorization(&s, &fact(&[(2, 1), (3, 1), (7, 1)])));
        assert!(!validate_factorization(&s, &fact(&[(2, 1), (3, 1)])));
        let s = spec(&[4, -5, 2], &[0, 0, 1]);
        assert!(validate_factorization(&s, &fact(&[(1, 2), (2, 1)])));
        assert!(!validate_factorization(&s, &fact(&[(1, 1), (2, 2)])));
        let s = spec(&[6, -9], &[0, 1]);
        assert!(validate_factorization(&s, &fact(&[(3, 2)])));
        assert!(matches!(
            RootFactorization::new(vec![(BigInt::zero(), 1)]),
            Err(Error::InvalidFactorization(_))
        ));
        assert!(matches!(
            RootFactorization::new(vec![(BigInt::one(), 1), (BigInt::one(), 2)]),
            Err(Error::InvalidFactorization(_))
        ));
    }

    #[test]
    fn integer_roots_are_found_or_declined() {
        let s = spec(&[10, -31, 30], &[0, 1, 0]);
        let f = find_integer_roots(&s).unwrap();
        assert_eq!(f, fact(&[(2, 1), (3, 1), (5, 1)]));

        let f = find_integer_roots(&spec(&[6, -9], &[0, 1])).unwrap();
        assert_eq!(f, fact(&[(3, 2)]));

        let f = find_integer_roots(&spec(&[6, -12, 8], &[1, 1, 1])).unwrap();
        assert_eq!(f, fact(&[(2, 3)]));

        // x² - x - 1 has no integer roots
        assert!(find_integer_roots(&fib()).is_none());
        // x³ - 6x² + 11x - 8 has none either
        assert!(find_integer_roots(&spec(&[6, -11, 8], &[1, 1, 1])).is_none());
    }

    #[test]
    fn closed_form_distinct_roots() {
        let s = spec(&[10, -31, 30], &[0, 1, 0]);
        let cf = solve_closed_form(&s, &fact(&[(2, 1), (3, 1), (5, 1)])).unwrap();
        assert_eq!(cf.det(), &BigInt::from(6));
        let flat = cf.flat_coefficients();
        assert_eq!(*flat[0], BigRational::new(BigInt::from(-8), BigInt::from(3)));
        assert_eq!(*flat[1], BigRational::new(BigInt::from(7), BigInt::from(2)));
        assert_eq!(*flat[2], BigRational::new(BigInt::from(-5), BigInt::from(6)));
        for n in 0..15u64 {
            assert_eq!(cf.evaluate(n), BigRational::from(s.term(n)));
        }
    }

    #[test]
    fn closed_form_double_root_layout() {
        let s = spec(&[4, -5, 2], &[0, 0, 1]);
        let cf = solve_closed_form(&s, &fact(&[(1, 2), (2, 1)])).unwrap();
        assert_eq!(cf.det(), &BigInt::one());
        let flat = cf.flat_coefficients();
        assert_eq!(*flat[0], BigRational::from(BigInt::from(-1)));
        assert_eq!(*flat[1], BigRational::from(BigInt::from(-1)));
        assert_eq!(*flat[2], BigRational::from(BigInt::from(1)));
        // det(A)·c₁ for the double root: (-1)^(k+1) ∏_{i<j≤k-1}(a_i - a_j)
        assert_eq!(
            BigRational::from(cf.det().clone()) * flat[1],
            BigRational::from(BigInt::from(-1))
        );
    }

    #[test]
    fn closed_form_full_multiplicity() {
        let s = spec(&[6, -9], &[0, 1]);
        let cf = solve_closed_form(&s, &fact(&[(3, 2)])).unwrap();
        let flat = cf.flat_coefficients();
        assert_eq!(*flat[0], BigRational::zero());
        assert_eq!(*flat[1], BigRational::new(BigInt::one(), BigInt::from(3)));
        for n in 0..10u64 {
            // x_n = n·3^(n-1)
            let expect = BigRational::from(BigInt::from(n) * BigInt::from(3).pow(n.max(1) as u32 - 1));
            assert_eq!(cf.evaluate(n), expect);
        }
    }

    #[test]
    fn closed_form_rejects_bad_factorization() {
        let s = spec(&[10, -31, 30], &[0, 1, 0]);
        assert!(matches!(
            solve_closed_form(&s, &fact(&[(2, 1), (3, 1), (7, 1)])),
            Err(Error::InvalidFactorization(_))
        ));
    }

    #[test]
    fn random_split_recurrences_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc105_ed04);
        for _ in 0..40 {
            // build a recurrence from known roots, then recover and evaluate
            let mut roots: Vec<(BigInt, u32)> = vec![];
            let mut order = 0usize;
            while order < 2 || (order < 5 && rng.gen_bool(0.6)) {
                let a = loop {
                    let a = rng.gen_range(-8..9i64);
                    if a != 0 && !roots.iter().any(|(r, _)| *r == BigInt::from(a)) {
                        break a;
                    }
                };
                let m = rng.gen_range(1..3u32).min((5 - order) as u32).max(1);
                roots.push((BigInt::from(a), m));
                order += m as usize;
            }
            let f = RootFactorization::new(roots).unwrap();
            let mut poly = vec![BigInt::one()];
            for (a, m) in f.pairs() {
                for _ in 0..*m {
                    poly = poly_mul_linear(&poly, a);
                }
            }
            let coeffs: Vec<BigInt> = poly[1..].iter().map(|c| -c).collect();
            let initials: Vec<BigInt> =
                (0..order).map(|_| BigInt::from(rng.gen_range(-20..21i64))).collect();
            let s = RecurrenceSpec::new(coeffs, initials).unwrap();

            assert!(validate_factorization(&s, &f));
            let recovered = find_integer_roots(&s).unwrap();
            assert!(validate_factorization(&s, &recovered));

            let cf = solve_closed_form(&s, &f).unwrap();
            assert!(!cf.det().is_zero());
            for n in 0..25u64 {
                assert_eq!(cf.evaluate(n), BigRational::from(s.term(n)), "n = {n}");
            }
        }
    }

    // independent Laplace-expansion determinant for cross-checking Bareiss
    fn laplace_det(m: &[Vec<BigInt>]) -> BigInt {
        let n = m.len();
        if n == 1 {
            return m[0][0].clone();
        }
        let mut acc = BigInt::zero();
        for (j, head) in m[0].iter().enumerate() {
            if head.is_zero() {
                continue;
            }
            let minor: Vec<Vec<BigInt>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(c, _)| *c != j)
                        .map(|(_, v)| v.clone())
                        .collect()
                })
                .collect();
            let term = head * laplace_det(&minor);
            if j % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        acc
    }

    #[test]
    fn bareiss_matches_laplace_and_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xba4e_1550);
        let mut checked = 0;
        while checked < 25 {
            let n = rng.gen_range(2..5usize);
            let a: Vec<Vec<BigInt>> = (0..n)
                .map(|_| (0..n).map(|_| BigInt::from(rng.gen_range(-9..10i64))).collect())
                .collect();
            let rhs: Vec<BigInt> = (0..n).map(|_| BigInt::from(rng.gen_range(-9..10i64))).collect();
            let want_det = laplace_det(&a);
            match bareiss_solve(&a, &rhs) {
                Ok((det, x)) => {
                    assert_eq!(det, want_det);
                    // substitute back
                    for (row, b) in a.iter().zip(&rhs) {
                        let lhs: BigRational = row
                            .iter()
                            .zip(&x)
                            .map(|(c, xi)| BigRational::from(c.clone()) * xi)
                            .sum();
                        assert_eq!(lhs, BigRational::from(b.clone()));
                    }
                    checked += 1;
                }
                Err(_) => assert!(want_det.is_zero()),
            }
        }
    }

    #[test]
    fn cubic_shortcut_formulas_match_the_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x3c0e_ff1c);
        for _ in 0..100 {
            let x0 = BigInt::from(rng.gen_range(-30..31i64));
            let x1 = BigInt::from(rng.gen_range(-30..31i64));
            let x2 = BigInt::from(rng.gen_range(-30..31i64));

            // triple root
            let a = BigInt::from(loop {
                let a = rng.gen_range(-9..10i64);
                if a != 0 {
                    break a;
                }
            });
            let s = RecurrenceSpec::new(
                vec![&a * 3, -(&a * &a) * 3, &a * &a * &a],
                vec![x0.clone(), x1.clone(), x2.clone()],
            )
            .unwrap();
            let cf = solve_closed_form(&s, &RootFactorization::new(vec![(a.clone(), 3)]).unwrap())
                .unwrap();
            let shortcut = triple_root_coefficients(&a, &x0, &x1, &x2).unwrap();
            for (got, want) in cf.flat_coefficients().iter().zip(shortcut.iter()) {
                assert_eq!(*got, want);
            }

            // double root a, simple root b
            let b = BigInt::from(loop {
                let b = rng.gen_range(-9..10i64);
                if b != 0 && BigInt::from(b) != a {
                    break b;
                }
            });
            // (x-a)²(x-b) = x³ - (2a+b)x² + (a²+2ab)x - a²b
            let b1: BigInt = &a * 2 + &b;
            let b2: BigInt = -(&a * &a) - &a * &b * 2;
            let b3: BigInt = &a * &a * &b;
            let s = RecurrenceSpec::new(
                vec![b1, b2, b3],
                vec![x0.clone(), x1.clone(), x2.clone()],
            )
            .unwrap();
            let cf = solve_closed_form(
                &s,
                &RootFactorization::new(vec![(a.clone(), 2), (b.clone(), 1)]).unwrap(),
            )
            .unwrap();
            let shortcut = double_pair_coefficients(&a, &b, &x0, &x1, &x2).unwrap();
            for (got, want) in cf.flat_coefficients().iter().zip(shortcut.iter()) {
                assert_eq!(*got, want);
            }
        }
    }

    #[test]
    fn double_root_determinant_identity() {
        // det(A)·c₁ = ±∏_{1≤i<j≤k-1} (a_i - a_j) with impulse initials; the
        // sign is (-1)^(k + C(k-1,2)) — the C(k-1,2) comes from reversing the
        // row order of the minor Vandermonde, so it alternates with k mod 4.
        let mut rng = ChaCha8Rng::seed_from_u64(0xdece_a5ed);
        for _ in 0..50 {
            let k = rng.gen_range(3..7usize);
            let mut roots: Vec<BigInt> = vec![];
            while roots.len() < k - 1 {
                let a = BigInt::from(rng.gen_range(-9..10i64));
                if !a.is_zero() && !roots.contains(&a) {
                    roots.push(a);
                }
            }
            let mut pairs: Vec<(BigInt, u32)> = vec![(roots[0].clone(), 2)];
            pairs.extend(roots[1..].iter().map(|a| (a.clone(), 1)));
            let f = RootFactorization::new(pairs).unwrap();
            let mut poly = vec![BigInt::one()];
            for (a, m) in f.pairs() {
                for _ in 0..*m {
                    poly = poly_mul_linear(&poly, a);
                }
            }
            let coeffs: Vec<BigInt> = poly[1..].iter().map(|c| -c).collect();
            let mut initials = vec![BigInt::zero(); k];
            initials[k - 1] = BigInt::one();
            let s = RecurrenceSpec::new(coeffs, initials).unwrap();
            let cf = solve_closed_form(&s, &f).unwrap();

            let mut expect = BigInt::one();
            for i in 0..k - 1 {
                for j in i + 1..k - 1 {
                    expect *= &roots[i] - &roots[j];
                }
            }
            if (k + (k - 1) * (k - 2) / 2) % 2 == 1 {
                expect = -expect;
            }
            let got = BigRational::from(cf.det().clone()) * cf.flat_coefficients()[1];
            assert_eq!(got, BigRational::from(expect), "k = {k}");
        }
    }

    #[test]
    fn full_multiplicity_leading_coefficient_identity() {
        // impulse initials with char (x-a)^k give c₁ = (-1)^k/(a^(k-1)·(k-1))
        for k in 2..=8usize {
            for a in [-5i64, -2, -1, 1, 2, 3, 5] {
                let ab = BigInt::from(a);
                let mut poly = vec![BigInt::one()];
                for _ in 0..k {
                    poly = poly_mul_linear(&poly, &ab);
                }
                let coeffs: Vec<BigInt> = poly[1..].iter().map(|c| -c).collect();
                let mut initials = vec![BigInt::zero(); k];
                initials[k - 1] = BigInt::one();
                let s = RecurrenceSpec::new(coeffs, initials).unwrap();
                let f = RootFactorization::new(vec![(ab.clone(), k as u32)]).unwrap();
                let cf = solve_closed_form(&s, &f).unwrap();
                let c1 = cf.flat_coefficients()[1].clone();
                let mut denom = ab.pow(k as u32 - 1) * BigInt::from(k as i64 - 1);
                if k % 2 == 1 {
                    denom = -denom;
                }
                assert_eq!(c1, BigRational::new(BigInt::one(), denom), "k={k} a={a}");
            }
        }
    }

    #[test]
    fn divisor_enumeration() {
        let d = positive_divisors(&BigInt::from(30)).unwrap();
        assert_eq!(
            d,
            [1i64, 2, 3, 5, 6, 10, 15, 30]
                .iter()
                .map(|&x| BigInt::from(x))
                .collect::<Vec<_>>()
        );
        let d = positive_divisors(&BigInt::from(-8)).unwrap();
        assert_eq!(d.len(), 4);
        assert!(positive_divisors(&BigInt::zero()).is_none());
    }
}
