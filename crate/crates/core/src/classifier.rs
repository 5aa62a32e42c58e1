//! Density verdicts for integer-root linear recurrences over Q_p.
//!
//! A fixed, ordered catalog of rules inspects the root factorization and the
//! initial values; the first rule whose hypotheses all hold issues the
//! verdict. Dense verdicts are backed by a [`Certificate`]: an exponential
//! polynomial f with f(n) = scale·x_{n(p-1)}, whose simple zero in Z_p is the
//! machine-checkable witness. Certificates are deterministic functions of
//! (recurrence, roots, p, precision), so verification is recomputation.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::analytic::{hensel_lift, log_p, ExpTerm, ExponentialPolynomial, SERIES_GUARD};
use crate::error::{Error, Result};
use crate::padic::{
    check_prime, int_valuation_unchecked, p_pow, PAdic, Valuation, DEFAULT_PRECISION,
};
use crate::recurrence::{
    double_pair_coefficients, find_integer_roots, solve_closed_form, term_residue_at,
    triple_root_coefficients, validate_factorization, RecurrenceSpec, RootFactorization,
};

/// Indices sampled when checking f(n) ≡ scale·x_{n(p-1)}.
pub const IDENTITY_SAMPLE_COUNT: u64 = 21;

/// Which density rule issued a verdict. The serialized names are the stable
/// wire vocabulary; see the README for the hypothesis catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremTag {
    /// Distinct pairwise-coprime roots, all |a_i| ≥ 2, p ∤ ∏a_i, x₀ = 0.
    #[serde(rename = "Thm1_2_distinct_roots")]
    DistinctRoots,
    /// Exactly one double root, impulse initials, p ∤ ∏a_i, roots distinct
    /// mod p.
    #[serde(rename = "Thm1_3_double_root")]
    DoubleRoot,
    /// Characteristic polynomial (x-a)^k, impulse initials, p ∤ a.
    #[serde(rename = "Thm1_4_full_multiplicity")]
    FullMultiplicity,
    /// Cubic with triple root a, p ∤ a, p | x₀ ≠ 0, p ∤ 4ax₁-x₂-3a²x₀.
    #[serde(rename = "Thm1_5a_triple_root")]
    TripleRoot,
    /// Cubic with triple root a, p ∤ a, x₀ = 0, 4ax₁ ≠ x₂ (an iff).
    #[serde(rename = "Thm1_5a_iff_x0_zero")]
    TripleRootZeroStart,
    /// Cubic with roots a,a,b, p ∤ ab, p | x₀, p ∤ (a-b)(x₂-x₁(a+b)+x₀ab).
    #[serde(rename = "Thm1_5b_two_equal_roots")]
    TwoEqualRoots,
    /// Order p, characteristic polynomial (x-a)^p, all initials nonzero with
    /// one shared valuation: not dense (rests on an external criterion).
    #[serde(rename = "Remark_binomial_nondense")]
    BinomialNonDense,
    /// Cubic with triple root, x₀ = 0 and 4ax₁ = x₂: every nonzero quotient
    /// has even valuation, so no odd valuation is attained.
    #[serde(rename = "Thm1_5a_converse_nondense")]
    TripleRootConverse,
}

impl TheoremTag {
    pub fn wire_name(self) -> &'static str {
        match self {
            TheoremTag::DistinctRoots => "Thm1_2_distinct_roots",
            TheoremTag::DoubleRoot => "Thm1_3_double_root",
            TheoremTag::FullMultiplicity => "Thm1_4_full_multiplicity",
            TheoremTag::TripleRoot => "Thm1_5a_triple_root",
            TheoremTag::TripleRootZeroStart => "Thm1_5a_iff_x0_zero",
            TheoremTag::TwoEqualRoots => "Thm1_5b_two_equal_roots",
            TheoremTag::BinomialNonDense => "Remark_binomial_nondense",
            TheoremTag::TripleRootConverse => "Thm1_5a_converse_nondense",
        }
    }
}

impl fmt::Display for TheoremTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

/// One spot check of the defining identity f(n) ≡ scale·x_{n(p-1)} mod p^N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentitySample {
    pub n: u64,
    pub matches: bool,
}

/// Numerical witness for a dense verdict. Every stored value is a
/// deterministic function of (recurrence, roots, prime, precision); `verify`
/// recomputes the lot and re-checks the semantic invariants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub tag: TheoremTag,
    pub prime: u64,
    pub precision: u32,
    /// Integer multiplier in f(n) = scale·x_{n(p-1)}: the interpolation
    /// determinant, 2a² for the triple-root family, or 1.
    #[serde(with = "bigint_dec")]
    pub scale: BigInt,
    pub f: ExponentialPolynomial,
    /// ν_p(f(0)) = ν_p(scale·x₀), computed exactly over the integers.
    pub f0_valuation: Valuation,
    /// ν_p(f'(0)); finite (the zero is simple), and 0 whenever a lifted root
    /// is present.
    pub fprime0_valuation: Valuation,
    /// Root of f with root ≡ 0 (mod p), present exactly when
    /// 0 < ν_p(f(0)) < ∞.
    pub hensel_root: Option<PAdic>,
    pub identity_samples: Vec<IdentitySample>,
}

/// Whether a dense verdict carries a usable certificate. At p = 2 the
/// exponential rates log₂(a) only converge for a ≡ 1 (mod 4); outside that
/// range the verdict stands but no certificate is constructible.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum CertificateStatus {
    Supported { certificate: Certificate },
    Unsupported { reason: String },
}

/// Outcome of classification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome")]
pub enum Verdict {
    DenseCertified {
        tag: TheoremTag,
        certificate: CertificateStatus,
    },
    NotDense {
        tag: Option<TheoremTag>,
        reason: String,
    },
    Unknown {
        reason: String,
    },
}

// BigInt on the wire as a decimal string (numbers above 2^53 do not survive
// JSON readers that parse into doubles)
mod bigint_dec {
    use num_bigint::BigInt;
    use serde::{de, Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let raw = String::deserialize(d)?;
        BigInt::from_str(raw.trim()).map_err(|e| de::Error::custom(format!("not an integer: {e}")))
    }
}

// ---- rule evaluation ----------------------------------------------------------

enum Decision {
    Dense(TheoremTag),
    NotDense(Option<TheoremTag>, String),
    Unknown(String),
}

fn record(slot: &mut Option<String>, msg: String) {
    if slot.is_none() {
        *slot = Some(msg);
    }
}

fn is_impulse(x: &[BigInt]) -> bool {
    let k = x.len();
    x[..k - 1].iter().all(Zero::is_zero) && x[k - 1].is_one()
}

fn pairwise_noncoprime<'a>(roots: &'a [&BigInt]) -> Option<(&'a BigInt, &'a BigInt)> {
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if !roots[i].gcd(roots[j]).is_one() {
                return Some((roots[i], roots[j]));
            }
        }
    }
    None
}

/// Apply the rule catalog in priority order. Rules are tried lowest-numbered
/// first; when several match, the first wins (deterministic golden outputs).
/// When none matches, the reason names the first hypothesis that failed on a
/// rule whose structural shape did apply.
fn decide(spec: &RecurrenceSpec, fact: &RootFactorization, p: u64) -> Decision {
    // the quotient set of the zero sequence is empty; no rule needed
    if spec.is_identically_zero() {
        return Decision::NotDense(
            None,
            "every term is zero, so the quotient set is empty".into(),
        );
    }
    let k = spec.order();
    let x = spec.initials();
    let pb = BigInt::from(p);
    let mut miss: Option<String> = None;

    // rule 1: distinct pairwise-coprime roots, |a_i| ≥ 2, p ∤ ∏a_i, x₀ = 0
    if k >= 2 && fact.pairs().iter().all(|(_, m)| *m == 1) {
        let rule = TheoremTag::DistinctRoots;
        let roots: Vec<&BigInt> = fact.pairs().iter().map(|(a, _)| a).collect();
        let two = BigInt::from(2);
        if let Some(a) = roots.iter().find(|a| a.abs() < two) {
            // powers of ±1 are multiplicatively dependent on everything;
            // the simple-zero argument needs independence, so stay out
            record(
                &mut miss,
                format!("{rule}: root {a} has absolute value below 2"),
            );
        } else if let Some((a, b)) = pairwise_noncoprime(&roots) {
            record(
                &mut miss,
                format!("{rule}: roots {a} and {b} are not coprime"),
            );
        } else if let Some(a) = roots.iter().find(|a| a.is_multiple_of(&pb)) {
            record(&mut miss, format!("{rule}: p = {p} divides root {a}"));
        } else if !x[0].is_zero() {
            record(&mut miss, format!("{rule}: needs x₀ = 0, got x₀ = {}", x[0]));
        } else {
            return Decision::Dense(rule);
        }
    }

    // rule 2: exactly one double root, the rest simple, impulse initials,
    // p ∤ ∏a_i, roots pairwise distinct mod p
    let doubles = fact.pairs().iter().filter(|(_, m)| *m == 2).count();
    let simples = fact.pairs().iter().filter(|(_, m)| *m == 1).count();
    if doubles == 1 && simples + 1 == fact.distinct_count() && simples >= 1 {
        let rule = TheoremTag::DoubleRoot;
        let roots: Vec<&BigInt> = fact.pairs().iter().map(|(a, _)| a).collect();
        let collision = (0..roots.len())
            .flat_map(|i| (i + 1..roots.len()).map(move |j| (i, j)))
            .find(|&(i, j)| (roots[i] - roots[j]).is_multiple_of(&pb));
        if !is_impulse(x) {
            record(
                &mut miss,
                format!("{rule}: needs initial values (0, …, 0, 1)"),
            );
        } else if let Some(a) = roots.iter().find(|a| a.is_multiple_of(&pb)) {
            record(&mut miss, format!("{rule}: p = {p} divides root {a}"));
        } else if let Some((i, j)) = collision {
            record(
                &mut miss,
                format!(
                    "{rule}: roots {} and {} coincide mod {p}",
                    roots[i], roots[j]
                ),
            );
        } else {
            return Decision::Dense(rule);
        }
    }

    // rule 3: (x-a)^k with impulse initials and p ∤ a
    if fact.distinct_count() == 1 && k >= 2 {
        let rule = TheoremTag::FullMultiplicity;
        let a = &fact.pairs()[0].0;
        if !is_impulse(x) {
            record(
                &mut miss,
                format!("{rule}: needs initial values (0, …, 0, 1)"),
            );
        } else if a.is_multiple_of(&pb) {
            record(&mut miss, format!("{rule}: p = {p} divides the root {a}"));
        } else {
            return Decision::Dense(rule);
        }
    }

    // rule 4: cubic with a triple root
    if k == 3 && fact.distinct_count() == 1 {
        let a = &fact.pairs()[0].0;
        if a.is_multiple_of(&pb) {
            record(
                &mut miss,
                format!(
                    "{}: p = {p} divides the root {a}",
                    TheoremTag::TripleRoot
                ),
            );
        } else {
            let g = BigInt::from(4) * a * &x[1] - &x[2];
            if x[0].is_zero() {
                if !g.is_zero() {
                    return Decision::Dense(TheoremTag::TripleRootZeroStart);
                }
                // here x_n = c₂·n²·aⁿ with c₂ = x₁/a ≠ 0 (the all-zero case
                // was dispatched up front), so ν_p of every term is even
                return Decision::NotDense(
                    Some(TheoremTag::TripleRootConverse),
                    format!(
                        "x₀ = 0 and 4·a·x₁ = x₂ collapse the sequence to \
                         c₂·n²·aⁿ; every quotient has even ν_{p}, so values \
                         of odd valuation are never approached"
                    ),
                );
            }
            let rule = TheoremTag::TripleRoot;
            let h = &g - BigInt::from(3) * a * a * &x[0];
            if !x[0].is_multiple_of(&pb) {
                record(
                    &mut miss,
                    format!("{rule}: needs p | x₀ (or x₀ = 0), got x₀ = {}", x[0]),
                );
            } else if h.is_multiple_of(&pb) {
                record(
                    &mut miss,
                    format!("{rule}: p = {p} divides 4ax₁ - x₂ - 3a²x₀ = {h}"),
                );
            } else {
                return Decision::Dense(rule);
            }
        }
    }

    // rule 5: cubic with roots a, a, b
    if k == 3 && fact.distinct_count() == 2 && doubles == 1 {
        let rule = TheoremTag::TwoEqualRoots;
        let (a, b) = {
            let (r0, r1) = (&fact.pairs()[0], &fact.pairs()[1]);
            if r0.1 == 2 {
                (&r0.0, &r1.0)
            } else {
                (&r1.0, &r0.0)
            }
        };
        if (a * b).is_multiple_of(&pb) {
            record(&mut miss, format!("{rule}: p = {p} divides a root"));
        } else if !x[0].is_multiple_of(&pb) {
            record(&mut miss, format!("{rule}: needs p | x₀, got x₀ = {}", x[0]));
        } else {
            let t = (a - b) * (&x[2] - &x[1] * (a + b) + &x[0] * a * b);
            if t.is_multiple_of(&pb) {
                record(
                    &mut miss,
                    format!("{rule}: p = {p} divides (a-b)(x₂ - (a+b)x₁ + ab·x₀) = {t}"),
                );
            } else {
                return Decision::Dense(rule);
            }
        }
    }

    // rule 6: order p with characteristic polynomial (x-a)^p and all initial
    // values nonzero of one shared valuation
    if fact.distinct_count() == 1 && k as u64 == p {
        let rule = TheoremTag::BinomialNonDense;
        if let Some(i) = x.iter().position(Zero::is_zero) {
            record(
                &mut miss,
                format!("{rule}: needs all initial values nonzero; x_{i} = 0"),
            );
        } else {
            let v0 = int_valuation_unchecked(&x[0], p);
            if x.iter().all(|xi| int_valuation_unchecked(xi, p) == v0) {
                return Decision::NotDense(
                    Some(rule),
                    format!(
                        "order-{p} binomial recurrence with all initial values \
                         of valuation {v0}: not dense by an external \
                         non-density criterion (cited, not re-derived here)"
                    ),
                );
            }
            record(
                &mut miss,
                format!("{rule}: initial values do not share one ν_{p}"),
            );
        }
    }

    Decision::Unknown(miss.unwrap_or_else(|| {
        let mults: Vec<u32> = fact.pairs().iter().map(|(_, m)| *m).collect();
        format!(
            "no density rule covers this shape: order {k}, root multiplicities {mults:?}"
        )
    }))
}

// ---- classification -----------------------------------------------------------

/// Classify at the default certificate precision.
pub fn classify(spec: &RecurrenceSpec, fact: &RootFactorization, p: u64) -> Result<Verdict> {
    classify_at(spec, fact, p, DEFAULT_PRECISION)
}

/// Classify and, for dense verdicts, construct the certificate at the given
/// precision. A dense verdict whose certificate cannot converge (p = 2 with
/// a root ≢ 1 mod 4) is returned with [`CertificateStatus::Unsupported`].
pub fn classify_at(
    spec: &RecurrenceSpec,
    fact: &RootFactorization,
    p: u64,
    digits: u32,
) -> Result<Verdict> {
    check_prime(p)?;
    if !validate_factorization(spec, fact) {
        return Err(Error::InvalidFactorization(
            "claimed roots do not multiply back to the characteristic polynomial".into(),
        ));
    }
    match decide(spec, fact, p) {
        Decision::Dense(tag) => match build_certificate_tagged(spec, fact, p, digits, tag) {
            Ok(certificate) => Ok(Verdict::DenseCertified {
                tag,
                certificate: CertificateStatus::Supported { certificate },
            }),
            Err(Error::CertificateUnsupported(reason)) => Ok(Verdict::DenseCertified {
                tag,
                certificate: CertificateStatus::Unsupported { reason },
            }),
            Err(e) => Err(e),
        },
        Decision::NotDense(tag, reason) => Ok(Verdict::NotDense { tag, reason }),
        Decision::Unknown(reason) => Ok(Verdict::Unknown { reason }),
    }
}

/// Classify after factoring the characteristic polynomial over the integers.
/// Polynomials that do not split into integer linear factors are Unknown.
pub fn classify_auto(spec: &RecurrenceSpec, p: u64, digits: u32) -> Result<Verdict> {
    check_prime(p)?;
    if spec.is_identically_zero() {
        return Ok(Verdict::NotDense {
            tag: None,
            reason: "every term is zero, so the quotient set is empty".into(),
        });
    }
    match find_integer_roots(spec) {
        Some(fact) => classify_at(spec, &fact, p, digits),
        None => Ok(Verdict::Unknown {
            reason: "characteristic polynomial does not split into integer linear factors"
                .into(),
        }),
    }
}

// ---- certificate construction ---------------------------------------------------

/// Construct the certificate for inputs the rule catalog certifies dense.
pub fn build_certificate(
    spec: &RecurrenceSpec,
    fact: &RootFactorization,
    p: u64,
    digits: u32,
) -> Result<Certificate> {
    check_prime(p)?;
    if !validate_factorization(spec, fact) {
        return Err(Error::InvalidFactorization(
            "claimed roots do not multiply back to the characteristic polynomial".into(),
        ));
    }
    match decide(spec, fact, p) {
        Decision::Dense(tag) => build_certificate_tagged(spec, fact, p, digits, tag),
        Decision::NotDense(_, reason) | Decision::Unknown(reason) => Err(Error::Certificate(
            format!("no dense verdict to certify: {reason}"),
        )),
    }
}

fn build_certificate_tagged(
    spec: &RecurrenceSpec,
    fact: &RootFactorization,
    p: u64,
    digits: u32,
    tag: TheoremTag,
) -> Result<Certificate> {
    if digits == 0 {
        return Err(Error::ZeroPrecision);
    }
    if p == 2 {
        // rate log₂(a^(p-1)) = log₂(a) only converges on 1 + 4Z₂
        let four = BigInt::from(4);
        for (a, _) in fact.pairs() {
            if !a.mod_floor(&four).is_one() {
                return Err(Error::CertificateUnsupported(format!(
                    "at p = 2 the rate log₂({a}) diverges; roots must be ≡ 1 (mod 4)"
                )));
            }
        }
    }
    // series precision is pessimal, so pad the working precision and escalate
    // if a comparison still comes up short
    let mut w = digits.saturating_add(SERIES_GUARD);
    let mut last = None;
    for _ in 0..3 {
        match try_build(spec, fact, p, digits, w, tag) {
            Ok(c) => return Ok(c),
            Err(Error::PrecisionExhausted(m)) => {
                last = Some(m);
                w = w.saturating_mul(2);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::PrecisionExhausted(last.expect("looped at least once")))
}

// coefficient · z^degree · exp(log_p(root^(p-1))·z), with the scale and the
// (p-1)^degree reindexing factor already folded into the coefficient
struct TermPlan {
    coefficient: BigRational,
    degree: u32,
    root: BigInt,
}

struct Layout {
    scale: BigInt,
    terms: Vec<TermPlan>,
}

// multiplicity descending, then root ascending: the certificate's canonical
// root order, independent of how the caller listed the factors
fn canonical_order(fact: &RootFactorization) -> RootFactorization {
    let mut pairs = fact.pairs().to_vec();
    pairs.sort_by(|(a, ma), (b, mb)| mb.cmp(ma).then(a.cmp(b)));
    RootFactorization::new(pairs).expect("reordering preserves validity")
}

fn layout_for(
    tag: TheoremTag,
    spec: &RecurrenceSpec,
    fact: &RootFactorization,
    p: u64,
) -> Result<Layout> {
    let x = spec.initials();
    let pm1 = BigRational::from(BigInt::from(p) - 1);
    match tag {
        TheoremTag::DistinctRoots => {
            let canon = canonical_order(fact);
            let cf = solve_closed_form(spec, &canon)?;
            let det = cf.det().clone();
            let detq = BigRational::from(det.clone());
            let terms = cf
                .parts()
                .iter()
                .map(|part| TermPlan {
                    coefficient: &detq * &part.coefficients[0],
                    degree: 0,
                    root: part.root.clone(),
                })
                .collect();
            Ok(Layout { scale: det, terms })
        }
        TheoremTag::DoubleRoot => {
            let canon = canonical_order(fact);
            let cf = solve_closed_form(spec, &canon)?;
            let det = cf.det().clone();
            let detq = BigRational::from(det.clone());
            let parts = cf.parts();
            let mut terms = vec![
                TermPlan {
                    coefficient: &detq * &parts[0].coefficients[0],
                    degree: 0,
                    root: parts[0].root.clone(),
                },
                TermPlan {
                    coefficient: &detq * &parts[0].coefficients[1] * &pm1,
                    degree: 1,
                    root: parts[0].root.clone(),
                },
            ];
            for part in &parts[1..] {
                terms.push(TermPlan {
                    coefficient: &detq * &part.coefficients[0],
                    degree: 0,
                    root: part.root.clone(),
                });
            }
            Ok(Layout { scale: det, terms })
        }
        TheoremTag::FullMultiplicity => {
            let cf = solve_closed_form(spec, fact)?;
            let det = cf.det().clone();
            let detq = BigRational::from(det.clone());
            let part = &cf.parts()[0];
            let mut pm1_pow = BigRational::one();
            let mut terms = Vec::with_capacity(part.coefficients.len());
            for (j, c) in part.coefficients.iter().enumerate() {
                terms.push(TermPlan {
                    coefficient: &detq * c * &pm1_pow,
                    degree: j as u32,
                    root: part.root.clone(),
                });
                pm1_pow *= &pm1;
            }
            Ok(Layout { scale: det, terms })
        }
        TheoremTag::TripleRoot | TheoremTag::TripleRootZeroStart => {
            let a = &fact.pairs()[0].0;
            let [c0, c1, c2] = triple_root_coefficients(a, &x[0], &x[1], &x[2])?;
            let scale = BigInt::from(2) * a * a;
            let sq = BigRational::from(scale.clone());
            let terms = vec![
                TermPlan { coefficient: &sq * &c0, degree: 0, root: a.clone() },
                TermPlan { coefficient: &sq * &c1 * &pm1, degree: 1, root: a.clone() },
                TermPlan { coefficient: &sq * &c2 * &pm1 * &pm1, degree: 2, root: a.clone() },
            ];
            Ok(Layout { scale, terms })
        }
        TheoremTag::TwoEqualRoots => {
            let (a, b) = {
                let (r0, r1) = (&fact.pairs()[0], &fact.pairs()[1]);
                if r0.1 == 2 {
                    (&r0.0, &r1.0)
                } else {
                    (&r1.0, &r0.0)
                }
            };
            let [c0, c1, c2] = double_pair_coefficients(a, b, &x[0], &x[1], &x[2])?;
            let terms = vec![
                TermPlan { coefficient: c0, degree: 0, root: a.clone() },
                TermPlan { coefficient: c1 * &pm1, degree: 1, root: a.clone() },
                TermPlan { coefficient: c2, degree: 0, root: b.clone() },
            ];
            Ok(Layout { scale: BigInt::one(), terms })
        }
        TheoremTag::BinomialNonDense | TheoremTag::TripleRootConverse => Err(Error::Certificate(
            format!("{tag} is a non-density tag; there is nothing to certify"),
        )),
    }
}

// λ = log_p(a^(p-1)), computed from the residue a^(p-1) mod p^w — the exact
// power would be astronomically large for big p
fn direct_rate(a: &BigInt, p: u64, w: u32) -> Result<PAdic> {
    let m = BigInt::from(p_pow(p, w));
    let base = a.mod_floor(&m).to_biguint().expect("mod_floor is nonnegative");
    let residue = base.modpow(
        &BigUint::from(p - 1),
        &m.to_biguint().expect("modulus is positive"),
    );
    let z = PAdic::from_residue(residue, p, w)?;
    log_p(&z, u32::MAX)
}

fn try_build(
    spec: &RecurrenceSpec,
    fact: &RootFactorization,
    p: u64,
    digits: u32,
    w: u32,
    tag: TheoremTag,
) -> Result<Certificate> {
    let layout = layout_for(tag, spec, fact, p)?;

    let mut rates: Vec<(BigInt, PAdic)> = Vec::new();
    for t in &layout.terms {
        if !rates.iter().any(|(r, _)| r == &t.root) {
            rates.push((t.root.clone(), direct_rate(&t.root, p, w)?));
        }
    }
    let terms = layout
        .terms
        .iter()
        .map(|t| {
            Ok(ExpTerm {
                coefficient: PAdic::embed(&t.coefficient, p, w)?,
                degree: t.degree,
                rate: rates
                    .iter()
                    .find(|(r, _)| r == &t.root)
                    .expect("rate precomputed")
                    .1
                    .clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let f = ExponentialPolynomial::new(p, terms)?;

    // f(0) = scale·x₀ exactly, so its valuation needs no series evaluation
    let f0_valuation = int_valuation_unchecked(&(&layout.scale * &spec.initials()[0]), p);

    let zero = PAdic::zero(p, w as i64)?;
    let d0 = f.derivative().eval(&zero)?;
    let fprime0_valuation = match d0.valuation() {
        Valuation::Finite(v) => Valuation::Finite(v),
        Valuation::Infinite => {
            return Err(Error::PrecisionExhausted(format!(
                "f'(0) vanishes through {} tracked digits; a simple zero cannot be certified",
                d0.abs_precision()
            )));
        }
    };

    let m = BigInt::from(p_pow(p, digits));
    let scale_mod = layout.scale.mod_floor(&m);
    let mut identity_samples = Vec::with_capacity(IDENTITY_SAMPLE_COUNT as usize);
    for n in 0..IDENTITY_SAMPLE_COUNT {
        let zn = PAdic::embed_int(&BigInt::from(n), p, w)?;
        let lhs = f.eval(&zn)?;
        let idx = n as u128 * (p as u128 - 1);
        let xn = BigInt::from(term_residue_at(spec, p, digits, idx)?);
        let rhs = PAdic::from_residue(
            (&scale_mod * xn)
                .mod_floor(&m)
                .to_biguint()
                .expect("mod_floor is nonnegative"),
            p,
            digits,
        )?;
        if !lhs.eq_mod(&rhs, digits)? {
            return Err(Error::Certificate(format!(
                "identity check failed at n = {n}: f({n}) ≠ scale·x_{idx} (mod {p}^{digits})"
            )));
        }
        identity_samples.push(IdentitySample { n, matches: true });
    }

    let hensel_root = match f0_valuation {
        Valuation::Infinite => None,
        Valuation::Finite(v) if v >= 1 => {
            if fprime0_valuation != Valuation::Finite(0) {
                return Err(Error::Certificate(format!(
                    "root lifting needs ν_{p}(f'(0)) = 0, got {fprime0_valuation}; \
                     a rule hypothesis must have been violated"
                )));
            }
            Some(hensel_lift(&f, &zero, digits)?)
        }
        Valuation::Finite(v) => {
            return Err(Error::Certificate(format!(
                "ν_{p}(f(0)) = {v}: f(0) is a unit, so f has no zero near 0"
            )));
        }
    };

    // canonical wire form: every stored p-adic truncated to the certificate
    // precision, so an independent rebuild compares bit-for-bit
    let stored = ExponentialPolynomial::new(
        p,
        f.terms()
            .iter()
            .map(|t| ExpTerm {
                coefficient: t.coefficient.truncate_rel(digits),
                degree: t.degree,
                rate: t.rate.truncate_rel(digits),
            })
            .collect(),
    )?;

    Ok(Certificate {
        tag,
        prime: p,
        precision: digits,
        scale: layout.scale,
        f: stored,
        f0_valuation,
        fprime0_valuation,
        hensel_root: hensel_root.map(|r| r.truncate_rel(digits)),
        identity_samples,
    })
}

// ---- verification ---------------------------------------------------------------

/// Recompute the certificate from scratch and re-check its invariants.
/// Returns false on any mismatch or internal error; never panics.
pub fn verify(
    cert: &Certificate,
    spec: &RecurrenceSpec,
    fact: &RootFactorization,
    p: u64,
) -> bool {
    verify_checked(cert, spec, fact, p).unwrap_or(false)
}

fn verify_checked(
    cert: &Certificate,
    spec: &RecurrenceSpec,
    fact: &RootFactorization,
    p: u64,
) -> Result<bool> {
    if cert.prime != p || cert.precision == 0 {
        return Ok(false);
    }
    if !validate_factorization(spec, fact) {
        return Ok(false);
    }
    // every field is a deterministic function of (spec, fact, p, precision):
    // rebuild and compare
    let rebuilt = match decide(spec, fact, p) {
        Decision::Dense(tag) => build_certificate_tagged(spec, fact, p, cert.precision, tag)?,
        _ => return Ok(false),
    };
    if &rebuilt != cert {
        return Ok(false);
    }

    // semantic invariants, re-checked on the stored data itself
    if cert.identity_samples.len() != IDENTITY_SAMPLE_COUNT as usize
        || !cert
            .identity_samples
            .iter()
            .enumerate()
            .all(|(i, s)| s.n == i as u64 && s.matches)
    {
        return Ok(false);
    }
    if cert.f0_valuation != int_valuation_unchecked(&(&cert.scale * &spec.initials()[0]), p) {
        return Ok(false);
    }
    if cert.fprime0_valuation.is_infinite() {
        return Ok(false); // a simple zero needs f'(0) ≠ 0
    }
    match cert.f0_valuation {
        Valuation::Infinite => {
            if cert.hensel_root.is_some() {
                return Ok(false);
            }
        }
        Valuation::Finite(v) if v >= 1 => {
            let Some(root) = &cert.hensel_root else {
                return Ok(false);
            };
            if cert.fprime0_valuation != Valuation::Finite(0) {
                return Ok(false);
            }
            if root.valuation() < Valuation::Finite(1) {
                return Ok(false); // the lifted root must sit in pZ_p
            }
            // the stored f must vanish at the root through the certificate
            // precision; truncation residue above p^precision is expected
            if let Valuation::Finite(v) = cert.f.eval(root)?.valuation() {
                if v < cert.precision as i64 {
                    return Ok(false);
                }
            }
        }
        Valuation::Finite(_) => return Ok(false),
    }
    Ok(true)
}
