//! Empirical quotient-set exploration: search for pairs (m, n) whose ratio
//! x_m/x_n approaches a target in Q_p, enumerate the achieved valuations
//! ν_p(x_m/x_n), and measure residue-class coverage of the unit parts.
//!
//! Everything reported here is confirmed by exact big-integer arithmetic:
//! ν_p(x_m/x_n − a/b) = ν_p(x_m·b − a·x_n) − ν_p(x_n·b). Pair enumeration is
//! frozen to (m + n ascending, then m ascending) so reports are reproducible;
//! the parallel search merges worker results back into that order.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::padic::{check_prime, int_valuation_unchecked, mod_inverse, p_pow, Valuation};
use crate::recurrence::RecurrenceSpec;

/// Hard ceiling on worker threads, whatever the environment asks for.
const MAX_WORKERS: usize = 64;
/// Below this many pairs the parallel scaffolding costs more than it saves.
const PARALLEL_THRESHOLD: u64 = 1 << 14;
/// Missing residue classes are listed only when the class count is this small.
const MISSING_LIST_LIMIT: u64 = 100_000;

/// First pair, in (m+n, m) order, whose ratio reaches the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeHit {
    pub m: u64,
    pub n: u64,
    /// ν_p(x_m/x_n − target); infinite when the ratio equals the target.
    pub valuation_of_difference: Valuation,
}

/// Outcome of a ratio search toward a fixed target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub prime: u64,
    #[serde(with = "bigint_dec")]
    pub target_num: BigInt,
    #[serde(with = "bigint_dec")]
    pub target_den: BigInt,
    /// Significant p-adic digits of agreement demanded for a hit: for a
    /// nonzero target, ν_p(x_m/x_n − t) ≥ k + ν_p(t); for target 0,
    /// ν_p(x_m/x_n) ≥ k.
    pub k: u32,
    pub bound: u64,
    pub hit: Option<ProbeHit>,
    /// Pairs with x_n ≠ 0 enumerated up to and including the hit (all of
    /// them, when there is none).
    pub pairs_searched: u64,
}

/// Witness pair realizing one achieved valuation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumWitness {
    pub m: u64,
    pub n: u64,
}

/// Structure detected in the achieved valuation set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParitySummary {
    pub all_even: bool,
    /// gcd of the achieved valuations when it is ≥ 2 (they all lie in dZ).
    pub stride: Option<u64>,
}

/// The set { ν_p(x_m/x_n) } over valid pairs up to the bound, with the first
/// witness (in enumeration order) for each achieved value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub prime: u64,
    pub bound: u64,
    pub achieved: BTreeMap<i64, SpectrumWitness>,
    pub parity: ParitySummary,
}

/// Fraction of unit residue classes mod p^k attained by unit parts of
/// quotients x_m/x_n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub prime: u64,
    pub k: u32,
    pub bound: u64,
    pub covered: u64,
    /// φ(p^k), as a decimal string (it overflows fixed-width integers fast).
    #[serde(with = "biguint_dec")]
    pub total: BigUint,
    pub fraction: f64,
    /// Classes never attained; populated only when total ≤ 100 000.
    pub missing: Vec<u64>,
    pub missing_omitted: bool,
}

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

mod biguint_dec {
    use num_bigint::BigUint;
    use serde::{de, Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let raw = String::deserialize(d)?;
        BigUint::from_str(raw.trim())
            .map_err(|e| de::Error::custom(format!("not a nonnegative integer: {e}")))
    }
}

// ---- ratio search --------------------------------------------------------------

/// Scan pairs (m, n) with m, n ≤ bound and x_n ≠ 0, in (m+n, m) order, for
/// the first ratio x_m/x_n within k significant p-adic digits of the target.
/// No hit is data, not an error. Worker count comes from the
/// `PADIC_PROBE_PARALLELISM` environment variable (clamped to [1, 64]),
/// defaulting to the machine's available parallelism; the report does not
/// depend on it.
pub fn probe_target(
    spec: &RecurrenceSpec,
    p: u64,
    target: &BigRational,
    k: u32,
    bound: u64,
) -> Result<ProbeReport> {
    probe_target_with_workers(spec, p, target, k, bound, workers_from_env())
}

fn workers_from_env() -> usize {
    let requested = std::env::var("PADIC_PROBE_PARALLELISM")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
                .min(8)
        });
    requested.clamp(1, MAX_WORKERS)
}

pub(crate) fn probe_target_with_workers(
    spec: &RecurrenceSpec,
    p: u64,
    target: &BigRational,
    k: u32,
    bound: u64,
    workers: usize,
) -> Result<ProbeReport> {
    check_prime(p)?;
    if k == 0 {
        return Err(Error::InvalidArgument("probe needs k ≥ 1 digits".into()));
    }
    if bound == 0 {
        return Err(Error::InvalidArgument("probe needs bound ≥ 1".into()));
    }

    let terms = spec.terms_upto(bound);
    let num = target.numer().clone();
    let den = target.denom().clone();
    let vals: Vec<Valuation> = terms
        .iter()
        .map(|t| int_valuation_unchecked(t, p))
        .collect();

    // hit ⟺ ν_p(x_m·den − num·x_n) ≥ needed + ν_p(x_n), where needed is
    // k + ν_p(num) for nonzero targets (k significant digits of t, since
    // ν_p(t) = ν_p(num) − ν_p(den) and the den-valuation cancels), or the
    // target-0 rule ν_p(x_m) ≥ k + ν_p(x_n)
    let needed_base: i64 = if num.is_zero() {
        k as i64
    } else {
        k as i64
            + int_valuation_unchecked(&num, p)
                .finite()
                .expect("nonzero integer has finite valuation")
    };
    let den_val = int_valuation_unchecked(&den, p)
        .finite()
        .expect("denominator is nonzero");

    let check_pair = |m: u64, n: u64| -> Option<Valuation> {
        let vn = vals[n as usize].finite()?; // x_n = 0: not a valid pair
        if num.is_zero() {
            // ν(x_m/x_n) ≥ k, directly off the cached term valuations
            return match vals[m as usize] {
                Valuation::Infinite => Some(Valuation::Infinite),
                Valuation::Finite(vm) if vm - vn >= needed_base => {
                    Some(Valuation::Finite(vm - vn))
                }
                _ => None,
            };
        }
        let w = &terms[m as usize] * &den - &num * &terms[n as usize];
        match int_valuation_unchecked(&w, p) {
            Valuation::Infinite => Some(Valuation::Infinite),
            Valuation::Finite(vw) => {
                if vw >= needed_base + vn {
                    // ν(q − t) = ν(w) − ν(x_n·den)
                    Some(Valuation::Finite(vw - vn - den_val))
                } else {
                    None
                }
            }
        }
    };

    let valid: Vec<bool> = vals.iter().map(|v| !v.is_infinite()).collect();
    let valid_total: u64 = valid.iter().filter(|&&b| b).count() as u64;
    let total_pairs = (bound + 1) * valid_total;

    // each worker owns the rows m ≡ w (mod workers) and reports its earliest
    // hit in (m+n, m) order; the global earliest wins, so the outcome does
    // not depend on scheduling
    let effective = if total_pairs < PARALLEL_THRESHOLD {
        1
    } else {
        workers.clamp(1, MAX_WORKERS)
    };
    let best: Option<(u64, u64, Valuation)> = if effective == 1 {
        scan_rows(bound, &valid, 0, 1, &check_pair)
    } else {
        let valid_ref = &valid;
        let check_ref = &check_pair;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..effective)
                .map(|w| {
                    scope.spawn(move || {
                        scan_rows(bound, valid_ref, w as u64, effective as u64, check_ref)
                    })
                })
                .collect();
            handles
                .into_iter()
                .filter_map(|h| h.join().expect("probe worker panicked"))
                .min_by_key(|&(m, n, _)| (m + n, m))
        })
    };

    let (hit, pairs_searched) = match best {
        Some((m, n, v)) => (
            Some(ProbeHit {
                m,
                n,
                valuation_of_difference: v,
            }),
            pairs_up_to(bound, &valid, m, n),
        ),
        None => (None, total_pairs),
    };

    Ok(ProbeReport {
        prime: p,
        target_num: num,
        target_den: den,
        k,
        bound,
        hit,
        pairs_searched,
    })
}

// first hit in (m+n, m) order among rows m ≡ offset (mod stride)
fn scan_rows(
    bound: u64,
    valid: &[bool],
    offset: u64,
    stride: u64,
    check_pair: &(impl Fn(u64, u64) -> Option<Valuation> + Sync),
) -> Option<(u64, u64, Valuation)> {
    let mut best: Option<(u64, u64, Valuation)> = None;
    let mut m = offset;
    while m <= bound {
        for n in 0..=bound {
            if let Some((bm, bn, _)) = best {
                // rows are scanned with n ascending, so (m+n, m) only grows;
                // past the incumbent there is nothing better in this row
                if (m + n, m) >= (bm + bn, bm) {
                    break;
                }
            }
            if !valid[n as usize] {
                continue;
            }
            if let Some(v) = check_pair(m, n) {
                best = Some((m, n, v));
                break;
            }
        }
        // once an incumbent exists, rows with m ≥ bm + bn cannot beat it
        if let Some((bm, bn, _)) = best {
            if m >= bm + bn {
                break;
            }
        }
        m += stride;
    }
    best
}

// number of valid pairs enumerated up to and including (m0, n0) in the
// (m+n, m) order, computed from prefix counts of the valid-denominator set
fn pairs_up_to(bound: u64, valid: &[bool], m0: u64, n0: u64) -> u64 {
    // valid_upto[i] = #{ n ≤ i : x_n ≠ 0 }
    let mut valid_upto = vec![0u64; valid.len()];
    let mut acc = 0u64;
    for (i, &ok) in valid.iter().enumerate() {
        acc += ok as u64;
        valid_upto[i] = acc;
    }
    let s0 = m0 + n0;
    let mut count = 0u64;
    // diagonals strictly before s0: every m pairs with valid n ≤ s0 - 1 - m
    for m in 0..=bound.min(s0.saturating_sub(1)) {
        let n_cap = (s0 - 1 - m).min(bound);
        count += valid_upto[n_cap as usize];
    }
    // the hit's own diagonal, rows before it
    for m in s0.saturating_sub(bound)..m0 {
        if valid[(s0 - m) as usize] {
            count += 1;
        }
    }
    count + 1
}

// ---- valuation spectrum ----------------------------------------------------------

/// Achieved valuations ν_p(x_m/x_n) over valid pairs with m, n ≤ bound,
/// each with its first witness, plus parity structure. A quotient set dense
/// in Q_p must realize every integer valuation, so gaps here are
/// counter-evidence.
pub fn valuation_spectrum(spec: &RecurrenceSpec, p: u64, bound: u64) -> Result<SpectrumReport> {
    check_prime(p)?;
    if bound == 0 {
        return Err(Error::InvalidArgument("spectrum needs bound ≥ 1".into()));
    }
    if spec.is_identically_zero() {
        return Err(Error::DegenerateSequence);
    }

    let terms = spec.terms_upto(bound);
    let vals: Vec<Option<i64>> = terms
        .iter()
        .map(|t| int_valuation_unchecked(t, p).finite())
        .collect();

    let mut achieved: BTreeMap<i64, SpectrumWitness> = BTreeMap::new();
    for s in 0..=2 * bound {
        for m in s.saturating_sub(bound)..=s.min(bound) {
            let n = s - m;
            let (Some(vm), Some(vn)) = (vals[m as usize], vals[n as usize]) else {
                continue; // zero numerators have no finite valuation to record
            };
            achieved
                .entry(vm - vn)
                .or_insert(SpectrumWitness { m, n });
        }
    }

    let all_even = achieved.keys().all(|v| v % 2 == 0);
    let gcd = achieved
        .keys()
        .fold(0u64, |g, v| g.gcd(&v.unsigned_abs()));
    Ok(SpectrumReport {
        prime: p,
        bound,
        achieved,
        parity: ParitySummary {
            all_even,
            stride: (gcd >= 2).then_some(gcd),
        },
    })
}

// ---- residue coverage ------------------------------------------------------------

/// Fraction of the φ(p^k) unit residue classes mod p^k attained by the unit
/// part of some quotient x_m/x_n with m, n ≤ bound. Coverage 1.0 is what a
/// dense quotient set must eventually produce at every k.
pub fn residue_coverage(
    spec: &RecurrenceSpec,
    p: u64,
    k: u32,
    bound: u64,
) -> Result<CoverageReport> {
    check_prime(p)?;
    if k == 0 {
        return Err(Error::InvalidArgument("coverage needs k ≥ 1".into()));
    }
    if bound == 0 {
        return Err(Error::InvalidArgument("coverage needs bound ≥ 1".into()));
    }

    let modulus = p_pow(p, k);
    let total = &modulus / p * (p - 1); // φ(p^k)
    let terms = spec.terms_upto(bound);

    // unit part of each nonzero term mod p^k, and its inverse for use as a
    // denominator
    let mb = BigInt::from(modulus.clone());
    let units: Vec<Option<BigUint>> = terms
        .iter()
        .map(|t| {
            if t.is_zero() {
                return None;
            }
            let mut u = t.clone();
            let pb = BigInt::from(p);
            while u.is_multiple_of(&pb) {
                u /= &pb;
            }
            Some(
                u.mod_floor(&mb)
                    .to_biguint()
                    .expect("mod_floor is nonnegative"),
            )
        })
        .collect();
    let inverses: Vec<Option<BigUint>> = units
        .iter()
        .map(|u| {
            u.as_ref().map(|u| {
                mod_inverse(&BigInt::from(u.clone()), &modulus)
                    .expect("unit part is coprime to p")
            })
        })
        .collect();

    let mut seen: HashSet<BigUint> = HashSet::new();
    'outer: for inv in inverses.iter().flatten() {
        for um in units.iter().flatten() {
            seen.insert(um * inv % &modulus);
            if BigUint::from(seen.len() as u64) == total {
                break 'outer; // full coverage; nothing left to attain
            }
        }
    }

    let covered = seen.len() as u64;
    let fraction = match total.to_u64() {
        Some(t) => covered as f64 / t as f64,
        None => covered as f64 / total.to_f64().unwrap_or(f64::MAX),
    };
    let list_missing = total <= BigUint::from(MISSING_LIST_LIMIT);
    let missing = if list_missing {
        let modulus_small = modulus.to_u64().expect("small class count, small modulus");
        (1..modulus_small)
            .filter(|r| r % p != 0 && !seen.contains(&BigUint::from(*r)))
            .collect()
    } else {
        Vec::new()
    };

    Ok(CoverageReport {
        prime: p,
        k,
        bound,
        covered,
        total,
        fraction,
        missing,
        missing_omitted: !list_missing,
    })
}
