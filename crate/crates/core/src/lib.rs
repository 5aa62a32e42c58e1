//! Decides, with checkable certificates, whether the quotient set
//! { x_m / x_n } of an integer linear recurrence is dense in Q_p, and
//! provides the exact p-adic arithmetic the decision rests on.
//!
//! Layout:
//! - [`padic`]: exact p-adic scalars, valuations, absolute values
//! - [`analytic`]: exp_p / log_p, exponential polynomials, Hensel lifting
//! - [`recurrence`]: recurrence evaluation, closed forms, modular term streams
//! - [`classifier`]: density rules and certificate construction/verification
//! - [`probe`]: empirical density evidence (hits, spectra, residue coverage)

pub mod analytic;
pub mod classifier;
pub mod error;
pub mod padic;
pub mod probe;
pub mod recurrence;

pub use classifier::{build_certificate, classify, classify_at, classify_auto, verify,
                     Certificate, CertificateStatus, IdentitySample, TheoremTag, Verdict};
pub use error::{Error, Result};
pub use padic::{is_prime, int_valuation, padic_abs, valuation, PAdic, PadicAbs, Valuation,
                DEFAULT_PRECISION};
pub use probe::{probe_target, residue_coverage, valuation_spectrum, CoverageReport,
                ParitySummary, ProbeHit, ProbeReport, SpectrumReport, SpectrumWitness};
