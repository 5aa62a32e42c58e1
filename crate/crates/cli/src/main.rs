//! Command-line driver: reads a recurrence description as JSON (file path or
//! stdin), dispatches to the classifier, probe, or term engine, and prints a
//! text or JSON report.
//!
//! Exit codes, stable for scripting:
//!   0 success (including probe no-hit: that is data)
//!   1 usage or runtime failure
//!   2 classification outcome Unknown
//!   3 classification outcome NotDense
//!   4 spec document is not well-formed JSON
//!   5 spec document violates the schema
//!   6 leading coefficient b_k is zero
//!   7 coeffs/initial length disagrees with order
//!   8 certificate failed verification

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde_json::{json, Value};
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use qpdense_core::recurrence::{
    find_integer_roots, solve_closed_form, validate_factorization, RecurrenceSpec,
    RootFactorization,
};
use qpdense_core::{
    classify_at, classify_auto, probe_target, residue_coverage, valuation_spectrum, verify,
    Certificate, CertificateStatus, Verdict,
};

const EXIT_USAGE: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_NOT_DENSE: u8 = 3;
const EXIT_BAD_JSON: u8 = 4;
const EXIT_SCHEMA: u8 = 5;
const EXIT_ZERO_LEAD: u8 = 6;
const EXIT_LENGTH: u8 = 7;
const EXIT_BAD_CERT: u8 = 8;

// stdout may be a pipe that closes early (e.g. `qpdense … | head`); treat
// that as the consumer being done, not as a crash
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        if writeln!(out, $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

#[derive(Parser)]
#[command(
    name = "qpdense",
    version,
    about = "Decide and explore p-adic density of quotient sets of integer linear recurrences"
)]
struct Cli {
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct SpecInput {
    /// Recurrence spec JSON file; omit or pass '-' to read standard input
    #[arg(value_name = "SPEC")]
    spec: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the quotient set as dense / not dense / unknown in Q_p
    Classify {
        #[command(flatten)]
        input: SpecInput,
        #[arg(long)]
        prime: u64,
        /// Certificate precision in p-adic digits
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..=4096))]
        precision: u32,
    },
    /// Re-verify a stored certificate against a recurrence spec
    Certify {
        #[command(flatten)]
        input: SpecInput,
        #[arg(long)]
        prime: u64,
        /// Certificate JSON: either a bare certificate or a classify report
        #[arg(long, value_name = "FILE")]
        certificate: PathBuf,
    },
    /// Search ratios x_m/x_n for one approaching a target in Q_p
    Probe {
        #[command(flatten)]
        input: SpecInput,
        #[arg(long)]
        prime: u64,
        /// Target rational, NUM or NUM/DEN (decimal, arbitrary precision)
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        /// Significant p-adic digits of agreement demanded
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        k: u32,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        bound: u64,
    },
    /// Enumerate achieved valuations ν_p(x_m/x_n) with witnesses
    Spectrum {
        #[command(flatten)]
        input: SpecInput,
        #[arg(long)]
        prime: u64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        bound: u64,
    },
    /// Measure coverage of unit residue classes mod p^k by quotients
    Coverage {
        #[command(flatten)]
        input: SpecInput,
        #[arg(long)]
        prime: u64,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        k: u32,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        bound: u64,
    },
    /// Print the closed form x_n = Σ (polynomial in n)·aⁿ over the roots
    ClosedForm {
        #[command(flatten)]
        input: SpecInput,
    },
    /// Print the exact term x_n
    Term {
        #[command(flatten)]
        input: SpecInput,
        #[arg(long)]
        n: u64,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors by default; this tool promises 1
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let format = cli.format;
    match cli.command {
        Command::Classify {
            input,
            prime,
            precision,
        } => {
            let doc = load_spec(&input)?;
            let verdict = match &doc.roots {
                Some(fact) => classify_at(&doc.spec, fact, prime, precision),
                None => classify_auto(&doc.spec, prime, precision),
            }
            .map_err(internal)?;
            emit_verdict(&verdict, format);
            Ok(match verdict {
                Verdict::DenseCertified { .. } => 0,
                Verdict::NotDense { .. } => EXIT_NOT_DENSE,
                Verdict::Unknown { .. } => EXIT_UNKNOWN,
            })
        }
        Command::Certify {
            input,
            prime,
            certificate,
        } => {
            let doc = load_spec(&input)?;
            let cert = load_certificate(&certificate)?;
            let fact = require_roots(&doc)?;
            let valid = verify(&cert, &doc.spec, &fact, prime);
            match format {
                Format::Json => print_json(&json!({
                    "valid": valid,
                    "tag": cert.tag.wire_name(),
                    "prime": cert.prime,
                    "precision": cert.precision,
                })),
                Format::Text => {
                    if valid {
                        outln!(
                            "certificate verifies: tag {}, prime {}, precision {}",
                            cert.tag, cert.prime, cert.precision
                        );
                    } else {
                        outln!("certificate REJECTED (tag {}, prime {})", cert.tag, cert.prime);
                    }
                }
            }
            Ok(if valid { 0 } else { EXIT_BAD_CERT })
        }
        Command::Probe {
            input,
            prime,
            target,
            k,
            bound,
        } => {
            let doc = load_spec(&input)?;
            let target = parse_target(&target)?;
            let report = probe_target(&doc.spec, prime, &target, k, bound).map_err(internal)?;
            match format {
                Format::Json => print_json(&to_value(&report)),
                Format::Text => {
                    outln!(
                        "probe: prime {}, target {}/{}, k {}, bound {}",
                        report.prime, report.target_num, report.target_den, report.k, report.bound
                    );
                    match &report.hit {
                        Some(h) => outln!(
                            "hit at (m, n) = ({}, {}): ν_p(x_m/x_n − target) = {}",
                            h.m, h.n, h.valuation_of_difference
                        ),
                        None => outln!("no hit within the bound"),
                    }
                    outln!("pairs searched: {}", report.pairs_searched);
                }
            }
            Ok(0)
        }
        Command::Spectrum {
            input,
            prime,
            bound,
        } => {
            let doc = load_spec(&input)?;
            let report = valuation_spectrum(&doc.spec, prime, bound).map_err(internal)?;
            match format {
                Format::Json => print_json(&to_value(&report)),
                Format::Text => {
                    outln!("valuation spectrum: prime {}, bound {}", report.prime, report.bound);
                    for (v, w) in &report.achieved {
                        outln!("ν = {v}: witness (m, n) = ({}, {})", w.m, w.n);
                    }
                    outln!(
                        "parity: {}{}",
                        if report.parity.all_even { "all even" } else { "mixed" },
                        match report.parity.stride {
                            Some(d) => format!(", all multiples of {d}"),
                            None => String::new(),
                        }
                    );
                }
            }
            Ok(0)
        }
        Command::Coverage {
            input,
            prime,
            k,
            bound,
        } => {
            let doc = load_spec(&input)?;
            let report = residue_coverage(&doc.spec, prime, k, bound).map_err(internal)?;
            match format {
                Format::Json => print_json(&to_value(&report)),
                Format::Text => {
                    outln!(
                        "residue coverage: covered {} of {} unit classes mod {}^{} (fraction {:.6})",
                        report.covered, report.total, report.prime, report.k, report.fraction
                    );
                    if report.missing_omitted {
                        outln!("missing classes omitted (too many to list)");
                    } else if report.missing.is_empty() {
                        outln!("missing: none");
                    } else if report.missing.len() <= 24 {
                        outln!("missing: {:?}", report.missing);
                    } else {
                        outln!(
                            "missing: {} classes, first {:?} …",
                            report.missing.len(),
                            &report.missing[..24]
                        );
                    }
                }
            }
            Ok(0)
        }
        Command::ClosedForm { input } => {
            let doc = load_spec(&input)?;
            let fact = require_roots(&doc)?;
            let cf = solve_closed_form(&doc.spec, &fact).map_err(internal)?;
            match format {
                Format::Json => {
                    let parts: Vec<Value> = cf
                        .parts()
                        .iter()
                        .map(|part| {
                            json!({
                                "root": part.root.to_string(),
                                "coefficients": part
                                    .coefficients
                                    .iter()
                                    .map(rational_string)
                                    .collect::<Vec<_>>(),
                            })
                        })
                        .collect();
                    print_json(&json!({ "det": cf.det().to_string(), "parts": parts }));
                }
                Format::Text => {
                    let rendered: Vec<String> = cf
                        .parts()
                        .iter()
                        .map(|part| {
                            let poly: Vec<String> = part
                                .coefficients
                                .iter()
                                .enumerate()
                                .map(|(j, c)| match j {
                                    0 => rational_string(c),
                                    1 => format!("{}·n", rational_string(c)),
                                    _ => format!("{}·n^{j}", rational_string(c)),
                                })
                                .collect();
                            format!("({})·{}^n", poly.join(" + "), part.root)
                        })
                        .collect();
                    outln!("x_n = {}", rendered.join(" + "));
                }
            }
            Ok(0)
        }
        Command::Term { input, n } => {
            let doc = load_spec(&input)?;
            let value = doc.spec.term(n);
            match format {
                Format::Json => print_json(&json!({ "n": n, "value": value.to_string() })),
                Format::Text => outln!("{value}"),
            }
            Ok(0)
        }
    }
}

fn internal(e: qpdense_core::Error) -> Failure {
    Failure::new(EXIT_USAGE, e.to_string())
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn print_json(v: &Value) {
    outln!("{}", serde_json::to_string_pretty(v).expect("value renders"));
}

fn emit_verdict(verdict: &Verdict, format: Format) {
    match format {
        Format::Json => print_json(&to_value(verdict)),
        Format::Text => match verdict {
            Verdict::DenseCertified { tag, certificate } => {
                outln!("DenseCertified ({tag})");
                match certificate {
                    CertificateStatus::Supported { certificate } => {
                        outln!("certificate:");
                        print_json(&to_value(certificate));
                    }
                    CertificateStatus::Unsupported { reason } => {
                        outln!("certificate unavailable: {reason}");
                    }
                }
            }
            Verdict::NotDense { tag, reason } => {
                match tag {
                    Some(tag) => outln!("NotDense ({tag})"),
                    None => outln!("NotDense"),
                }
                outln!("reason: {reason}");
            }
            Verdict::Unknown { reason } => {
                outln!("Unknown");
                outln!("reason: {reason}");
            }
        },
    }
}

fn rational_string(r: &BigRational) -> String {
    if r.denom().is_zero() || r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

// ---- spec document parsing -------------------------------------------------------

struct SpecDocument {
    spec: RecurrenceSpec,
    roots: Option<RootFactorization>,
    #[allow(dead_code)]
    label: Option<String>,
}

fn load_spec(input: &SpecInput) -> Result<SpecDocument, Failure> {
    let raw = read_input(input.spec.as_deref())?;
    parse_spec(&raw)
}

fn read_input(path: Option<&std::path::Path>) -> Result<String, Failure> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p)
            .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read {}: {e}", p.display()))),
        _ => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read stdin: {e}")))?;
            Ok(buf)
        }
    }
}

fn parse_spec(raw: &str) -> Result<SpecDocument, Failure> {
    let doc: Value = serde_json::from_str(raw)
        .map_err(|e| Failure::new(EXIT_BAD_JSON, format!("spec is not valid JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Failure::new(EXIT_SCHEMA, "spec must be a JSON object"))?;

    let order_raw = obj
        .get("order")
        .ok_or_else(|| Failure::new(EXIT_SCHEMA, "missing field: order"))?;
    let order_int = parse_integer(order_raw, "order")?;
    if order_int.is_negative() || order_int.is_zero() {
        return Err(Failure::new(EXIT_SCHEMA, "order must be a positive integer"));
    }
    let order = usize::try_from(&order_int)
        .map_err(|_| Failure::new(EXIT_SCHEMA, "order is absurdly large"))?;

    let coeffs = parse_integer_array(obj.get("coeffs"), "coeffs")?;
    let initial = parse_integer_array(obj.get("initial"), "initial")?;
    if coeffs.len() != order || initial.len() != order {
        return Err(Failure::new(
            EXIT_LENGTH,
            format!(
                "order is {order} but coeffs has {} entries and initial has {}",
                coeffs.len(),
                initial.len()
            ),
        ));
    }
    if coeffs[order - 1].is_zero() {
        return Err(Failure::new(
            EXIT_ZERO_LEAD,
            "b_k = 0: the recurrence must genuinely have the stated order",
        ));
    }
    let spec = RecurrenceSpec::new(coeffs, initial)
        .map_err(|e| Failure::new(EXIT_SCHEMA, e.to_string()))?;

    let roots = match obj.get("roots") {
        None | Some(Value::Null) => None,
        Some(Value::Array(entries)) => {
            let mut pairs = Vec::with_capacity(entries.len());
            for (i, entry) in entries.iter().enumerate() {
                let pair = entry.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                    Failure::new(
                        EXIT_SCHEMA,
                        format!("roots[{i}] must be a [root, multiplicity] pair"),
                    )
                })?;
                let root = parse_integer(&pair[0], &format!("roots[{i}][0]"))?;
                let mult = parse_integer(&pair[1], &format!("roots[{i}][1]"))?;
                let mult = u32::try_from(&mult).ok().filter(|m| *m >= 1).ok_or_else(|| {
                    Failure::new(
                        EXIT_SCHEMA,
                        format!("roots[{i}]: multiplicity must be a positive integer"),
                    )
                })?;
                pairs.push((root, mult));
            }
            let fact = RootFactorization::new(pairs)
                .map_err(|e| Failure::new(EXIT_SCHEMA, e.to_string()))?;
            if !validate_factorization(&spec, &fact) {
                return Err(Failure::new(
                    EXIT_SCHEMA,
                    "roots do not multiply back to the characteristic polynomial",
                ));
            }
            Some(fact)
        }
        Some(_) => {
            return Err(Failure::new(EXIT_SCHEMA, "roots must be an array of pairs"));
        }
    };

    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(Failure::new(EXIT_SCHEMA, "label must be a string")),
    };

    Ok(SpecDocument { spec, roots, label })
}

fn parse_integer(v: &Value, field: &str) -> Result<BigInt, Failure> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigInt::from(i))
            } else if let Some(u) = n.as_u64() {
                Ok(BigInt::from(u))
            } else {
                Err(Failure::new(
                    EXIT_SCHEMA,
                    format!(
                        "{field}: {n} is not an exact integer; write big values as decimal strings"
                    ),
                ))
            }
        }
        Value::String(s) => BigInt::from_str(s.trim()).map_err(|_| {
            Failure::new(EXIT_SCHEMA, format!("{field}: '{s}' is not a decimal integer"))
        }),
        _ => Err(Failure::new(
            EXIT_SCHEMA,
            format!("{field}: expected an integer (number or decimal string)"),
        )),
    }
}

fn parse_integer_array(v: Option<&Value>, field: &str) -> Result<Vec<BigInt>, Failure> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or_else(|| Failure::new(EXIT_SCHEMA, format!("{field} must be an array of integers")))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| parse_integer(x, &format!("{field}[{i}]")))
        .collect()
}

fn require_roots(doc: &SpecDocument) -> Result<RootFactorization, Failure> {
    match &doc.roots {
        Some(f) => Ok(f.clone()),
        None => find_integer_roots(&doc.spec).ok_or_else(|| {
            Failure::new(
                EXIT_UNKNOWN,
                "this command needs the characteristic roots; none were given and the \
                 polynomial does not split into integer linear factors",
            )
        }),
    }
}

fn load_certificate(path: &std::path::Path) -> Result<Certificate, Failure> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&raw)
        .map_err(|e| Failure::new(EXIT_BAD_JSON, format!("certificate is not valid JSON: {e}")))?;
    // accept a bare certificate, a classify verdict, or certify's own output
    if let Ok(cert) = serde_json::from_value::<Certificate>(value.clone()) {
        return Ok(cert);
    }
    if let Ok(Verdict::DenseCertified {
        certificate: CertificateStatus::Supported { certificate },
        ..
    }) = serde_json::from_value::<Verdict>(value)
    {
        return Ok(certificate);
    }
    Err(Failure::new(
        EXIT_SCHEMA,
        "file contains neither a certificate nor a dense classify report with one",
    ))
}

fn parse_target(raw: &str) -> Result<BigRational, Failure> {
    let bad = |msg: &str| Failure::new(EXIT_USAGE, format!("--target {raw}: {msg}"));
    let (num, den) = match raw.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (raw.trim(), "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| bad("numerator is not a decimal integer"))?;
    let den = BigInt::from_str(den).map_err(|_| bad("denominator is not a decimal integer"))?;
    if den.is_zero() {
        return Err(bad("denominator must be nonzero"));
    }
    Ok(BigRational::new(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_the_reference_documents() {
        let d = parse_spec(
            r#"{"order":3,"coeffs":[4,-5,2],"initial":[0,0,1],"roots":[[1,2],[2,1]]}"#,
        )
        .unwrap();
        assert_eq!(d.spec.order(), 3);
        assert_eq!(d.roots.unwrap().distinct_count(), 2);

        let d = parse_spec(r#"{"order":2,"coeffs":[1,1],"initial":[0,1]}"#).unwrap();
        assert!(d.roots.is_none());
        assert_eq!(d.spec.term(10), BigInt::from(55));
    }

    #[test]
    fn distinct_exit_codes_per_defect() {
        let cases: &[(&str, u8)] = &[
            ("{not json", EXIT_BAD_JSON),
            (r#"[1,2,3]"#, EXIT_SCHEMA),
            (r#"{"coeffs":[1,1],"initial":[0,1]}"#, EXIT_SCHEMA),
            (r#"{"order":2,"coeffs":[1,1],"initial":[0,1],"roots":[[1]]}"#, EXIT_SCHEMA),
            (r#"{"order":0,"coeffs":[],"initial":[]}"#, EXIT_SCHEMA),
            (r#"{"order":2,"coeffs":[1,0],"initial":[0,1]}"#, EXIT_ZERO_LEAD),
            (r#"{"order":3,"coeffs":[1,1],"initial":[0,1]}"#, EXIT_LENGTH),
            (r#"{"order":2,"coeffs":[1,1],"initial":[0,1,2]}"#, EXIT_LENGTH),
            (r#"{"order":2,"coeffs":[1,1.5],"initial":[0,1]}"#, EXIT_SCHEMA),
            // wrong factorization is a schema violation, not a crash
            (
                r#"{"order":2,"coeffs":[1,1],"initial":[0,1],"roots":[[1,1],[2,1]]}"#,
                EXIT_SCHEMA,
            ),
        ];
        for (raw, want) in cases {
            let got = parse_spec(raw).err().map(|f| f.code);
            assert_eq!(got, Some(*want), "document: {raw}");
        }
    }

    #[test]
    fn big_integers_ride_in_strings() {
        let d = parse_spec(
            r#"{"order":2,"coeffs":[1,1],"initial":["123456789012345678901234567890",1]}"#,
        )
        .unwrap();
        assert_eq!(
            d.spec.initials()[0],
            BigInt::from_str("123456789012345678901234567890").unwrap()
        );
        // unquoted numbers beyond exact 64-bit range are refused with a hint
        let err = parse_spec(r#"{"order":2,"coeffs":[1,1],"initial":[1e30,1]}"#)
            .err()
            .unwrap();
        assert_eq!(err.code, EXIT_SCHEMA);
        assert!(err.message.contains("decimal strings"));
    }

    #[test]
    fn target_parsing() {
        assert_eq!(parse_target("3").unwrap(), BigRational::from(BigInt::from(3)));
        assert_eq!(
            parse_target("-8/6").unwrap(),
            BigRational::new(BigInt::from(-4), BigInt::from(3))
        );
        assert!(parse_target("3/0").is_err());
        assert!(parse_target("a/b").is_err());
    }

    #[test]
    fn labels_are_optional_but_typed() {
        let d = parse_spec(r#"{"order":2,"coeffs":[1,1],"initial":[0,1],"label":"fib"}"#).unwrap();
        assert_eq!(d.label.as_deref(), Some("fib"));
        let err = parse_spec(r#"{"order":2,"coeffs":[1,1],"initial":[0,1],"label":7}"#)
            .err()
            .unwrap();
        assert_eq!(err.code, EXIT_SCHEMA);
    }
}
