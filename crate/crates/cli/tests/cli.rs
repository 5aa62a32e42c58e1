//! End-to-end drives of the qpdense binary: spec parsing exit codes, verdict
//! exit codes, format parity between text and JSON, and the certify loop.

use serde_json::Value;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qpdense"))
}

fn write_doc(dir: &tempfile::TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str], stdin: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    match stdin {
        Some(data) => {
            cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
            let mut child = cmd.spawn().unwrap();
            child
                .stdin
                .as_mut()
                .unwrap()
                .write_all(data.as_bytes())
                .unwrap();
            child.wait_with_output().unwrap()
        }
        None => cmd.output().unwrap(),
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("process exited")
}

const THM13: &str = r#"{"order":3,"coeffs":[4,-5,2],"initial":[0,0,1],"roots":[[1,2],[2,1]]}"#;
const FIB: &str = r#"{"order":2,"coeffs":[1,1],"initial":[0,1],"label":"fibonacci"}"#;
const SQUARES: &str = r#"{"order":3,"coeffs":[3,-3,1],"initial":[0,1,4]}"#;

#[test]
fn classify_dense_prints_tag_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write_doc(&dir, "spec.json", THM13);
    let out = run(&["classify", "--prime", "7", doc.to_str().unwrap()], None);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("DenseCertified (Thm1_3_double_root)"), "{text}");
    assert!(text.contains("\"hensel_root\""), "{text}");
}

#[test]
fn classify_json_round_trips_as_a_verdict() {
    let out = run(&["classify", "--prime", "7", "--format", "json"], Some(THM13));
    assert_eq!(code(&out), 0);
    let verdict: qpdense_core::Verdict = serde_json::from_str(&stdout(&out)).unwrap();
    let qpdense_core::Verdict::DenseCertified { tag, certificate } = &verdict else {
        panic!("expected dense verdict, got {verdict:?}");
    };
    assert_eq!(tag.wire_name(), "Thm1_3_double_root");
    // and the emitted JSON is exactly the serde form: parse(emit(x)) = x
    let reemitted = serde_json::to_value(&verdict).unwrap();
    let original: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(reemitted, original);
    assert!(matches!(
        certificate,
        qpdense_core::CertificateStatus::Supported { .. }
    ));
}

#[test]
fn verdict_exit_codes_are_scriptable() {
    // Unknown: Fibonacci has no integer characteristic roots
    let out = run(&["classify", "--prime", "5"], Some(FIB));
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("Unknown"));

    // NotDense: x_n = n² has even quotient valuations
    let out = run(&["classify", "--prime", "5"], Some(SQUARES));
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("NotDense (Thm1_5a_converse_nondense)"));
}

#[test]
fn spec_defects_map_to_distinct_exit_codes() {
    let cases: &[(&str, i32)] = &[
        ("{oops", 4),
        (r#"{"order":"two","coeffs":[1,1],"initial":[0,1]}"#, 5),
        (r#"{"order":2,"coeffs":[1,0],"initial":[0,1]}"#, 6),
        (r#"{"order":3,"coeffs":[1,1],"initial":[0,1]}"#, 7),
    ];
    for (doc, want) in cases {
        let out = run(&["classify", "--prime", "5"], Some(doc));
        assert_eq!(code(&out), *want, "document: {doc}");
        assert!(!o_is_empty(&out.stderr), "diagnostic expected for {doc}");
    }
}

fn o_is_empty(bytes: &[u8]) -> bool {
    bytes.is_empty()
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["classify"], Some(FIB)); // missing --prime
    assert_eq!(code(&out), 1);
    let out = run(&["no-such-command"], None);
    assert_eq!(code(&out), 1);
    let out = run(&["probe", "--prime", "2", "--target", "3/0", "--k", "3"], Some(FIB));
    assert_eq!(code(&out), 1);
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn term_subcommand_prints_exact_values() {
    let out = run(&["term", "--n", "10"], Some(FIB));
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "55");

    // values beyond 2^53 ride as decimal strings in JSON
    let out = run(&["term", "--n", "300", "--format", "json"], Some(FIB));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let value = v["value"].as_str().expect("term value is a string");
    assert_eq!(
        value,
        "222232244629420445529739893461909967206666939096499764990979600"
    );
}

#[test]
fn probe_finds_the_canonical_first_hit() {
    let out = run(
        &["probe", "--prime", "2", "--target", "3/1", "--k", "3", "--format", "json"],
        Some(FIB),
    );
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["hit"]["m"], 1);
    assert_eq!(v["hit"]["n"], 4);
    assert_eq!(v["pairs_searched"], 12);

    // text mode reports the same pair
    let out = run(
        &["probe", "--prime", "2", "--target", "3/1", "--k", "3"],
        Some(FIB),
    );
    assert!(stdout(&out).contains("(m, n) = (1, 4)"));
    assert!(stdout(&out).contains("pairs searched: 12"));
}

#[test]
fn probe_no_hit_is_success_with_data() {
    let out = run(
        &[
            "probe", "--prime", "3", "--target", "3", "--k", "1", "--bound", "200",
            "--format", "json",
        ],
        Some(SQUARES),
    );
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["hit"].is_null());
    assert_eq!(v["pairs_searched"], 201 * 200);
}

#[test]
fn probe_parallelism_env_does_not_change_output() {
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let mut cmd = bin();
        cmd.args(["probe", "--prime", "2", "--target", "3/1", "--k", "3", "--format", "json"])
            .env("PADIC_PROBE_PARALLELISM", workers)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let mut child = cmd.spawn().unwrap();
        child
            .stdin
            .as_mut()
            .unwrap()
            .write_all(FIB.as_bytes())
            .unwrap();
        let out = child.wait_with_output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        outputs.push(String::from_utf8_lossy(&out.stdout).into_owned());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn spectrum_text_and_json_agree() {
    let json_out = run(
        &["spectrum", "--prime", "2", "--bound", "50", "--format", "json"],
        Some(FIB),
    );
    assert_eq!(code(&json_out), 0);
    let report: qpdense_core::SpectrumReport =
        serde_json::from_str(&stdout(&json_out)).unwrap();
    assert!(report.achieved.contains_key(&3));
    assert_eq!(report.achieved[&3].m, 6);

    let text_out = run(&["spectrum", "--prime", "2", "--bound", "50"], Some(FIB));
    let text = stdout(&text_out);
    for (v, w) in &report.achieved {
        assert!(
            text.contains(&format!("ν = {v}: witness (m, n) = ({}, {})", w.m, w.n)),
            "text missing ν = {v}\n{text}"
        );
    }
}

#[test]
fn coverage_reports_full_fibonacci_coverage() {
    let out = run(
        &["coverage", "--prime", "3", "--k", "2", "--bound", "300", "--format", "json"],
        Some(FIB),
    );
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["covered"], 6);
    assert_eq!(v["total"], "6");
    assert_eq!(v["fraction"], 1.0);
}

#[test]
fn closed_form_emits_det_and_rational_coefficients() {
    let out = run(&["closed-form", "--format", "json"], Some(THM13));
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["det"], "1");
    assert_eq!(v["parts"][0]["root"], "1");
    assert_eq!(v["parts"][0]["coefficients"][0], "-1");
    assert_eq!(v["parts"][0]["coefficients"][1], "-1");
    assert_eq!(v["parts"][1]["root"], "2");
    assert_eq!(v["parts"][1]["coefficients"][0], "1");

    // roots are found automatically when the document omits them
    let out = run(&["closed-form"], Some(SQUARES));
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("1^n"));

    // and their absence is an honest failure when they do not exist
    let out = run(&["closed-form"], Some(FIB));
    assert_eq!(code(&out), 2);
}

#[test]
fn certify_accepts_good_and_rejects_tampered_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write_doc(&dir, "spec.json", THM13);

    let out = run(
        &["classify", "--prime", "7", "--format", "json", doc.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&out), 0);
    let verdict: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let cert = &verdict["certificate"]["certificate"];

    // the whole classify report is accepted as certificate input
    let report_path = write_doc(&dir, "verdict.json", &stdout(&out));
    let out = run(
        &[
            "certify", "--prime", "7",
            "--certificate", report_path.to_str().unwrap(),
            doc.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("verifies"));

    // so is the bare certificate
    let cert_path = write_doc(&dir, "cert.json", &cert.to_string());
    let out = run(
        &[
            "certify", "--prime", "7",
            "--certificate", cert_path.to_str().unwrap(),
            doc.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 0);

    // a single flipped field must be rejected with the dedicated exit code
    let mut tampered = cert.clone();
    tampered["scale"] = Value::String("2".into());
    let bad_path = write_doc(&dir, "bad.json", &tampered.to_string());
    let out = run(
        &[
            "certify", "--prime", "7",
            "--certificate", bad_path.to_str().unwrap(),
            doc.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 8);
    assert!(stdout(&out).contains("REJECTED"));

    // JSON mode reports the same validity bit
    let out = run(
        &[
            "certify", "--prime", "7", "--format", "json",
            "--certificate", bad_path.to_str().unwrap(),
            doc.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 8);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["valid"], false);
}

#[test]
fn file_and_stdin_inputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write_doc(&dir, "fib.json", FIB);
    let from_file = run(&["term", "--n", "90", doc.to_str().unwrap()], None);
    let from_stdin = run(&["term", "--n", "90"], Some(FIB));
    let from_dash = run(&["term", "--n", "90", "-"], Some(FIB));
    assert_eq!(stdout(&from_file), stdout(&from_stdin));
    assert_eq!(stdout(&from_file), stdout(&from_dash));
    assert_eq!(stdout(&from_file).trim(), "2880067194370816120");
}

#[test]
fn unsupported_certificates_still_classify_dense() {
    // (x-3)² at p = 2: verdict is dense, but log₂(3) diverges, so the
    // certificate is reported unsupported rather than fabricated
    let doc = r#"{"order":2,"coeffs":[6,-9],"initial":[0,1]}"#;
    let out = run(&["classify", "--prime", "2", "--format", "json"], Some(doc));
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["outcome"], "DenseCertified");
    assert_eq!(v["certificate"]["status"], "Unsupported");
}
