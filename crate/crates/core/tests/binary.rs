//! Runs the installed binary end to end.

use std::process::Command;

fn nucemb(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nucemb")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn exit_codes_follow_verdicts() {
    let base = ["classify", "--dim", "1", "--src", "s=2,p=2,q=2", "--setting", "weight:poly:a=0,b=3", "--mode", "nuclear"];
    let mut yes = base.to_vec();
    yes.extend(["--tgt", "s=0,p=2,q=2"]);
    assert_eq!(nucemb(&yes).0, 0);
    let mut no = base.to_vec();
    no.extend(["--tgt", "s=3/2,p=2,q=2"]);
    assert_eq!(nucemb(&no).0, 1);
    let mut scope = base.to_vec();
    scope.extend(["--tgt", "s=0,p=1/2,q=2"]);
    let (code, out, _) = nucemb(&scope);
    assert_eq!(code, 2);
    assert!(out.contains("requires p₂≥1"));
    let (code, _, err) = nucemb(&["classify", "--dim", "1"]);
    assert_eq!(code, 3);
    assert!(err.contains("--src"));
}

#[test]
fn help_succeeds() {
    let (code, out, _) = nucemb(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["classify", "sweep", "verify-tong", "bound", "weight"] {
        assert!(out.contains(sub));
    }
}

#[test]
fn sweep_writes_csv() {
    let (code, out, _) = nucemb(&[
        "sweep", "--dim", "2", "--src", "s=2,p=2,q=2", "--setting", "domain", "--inv-p2", "1/2", "--s2", "-1,0,1",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "inv_p2,s2,compact,nuclear,binding");
    assert_eq!(lines.len(), 4);
    // δ = 2 − s₂ against d/p* = 0 and d/t = 2.
    assert!(lines[1].starts_with("1/2,-1,Yes,Yes,"));
    assert!(lines[2].starts_with("1/2,0,Yes,No,"));
    assert!(lines[3].starts_with("1/2,1,Yes,No,"));
}

#[test]
fn pretty_output_is_text() {
    let (code, out, _) = nucemb(&["--pretty", "verify-tong", "--n", "3", "--r1", "2", "--r2", "2", "--tau", "1,2,3"]);
    assert_eq!(code, 0);
    assert!(out.contains("PASS"));
    assert!(!out.starts_with('{'));
}
