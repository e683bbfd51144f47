use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bordered-signs")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_closed_power_two() {
    let o = run(&["solve", "--flavor", "closed", "--power", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no violations"));
}

#[test]
fn power_zero_is_a_usage_error() {
    assert_eq!(run(&["solve", "--power", "0"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_file_is_an_io_error() {
    assert_eq!(run(&["cfd", "--diagram", "/nonexistent/diagram.txt"]).status.code(), Some(3));
}

#[test]
fn machine_output_is_json_and_deterministic() {
    let args = ["--format", "machine", "--sign-sequence", "+-", "pair", "--builtin-a", "Hm1", "--builtin-d", "H0"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["identical"], true);
}

#[test]
fn triangle_reports_an_empty_satisfying_set() {
    let o = run(&["triangle", "--sign-sequence", "--", "--class", "-,+", "--list-homs"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("homomorphism tuples (S3,S4,S7,S8): 4"));
    assert!(s.contains("satisfying set: empty"));
}

#[test]
fn output_flag_writes_the_report() {
    let dir = std::env::temp_dir().join(format!("bordered-signs-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cfd.txt");
    let o = run(&["cfd", "--builtin", "Hinf", "--output", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&path).unwrap().contains("CFD(Hinf)"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn diagram_files_round_trip_through_the_cli() {
    let dir = std::env::temp_dir().join(format!("bordered-signs-diag-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("h0.txt");
    let h = bordered_signs::diagram::builtin(
        bordered_signs::diagram::Builtin::H0,
        "++".parse().unwrap(),
        bordered_signs::diagram::Reading::Left,
    );
    std::fs::write(&path, h.serialize()).unwrap();
    let from_file = run(&["cfd", "--diagram", path.to_str().unwrap()]);
    let from_builtin = run(&["cfd", "--builtin", "H0"]);
    assert_eq!(from_file.status.code(), Some(0));
    assert_eq!(from_file.stdout, from_builtin.stdout);
    std::fs::remove_dir_all(dir).unwrap();
}
