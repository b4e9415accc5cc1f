use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DEMO2: &str = r#"version = 1
U = 2
N = 1
rate_factor = 1.0
noise = 1.0
weights = [1.0, 1.0]
rate_min = [0.5, 0.5]
gains = [[0.4, 0.0], [0.9, 1.0]]
"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sicpower")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sicpower-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(name: &str, text: &str) -> PathBuf {
    let p = scratch(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn solve_then_verify() {
    let sc = write("demo2.toml", DEMO2);
    let res = scratch("demo2.result.toml");
    let o = bin(&["solve", s(&sc), "--out", s(&res)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("Optimal Sub-User Power Allocations for U=2"));
    assert!(table.contains("Rates: [0.500, 0.500]"), "{table}");
    let v = bin(&["verify", s(&sc), s(&res), "--tol", "1e-9"]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    assert!(stdout(&v).contains("feasible"));
}

#[test]
fn output_is_byte_identical() {
    let sc = write("det.toml", DEMO2);
    let (r1, r2) = (scratch("det1.toml"), scratch("det2.toml"));
    let a = bin(&["solve", s(&sc), "--out", s(&r1), "--mode", "dual-guided"]);
    let b = bin(&["solve", s(&sc), "--out", s(&r2), "--mode", "dual-guided"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
}

#[test]
fn halved_power_fails_verification() {
    let sc = write("half.toml", DEMO2);
    let res = scratch("half.result.toml");
    assert_eq!(bin(&["solve", s(&sc), "--out", s(&res)]).status.code(), Some(0));
    let mut r = sicpower::io::ResultFile::parse(&std::fs::read_to_string(&res).unwrap()).unwrap();
    let (i, j) = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .max_by(|a, b| r.powers[a.0][a.1][0].total_cmp(&r.powers[b.0][b.1][0]))
        .unwrap();
    r.powers[i][j][0] *= 0.5;
    let bad = write("half.bad.toml", &r.to_toml().unwrap());
    let v = bin(&["verify", s(&sc), s(&bad)]);
    assert_ne!(v.status.code(), Some(0));
    assert!(stdout(&v).contains(",-"), "{}", stdout(&v));
}

#[test]
fn mismatched_users_is_usage_error() {
    let sc = write("mm2.toml", DEMO2);
    let res = scratch("mm2.result.toml");
    assert_eq!(bin(&["solve", s(&sc), "--out", s(&res), "--mode", "dual-guided"]).status.code(), Some(0));
    let three = DEMO2
        .replace("U = 2", "U = 3")
        .replace("[1.0, 1.0]", "[1.0, 1.0, 1.0]")
        .replace("[0.5, 0.5]", "[0.5, 0.5, 0.5]")
        .replace("[[0.4, 0.0], [0.9, 1.0]]", "[[1, 0, 0], [0, 1, 0], [0, 0, 1]]");
    let sc3 = write("mm3.toml", &three);
    assert_eq!(bin(&["verify", s(&sc3), s(&res)]).status.code(), Some(1));
}

#[test]
fn unknown_key_is_named() {
    let sc = write("bad.toml", &format!("{DEMO2}colour = 3\n"));
    let o = bin(&["solve", s(&sc)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn unreachable_target_exits_two() {
    let text = DEMO2
        .replace("[[0.4, 0.0], [0.9, 1.0]]", "[[0.0, 0.0], [0.9, 1.0]]")
        .replace("rate_min = [0.5, 0.5]", "rate_min = [50.0, 0.5]");
    let sc = write("inf.toml", &text);
    assert_eq!(bin(&["solve", s(&sc)]).status.code(), Some(2));
}

#[test]
fn baselines_print_csv() {
    let sc = write("base.toml", DEMO2);
    let tin = bin(&["baseline", s(&sc), "--method", "tin"]);
    assert_eq!(tin.status.code(), Some(0));
    assert!(stdout(&tin).contains("tin,total,,3.871"), "{}", stdout(&tin));
    let diag = write("diag.toml", &DEMO2.replace("[[0.4, 0.0], [0.9, 1.0]]", "[[1.0, 0.0], [0.0, 1.0]]"));
    let oma = bin(&["baseline", s(&diag), "--method", "oma"]);
    assert_eq!(stdout(&oma), "method,user,block,power\noma,total,,1.000000\n");
    let grid = bin(&["oracle", s(&sc), "--grid-points", "9"]);
    assert_eq!(grid.status.code(), Some(0));
    assert!(stdout(&grid).starts_with("method,total,resolution_slack,evaluated,profile\ngrid,"));
}

#[test]
fn grid_refuses_three_users() {
    let text = DEMO2
        .replace("U = 2", "U = 3")
        .replace("[1.0, 1.0]", "[1.0, 1.0, 1.0]")
        .replace("[0.5, 0.5]", "[0.5, 0.5, 0.5]")
        .replace("[[0.4, 0.0], [0.9, 1.0]]", "[[1, 0, 0], [0, 1, 0], [0, 0, 1]]");
    let sc = write("grid3.toml", &text);
    let o = bin(&["baseline", s(&sc), "--method", "grid"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at most 2"), "{}", stderr(&o));
}

#[test]
fn reproduce_all_emits_every_case() {
    let o = bin(&["reproduce", "--case", "all"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "case,paper_total,our_total,oma_total,tin_total,waterfill_total,verdict");
    assert_eq!(lines.len(), 8);
    assert!(lines.iter().any(|l| l.starts_with("A,1.76,")));
    assert!(lines.iter().any(|l| l.starts_with("D,2.43,")));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(bin(&["solve"]).status.code(), Some(1));
    assert_eq!(bin(&["baseline", "x.toml", "--method", "magic"]).status.code(), Some(1));
    assert_eq!(bin(&["reproduce", "--case", "Q"]).status.code(), Some(1));
}
