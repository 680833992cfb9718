use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landau-lab"))
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(path: PathBuf) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    std::iter::once(header)
        .chain(rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()))
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> usize {
    rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn help_and_bad_arguments() {
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&bin().arg("nonsense").output().unwrap()), 2);
    assert_eq!(code(&bin().args(["verify", "--gamma", "2"]).output().unwrap()), 2);
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[verify]\nbogus = 1\n", &["verify"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = run(dir.path(), "[simulate.solver]\nnodes = 15\n", &["simulate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn functionals_maxwellian_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        r#"
[functionals]
gammas = [0.0, 1.0]
distributions = [{ id = "m", state = { kind = "maxwellian" } }]
"#,
        &["functionals"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(dir.path().join("out/functionals.csv"));
    assert_eq!(rows.len(), 3);
    let (i1, fr) = (column(&rows, "I1"), column(&rows, "fisher_rel"));
    for r in &rows[1..] {
        assert_eq!(r[0], "m");
        for k in 0..3 {
            assert!((r[i1 + k].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(r[fr].parse::<f64>().unwrap().abs() < 1e-10);
    }
}

#[test]
fn functionals_gaussian_sweep_counts_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        r#"
[functionals]
family = { kind = "gaussian-delta", deltas = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06] }
"#,
        &["functionals"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(read_csv(dir.path().join("out/functionals.csv")).len(), 1 + 21);
    assert!(stdout(&o).contains("21 rows"));
}

#[test]
fn functionals_fermi_dirac_block() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        r#"
[functionals]
gammas = [0.0]
epsilons = [0.05]
distributions = [{ id = "g", state = { kind = "gaussian", temperatures = [1.06, 0.97, 0.97] } }]
"#,
        &["functionals"],
    );
    assert_eq!(code(&o), 0);
    let rows = read_csv(dir.path().join("out/functionals.csv"));
    // Classical row plus one ε row.
    assert_eq!(rows.len(), 3);
    let e = column(&rows, "epsilon");
    assert_eq!(rows[1][e], "");
    let lfd = &rows[2];
    assert!(lfd[e].parse::<f64>().unwrap() == 0.05);
    let filled = lfd.iter().filter(|c| !c.is_empty()).count();
    assert!(filled > rows[1].iter().filter(|c| !c.is_empty()).count());
}

#[test]
fn verify_default_sweep_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "", &["verify"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("satisfied: all gate-passing"));
    assert!(dir.path().join("out/verify.csv").exists());
}

#[test]
fn verify_gate_failures_are_not_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "[verify]\nfamily = { kind = \"gaussian-delta\", deltas = [0.0, 0.2] }\ngammas = [0.0, 1.0]\n",
        &["verify"],
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rows = read_csv(dir.path().join("out/verify.csv"));
    let gate = column(&rows, "gate_passed");
    assert!(rows[1..].iter().any(|r| r[gate] == "false"));
}

#[test]
fn verify_scaled_constant_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[verify]\nfamily = { kind = \"gaussian-delta\", deltas = [0.03] }\ngammas = [0.0]\nrhs_scale = 1e-9\n", &["verify"]);
    assert_eq!(code(&o), 4, "{}", stdout(&o));
    assert!(stdout(&o).contains("VIOLATION"));
}

#[test]
fn verify_chain_audit() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "[verify]\nfamily = { kind = \"gaussian-delta\", deltas = [0.02] }\ngammas = [0.0]\nepsilons = [0.05]\nchain = true\n",
        &["verify"],
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(read_csv(dir.path().join("out/chain.csv")).len() > 1);
}

#[test]
fn outputs_are_deterministic() {
    let config = r#"
seed = 11
[quadrature]
random_candidates = 8
[verify]
family = { kind = "symmetric-mixture", shifts = [0.0, 0.3] }
gammas = [0.5]
"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(a.path(), config, &["verify", "--threads", "1"])), 0);
    assert_eq!(code(&run(b.path(), config, &["verify", "--threads", "3"])), 0);
    let x = std::fs::read(a.path().join("out/verify.csv")).unwrap();
    let y = std::fs::read(b.path().join("out/verify.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn equilibrium_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[equilibrium]\nepsilons = [1e-6, 0.1, 1e6]\n", &["equilibrium"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(dir.path().join("out/equilibrium.csv"));
    assert_eq!(rows.len(), 4);
    let num = |r: &Vec<String>, k: usize| r[k].parse::<f64>().unwrap();
    let classical = &rows[1];
    assert!((num(classical, 2) - 0.5).abs() < 1e-6);
    assert!((num(classical, 1) - 0.0634936).abs() < 1e-6);
    let mid = &rows[2];
    assert!((num(mid, 4) - 1.0).abs() < 1e-8 && (num(mid, 5) - 3.0).abs() < 1e-8);
    assert_eq!(rows[3][6], "saturated");
}

#[test]
fn decay_flags_a_violating_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    // H grows half way through, so monotonicity and the envelope both fail.
    let mut csv = String::from("t,H,D,mass,momentum_norm,energy,min_f,l2q6\n");
    for k in 0..=20 {
        let t = 0.5 * k as f64;
        let h = if k == 10 { 0.5 } else { 1e-2 * (-0.5 * t).exp() };
        csv.push_str(&format!("{t},{h},{},1,0,3,0,0.4\n", 0.5 * h));
    }
    std::fs::write(dir.path().join("bad.csv"), csv).unwrap();
    let o = run(dir.path(), "[decay]\ntrajectory = \"bad.csv\"\n", &["decay"]);
    assert_eq!(code(&o), 4, "{}", stdout(&o));
    let report = read_csv(dir.path().join("out/decay.csv"));
    assert!(report.iter().any(|r| r[0] == "passed" && r[1] == "false"));
}

#[test]
fn simulate_then_decay() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
[simulate]
decay = false
[simulate.solver]
nodes = 12
gamma = 1.0
t_end = 1.0
sample_interval = 0.25
[decay]
trajectory = "out/trajectory.csv"
"#;
    let o = run(dir.path(), config, &["simulate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let traj = read_csv(dir.path().join("out/trajectory.csv"));
    assert_eq!(traj.len(), 1 + 5);
    assert!(dir.path().join("out/trajectory_identity.csv").exists());
    let o = run(dir.path(), config, &["decay"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("0 monotonicity violations"));
}

#[test]
fn simulate_from_equilibrium_passes_trivially() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        r#"
[simulate]
initial = { kind = "maxwellian" }
[simulate.solver]
nodes = 12
t_end = 0.5
sample_interval = 0.25
"#,
        &["simulate"],
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let report = read_csv(dir.path().join("out/decay.csv"));
    assert!(report.iter().any(|r| r[0] == "passed" && r[1] == "true"));
}
