use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qki::ki::io::decomposition_from_json;
use qki::ki::{synth_ki_state_with, BlockSpec, SynthOptions};
use qki::qcore::io::state_to_json;
use qki::qcore::scalar::cr;
use qki::{State, SystemDims, Vector};
use tempfile::TempDir;

fn qki(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qki"))
        .args(args)
        .env_remove("QKI_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_state(dir: &TempDir, name: &str, s: &State) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, state_to_json(s)).unwrap();
    p
}

fn ar(da: usize, dr: usize) -> SystemDims {
    SystemDims::new([("A", da), ("R", dr)]).unwrap()
}

fn pure(da: usize, dr: usize, amps: &[f64]) -> State {
    State::from_pure(
        ar(da, dr),
        &Vector::from_iterator(amps.len(), amps.iter().map(|&a| cr(a))),
    )
    .unwrap()
}

fn bell() -> State {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    pure(2, 2, &[h, 0.0, 0.0, h])
}

fn fair_bit() -> State {
    State::diagonal(ar(2, 2), &[0.5, 0.0, 0.0, 0.5]).unwrap()
}

fn skewed_pure() -> State {
    pure(2, 2, &[0.8f64.sqrt(), 0.0, 0.0, 0.2f64.sqrt()])
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn decompose_bell_and_product() {
    let dir = TempDir::new().unwrap();
    let bell = write_state(&dir, "bell.json", &bell());
    let out = dir.path().join("bell.ki.json");
    let o = qki(&["decompose", p(&bell), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = stdout(&o);
    assert!(summary.starts_with("1 block,"), "{summary}");
    assert!(summary.contains("\n0\t") && summary.contains("\t2\t1\n"), "{summary}");
    let ki = decomposition_from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(ki.block_dims(), vec![(2, 1)]);

    // ρ^A ⊗ ρ^R with ρ^A of full rank
    let rho = State::diagonal(ar(3, 2), &[0.1, 0.1, 0.2, 0.2, 0.2, 0.2]).unwrap();
    let product = write_state(&dir, "product.json", &rho);
    let o = qki(&["decompose", p(&product)]);
    assert!(o.status.success(), "{}", stderr(&o));
    // summary on stderr, JSON on stdout
    assert!(stderr(&o).contains("\t1\t3\n"), "{}", stderr(&o));
    assert!(decomposition_from_json(&stdout(&o)).is_ok());
}

#[test]
fn malformed_input_exits_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"dims": [["A", 2], ["R", 1]], "matrix_re": [[1, 0], ["x", 0]]}"#,
    )
    .unwrap();
    let o = qki(&["decompose", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("matrix_re"), "{}", stderr(&o));
    let o = qki(&["decompose", p(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rates_of_fair_bit() {
    let dir = TempDir::new().unwrap();
    let fb = write_state(&dir, "fb.json", &fair_bit());
    let o = qki(&["rates", p(&fb), "--samples", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = stderr(&o);
    assert!(
        summary.contains("unassisted corner (E, Q) = (0.0000000000000000e0, 1.0000000000000000e0)"),
        "{summary}"
    );
    assert!(
        summary.contains("assisted corner (E, Q) = (5.0000000000000000e-1, 5.0000000000000000e-1)"),
        "{summary}"
    );
    let csv = stdout(&o);
    assert_eq!(csv.lines().next(), Some("E,Qmin"));
    assert_eq!(csv_rows(&csv).len(), 7);

    let o = qki(&[
        "rates",
        p(&write_state(&dir, "pure.json", &skewed_pure())),
        "--samples",
        "3",
    ]);
    assert!(
        stderr(&o).contains("Schumacher gap = 0.0000000000000000e0"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn simulate_grid_and_modes() {
    let dir = TempDir::new().unwrap();
    let src = write_state(&dir, "pure.json", &skewed_pure());
    let o = qki(&["simulate", p(&src), "--n", "2,4,6,8", "--rate", "full"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for r in csv_rows(&stdout(&o)) {
        assert!((r[3] - 1.0).abs() < 1e-8);
    }

    // default rate S(CQ) + 0.25
    let o = qki(&["simulate", p(&src), "--n", "2,4,6,8"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.iter().map(|r| r[0] as usize).collect::<Vec<_>>(), vec![2, 4, 6, 8]);
    for w in rows.windows(2) {
        assert!(w[1][3] >= w[0][3] - 1e-9);
    }

    let o = qki(&["simulate", p(&src), "--n", "2", "--mode", "assisted", "--slack", "0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert!((rows[0][2] - 0.1).abs() < 1e-12);

    let o = qki(&["simulate", p(&src), "--n", "2", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qki(&["simulate", p(&src), "--n", "40", "--rate", "full"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

fn mixed_omega_source() -> State {
    synth_ki_state_with(
        &[BlockSpec::from((1.0, 2, 2))],
        2,
        5,
        &SynthOptions {
            qr_rank: Some(1),
            ..Default::default()
        },
    )
    .unwrap()
    .0
}

#[test]
fn bounds_rows_determinism_and_errors() {
    let dir = TempDir::new().unwrap();
    let src = write_state(&dir, "mixed.json", &mixed_omega_source());
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let args = |out: &PathBuf| {
        qki(&[
            "bounds",
            p(&src),
            "--epsilons",
            "0,0.05",
            "--restarts",
            "2",
            "--iters",
            "40",
            "--seed",
            "3",
            "--out",
            p(out),
        ])
    };
    let o = args(&a);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(args(&b).status.success());
    let (ta, tb) = (
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap(),
    );
    assert_eq!(ta, tb);
    assert_eq!(ta.lines().next(), Some("epsilon,J_lower,Z_lower,fidelity,restarts"));
    let rows = csv_rows(&ta);
    let s_n_given_c: f64 = stdout(&o).split("S(N|C) = ").nth(1).unwrap().trim().parse().unwrap();
    assert!(rows[0][1].abs() < 1e-6);
    assert!((rows[0][2] - s_n_given_c).abs() < 1e-6);
    assert!(rows[1][3] >= 0.95 - 1e-9);

    let o = qki(&["bounds", p(&src), "--epsilons", "0.1,0"]);
    assert_eq!(o.status.code(), Some(2));

    let big = synth_ki_state_with(&[BlockSpec::from((1.0, 3, 3))], 3, 0, &SynthOptions::default())
        .unwrap()
        .0;
    let big = write_state(&dir, "big.json", &big);
    let o = qki(&["bounds", p(&big), "--epsilons", "0.1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn audit_exit_codes() {
    let dir = TempDir::new().unwrap();
    let bell = write_state(&dir, "bell.json", &bell());
    let o = qki(&["audit", p(&bell), "--n", "2", "--rate", "full"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(csv.lines().next(), Some("step,lhs,rhs,slack"));
    assert!(csv.lines().nth(1).unwrap().starts_with("delta,"));

    let qutrit = write_state(
        &dir,
        "qutrit.json",
        &pure(3, 3, &[0.6, 0.0, 0.0, 0.0, 0.64f64.sqrt(), 0.0, 0.0, 0.0, 0.0]),
    );
    let o = qki(&["audit", p(&qutrit), "--n", "4", "--rate", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    // a lossy code has strictly positive δ and rounding-level equality
    // slacks, which an absurdly strict tolerance turns into a violation
    let src = write_state(&dir, "pure.json", &skewed_pure());
    let o = qki(&["audit", p(&src), "--n", "2", "--rate", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // audit a stored decomposition so the tolerance only reaches the audit
    let ki = dir.path().join("pure.ki.json");
    assert!(qki(&["decompose", p(&src), "--out", p(&ki)]).status.success());
    let o = qki(&["audit", p(&ki), "--n", "3", "--rate", "0.5", "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}
