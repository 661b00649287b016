use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use oubstop::csv_io::read_boundary_csv;
use oubstop::{boundary_eval, BoundarySolution, TimeGrid};

fn oubstop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oubstop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read_rows(path: &Path) -> Vec<(f64, f64)> {
    read_boundary_csv(BufReader::new(fs::File::open(path).unwrap())).unwrap()
}

fn single_value(args: &[&str]) -> f64 {
    let text = stdout(&oubstop(args));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,V"));
    lines
        .next()
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap()
}

/// Parses a wide figure file into its header and numeric columns.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for line in lines {
        for (c, field) in line.split(',').enumerate() {
            cols[c].push(field.parse().unwrap());
        }
    }
    (header, cols)
}

#[test]
fn solve_writes_pinned_boundary() {
    let text = stdout(&oubstop(&[
        "solve", "--alpha", "1", "--gamma", "1", "--z", "0",
    ]));
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "t,beta");
    assert_eq!(lines.len(), 502);
    assert_eq!(*lines.last().unwrap(), "1.0,0.0");
}

#[test]
fn solve_reports_progress_on_stderr() {
    let out = oubstop(&["solve", "--n", "50"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("iterations:") && err.contains("residual:"),
        "{err}"
    );
}

#[test]
fn opposite_alphas_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    stdout(&oubstop(&[
        "solve",
        "--alpha",
        "-2",
        "--out",
        a.to_str().unwrap(),
    ]));
    stdout(&oubstop(&[
        "solve",
        "--alpha",
        "2",
        "--out",
        b.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn near_brownian_bridge_limit() {
    let text = stdout(&oubstop(&["solve", "--alpha", "1e-4"]));
    let rows = read_boundary_csv(text.as_bytes()).unwrap();
    for (t, b) in rows {
        if t <= 0.95 {
            assert!(
                (b - 0.8399 * (1.0 - t).sqrt()).abs() < 0.02,
                "t {t} beta {b}"
            );
        }
    }
}

#[test]
fn boundary_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    stdout(&oubstop(&[
        "solve",
        "--z",
        "-1.5",
        "--n",
        "80",
        "--out",
        path.to_str().unwrap(),
    ]));
    let rows = read_rows(&path);
    let (ts, bs): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let sol = BoundarySolution::from_values(TimeGrid::from_nodes(ts.clone()).unwrap(), bs.clone())
        .unwrap();
    for (t, b) in ts.iter().zip(&bs) {
        assert_eq!(boundary_eval(&sol, *t).unwrap(), *b);
    }
}

#[test]
fn general_parameters_shift_and_stretch() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    stdout(&oubstop(&[
        "solve",
        "--n",
        "60",
        "--out",
        a.to_str().unwrap(),
    ]));
    stdout(&oubstop(&[
        "solve",
        "--n",
        "60",
        "--theta",
        "3",
        "--z",
        "3",
        "--alpha",
        "0.5",
        "--gamma",
        "0.7071067811865476",
        "--horizon",
        "2",
        "--out",
        b.to_str().unwrap(),
    ]));
    for ((t, x), (u, y)) in read_rows(&a).into_iter().zip(read_rows(&b)) {
        assert!((2.0 * t - u).abs() < 1e-12);
        assert!((x + 3.0 - y).abs() < 1e-6, "t {t}: {x} vs {y}");
    }
}

#[test]
fn non_convergence_writes_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let out = oubstop(&[
        "solve",
        "--max-iter",
        "1",
        "--n",
        "50",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(!path.exists());
    let partial = dir.path().join("b.csv.partial");
    assert_eq!(read_rows(&partial).len(), 51);
}

#[test]
fn invalid_flags_fail_before_computing() {
    for args in [
        &["solve", "--gamma", "-1"][..],
        &["solve", "--n", "1"],
        &["solve", "--eps", "0"],
        &["verify", "--paths", "0"],
        &["value", "--t", "1.0", "--x", "0"],
        &["value", "--t", "0.5"],
        &["solve", "--format", "json"],
    ] {
        let out = oubstop(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn value_in_stopping_region_is_payoff() {
    let v = single_value(&["value", "--z", "0.5", "--t", "0.5", "--x", "10.5"]);
    assert_eq!(v, 10.5);
}

#[test]
fn value_near_horizon_is_pinned() {
    let v = single_value(&["value", "--z", "0.3", "--t", "0.999", "--x", "0.3"]);
    assert!((v - 0.3).abs() < 5e-3, "{v}");
}

#[test]
fn value_grid_mode() {
    let start = std::time::Instant::now();
    let text = stdout(&oubstop(&["value", "--grid", "11"]));
    assert!(start.elapsed().as_secs_f64() < 10.0);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "t,x,V");
    assert_eq!(lines.len(), 122);
    for line in &lines[1..] {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(f[2] >= f[1] - 1e-6, "{line}");
    }
}

#[test]
fn verify_default_passes_and_is_deterministic() {
    let first = stdout(&oubstop(&["verify"]));
    let second = stdout(&oubstop(&["verify"]));
    assert_eq!(first, second);
    let lines: Vec<_> = first.lines().collect();
    assert_eq!(lines[0], "check,statistic,threshold,result");
    let names: Vec<_> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "mc_consistency",
            "perturbation_plus",
            "perturbation_minus",
            "terminal_pinning",
            "value_matching"
        ]
    );
    assert!(lines[1..].iter().all(|l| l.ends_with(",pass")));
}

#[test]
fn verify_rejects_tampered_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    stdout(&oubstop(&["solve", "--out", good.to_str().unwrap()]));
    let tampered = dir.path().join("tampered.csv");
    let mut text = String::from("t,beta\n");
    for (t, b) in read_rows(&good) {
        text.push_str(&format!("{t:?},{:?}\n", b + 0.5));
    }
    fs::write(&tampered, text).unwrap();

    let ok = oubstop(&["verify", "--boundary", good.to_str().unwrap()]);
    assert!(ok.status.success());
    let out = oubstop(&["verify", "--boundary", tampered.to_str().unwrap()]);
    assert!(!out.status.success());
    let report = String::from_utf8(out.stdout).unwrap();
    let minus = report
        .lines()
        .find(|l| l.starts_with("perturbation_minus"))
        .unwrap();
    assert!(minus.ends_with(",fail"), "{report}");
}

#[test]
fn figures_datasets() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&oubstop(&[
        "figures",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    assert!(dir.path().join("MANIFEST.txt").exists());

    for z in ["0", "-5", "5"] {
        let (header, cols) = read_table(&dir.path().join(format!("fig1_z{z}.csv")));
        assert_eq!(header.last().unwrap(), "bb_reference");
        let col = |name: &str| &cols[header.iter().position(|h| h == name).unwrap()];
        for a in ["0.01", "1", "5"] {
            assert_eq!(col(&format!("alpha={a}")), col(&format!("alpha=-{a}")));
        }
        let zf: f64 = z.parse().unwrap();
        for (t, bb) in cols[0].iter().zip(col("bb_reference")) {
            assert!((bb - (zf + 0.8399 * (1.0 - t).sqrt())).abs() < 1e-12);
        }
    }

    let (header, cols) = read_table(&dir.path().join("fig2_z0.csv"));
    assert_eq!(header, ["t", "gamma=0.5", "gamma=1", "gamma=2"]);
    for (one, two) in cols[2].iter().zip(&cols[3]) {
        assert!((two - 2.0 * one).abs() < 2e-3);
    }

    for z in ["0", "-5", "5"] {
        let text = fs::read_to_string(dir.path().join(format!("fig3_z{z}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,t,beta_minus_z"));
        let mut levels: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            let n: usize = f[0].parse().unwrap();
            if levels.last().map(|l| l.0) != Some(n) {
                levels.push((n, Vec::new()));
            }
            levels
                .last_mut()
                .unwrap()
                .1
                .push((f[1].parse().unwrap(), f[2].parse().unwrap()));
        }
        assert_eq!(
            levels.iter().map(|l| l.0).collect::<Vec<_>>(),
            [10, 100, 500]
        );
        let as_solution = |rows: &[(f64, f64)]| {
            let (ts, bs): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
            BoundarySolution::from_values(TimeGrid::from_nodes(ts).unwrap(), bs).unwrap()
        };
        let deviation = |coarse: &[(f64, f64)], fine: &[(f64, f64)]| {
            let fine = as_solution(fine);
            coarse
                .iter()
                .map(|&(t, b)| (b - boundary_eval(&fine, t).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        let d1 = deviation(&levels[0].1, &levels[1].1);
        let d2 = deviation(&levels[1].1, &levels[2].1);
        assert!(d2 < d1, "z {z}: {d1} then {d2}");
    }
}

#[test]
fn thread_hint_does_not_change_results() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_oubstop"))
            .args(["verify", "--n", "100", "--paths", "5000"])
            .env("OUBSTOP_THREADS", threads)
            .output()
            .unwrap();
        stdout(&out)
    };
    assert_eq!(run("1"), run("3"));
    let bad = Command::new(env!("CARGO_BIN_EXE_oubstop"))
        .args(["solve", "--n", "20"])
        .env("OUBSTOP_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
