use std::path::Path;
use std::process::{Command, Output};

use crossguide::output::sign_changes;

fn run(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossguide"))
        .args(args)
        .env("CROSSGUIDE_CACHE", cache)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field_of(line: &str, key: &str) -> String {
    line.split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {line}"))
        .to_string()
}

/// Node values of an exported `.field` file keyed by `(kx, ky)`.
fn read_field(path: &Path) -> (i64, i64, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut kx = 0;
    let mut ky = 0;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(r) = line.strip_prefix("kx ") {
            kx = r.split_whitespace().nth(1).unwrap().parse().unwrap();
        } else if let Some(r) = line.strip_prefix("ky ") {
            ky = r.split_whitespace().nth(1).unwrap().parse().unwrap();
        } else if line.starts_with(|c: char| c == '-' || c.is_ascii_digit()) {
            rows.push(line.split_whitespace().map(|v| v.parse().unwrap()).collect());
        }
    }
    (kx, ky, rows)
}

#[test]
fn solve_symmetric_cross() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--class", "ee", "--beta", "1.0", "--set", "I"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    let e: f64 = field_of(&line, "E_ratio").parse().unwrap();
    assert!((e - 0.662960).abs() < 5e-6, "{line}");
    assert_eq!(field_of(&line, "bound"), "true");
}

#[test]
fn unbound_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--class", "oe", "--beta", "2.0", "--require-bound"]);
    assert_eq!(o.status.code(), Some(5));
    let line = stdout(&o);
    assert_eq!(field_of(&line, "bound"), "false");
    assert_eq!(field_of(&line, "ell_x"), "null");
    assert_eq!(field_of(&line, "ell_y"), "null");

    let prefix = dir.path().join("oe1");
    let o = run(dir.path(), &["export-field", "--class", "oe", "--beta", "1", "--set", "I", "--out"]);
    assert_eq!(o.status.code(), Some(2), "missing --out value is a usage error");
    let o = run(dir.path(), &["export-field", "--class", "oe", "--beta", "1", "--set", "I", "--out", prefix.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
    assert!(!dir.path().join("oe1.field").exists());
}

#[test]
fn small_beta_is_rotated() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--beta", "0.5", "--class", "eo", "--l", "6", "--n", "96"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("rotated"), "{}", stderr(&o));
    let line = stdout(&o);
    assert_eq!(field_of(&line, "class"), "oe");
    assert_eq!(field_of(&line, "beta"), "2");
}

#[test]
fn usage_grid_and_solver_errors() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(dir.path(), args).status.code();
    assert_eq!(code(&["solve", "--class", "ee", "--beta", "1", "--l", "20", "--n", "602"]), Some(3));
    assert_eq!(code(&["solve", "--class", "xx", "--beta", "1"]), Some(2));
    assert_eq!(code(&["solve", "--class", "ee"]), Some(2));
    assert_eq!(code(&["-o", "colour=red", "predict"]), Some(2));
    assert_eq!(code(&["sweep", "--class", "ee", "--betas", "2,1"]), Some(2));
    assert_eq!(
        code(&["--no-cache", "solve", "--class", "ee", "--beta", "1", "--set", "I", "-o", "max_passes=1", "-o", "krylov_dim=3"]),
        Some(4)
    );
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "class = ee\nbeta = 1.2\nl = 6\nn = 96\n").unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "solve", "--beta", "1.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert_eq!(field_of(&line, "beta"), "1.5");
    assert_eq!(field_of(&line, "N"), "96");
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "-o", "n=120", "solve"]);
    assert_eq!(field_of(&stdout(&o), "N"), "120");
}

#[test]
fn sweep_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let args = ["sweep", "--class", "ee", "--betas", "1:1.4:0.2", "--l", "6", "--n", "96"];
    let first = run(&cache, &args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stderr(&first).contains("0 from cache"));
    let second = run(&cache, &args);
    assert!(stderr(&second).contains("3 from cache"), "{}", stderr(&second));
    assert_eq!(first.stdout, second.stdout);
    let mut fresh = vec!["--no-cache"];
    fresh.extend_from_slice(&args);
    assert_eq!(run(&cache, &fresh).stdout, first.stdout);

    let csv = stdout(&first);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("beta,set,E_ratio,ell_x,ell_y"));
    assert_eq!(lines.next().unwrap().split(',').take(2).collect::<Vec<_>>(), ["1.00000", "custom"]);

    // A corrupted entry is an integrity failure, not a silent recompute.
    let entry = std::fs::read_dir(&cache)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().contains("_b1.2"))
        .unwrap();
    let text = std::fs::read_to_string(&entry).unwrap();
    let at = text.find("\"e_ratio\": ").unwrap() + "\"e_ratio\": ".len();
    std::fs::write(&entry, format!("{}0.5,{}", &text[..at], text[at..].split_once(',').unwrap().1)).unwrap();
    let o = run(&cache, &["solve", "--class", "ee", "--beta", "1.2", "--l", "6", "--n", "96"]);
    assert_eq!(o.status.code(), Some(7), "{}", stderr(&o));
}

#[test]
fn even_field_export_has_one_central_peak() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("out/ee2");
    let o = run(dir.path(), &["export-field", "--class", "ee", "--beta", "2", "--l", "10", "--n", "200", "--out", prefix.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header = std::fs::read_to_string(dir.path().join("out/ee2.field")).unwrap();
    for key in ["N_x 200", "N_y 200", "L_x 10.0", "L_y 10.0", "beta 2.0", "class ee", "domain full"] {
        assert!(header.contains(key), "{key}");
    }
    let (kx, ky, rows) = read_field(&dir.path().join("out/ee2.field"));
    let max = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(rows.iter().flatten().all(|&v| v >= 0.0));
    assert_eq!(rows[ky as usize][kx as usize], max);

    let cut = std::fs::read_to_string(dir.path().join("out/ee2.cut")).unwrap();
    let first_block: Vec<(f64, f64)> = cut
        .lines()
        .skip(1)
        .take_while(|l| !l.is_empty())
        .map(|l| {
            let c: Vec<f64> = l.split_whitespace().map(|v| v.parse().unwrap()).collect();
            assert_eq!(c.len(), 3);
            (c[0], c[2])
        })
        .collect();
    assert!(first_block.iter().any(|p| p.0 == 5.0), "original x coordinates");
    assert_eq!(sign_changes(first_block.iter().map(|p| p.1), 0.0), 0);
    let right: Vec<f64> = first_block.iter().filter(|p| p.0 >= 0.0).map(|p| p.1).collect();
    assert!(right.windows(2).all(|w| w[1] <= w[0]), "decays away from the junction");

    let csv = std::fs::read_to_string(dir.path().join("out/ee2.csv")).unwrap();
    assert!(csv.starts_with("x,y,value\n"));
    assert!(csv.contains("\n0.0,2.0,"), "y is in original units");
}

#[test]
fn odd_odd_field_is_antisymmetric() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("oo");
    let o = run(dir.path(), &["export-field", "--class", "oo", "--beta", "1.1", "--l", "10", "--n", "200", "--out", prefix.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (kx, ky, rows) = read_field(&dir.path().join("oo.field"));
    let (w, h) = (2 * kx as usize + 1, 2 * ky as usize + 1);
    assert_eq!((rows.len(), rows[0].len()), (h, w));
    let max = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max > 0.0);
    for j in 0..h {
        for i in 0..w {
            assert!((rows[j][i] + rows[j][w - 1 - i]).abs() <= 1e-12 * max);
            assert!((rows[j][i] + rows[h - 1 - j][i]).abs() <= 1e-12 * max);
        }
    }
}

#[test]
fn predict_and_critical() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["predict"]);
    assert_eq!(
        stdout(&o),
        "class,symmetric_cross,thin_arm_limit\nee,bound,bound\noe,unbound,unbound\neo,unbound,bound\noo,bound,unbound\n"
    );
    let json = dir.path().join("crit.json");
    let o = run(dir.path(), &["critical", "--class", "oo", "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("pole-fit: beta*=1.12"), "{text}");
    assert!(text.contains("threshold-crossing: beta*=1.12"), "{text}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(v["pole_fit"]["beta_star"].as_f64().unwrap() > 1.1);
    assert_eq!(run(dir.path(), &["critical", "--class", "ee", "--betas", "1,1.1", "--set", "I"]).status.code(), Some(1));
}

#[test]
fn extrapolation_matches_the_continuum_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["extrapolate", "--class", "ee", "--beta", "1", "--Ns", "80:880:40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let last = out.lines().last().unwrap();
    let a1: f64 = field_of(last, "a1").parse().unwrap();
    assert!((a1 - 0.65955).abs() / 0.65955 < 0.005, "{last}");
    assert_eq!(out.lines().filter(|l| l.starts_with("N=")).count(), 21);
}
