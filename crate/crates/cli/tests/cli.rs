use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const P2: &str = r#"
[model]
d = 1.0
birth.kind = "ricker"
birth.p = 2.0
delay.kind = "saturating_rational"
delay.m = 0.2
delay.M = 0.7
"#;

fn sdwave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdwave")).current_dir(dir).args(args).output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn kpp_speed_is_two_and_json_parses() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "kpp.toml", "[model]\nd = 1.0\nbirth = { kind = \"ricker\", p = 2.0 }\ndelay = { kind = \"constant\", m = 0.0 }\n");
    let out = sdwave(tmp.path(), &["speed", "--config", "kpp.toml", "--json", "--c", "2.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!((v["results"]["c_star"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    let roots = &v["results"]["roots"][0];
    assert!((roots["lambda1"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((roots["lambda2"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn config_and_model_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "nod.toml", "[model]\nbirth.kind = \"ricker\"\nbirth.p = 2.0\ndelay.kind = \"constant\"\ndelay.m = 0.0\n");
    let out = sdwave(tmp.path(), &["speed", "--config", "nod.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    write(tmp.path(), "unk.toml", &format!("{P2}\n[profile]\nspeed = 2.0\n"));
    assert_eq!(sdwave(tmp.path(), &["speed", "--config", "unk.toml"]).status.code(), Some(1));
    write(tmp.path(), "bad.toml", &P2.replace("d = 1.0", "d = 3.0"));
    assert_eq!(sdwave(tmp.path(), &["speed", "--config", "bad.toml"]).status.code(), Some(2));
    write(tmp.path(), "iters.toml", &format!("{P2}\n[profile]\nmax_iters = 3\n"));
    assert_eq!(sdwave(tmp.path(), &["profile", "--config", "iters.toml", "--c", "2.5"]).status.code(), Some(4));
}

#[test]
fn profile_then_verify_and_injected_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "p2.toml", P2);
    let out = sdwave(dir, &["profile", "--config", "p2.toml", "--c", "2.5", "--out", "prof.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.join("prof.json")).unwrap()).unwrap();
    for key in ["c", "beta", "lambda1", "lambda2", "residual_sup", "iterations", "sandwich_ok", "lipschitz_ok"] {
        assert!(side.get(key).is_some(), "{key}");
    }
    assert_eq!(side["c"].as_f64(), Some(2.5));
    let ok = sdwave(dir, &["verify", "--config", "p2.toml", "--profile", "prof.csv"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));

    let text = fs::read_to_string(dir.join("prof.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let i = lines.len() / 2;
    let (x, v) = lines[i].split_once(',').unwrap();
    let bumped_xi: f64 = x.parse().unwrap();
    lines[i] = format!("{x},{:?}", v.parse::<f64>().unwrap() + 0.1);
    write(dir, "bad.csv", &(lines.join("\n") + "\n"));
    fs::copy(dir.join("prof.json"), dir.join("bad.json")).unwrap();
    let bad = sdwave(dir, &["verify", "--config", "p2.toml", "--profile", "bad.csv", "--json"]);
    assert_eq!(bad.status.code(), Some(3));
    let v = json_of(&bad);
    assert_eq!(v["checks"]["residual"], Value::Bool(false));
    let at = v["results"]["residual_argmax_xi"].as_f64().unwrap();
    assert!((at - bumped_xi).abs() < 0.05, "{at} vs {bumped_xi}");
}

#[test]
fn simulate_then_frontspeed_matches_critical_speed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "p2.toml", P2);
    let c_star = json_of(&sdwave(dir, &["speed", "--config", "p2.toml", "--json"]))["results"]["c_star"].as_f64().unwrap();
    let sim = sdwave(dir, &["simulate", "--config", "p2.toml", "--out-dir", "run"]);
    assert_eq!(sim.status.code(), Some(0), "{}", String::from_utf8_lossy(&sim.stderr));
    assert!(dir.join("run/run.json").exists());
    assert!(dir.join("run/snapshot_t80.0000.csv").exists());
    let header = fs::read_to_string(dir.join("run/snapshot_t0.0000.csv")).unwrap();
    assert!(header.starts_with("x,u\n"));
    let fs_out = sdwave(dir, &["frontspeed", "--run", "run", "--json"]);
    assert_eq!(fs_out.status.code(), Some(0));
    let v = json_of(&fs_out);
    let speed = v["results"]["speed"].as_f64().unwrap();
    assert!((speed / c_star - 1.0).abs() < 0.05, "{speed} vs {c_star}");
    assert!(v["results"]["stderr"].as_f64().unwrap() > 0.0);
    assert_eq!(v["results"]["samples"].as_u64(), Some(41));
}

#[test]
fn compare_reaches_plateau_on_cone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
[comparison]
D1 = 1.0
D2 = 2.0
D3 = 1.0
m = 0.0

[pde]
x_min = -300.0
x_max = 300.0
nx = 3001
t_end = 120.0
initial = { kind = "bump", center = 0.0, half_width = 2.0, height = 0.5 }
"#;
    write(tmp.path(), "cmp.toml", cfg);
    let out = sdwave(tmp.path(), &["compare", "--config", "cmp.toml", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["checks"]["band"], Value::Bool(true));
    assert_eq!(v["checks"]["plateau_on_cone"], Value::Bool(true));
    assert!((v["results"]["c_comp"].as_f64().unwrap() - 2.0).abs() < 1e-8);
}

#[test]
fn envelope_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "p3.toml", &P2.replace("p = 2.0", "p = 3.0"));
    let out = sdwave(tmp.path(), &["envelope", "--config", "p3.toml", "--out", "env", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    let (k, kcal) = (v["results"]["k"].as_f64().unwrap(), v["results"]["kcal"].as_f64().unwrap());
    assert!(k < 3f64.ln() && kcal > 3f64.ln());
    let b = fs::read_to_string(tmp.path().join("env/envelope_b.csv")).unwrap();
    assert!(b.starts_with("u,b,b_upper,b_lower\n"));
    let phi = fs::read_to_string(tmp.path().join("env/envelope_phi.csv")).unwrap();
    assert!(phi.starts_with("xi,phi_upper,phi_lower\n"));
}

const SWEEP: &str = r#"
seed = 7

[sweep]
p = [1.5, 2.0, 2.5]
m = [0.0, 0.25, 0.5]

[pde]
x_min = -30.0
x_max = 170.0
nx = 1000
t_end = 40.0
"#;

#[test]
fn sweep_grid_is_ordered_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "sw.toml", SWEEP);
    let run = |name: &str| {
        let out = sdwave(dir, &["sweep", "--config", "sw.toml", "--out", name, "--threads", "2"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(dir.join(name)).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let rows: Vec<Vec<f64>> = a.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(a.lines().next(), Some("p,m,M,c_star,measured_speed,residual_sup"));
    assert_eq!(rows.len(), 9);
    for block in rows.chunks(3) {
        assert!(block.windows(2).all(|w| w[1][3] <= w[0][3]));
        for r in block {
            // short runs: the slow approach of pulled fronts keeps them below c*
            assert!(r[4] < r[3] && r[4] > 0.85 * r[3]);
            assert!(r[5] < 1e-3);
        }
    }
    write(dir, "empty.toml", "[sweep]\np = []\nm = [0.0]\n");
    assert_eq!(sdwave(dir, &["sweep", "--config", "empty.toml"]).status.code(), Some(1));
}
