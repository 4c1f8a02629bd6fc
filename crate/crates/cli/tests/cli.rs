use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_minimax-lab"));
    c.env_remove("MINIMAX_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_of(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).expect("valid JSON");
    assert_eq!(v["schemaVersion"], 1);
    v
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn classify_saddle_is_strict_nash() {
    let v = json_of(&["classify", "--fn", "quadratic_saddle", "--point", "0,0"]);
    assert_eq!(v["classification"]["nashVerdict"], "StrictNash");
    assert_eq!(v["classification"]["minimaxVerdict"], "StrictLocalMinimax");
}

#[test]
fn classify_coupled_quadratic_reports_ladder() {
    let v = json_of(&["classify", "--fn", "coupled_quadratic", "--point", "0,0", "--gamma-ladder", "10,100,1000"]);
    assert_eq!(v["classification"]["minimaxVerdict"], "StrictLocalMinimax");
    assert_eq!(v["classification"]["nashVerdict"], "NotNash");
    let table = v["infinityGda"]["table"].as_array().unwrap();
    assert_eq!(table.len(), 3);
    assert_eq!(v["infinityGda"]["membership"], "Inside");
}

#[test]
fn classify_accepts_expressions() {
    let v = json_of(&["classify", "--expr", "x*x - y*y", "--point", "0,0"]);
    assert_eq!(v["classification"]["nashVerdict"], "StrictNash");
}

#[test]
fn unknown_function_exits_one() {
    let o = run(&["classify", "--fn", "nope", "--point", "0,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown catalog function `nope`"));
}

#[test]
fn expression_parse_errors_exit_one_with_column() {
    let o = run(&["classify", "--expr", "x*x - ", "--point", "0,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("column 7"), "{}", stderr(&o));
}

#[test]
fn wrong_point_length_is_a_usage_error() {
    let o = run(&["classify", "--fn", "quadratic_saddle", "--point", "0,0,0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analysis_errors_exit_two() {
    // The oracle needs a bounded y-box.
    let o = run(&["oracle", "--fn", "bilinear"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unbounded"));
}

#[test]
fn simulate_saddle_reaches_origin() {
    let v = json_of(&["simulate", "--fn", "quadratic_saddle", "--init", "0.5,0.3", "--eta", "0.1", "--gamma", "1"]);
    let t = &v["trajectory"];
    assert_eq!(t["limitClass"], "FixedPoint");
    let p = &t["limit"]["FixedPoint"];
    assert!(p["x"][0].as_f64().unwrap().abs() < 1e-6);
    assert!(p["y"][0].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn bilinear_flow_cycles() {
    let v = json_of(&["simulate", "--fn", "bilinear", "--flow", "--init", "1,0", "--horizon", "10"]);
    assert_eq!(v["trajectory"]["limitClass"], "Cycle");
    assert_eq!(v["trajectory"]["mode"], "Flow");
}

#[test]
fn basin_tally_is_thread_independent() {
    let args = ["simulate", "--basins", "--fn", "xy_cos", "--region", "-1,1,-6.283,6.283", "--n", "200", "--seed", "7"];
    let one = bin().args(["--threads", "1"]).args(args).output().unwrap();
    let many = bin().env("MINIMAX_LAB_THREADS", "4").args(args).output().unwrap();
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
    let v: Value = serde_json::from_slice(&one.stdout).unwrap();
    let t = &v["tally"];
    let total: u64 = ["fixedPoint", "cycle", "diverged", "exhausted"]
        .iter()
        .map(|k| t[k].as_u64().unwrap())
        .sum();
    assert_eq!(total, 200);
}

#[test]
fn invalid_thread_env_is_a_usage_error() {
    let o = bin().env("MINIMAX_LAB_THREADS", "many").arg("catalog").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_reports_rate_summary() {
    let v = json_of(&["oracle", "--fn", "strong_concave_y", "--T", "400", "--eps", "1e-6", "--seeds", "20"]);
    let rows = v["rate"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["t"], 400);
    assert_eq!(rows[0]["boundHolds"], true);
    assert_eq!(v["params"]["t"], 400);
    assert_eq!(v["seeds"], 20);
}

#[test]
fn global_vs_local_finds_nonstationary_global_minimax() {
    let v = json_of(&["verify", "global-vs-local", "--fn", "xy_cos"]);
    let n = v["globalPoints"].as_u64().unwrap();
    assert!(n > 0);
    assert_eq!(v["nonstationary"].as_u64().unwrap(), n);
    assert_eq!(v["consistentWithLocalMinimax"], 0);
}

#[test]
fn certify_accepts_coupled_quadratic_origin() {
    let v = json_of(&["verify", "certify", "--fn", "coupled_quadratic", "--point", "0,0", "--box", "-1,1,-1,1"]);
    assert_eq!(v["verdict"], "ConsistentWithLocalMinimax");
}

#[test]
fn mixed_two_atoms_beat_pure_value() {
    let v = json_of(&["mixed", "--fn", "sin_sum", "--N", "2", "--resolution", "101"]);
    assert_eq!(v["minimax"]["strategy"]["atoms"].as_array().unwrap().len(), 2);
    assert_eq!(v["minimax"]["heuristic"], false);
    assert!(v["minimax"]["value"].as_f64().unwrap() <= 0.8);
    assert!(v["gap"]["upperPlayerGap"].is_number());
}

#[test]
fn catalog_lists_every_entry() {
    let v = json_of(&["catalog"]);
    let names: Vec<&str> = v["entries"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    for n in ["quadratic_saddle", "coupled_quadratic", "xy_cos", "sin_sum", "bilinear", "strong_concave_y"] {
        assert!(names.contains(&n), "{n}");
    }
}

fn read_dir_sorted(d: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(d)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn emitted_config_reproduces_outputs_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let args = ["simulate", "--fn", "quadratic_saddle", "--init", "0.5,0.3", "--eta", "0.05"];
    let o = bin().arg("--out").arg(&first).args(args).output().unwrap();
    assert!(o.status.success());
    let emitted = bin().arg("--out").arg(&second).args(args).arg("--emit-config").output().unwrap();
    assert!(emitted.status.success());
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, &emitted.stdout).unwrap();
    let o = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let a = read_dir_sorted(&first);
    assert_eq!(a.len(), 2);
    assert_eq!(a, read_dir_sorted(&second));
    // Emitting again from the config gives the same text.
    let again = bin().args(["simulate", "--emit-config", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(again.stdout, emitted.stdout);
}

#[test]
fn every_subcommand_emits_config() {
    for args in [
        &["classify", "--fn", "quadratic_saddle", "--point", "0,0"][..],
        &["oracle", "--fn", "strong_concave_y"],
        &["verify", "scan-nash", "--fn", "sin_sum"],
        &["mixed", "--fn", "sin_sum"],
        &["catalog"],
    ] {
        let o = bin().args(args).arg("--emit-config").output().unwrap();
        assert!(o.status.success(), "{args:?}");
        assert!(String::from_utf8(o.stdout).unwrap().starts_with("# minimax-lab "));
    }
}

#[test]
fn flags_override_config_in_any_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "fn = quadratic_saddle\ninit = 0.5,0.3\neta = 0.1\n").unwrap();
    let c = cfg.to_str().unwrap();
    for args in [
        &["simulate", "--config", c, "--eta", "0.2"][..],
        &["simulate", "--eta", "0.2", "--config", c],
        &["--config", c, "simulate", "--eta=0.2"],
    ] {
        let v = json_of(args);
        assert_eq!(v["trajectory"]["stepSize"], 0.2, "{args:?}");
    }
    let v = json_of(&["simulate", "--config", c]);
    assert_eq!(v["trajectory"]["stepSize"], 0.1);
}

fn config_error(text: &str) -> String {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, text).unwrap();
    let o = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1), "{text:?}");
    stderr(&o)
}

#[test]
fn config_errors_carry_line_and_column() {
    let e = config_error("fn = quadratic_saddle\n  bogus\n");
    assert!(e.contains("config line 2, column 3"), "{e}");
    let e = config_error("fn = quadratic_saddle\ninit = 0.5,0.3\neta = abc\n");
    assert!(e.contains("config line 3, column 7"), "{e}");
    let e = config_error("# header\nfn = quadratic_saddle\nwat = 3\n");
    assert!(e.contains("config line 3, column 1") && e.contains("unknown key `wat`"), "{e}");
    let e = config_error("fn = quadratic_saddle\ninit =\n");
    assert!(e.contains("config line 2"), "{e}");
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let o = run(&["simulate", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn csv_outputs_have_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("--out")
        .arg(tmp.path())
        .args(["oracle", "--fn", "strong_concave_y", "--T", "50"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("oracle.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x1,phi,grad_x_norm"));
    assert_eq!(csv.lines().count(), 52);
    assert!(tmp.path().join("oracle.json").exists());
}
