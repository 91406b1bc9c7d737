//! Exit-code contract and artifact layout of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_watchtower-sim"))
}

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "watchtower-cli-{}-{}-{tag}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_temp_scenario(tag: &str, contents: &str) -> PathBuf {
    let path = temp_dir(tag).join("scenario.scn");
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn simulate_writes_all_artifacts_and_exits_zero() {
    let out = temp_dir("simulate");
    let status = bin()
        .args(["simulate", "--scenario"])
        .arg(scenario_dir().join("faulty_asserter.scn"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for artifact in ["events.log", "summary.txt", "summary.json", "manifest.txt"] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("command = simulate"));
    assert!(manifest.contains("seed = 8080"));
    assert!(manifest.contains("scenario_sha256 = "));
}

#[test]
fn corrupt_scenario_exits_two_and_reports_every_error() {
    let text = std::fs::read_to_string(scenario_dir().join("baseline.scn"))
        .unwrap()
        .replace("w0 = 0.1\n", "w0 = 0.09\n")
        .replace("theta = 0.9", "theta = 1.5");
    let path = write_temp_scenario("corrupt", &text);
    let out = temp_dir("corrupt-out");
    let output = bin()
        .args(["simulate", "--scenario"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("stakes: sum"), "stderr: {stderr}");
    assert!(stderr.contains("theta"), "stderr: {stderr}");
}

#[test]
fn missing_scenario_exits_three() {
    let out = temp_dir("missing-out");
    let output = bin()
        .args(["simulate", "--scenario", "/nonexistent/nowhere.scn", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn scenario_search_path_env_var_is_honored() {
    let out = temp_dir("envvar-out");
    let output = bin()
        .args(["simulate", "--scenario", "faulty_asserter.scn", "--out"])
        .arg(&out)
        .env("WATCHTOWER_SCENARIO_PATH", scenario_dir())
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn oversized_enumeration_exits_four() {
    // 21 watchtowers exceeds the exhaustive limit for the base game
    let n = 21;
    let mut text = String::from(
        "[params]\nn = 21\ntotal_stake = 2100210\ntheta = 0.9\nalpha_0 = 0.047619\n\
         r_b = 25\nr_c = 1.01\nc_t = 1\nc_v = 100000\nt1_ticks = 10\ntc_ticks = 10\ntlc_ticks = 5\n\n[stakes]\n",
    );
    for i in 0..n {
        let stake = if i == 0 { "0.047620" } else { "0.047619" };
        text.push_str(&format!("w{i} = {stake}\n"));
    }
    text.push_str("\n[strategies]\n");
    for i in 0..n {
        text.push_str(&format!("w{i} = diligent\n"));
    }
    text.push_str("\n[simulation]\nasserter_fault_rate = 0\nepochs = 1\nseed = 1\n");
    let path = write_temp_scenario("big", &text);
    let out = temp_dir("big-out");
    let output = bin()
        .args(["analyze", "--scenario"])
        .arg(&path)
        .args(["--game", "pod", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4), "{}", String::from_utf8_lossy(&output.stderr));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("limit"), "stderr: {stderr}");
}

#[test]
fn params_rejects_closed_interval_theta() {
    let output = bin()
        .args(["params", "--n", "10", "--theta", "1", "--dispute-cost", "100000"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    let output = bin()
        .args(["params", "--n", "10", "--theta", "0.9", "--dispute-cost", "100000"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
}

#[test]
fn analyze_writes_artifacts() {
    let out = temp_dir("analyze-out");
    let output = bin()
        .args(["analyze", "--scenario"])
        .arg(scenario_dir().join("baseline.scn"))
        .args(["--game", "pod", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join("analysis.txt").exists());
    assert!(out.join("analysis.json").exists());
    assert!(out.join("manifest.txt").exists());
    let text = std::fs::read_to_string(out.join("analysis.txt")).unwrap();
    assert!(text.contains("diligent"), "analysis: {text}");
}

fn file_hash(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).unwrap();
    hex::encode(Sha256::digest(&bytes))
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let scenario = scenario_dir().join("whistleblower.scn");
    let out1 = temp_dir("det1");
    let out2 = temp_dir("det2");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["simulate", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        file_hash(&out1.join("events.log")),
        file_hash(&out2.join("events.log"))
    );
}
