use std::fs;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_semidet");
const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");

fn spec(name: &str) -> String {
    format!("{ROOT}/specs/{name}")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{text}"))
        .parse()
        .unwrap()
}

const SIM_ARGS: [&str; 16] = [
    "--n", "12", "--ry", "0.6", "--cry", "0.1", "--rz", "0.01", "--crz", "0.01", "--eps", "1.5", "--trials", "300",
    "--seed", "2",
];

fn simulate(extra: &[&str]) -> Output {
    let (ch, pol) = (spec("figure1_channel.toml"), spec("figure1_policy.toml"));
    let mut args = vec!["simulate", "--channel", &ch, "--policy", &pol];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn region_inner_reports_area_and_csv() {
    let o = run(&["region-inner", "--channel", &spec("figure1_channel.toml"), "--sweeps", "8", "--restarts", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((value(&out, "max_r_y") - 1.0).abs() < 1e-6);
    // a short search may fall below the exact 1 - Hb(0.2) but never above it
    let rz = value(&out, "max_r_z");
    assert!(rz > 0.2 && rz < 0.2780719 + 1e-6, "{rz}");
    assert!(out.contains("\nr_y,r_z\n"));
}

#[test]
fn region_outer_is_marked_as_an_estimate() {
    let o = run(&["region-outer", "--channel", &spec("general_channel.toml"), "--sweeps", "6", "--restarts", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("estimate = lower-bound-of-outer-bound\n"));
}

#[test]
fn region_outer_rejects_selection_mode() {
    let o = run(&["region-outer", "--channel", &spec("general_channel.toml"), "--selection-mode"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn region_causal_writes_csv_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let o = run(&["region-causal", "--channel", &spec("figure1_channel.toml"), "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "strategies"), 4.0);
    let csv = fs::read_to_string(path).unwrap();
    assert!(csv.starts_with("r_y,r_z\n"));
    assert!(!stdout(&o).contains("r_y,r_z"));
}

#[test]
fn parse_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = fs::read_to_string(spec("figure1_channel.toml")).unwrap().replace("p_s = [0.5, 0.5]", "p_s = [0.5, 0.6]");
    fs::write(&path, text).unwrap();
    let o = run(&["region-inner", "--channel", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p_s"), "{}", stderr(&o));
}

#[test]
fn missing_file_and_bad_flags_exit_2() {
    assert_eq!(run(&["region-inner", "--channel", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(run(&["region-inner"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-verb"]).status.code(), Some(2));
}

#[test]
fn figure1_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["example-figure1", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["noncausal.csv", "causal.csv", "figure1.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    assert!(value(&stdout(&o), "gap_at_half") > 0.02);
}

#[test]
fn figure1_causal_needs_fair_state() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(run(&["example-figure1", "--sigma", "0.3", "--out-dir", d]).status.code(), Some(2));
    let o = run(&["example-figure1", "--sigma", "0.3", "--no-causal", "--out-dir", d]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!dir.path().join("causal.csv").exists());
}

#[test]
fn simulate_is_deterministic_across_threads() {
    let mut a = vec!["--threads", "1"];
    a.extend_from_slice(&SIM_ARGS);
    let mut b = vec!["--threads", "3"];
    b.extend_from_slice(&SIM_ARGS);
    let (x, y) = (simulate(&a), simulate(&b));
    assert!(x.status.success(), "{}", stderr(&x));
    assert_eq!(x.stdout, y.stdout);
    assert_eq!(value(&stdout(&x), "trials"), 300.0);
}

#[test]
fn simulate_zero_trials_reports_zero_rates() {
    let mut args = SIM_ARGS.to_vec();
    let i = args.iter().position(|a| *a == "--trials").unwrap();
    args[i + 1] = "0";
    let o = simulate(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for key in ["encoder_fail_rate", "det_err_rate", "nondet_err_rate", "overall_err_rate"] {
        assert_eq!(value(&out, key), 0.0);
    }
}

#[test]
fn simulate_guard_exits_3() {
    let mut args = SIM_ARGS.to_vec();
    let i = args.iter().position(|a| *a == "--n").unwrap();
    args[i + 1] = "40";
    let o = simulate(&args);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("2^22"), "{}", stderr(&o));
}

#[test]
fn simulate_rejects_aux_policies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("aux.toml");
    let o = run(&[
        "reduce-support", "--channel", &spec("figure1_channel.toml"), "--random-u", "6", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ch = spec("figure1_channel.toml");
    let mut args = vec!["simulate", "--channel", &ch, "--policy", out.to_str().unwrap()];
    args.extend_from_slice(&SIM_ARGS);
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn reduce_support_shrinks_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("r1.toml");
    let o = run(&[
        "reduce-support", "--channel", &spec("figure1_channel.toml"), "--random-u", "12", "--seed", "4", "--out",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(value(&out, "support_before"), 12.0);
    assert!(value(&out, "support_after") <= 5.0);
    assert!(value(&out, "max_abs_change") < 1e-9);

    // reducing the reduced policy again changes nothing that matters
    let o = run(&["reduce-support", "--channel", &spec("figure1_channel.toml"), "--policy", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(value(&stdout(&o), "max_abs_change") < 1e-9);
}

#[test]
fn reduce_support_accepts_selection_policies() {
    let o = run(&[
        "reduce-support", "--channel", &spec("figure1_channel.toml"), "--policy", &spec("figure1_policy.toml"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "support_before"), 2.0);
}

#[test]
fn reduce_support_needs_a_policy_source() {
    assert_eq!(run(&["reduce-support", "--channel", &spec("figure1_channel.toml")]).status.code(), Some(2));
}
