use std::path::Path;
use std::process::{Command, Output};

fn timebin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timebin"))
        .args(args)
        .env_remove("TIMEBIN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn parse_json(output: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(output)).unwrap()
}

#[test]
fn rates_grid_shape_and_root_bracketing() {
    let out = timebin(&["rates", "--n", "1,3", "--lmax", "300", "--step", "1"]);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "L_km,n,C,Q,R_raw,QBER,R_net");
    assert_eq!(lines.len(), 1 + 2 * 301);
    assert!(text.ends_with('\n'));
    assert!(!text.contains('\r'));

    // default params bracket the n=1 zero crossing between 105 and 107 km
    let r_net_at = |l: &str| -> f64 {
        lines
            .iter()
            .find(|row| row.starts_with(&format!("{l}.000000,1,")))
            .unwrap()
            .rsplit(',')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(r_net_at("105") > 0.0);
    assert!(r_net_at("107") < 0.0);
}

#[test]
fn rates_without_dark_counts_stay_positive() {
    let out = timebin(&["rates", "--dark", "0", "--n", "1,3", "--lmax", "200", "--step", "10"]);
    for line in stdout(&out).lines().skip(1) {
        let r_net: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(r_net > 0.0, "line {line}");
    }
}

#[test]
fn max_distance_defaults_match_the_105_km_limit() {
    let value = parse_json(&timebin(&["max-distance"]));
    assert_eq!(value["status"], "ok");
    let l_max = value["l_max_km"].as_f64().unwrap();
    assert!((l_max - 105.8).abs() <= 0.5, "l_max = {l_max}");

    let n3 = parse_json(&timebin(&["max-distance", "--n", "3"]));
    assert!(n3["l_max_km"].as_f64().unwrap() > l_max);

    let unlimited = parse_json(&timebin(&["max-distance", "--dark", "0"]));
    assert_eq!(unlimited["status"], "no_finite_limit");
}

#[test]
fn optimal_n_cases() {
    let at_zero = parse_json(&timebin(&["optimal-n", "--length", "0"]));
    assert_eq!(at_zero["n_opt"], 1);

    let dead = parse_json(&timebin(&["optimal-n", "--length", "2000"]));
    assert_eq!(dead["status"], "link_dead");
    assert!(timebin(&["optimal-n", "--length", "2000"]).status.success());
}

#[test]
fn teleport_report_values() {
    let ideal = parse_json(&timebin(&["teleport"]));
    assert_eq!(ideal["f_mean"].as_f64().unwrap(), 1.0);

    let fitted = parse_json(&timebin(&["teleport", "--fit-pole", "0.825", "--fit-eq", "0.805"]));
    let f_mean = fitted["f_mean"].as_f64().unwrap();
    assert!((f_mean - 0.8117).abs() < 5e-4, "f_mean = {f_mean}");

    let pole = parse_json(&timebin(&["teleport", "--f-acc", "0.35", "--a0", "1"]));
    assert!((pole["f_input"].as_f64().unwrap() - 0.825).abs() < 1e-9);
}

#[test]
fn teleport_scan_covers_one_period() {
    let out = timebin(&["teleport", "--scan", "--scan-points", "32", "--xi", "0.9", "--f-acc", "0.2"]);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "beta_rad,rate");
    let rates: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 32);
    let v = 0.8 * 0.9;
    let max = rates.iter().cloned().fold(f64::MIN, f64::max);
    let min = rates.iter().cloned().fold(f64::MAX, f64::min);
    assert!((max - (1.0 + v) / 2.0).abs() < 1e-6);
    assert!((min - (1.0 - v) / 2.0).abs() < 1e-6);
}

#[test]
fn teleport_rejects_bad_knobs() {
    let out = timebin(&["teleport", "--xi", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mc_is_deterministic_and_validates_n() {
    let args = ["mc", "--n", "3", "--length", "100", "--trials", "1000000", "--seed", "7"];
    let a = timebin(&args);
    let b = timebin(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let value: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(value["trials"], 1_000_000);
    assert!(value["z_c"].is_number());

    let bad = timebin(&["mc", "--n", "2"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn mc_seed_comes_from_the_environment() {
    let args = ["mc", "--n", "1", "--length", "50", "--trials", "200000"];
    let seeded = Command::new(env!("CARGO_BIN_EXE_timebin"))
        .args(args)
        .env("TIMEBIN_SEED", "41")
        .output()
        .unwrap();
    let value: serde_json::Value = serde_json::from_slice(&seeded.stdout).unwrap();
    assert_eq!(value["seed"], 41);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = std::env::temp_dir().join("timebin-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("link.conf");
    std::fs::write(&config, "dark = 0\nn = 3 # comment\n").unwrap();

    let from_config = parse_json(&timebin(&[
        "max-distance",
        "--config",
        config.to_str().unwrap(),
    ]));
    assert_eq!(from_config["status"], "no_finite_limit");
    assert_eq!(from_config["n"], 3);

    // explicit flag overrides the config value
    let overridden = parse_json(&timebin(&[
        "max-distance",
        "--config",
        config.to_str().unwrap(),
        "--dark",
        "1e-4",
        "--n",
        "1",
    ]));
    assert_eq!(overridden["status"], "ok");
    assert_eq!(overridden["n"], 1);
}

#[test]
fn output_flag_writes_a_file() {
    let dir = std::env::temp_dir().join("timebin-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = timebin(&["teleport", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(Path::new(&path).exists());
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(value["visibility"].as_f64().unwrap(), 1.0);
}

#[test]
fn rates_json_format() {
    let out = timebin(&["rates", "--format", "json", "--n", "1", "--lmax", "2", "--step", "1"]);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
    assert!(rows[0]["R_net"].is_number());
}
