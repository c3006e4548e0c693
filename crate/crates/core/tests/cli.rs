use std::path::Path;
use std::process::{Command, Output};

fn levlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levlab")).args(args).env_remove("LEVLAB_JOBS").output().expect("binary runs")
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn passing_run_exits_zero_with_report_on_stdout() {
    let out = levlab(&["verify-point", "--model", "baby", "--coupling=-1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["rows"][0]["bound_states"], 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1/1 checks passed"));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for (p, jobs) in [(&a, "1"), (&b, "3")] {
        let out = levlab(&["ab-tables", "--format", "csv", "--jobs", jobs, "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1 + 35);
}

#[test]
fn wrong_expected_value_exits_one() {
    let out = levlab(&["verify-ab", "--pair", "U=-1", "--expect-total", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL verify-ab U=-1"));
}

#[test]
fn invalid_parameters_exit_two() {
    assert_eq!(levlab(&["verify-point", "--model", "nonsense"]).status.code(), Some(2));
    assert_eq!(levlab(&["verify-ab", "--alpha", "1.5"]).status.code(), Some(2));
    assert_eq!(levlab(&["chern", "--n-rho", "2"]).status.code(), Some(2));
    assert_eq!(levlab(&["schrodinger-3d", "--p", "1"]).status.code(), Some(2));
    assert_eq!(levlab(&["phi-ab", "--a", "1"]).status.code(), Some(2));
    assert_eq!(levlab(&[]).status.code(), Some(2));
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("r.json");
    std::fs::write(
        &cfg,
        format!(
            "command = \"schrodinger-1d\"\nout = {:?}\n[params]\npotential = \"square_well\"\ndepth = 5.0\nwidth = 2.0\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = levlab(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = report(&out);
    let lev = &v["rows"][1];
    assert_eq!(lev["class"], "Generic");
    assert_eq!(lev["bound_states"], 2);

    std::fs::write(&cfg, "command = \"schrodinger-1d\"\n[params]\nwidht = 2.0\n").unwrap();
    assert_eq!(levlab(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn plot_file_tracks_accumulated_winding() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("phases.csv");
    let o = levlab(&["verify-point", "--model", "baby", "--coupling=-1", "--plot", plot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(&plot).unwrap();
    let turns: Vec<f64> = rdr.records().map(|r| r.unwrap()[5].parse().unwrap()).collect();
    assert!(turns.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!((turns.last().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn plot_without_data_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("p.csv");
    let o = levlab(&["phi-ab", "--a", "2", "--b", "1", "--plot", plot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
