use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG: &str = r#"
name = "small"
seed = 3
rounds = 200
nonlinearity = { type = "log_quantizer", param = 0.0009765625 }

[problem]
kind = "academic"
n = 6

[graph]
p = 0.6
failure_rate = 0.3
window = 3

[delay]
tau_bar = 2

[protocol]
eta_bound_fraction = 0.9
mu = 0.5

[[variant]]
label = "fast"

[[variant]]
label = "plain"
mu = 0.0
"#;

fn sched(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sched"));
    c.args(args).env_remove("SCHED_SEED");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn kv<'a>(text: &'a str, key: &str) -> Vec<&'a str> {
    text.lines()
        .filter_map(|l| l.split_once(" = ").or_else(|| l.split_once('=')))
        .filter(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
        .collect()
}

#[test]
fn run_writes_traces_summaries_and_plots() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CONFIG);
    let out = tmp.path().join("out");
    let o = sched(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("label=fast"));
    for label in ["fast", "plain"] {
        let d = out.join(label);
        for f in ["trace.csv", "summary.txt", "residual.svg", "states.svg", "momenta.svg"] {
            assert!(d.join(f).is_file(), "{label}/{f}");
        }
        let csv = fs::read_to_string(d.join("trace.csv")).unwrap();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("k,F,residual,feas_gap,edges,msgs,x_0,"));
        assert!(header.ends_with(",y_5"));
        assert_eq!(csv.lines().count(), 202);
        let first = lines.next().unwrap();
        let mantissa = first.split(',').nth(1).unwrap().split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);

        let summary = fs::read_to_string(d.join("summary.txt")).unwrap();
        for key in ["final_residual", "rounds_to_tolerance", "max_feas_gap", "eta_bar"] {
            assert_eq!(kv(&summary, key).len(), 1, "{key}");
        }
        assert_eq!(kv(&summary, "invariants"), ["ok"]);
    }
    for f in ["summary.txt", "config.toml", "graph.edges", "problem.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn reruns_are_byte_identical_and_seed_overrides_apply() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CONFIG);
    let dir = |n: &str| tmp.path().join(n).to_str().unwrap().to_owned();
    let read = |n: &str| fs::read(tmp.path().join(n).join("fast/trace.csv")).unwrap();
    assert_eq!(code(&sched(&["run", "--config", &cfg, "--out", &dir("a")], &[])), 0);
    assert_eq!(code(&sched(&["run", "--config", &cfg, "--out", &dir("b")], &[])), 0);
    assert_eq!(read("a"), read("b"));

    assert_eq!(code(&sched(&["run", "--config", &cfg, "--out", &dir("c")], &[("SCHED_SEED", "77")])), 0);
    assert_eq!(code(&sched(&["run", "--config", &cfg, "--out", &dir("d"), "--seed", "77"], &[])), 0);
    assert_ne!(read("a"), read("c"));
    assert_eq!(read("c"), read("d"));
    let echoed = fs::read_to_string(tmp.path().join("c/config.toml")).unwrap();
    assert!(echoed.contains("seed = 77"));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CONFIG);
    let a = tmp.path().join("a");
    assert_eq!(code(&sched(&["run", "--config", &cfg, "--out", a.to_str().unwrap()], &[])), 0);
    let echoed = a.join("config.toml");
    let b = tmp.path().join("b");
    let o = sched(&["run", "--config", echoed.to_str().unwrap(), "--out", b.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(a.join("plain/trace.csv")).unwrap(), fs::read(b.join("plain/trace.csv")).unwrap());
}

#[test]
fn json_config_matches_toml() {
    let tmp = TempDir::new().unwrap();
    let toml_path = write_config(tmp.path(), "c.toml", CONFIG);
    let cfg = sched::config::ExperimentConfig::from_toml(CONFIG).unwrap();
    let json_path = write_config(tmp.path(), "c.json", &serde_json::to_string_pretty(&cfg).unwrap());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&sched(&["run", "--config", &toml_path, "--out", a.to_str().unwrap()], &[])), 0);
    let o = sched(&["run", "--config", &json_path, "--out", b.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(a.join("fast/trace.csv")).unwrap(), fs::read(b.join("fast/trace.csv")).unwrap());
}

#[test]
fn edge_list_graphs_are_used_as_given() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("ring.edges"), "n 4\n0 1\n1 2 1\n2 3 1\n3 0 1\n").unwrap();
    let cfg = CONFIG
        .replace("p = 0.6", "edges = \"ring.edges\"")
        .replace("n = 6", "n = 4")
        .replace("failure_rate = 0.3", "failure_rate = 0.0");
    let cfg = write_config(tmp.path(), "c.toml", &cfg);
    let out = tmp.path().join("out");
    let o = sched(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("graph.edges")).unwrap(), "n 4\n0 1 1\n0 3 1\n1 2 1\n2 3 1\n");
    // a ring on 4 nodes: λ₂ = 2, λ_n = 4
    let summary = fs::read_to_string(out.join("fast/summary.txt")).unwrap();
    let eig = |k: &str| kv(&summary, k)[0].parse::<f64>().unwrap();
    assert!((eig("lambda2") - 2.0).abs() < 1e-12);
    assert!((eig("lambda_n") - 4.0).abs() < 1e-12);
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let bad_field = write_config(tmp.path(), "a.toml", &CONFIG.replace("mu = 0.5", "mu = 0.5\nmomentum = 1"));
    let o = sched(&["run", "--config", &bad_field], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("momentum"), "{}", stderr(&o));

    let bad_value = write_config(tmp.path(), "b.toml", &CONFIG.replace("mu = 0.5", "mu = 1.5"));
    let o = sched(&["run", "--config", &bad_value], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("mu"), "{}", stderr(&o));

    assert_eq!(code(&sched(&["run", "--config", "/nonexistent/c.toml"], &[])), 1);
    assert_eq!(code(&sched(&["preset", "fig9"], &[])), 1);
    assert_eq!(code(&sched(&["frobnicate"], &[])), 1);
    assert_eq!(code(&sched(&["run", "--config", &bad_field, "--seed", "abc"], &[])), 1);

    fs::write(tmp.path().join("bad.edges"), "n 3\n0 1 1\n1 7 1\n").unwrap();
    let cfg = CONFIG.replace("p = 0.6", "edges = \"bad.edges\"").replace("n = 6", "n = 3");
    let o = sched(&["run", "--config", &write_config(tmp.path(), "e.toml", &cfg)], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(":3:"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CONFIG);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("out");
    let o = sched(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn bound_and_oracle_print_key_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CONFIG);
    let o = sched(&["bound", "--config", &cfg], &[]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    let field = |line: &str, key: &str| -> f64 {
        line.split(' ')
            .find_map(|t| t.strip_prefix(&format!("{key}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    let line = text.lines().next().unwrap();
    assert_eq!(field(line, "eta_tau_bar") * 3.0, field(line, "eta_bar"));

    let o = sched(&["oracle", "--config", &cfg], &[]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let xs: f64 = (0..6).map(|i| kv(&text, &format!("x_star_{i}"))[0].parse::<f64>().unwrap()).sum();
    assert!((xs - 300.0).abs() < 1e-9);
}

#[test]
fn plot_command_renders_and_rejects_bad_input() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &CONFIG.replace("[delay]", "[output]\nplots = false\n\n[delay]"));
    let out = tmp.path().join("out");
    assert_eq!(code(&sched(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[])), 0);
    assert!(!out.join("fast/states.svg").exists());
    let trace = out.join("fast/trace.csv");
    let svg = tmp.path().join("r.svg");
    let o = sched(
        &["plot", "--trace", trace.to_str().unwrap(), "--series", "residual", "--log", "--out", svg.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let o = sched(&["plot", "--trace", trace.to_str().unwrap(), "--series", "states"], &[]);
    assert_eq!(code(&o), 0);
    assert!(out.join("fast/trace.states.svg").is_file());

    assert_eq!(code(&sched(&["plot", "--trace", trace.to_str().unwrap(), "--series", "nope"], &[])), 1);
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "k,F,residual,feas_gap,edges,msgs,x_0,y_0\n").unwrap();
    assert_eq!(code(&sched(&["plot", "--trace", empty.to_str().unwrap(), "--series", "residual"], &[])), 1);
}

#[test]
fn preset_dump_is_a_loadable_config() {
    let tmp = TempDir::new().unwrap();
    for name in sched::presets::NAMES {
        let o = sched(&["preset", name, "--dump", "--seed", "5"], &[]);
        assert_eq!(code(&o), 0);
        let cfg = sched::config::ExperimentConfig::from_toml(&stdout(&o)).unwrap();
        assert_eq!(cfg.seed, 5);
        let mut expected = sched::presets::preset(name).unwrap();
        expected.seed = 5;
        assert_eq!(cfg, expected);
    }
    // shortened fig7 end to end: over-bound delayed variants stop early
    let mut cfg = sched::presets::preset("fig7").unwrap();
    cfg.rounds = 300;
    cfg.output.plots = false;
    let path = write_config(tmp.path(), "fig7.toml", &cfg.to_toml());
    let out = tmp.path().join("out");
    let o = sched(&["run", "--config", &path, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("not below the bound"));
    let s = fs::read_to_string(out.join("tau_4/summary.txt")).unwrap();
    assert!(kv(&s, "status")[0].starts_with("diverged"));
    assert_eq!(kv(&s, "invariants"), ["ok"]);
}
