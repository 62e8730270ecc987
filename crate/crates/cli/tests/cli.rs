use std::path::Path;
use std::process::{Command, Output};

fn densecode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densecode"))
        .args(args)
        .env_remove("DENSECODE_THREADS")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let out = densecode(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["sweep-me", "sweep-sep", "sweep-multistage", "montecarlo", "qkd"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn invalid_flag_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("me.csv");
    let res = densecode(&["sweep-me", "--grid", "ten", "--out", path_str(&out)]);
    assert!(!res.status.success());
    assert!(!out.exists());
    let res = densecode(&["sweep-me", "--grid", "1", "--out", path_str(&out)]);
    assert!(!res.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"squared":[0.5,0.6]}"#).unwrap();
    let out = dir.path().join("mc.csv");
    let res = densecode(&["montecarlo", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
    assert!(!out.exists());
}

#[test]
fn montecarlo_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"squared":[0.2,0.3,0.5],"d2":4,"strategy":{"kind":"multistage","stages":[{},{}],"final":"me"}}"#,
    )
    .unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let res = densecode(&[
            "montecarlo", "--config", path_str(&cfg), "--trials", "5000", "--seed", "42", "--threads", threads,
            "--out", path_str(&out),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        (std::fs::read(&out).unwrap(), std::fs::read(out.with_extension("json")).unwrap())
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "3");
    assert_eq!(a, b);
    let csv = String::from_utf8(a.0).unwrap();
    assert!(csv.starts_with("cell,count,empirical,analytic,three_sigma\n"));
    let json: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(json["n_trials"], 5000);
    assert_eq!(json["k_errors"], 0);
}

#[test]
fn qkd_without_eve_has_no_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"eve":{"kind":"absent"}}"#).unwrap();
    let out = dir.path().join("qkd.csv");
    let res = densecode(&["qkd", "--config", path_str(&cfg), "--trials", "20000", "--out", path_str(&out)]);
    assert!(res.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "sifted_error_rate").unwrap();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1);
    assert!(rows.iter().all(|r| r.split(',').nth(col) == Some("0")));
}

#[test]
fn sweeps_have_expected_headers_and_endpoints() {
    let out = densecode(&["sweep-multistage", "--grid", "6"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with(
        "a0,a1,I_MC,I_MC_ME,I_MC_MC,I_suc1,I_suc2,I_ME,P_s1,P_overall,stage2_degenerate\n"
    ));
    assert_eq!(csv.lines().count(), 1 + 7 * 8 / 2);

    let out = densecode(&["sweep-sep", "--xi-steps", "10"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().last(), Some("1,0.4,1.4,2,1.53100441"));

    let flagged = densecode(&["sweep-me", "--grid", "3"]);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"grid":40}"#).unwrap();
    let overridden = densecode(&["sweep-me", "--config", path_str(&cfg), "--grid", "3"]);
    assert_eq!(flagged.stdout, overridden.stdout);
}
