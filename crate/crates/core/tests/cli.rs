use std::process::Command;

use dichotomy::report::Report;

fn bin(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dichotomy"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn verify_ued_example_holds() {
    let (code, json) = bin(&["verify", "--gallery", "ued_example", "--cert", "UED:N=1,alpha=0.5", "--window", "0..50"]);
    assert_eq!(code, 0);
    let r = Report::from_json(&json).unwrap();
    assert_eq!(r.schema_version, 1);
    assert!(json.contains("\"verdict\": \"holds\""));
}

#[test]
fn violated_certificate_exits_one() {
    let (code, json) = bin(&["verify", "--gallery", "ued_example", "--cert", "UED:N=1,alpha=2", "--window", "0..10"]);
    assert_eq!(code, 1);
    assert!(json.contains("\"verdict\": \"violated\""));
}

#[test]
fn sed_claims_with_rounded_parameters() {
    let (code, json) = bin(&["gallery-claims", "--name", "sed_example", "--c1", "0.0183156", "--c2", "7.389056"]);
    assert_eq!(code, 0);
    let r = Report::from_json(&json).unwrap();
    let dichotomy::report::Outcome::GalleryClaims { outcomes } = r.outcome else {
        panic!("unexpected outcome");
    };
    assert_eq!(outcomes.len(), 2);
    assert!(outcomes.iter().all(|o| o.reproduced));
}

#[test]
fn reversed_window_is_a_config_error() {
    let (code, json) = bin(&["verify", "--gallery", "ued_example", "--cert", "UED:N=1,alpha=0.5", "--window", "5..3"]);
    assert_eq!(code, 2);
    assert!(json.contains("InvalidWindow"));
}

#[test]
fn bad_flags_and_values_exit_two() {
    assert_eq!(bin(&["verify", "--bogus"]).0, 2);
    assert_eq!(bin(&["verify", "--gallery", "nope", "--cert", "UED:N=1,alpha=1"]).0, 2);
    assert_eq!(bin(&["verify", "--gallery", "ued_example", "--cert", "UED:N=1"]).0, 2);
    assert_eq!(bin(&["gallery-claims", "--gallery", "ned_example", "--b", "1.5"]).0, 2);
}

#[test]
fn reports_are_deterministic() {
    let args = ["estimate", "--gallery", "sed_example", "--concept", "ED", "--window", "0..40"];
    let (c1, a) = bin(&args);
    let (c2, b) = bin(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    let r = Report::from_json(&a).unwrap();
    assert_eq!(r.to_json(), a);
}

#[test]
fn csv_series_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("w.csv");
    let (code, _) = bin(&[
        "falsify", "--gallery", "sed_example", "--concept", "UED", "--k", "0..4",
        "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("index,logmag,sign"));
    assert_eq!(text.lines().count(), 6);

    let csv = dir.path().join("p.csv");
    let (code, _) = bin(&[
        "estimate", "--gallery", "ned_example", "--concept", "NED", "--alpha", "0.6931471805599453",
        "--window", "0..30", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let logs: Vec<f64> = std::fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(logs.len(), 31);
    assert!(logs.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn config_file_and_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("a.cfg");
    std::fs::write(
        &cfg,
        "[system]\ngallery = sed_example\nc1 = e^-4\nc2 = e^2\n\n[analysis]\ncertificate = SED:N=e^1,alpha=2,beta=1\n\n[window]\nrange = 0..60\n",
    )
    .unwrap();
    let (code, json) = bin(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{json}");

    std::fs::write(&cfg, "[system]\ngallery = sed_example\n[window]\nrange = 0..x\n").unwrap();
    let (code, json) = bin(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(json.contains("at line 4"), "{json}");
}

#[test]
fn explicit_system_file() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("s.json");
    std::fs::write(&sys, r#"{"constant": [[0.5, 0.0], [0.0, 2.0]], "n_max": 40}"#).unwrap();
    let (code, json) = bin(&[
        "verify", "--system", sys.to_str().unwrap(), "--mask", "1,0",
        "--cert", "UED:N=1,alpha=0.6931471805599453", "--window", "0..30",
    ]);
    assert_eq!(code, 0, "{json}");
}
