use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_catbond"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn catbond")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_summarizes_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ingest", s(&fixture("catalog.csv")), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("245 events"), "{out}");
    for label in ["AP", "CAA", "DEL"] {
        assert!(out.lines().any(|l| l.starts_with(label)), "{out}");
    }
    let csv = std::fs::read_to_string(dir.path().join("catalog_summary.csv")).unwrap();
    assert!(csv.starts_with("label,n,min,max,mean,median,skewness,kurtosis\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn ingest_errors_carry_exit_codes_and_locations() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["ingest", s(&empty)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty.csv"), "{}", stderr(&o));

    let neg = dir.path().join("neg.csv");
    std::fs::write(&neg, "event_id,date,AP\nE1,2010-01-01,4\nE2,2010-02-01,3\nE3,2010-03-01,-2\n").unwrap();
    let o = run(&["ingest", s(&neg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));

    let o = run(&["ingest", s(&dir.path().join("absent.csv"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn diagnose_threshold_writes_plot_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["diagnose-threshold", "-c", s(&fixture("pipeline.conf")), "-o", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    for label in ["AP", "CAA", "DEL"] {
        for stem in ["mean_excess", "stability_shape", "stability_scale"] {
            let text = std::fs::read_to_string(dir.path().join(format!("{stem}_{label}.csv"))).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next(), Some("threshold,estimate,ci_lo,ci_hi,n_exceed"));
            // 0.50:0.95:0.025 is 19 thresholds
            assert_eq!(lines.count(), 19, "{stem}_{label}");
        }
    }
}

#[test]
fn price_is_reproducible_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let conf = fixture("demo.conf");
    for d in [&a, &b] {
        let o = run(&["price", "-c", s(&conf), "-o", s(d.path()), "--set", "sim.n_reps=2000"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("runtime"));
    }
    for f in ["price.txt", "price.csv", "cashflows.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let report = std::fs::read_to_string(a.path().join("price.txt")).unwrap();
    // full configuration echo, with the override applied
    assert!(report.contains("sim.n_reps = 2000"));
    assert!(report.contains("copula.theta_inner = 176.34"));
    assert!(report.contains("dependence = nested frank"));
    assert!(!report.contains("runtime"));
}

#[test]
fn sweep_trigger_quantile_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "sweep",
        "-c",
        s(&fixture("demo.conf")),
        "-o",
        s(dir.path()),
        "--set",
        "sim.n_reps=2000",
        "--grid",
        "trigger-quantile=0.80:0.90:0.02",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("sweep_trigger_quantile.csv")).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect();
    let qs: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(qs, ["0.8", "0.82", "0.84", "0.86", "0.88", "0.9"]);
    let prices: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(prices.windows(2).all(|w| w[0] <= w[1]), "{prices:?}");
}

#[test]
fn sweep_subsets_and_maturities() {
    let dir = tempfile::tempdir().unwrap();
    let conf = fixture("demo.conf");
    let o = run(&[
        "sweep", "-c", s(&conf), "-o", s(dir.path()), "--set", "sim.n_reps=500",
        "--grid", "subsets=AP-CAA-DEL,AP-CAA,CAA-DEL",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("sweep_subsets.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.contains("CAA-DEL,") && text.contains("flat frank"), "{text}");

    let o = run(&[
        "sweep", "-c", s(&conf), "-o", s(dir.path()), "--set", "sim.n_reps=500", "--grid", "maturity=1,2,3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("sweep_maturity.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn missing_upstream_artifact_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["price", "-c", s(&fixture("pipeline.conf")), "-o", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("missing upstream artifact") && err.contains("fit-marginals"), "{err}");

    let o = run(&["fit-copula", "-c", s(&fixture("pipeline.conf")), "-o", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fit-marginals"));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let conf = fixture("demo.conf");
    for (set, key) in [
        ("bond.coupon_rate=-0.1", "`bond`"),
        ("marginals.AP.gp_scale=0", "`marginals.AP.gp_shape`"),
        ("sim.seeed=4", "`sim.seeed`"),
        ("copula.theta_outer=500", "`copula.theta_inner`"),
        ("sim.n_reps=ten", "`sim.n_reps`"),
    ] {
        let o = run(&["price", "-c", s(&conf), "-o", s(dir.path()), "--set", set]);
        assert_eq!(o.status.code(), Some(2), "{set}");
        assert!(stderr(&o).contains(key), "{set}: {}", stderr(&o));
    }
}

#[test]
fn calibration_pipeline_chains_through_params_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let conf = fixture("pipeline.conf");
    let mp = dir.path().join("marginals.params");
    let cp = dir.path().join("copula.params");
    let fp = dir.path().join("frequency.params");
    for args in [
        vec!["fit-marginals", "-c", s(&conf), "-o", out],
        vec!["fit-copula", "-c", s(&conf), "-p", s(&mp), "-o", out, "--set", "copula.fit_families=gumbel,frank"],
        vec!["fit-frequency", "-c", s(&conf), "-o", out],
        vec![
            "price", "-c", s(&conf), "-p", s(&mp), "-p", s(&cp), "-p", s(&fp), "-o", out, "--set", "sim.n_reps=1000",
        ],
    ] {
        let o = run(&args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    let copula = std::fs::read_to_string(dir.path().join("copula.csv")).unwrap();
    assert_eq!(copula.lines().count(), 3);
    let freq = std::fs::read_to_string(&fp).unwrap();
    assert!(freq.contains("frequency.intensities = "));
    let forecast = std::fs::read_to_string(dir.path().join("forecast.csv")).unwrap();
    assert!(forecast.starts_with("year,intensity\n2021,"));
    let price = std::fs::read_to_string(dir.path().join("price.csv")).unwrap();
    let p: f64 = price.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(p > 0.0 && p < 103.5);
}
