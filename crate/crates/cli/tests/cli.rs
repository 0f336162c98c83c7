use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bayes_cox::simulate::{generate_dataset, ScenarioSpec, TrueBaseline};
use bayes_cox::{BaselineModel, WeibullBaseline};
use bayes_cox_cli::commands::{COMPARE_HEADER, CURVES_HEADER, METRICS_HEADER};
use bayes_cox_cli::io::{dataset_to_csv, parse_dataset, KeyValues};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bayescox"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bayescox")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fast_fit(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "fit",
        "--data",
        p(data),
        "--out",
        p(out),
        "--iter",
        "4000",
        "--burnin",
        "1000",
        "--thin",
        "2",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn simulate(dir: &Path, n: &str, replicas: &str, seed: &str) -> Output {
    run(&[
        "simulate",
        "--scenario",
        "1",
        "--n",
        n,
        "--replicas",
        replicas,
        "--seed",
        seed,
        "--out",
        p(dir),
    ])
}

#[test]
fn simulate_writes_replicas_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), "100", "2", "7");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["replica_001.csv", "replica_002.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().count(), 101);
        assert!(text.starts_with("time,status,group\n"));
    }
    assert!(!dir.path().join("replica_003.csv").exists());
    let manifest = KeyValues::read(&dir.path().join("manifest.txt")).unwrap();
    // (-ln 0.3 / 0.5)^(1 / 1.5)
    let cr = (-(0.3f64.ln()) / 0.5).powf(1.0 / 1.5);
    assert!((manifest.number("censoring_time").unwrap() - cr).abs() < 1e-12);
    assert_eq!(manifest.number("true.alpha").unwrap(), 1.5);
    assert_eq!(manifest.number("seed").unwrap(), 7.0);
}

#[test]
fn simulate_is_reproducible_and_round_trips() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(a.path(), "50", "3", "11");
    simulate(b.path(), "50", "3", "11");
    let spec = ScenarioSpec::reference(1, 50, 3, 11).unwrap();
    for r in 0..3 {
        let name = format!("replica_{:03}.csv", r + 1);
        let bytes = fs::read(a.path().join(&name)).unwrap();
        assert_eq!(bytes, fs::read(b.path().join(&name)).unwrap());
        let parsed = parse_dataset(std::str::from_utf8(&bytes).unwrap(), Path::new(&name)).unwrap();
        assert_eq!(parsed, generate_dataset(&spec, r).unwrap());
    }
    assert_eq!(
        fs::read(a.path().join("manifest.txt")).unwrap(),
        fs::read(b.path().join("manifest.txt")).unwrap()
    );
}

#[test]
fn fit_row_count_and_hazard_ratios() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "80", "1", "3");
    let data = dir.path().join("replica_001.csv");
    let out_dir = dir.path().join("fit");
    let out = run(&[
        "fit",
        "--data",
        p(&data),
        "--model",
        "ps",
        "--prior",
        "ps3",
        "--knots",
        "4",
        "--chains",
        "2",
        "--iter",
        "3001",
        "--burnin",
        "1000",
        "--thin",
        "3",
        "--seed",
        "5",
        "--out",
        p(&out_dir),
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
    let draws = fs::read_to_string(out_dir.join("draws.csv")).unwrap();
    // 2 chains x floor(2001 / 3)
    assert_eq!(draws.lines().count(), 1 + 2 * 667);
    let names: Vec<String> = (1..=7).map(|k| format!("gamma[{k}]")).collect();
    assert_eq!(
        draws.lines().next().unwrap(),
        format!("chain,iteration,{},beta[group],sigma,loglik", names.join(","))
    );
    let s = KeyValues::read(&out_dir.join("summary.txt")).unwrap();
    let (hr, lo, hi) = (
        s.number("hr[group]").unwrap(),
        s.number("hr_lower[group]").unwrap(),
        s.number("hr_upper[group]").unwrap(),
    );
    assert!(lo > 0.0 && lo < hr && hr < hi);
    for key in ["dic", "pd", "lpml", "mean[sigma]", "rhat[beta[group]]", "ess[gamma[1]]"] {
        s.number(key).unwrap();
    }
    assert_eq!(s.get("label").unwrap(), "ps3:4");
}

#[test]
fn weibull_fit_on_exponential_data() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ScenarioSpec {
        baseline: TrueBaseline::Model(BaselineModel::Weibull(WeibullBaseline::new(1.0, 0.8).unwrap())),
        beta: 0.5,
        censor_quantile: 0.3,
        n: 300,
        replicas: 1,
        seed: 19,
        censoring: true,
    };
    let data = dir.path().join("exp.csv");
    fs::write(&data, dataset_to_csv(&generate_dataset(&spec, 0).unwrap())).unwrap();
    let out_dir = dir.path().join("fit");
    let out = run(&[
        "fit",
        "--data",
        p(&data),
        "--model",
        "we",
        "--preset",
        "simulation",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = KeyValues::read(&out_dir.join("summary.txt")).unwrap();
    let alpha = s.number("mean[alpha]").unwrap();
    assert!((0.85..=1.15).contains(&alpha), "alpha {alpha}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = fast_fit(&missing, &dir.path().join("o"), &["--model", "we"]);
    assert_eq!(out.status.code(), Some(4));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "time,status\n1.0,2\n").unwrap();
    assert_eq!(
        fast_fit(&bad, &dir.path().join("o"), &["--model", "we"]).status.code(),
        Some(2)
    );

    let good = dir.path().join("good.csv");
    fs::write(&good, "time,status\n1.0,1\n2.0,0\n0.5,1\n").unwrap();
    assert_eq!(
        fast_fit(
            &good,
            &dir.path().join("o"),
            &["--model", "pc", "--prior", "ps2", "--knots", "2"]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        fast_fit(&good, &dir.path().join("o"), &["--model", "pc"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["simulate", "--scenario", "4", "--out", p(dir.path())])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["fit"]).status.code(), Some(2));

    // too few draws for the ESS threshold: outputs are still written
    let out_dir = dir.path().join("short");
    let out = run(&[
        "fit",
        "--data",
        p(&good),
        "--model",
        "we",
        "--iter",
        "60",
        "--burnin",
        "10",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out_dir.join("draws.csv").exists());
    let s = KeyValues::read(&out_dir.join("summary.txt")).unwrap();
    assert_eq!(s.get("converged").unwrap(), "false");
    assert!(!s.get("failed").unwrap().is_empty());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "60", "1", "2");
    let data = dir.path().join("replica_001.csv");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[model]\nfamily = \"pc\"\nprior = \"pc3\"\nknots = 3\n\n[mcmc]\npreset = \"simulation\"\niterations = 3000\nburn_in = 1000\nthin = 4\nseed = 9\n\n[prior]\neta = 0.5\n",
    )
    .unwrap();
    let out_dir = dir.path().join("fit");
    let out = run(&[
        "fit",
        "--data",
        p(&data),
        "--config",
        p(&cfg),
        "--thin",
        "5",
        "--out",
        p(&out_dir),
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
    let s = KeyValues::read(&out_dir.join("summary.txt")).unwrap();
    assert_eq!(s.get("label").unwrap(), "pc3:3");
    assert_eq!(s.number("thin").unwrap(), 5.0);
    assert_eq!(s.number("seed").unwrap(), 9.0);
    assert_eq!(s.number("draws").unwrap(), 3.0 * 400.0);

    fs::write(&cfg, "[model]\nfamly = \"pc\"\n").unwrap();
    let out = run(&["fit", "--data", p(&data), "--config", p(&cfg), "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
}

fn write_summary(path: &Path, label: &str, dic: f64, pd: f64, lpml: f64) {
    fs::write(
        path,
        format!("label = {label}\ndic = {dic}\npd = {pd}\nlpml = {lpml}\n"),
    )
    .unwrap();
}

#[test]
fn compare_rules() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a.txt"),
        dir.path().join("b.txt"),
        dir.path().join("c.txt"),
    );
    let table = dir.path().join("cmp.csv");

    write_summary(&a, "pc4:5", 100.0, 5.0, -50.0);
    write_summary(&b, "pc4:5", 100.0, 5.0, -50.0);
    let out = run(&["compare", p(&a), p(&b), "--out", p(&table)]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), COMPARE_HEADER);
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[4], "1");
        assert_eq!(f[5], "false");
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("equivalent"));

    write_summary(&a, "ps3:5", 1600.0, 8.0, -800.0);
    write_summary(&b, "we", 1604.0, 3.0, -811.261);
    write_summary(&c, "pc1:5", 1602.0, 6.0, -805.0);
    let out = run(&["compare", p(&a), p(&b), p(&c), "--out", p(&table)]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("DIC prefers ps3:5 over we"), "{stdout}");
    assert!(stdout.contains("DIC: ps3:5 and pc1:5 are equivalent"), "{stdout}");
    let text = fs::read_to_string(&table).unwrap();
    let we: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("we,"))
        .unwrap()
        .split(',')
        .collect();
    let factor: f64 = we[4].parse().unwrap();
    assert!((factor / 11.261f64.exp() - 1.0).abs() < 1e-9);
    assert!((factor - 7.78e4).abs() / 7.78e4 < 0.01);
    assert_eq!(we[5], "true");
    assert_eq!(we[6], "4");

    fs::write(&c, "label = x\ndic = 1\n").unwrap();
    assert_eq!(
        run(&["compare", p(&a), p(&c), "--out", p(&table)]).status.code(),
        Some(2)
    );
}

fn read_columns(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (
        header,
        lines.map(|l| l.split(',').map(str::to_string).collect()).collect(),
    )
}

fn fitted(dir: &Path, model: &[&str]) -> PathBuf {
    simulate(dir, "120", "1", "4");
    let out_dir = dir.join(model.join("_"));
    let mut args = vec!["--seed", "3"];
    args.extend_from_slice(model);
    let out = fast_fit(&dir.join("replica_001.csv"), &out_dir, &args);
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
    out_dir
}

#[test]
fn curves_contract() {
    let dir = tempfile::tempdir().unwrap();
    for model in [
        &["--model", "we"][..],
        &["--model", "ps", "--prior", "ps2", "--knots", "5"],
    ] {
        let fit_dir = fitted(dir.path(), model);
        let out = dir.path().join("curves.csv");
        let status = run(&[
            "curves",
            "--draws",
            p(&fit_dir.join("draws.csv")),
            "--step",
            "0.05",
            "--out",
            p(&out),
        ]);
        assert_eq!(
            status.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        let (header, rows) = read_columns(&out);
        assert_eq!(header, CURVES_HEADER);
        assert_eq!(rows[0][0], "0");
        assert_eq!(rows[0][4], "1");
        for col in 4..7 {
            let v: Vec<f64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] <= w[0]), "survival column {col}");
        }
        for r in &rows {
            let s: Vec<f64> = r[4..7].iter().map(|x| x.parse().unwrap()).collect();
            assert!(s[1] <= s[0] && s[0] <= s[2]);
        }
        if model[1] == "we" {
            let lh: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
            let up = lh.windows(2).all(|w| w[1] >= w[0]);
            let down = lh.windows(2).all(|w| w[1] <= w[0]);
            assert!(up || down);
        }
        let end: f64 = KeyValues::read(&fit_dir.join("summary.txt"))
            .unwrap()
            .number("t_max")
            .unwrap();
        let beyond = format!("{}", end * 1.5);
        let status = run(&[
            "curves",
            "--draws",
            p(&fit_dir.join("draws.csv")),
            "--t-max",
            &beyond,
            "--out",
            p(&out),
        ]);
        let expected = if model[1] == "we" { 0 } else { 2 };
        assert_eq!(status.status.code(), Some(expected));
    }
}

#[test]
fn replicate_contract() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str| {
        let out = dir.path().join(name);
        let status = run(&[
            "replicate",
            "--scenario",
            "2",
            "--models",
            "we,pc4:5",
            "--n",
            "60",
            "--replicas",
            "2",
            "--seed",
            "8",
            "--iter",
            "2000",
            "--burnin",
            "500",
            "--thin",
            "5",
            "--out",
            p(&out),
        ]);
        assert_eq!(
            status.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        fs::read(out).unwrap()
    };
    let a = go("m1.csv");
    assert_eq!(a, go("m2.csv"));
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), METRICS_HEADER);
    let we: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&we[..3], &["we", "60", "NA"]);
    let pc: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&pc[..3], &["pc4", "60", "5"]);
    assert_eq!(pc.len(), 9);
}
