use std::fs;
use std::path::Path;

use serde_json::Value;
use tqe_sample::cli::{main_with_args, EXIT_DOMAIN, EXIT_IO, EXIT_USAGE};
use tqe_sample::stats::{fpc_interval, ConfidenceLevel, Proportion};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn tqe(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with_args(std::iter::once("tqe").chain(args.iter().copied()), &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn json(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.push("--json");
    let run = tqe(&full);
    assert_eq!(run.code, 0, "{}", run.stderr);
    serde_json::from_str(&run.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sample_size_report() {
    let report = json(&["sample-size", "--p", "0.07", "--delta", "0.02"]);
    assert_eq!(report["recommended"], 626);
    assert!((report["exact"].as_f64().unwrap() - 625.2).abs() < 0.1);
    assert_eq!(report["volume"]["words"], 10642.0);
    assert!((report["volume"]["pages"].as_f64().unwrap() - 41.7).abs() < 0.05);
    assert_eq!(report["manifest"]["command"], "sample-size");
    assert_eq!(report["manifest"]["parameters"]["delta"], 0.02);

    let text = tqe(&["sample-size", "--p", "0.07", "--delta", "0.02"]);
    assert!(text.stdout.contains("626 sentences ≈ 10642 words ≈ 41.73 pages"), "{}", text.stdout);
    assert!(text.stdout.contains("625.2"));

    assert_eq!(json(&["sample-size", "--p", "0.07", "--delta", "0.01"])["recommended"], 2501);

    let degenerate = tqe(&["sample-size", "--p", "0", "--delta", "0.01", "--json"]);
    assert_eq!(degenerate.code, 0);
    assert!(degenerate.stderr.contains("degenerate"));
    let report: Value = serde_json::from_str(&degenerate.stdout).unwrap();
    assert_eq!(report["recommended"], 0);
    assert_eq!(report["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn interval_report() {
    let wald = json(&["interval", "--p", "0.07", "--n", "150"]);
    assert!((wald["interval"]["lower"].as_f64().unwrap() - 0.029).abs() < 1e-3);
    assert_eq!(wald["population"], Value::Null);
    let fpc = json(&["interval", "--p", "0.085", "--n", "23.5", "--population", "58.82"]);
    assert!((fpc["interval"]["delta"].as_f64().unwrap() - 0.088).abs() < 1e-3);
    assert_eq!(fpc["interval"]["clamped"], true);
    let text = tqe(&["interval", "--p", "0.07", "--n", "15"]);
    assert!(text.stdout.contains("clamped"));
    assert!(text.stdout.contains("unreliable"));
}

#[test]
fn scorecard_report() {
    let card = json(&["scorecard", "--job-words", "1000", "--sample-words", "400", "--errors", "2"]);
    assert!((card["density"].as_f64().unwrap() - 0.085).abs() < 5e-4);
    assert!((card["interval"]["delta"].as_f64().unwrap() - 0.088).abs() < 1e-3);
    assert_eq!(card["interval"]["lower"], 0.0);
    assert!((card["interval"]["upper"].as_f64().unwrap() - 0.173).abs() < 2e-3);
    assert_eq!(card["interval"]["normal_approx_unreliable"], true);

    let census = json(&["scorecard", "--job-words", "1000", "--sample-words", "1000", "--errors", "0"]);
    assert_eq!(census["interval"]["delta"], 0.0);

    // Cross-check against the library with the same unit conversion.
    let bigger = json(&["scorecard", "--job-words", "2000", "--sample-words", "400", "--errors", "4"]);
    let (n, big_n): (f64, f64) = (400.0 / 17.0, 2000.0 / 17.0);
    assert!((n - 23.5).abs() < 0.05 && (big_n - 117.6).abs() < 0.05);
    let expected = fpc_interval(Proportion::new(4.0 / n).unwrap(), n, big_n, ConfidenceLevel::default()).unwrap();
    assert_eq!(bigger["interval"]["delta"].as_f64().unwrap(), expected.delta);

    let too_big = tqe(&["scorecard", "--job-words", "100", "--sample-words", "400", "--errors", "1"]);
    assert_eq!(too_big.code, EXIT_DOMAIN);
    assert!(too_big.stderr.contains("larger than"));
}

#[test]
fn text_and_json_agree() {
    let report = json(&["scorecard", "--job-words", "1000", "--sample-words", "400", "--errors", "2"]);
    let text = tqe(&["scorecard", "--job-words", "1000", "--sample-words", "400", "--errors", "2"]).stdout;
    let delta = report["interval"]["delta"].as_f64().unwrap();
    assert!(text.contains(&tqe_sample::output::sig(delta, 4)), "{text}");
}

#[test]
fn usage_and_domain_errors_have_distinct_codes() {
    assert_eq!(tqe(&["sample-size", "--p", "0.07"]).code, EXIT_USAGE);
    assert_eq!(tqe(&["sample-size", "--p", "abc", "--delta", "0.1"]).code, EXIT_USAGE);
    assert_eq!(tqe(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(tqe(&["sample-size", "--p", "1.5", "--delta", "0.1"]).code, EXIT_DOMAIN);
    assert_eq!(tqe(&["sample-size", "--p", "0.1", "--delta", "0"]).code, EXIT_DOMAIN);
    assert_eq!(tqe(&["interval", "--p", "0.1", "--n", "60", "--population", "50"]).code, EXIT_DOMAIN);
    assert_eq!(tqe(&["sample-size", "--level", "1.2", "--p", "0.1", "--delta", "0.1"]).code, EXIT_DOMAIN);
    let missing = tqe(&["sample-size", "--config", "/nonexistent/cfg.json", "--p", "0.1", "--delta", "0.1"]);
    assert_eq!(missing.code, EXIT_IO);
    assert_eq!(tqe(&["--help"]).code, 0);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"p": 0.07, "delta": 0.02, "level": 0.99, "words_per_sentence": 20}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let report = json(&["sample-size", "--config", cfg]);
    assert!((report["z"].as_f64().unwrap() - 2.5758).abs() < 1e-3);
    assert_eq!(report["volume"]["words"].as_f64().unwrap(), report["recommended"].as_f64().unwrap() * 20.0);
    let overridden = json(&["sample-size", "--config", cfg, "--level", "0.95"]);
    assert_eq!(overridden["recommended"], 626);

    fs::write(dir.path().join("bad.json"), "[1, 2]").unwrap();
    let bad = tqe(&["sample-size", "--config", dir.path().join("bad.json").to_str().unwrap()]);
    assert_eq!(bad.code, EXIT_USAGE);
}

#[test]
fn out_flag_saves_the_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let run = tqe(&["sample-size", "--p", "0.07", "--delta", "0.02", "--out", path.to_str().unwrap()]);
    assert_eq!(run.code, 0);
    assert_eq!(read_json(&path)["recommended"], 626);

    let unwritable = tqe(&["sample-size", "--p", "0.07", "--delta", "0.02", "--out", "/nonexistent/dir/r.json"]);
    assert_eq!(unwritable.code, EXIT_IO);
}

#[test]
fn simulate_writes_histograms_fits_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let run = tqe(&[
        "simulate", "--n-population", "15000", "--density", "0.07", "--sample-sizes", "100,1000",
        "--replicates", "2000", "--seed", "7", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    for file in ["histogram_n100.csv", "histogram_n1000.csv", "normal_fit.json", "sweep.csv", "simulate.json"] {
        assert!(out.join(file).exists(), "{file}");
    }
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("sample_size,mc_delta,analytic_delta,lower,upper\n"));
    assert_eq!(sweep.lines().count(), 3);

    let fits = read_json(&out.join("normal_fit.json"));
    let sigma = |i: usize| fits["fits"][i]["densities"]["sigma"].as_f64().unwrap();
    let ratio = sigma(0) / sigma(1);
    let root_ten = 10f64.sqrt();
    assert!(ratio > root_ten * 0.7 && ratio < root_ten * 1.3, "{ratio}");

    let histogram = fs::read_to_string(out.join("histogram_n100.csv")).unwrap();
    let total: usize = histogram.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 2000);
}

#[test]
fn simulate_zero_density_and_bad_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    let run = tqe(&[
        "simulate", "--n-population", "1000", "--density", "0", "--sample-sizes", "10,100",
        "--replicates", "50", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = read_json(&out.join("simulate.json"));
    for row in report["sweep"]["rows"].as_array().unwrap() {
        assert_eq!(row["mc_delta"], 0.0);
        assert_eq!(row["analytic_delta"], 0.0);
    }
    assert_eq!(fs::read_to_string(out.join("histogram_n10.csv")).unwrap(), "count_value,frequency\n0,50\n");

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let run = tqe(&["simulate", "--sample-sizes", "10", "--replicates", "5", "--out", blocker.join("x").to_str().unwrap()]);
    assert_eq!(run.code, EXIT_IO);

    let run = tqe(&["simulate", "--n-population", "50", "--sample-sizes", "10,100", "--out", out.to_str().unwrap()]);
    assert_eq!(run.code, EXIT_DOMAIN);
}

#[test]
fn simulate_replays_an_exported_population() {
    let dir = tempfile::tempdir().unwrap();
    let pop = dir.path().join("pop.bin");
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    let run = tqe(&[
        "simulate", "--n-population", "3000", "--category", "accuracy=0.05", "--category", "style=0.1",
        "--sample-sizes", "50,300", "--replicates", "200", "--seed", "3",
        "--export-population", pop.to_str().unwrap(), "--out", first.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let run = tqe(&[
        "simulate", "--population-file", pop.to_str().unwrap(), "--sample-sizes", "50,300",
        "--replicates", "200", "--seed", "3", "--out", second.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(fs::read(first.join("sweep.csv")).unwrap(), fs::read(second.join("sweep.csv")).unwrap());
    let report = read_json(&second.join("simulate.json"));
    assert_eq!(report["population"]["categories"].as_array().unwrap().len(), 2);

    fs::write(&pop, b"garbage").unwrap();
    let run = tqe(&["simulate", "--population-file", pop.to_str().unwrap(), "--sample-sizes", "5", "--out", second.to_str().unwrap()]);
    assert_eq!(run.code, EXIT_DOMAIN);
}

#[test]
fn manifest_replay_reproduces_payload() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let run = tqe(&[
        "simulate", "--n-population", "2000", "--density", "0.2", "--sample-sizes", "20:100",
        "--replicates", "100", "--seed", "11", "--out", first.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let second = dir.path().join("second");
    let config = first.join("simulate.json");
    let run = tqe(&["simulate", "--config", config.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let strip = |mut v: Value| {
        v["manifest"].as_object_mut().unwrap().remove("timestamp");
        v
    };
    assert_eq!(strip(read_json(&config)), strip(read_json(&second.join("simulate.json"))));
}

#[test]
fn ped_scores_pairs_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pairs.tsv");
    fs::write(&input, "a b c\ta x c\n\tignored\nthe cat\tthe cat\n").unwrap();
    let out = dir.path().join("ped");
    let run = tqe(&[
        "ped", "--input", input.to_str().unwrap(), "--sweep", "10,40", "--replicates", "200",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stderr.contains(":2: empty candidate skipped"), "{}", run.stderr);
    let segments = fs::read_to_string(out.join("segments.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = segments.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][..3], ["1", "3", "2"]);
    assert!((rows[0][3].parse::<f64>().unwrap() - 0.6667).abs() < 1e-4);
    assert!((rows[0][4].parse::<f64>().unwrap() - (1.0 - (2.0f64 / 3.0).tanh())).abs() < 1e-12);
    assert_eq!(rows[1][3..], ["0", "1"]);
    let report = read_json(&out.join("ped.json"));
    assert_eq!(report["input"]["skipped_empty_lines"], serde_json::json!([2]));
    assert_eq!(report["model"]["kind"], "empirical");
}

#[test]
fn ped_identical_pairs_have_zero_width() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("same.tsv");
    fs::write(&input, "one two\tone two\nthree\tthree\n").unwrap();
    let out = dir.path().join("ped");
    let run = tqe(&["ped", "--input", input.to_str().unwrap(), "--sweep", "5,10", "--replicates", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = read_json(&out.join("ped.json"));
    assert_eq!(report["input"]["mean_ped"], 0.0);
    assert_eq!(report["input"]["mean_pedn"], 1.0);
    for row in report["sweep"]["rows"].as_array().unwrap() {
        assert_eq!(row["mc_delta"], 0.0);
    }
    assert_eq!(report["min_sample_size"], 5);
}

#[test]
fn ped_parametric_sweep_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ped");
    let run = tqe(&[
        "ped", "--model", "zero-inflated", "--zero-mass", "0.35", "--tail-rate", "3.0", "--sweep", "25:2000:25",
        "--replicates", "400", "--target-delta", "0.04", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = read_json(&out.join("ped.json"));
    let rows = report["sweep"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 80);
    let delta_at = |n: u64| rows.iter().find(|r| r["sample_size"] == n).unwrap()["mc_delta"].as_f64().unwrap();
    assert!(delta_at(100) > 2.0 * delta_at(800));
    let min_n = report["min_sample_size"].as_u64().unwrap();
    assert!(delta_at(min_n) <= 0.04);
    assert_eq!(report["min_sample_words"].as_f64().unwrap(), min_n as f64 * 17.0);

    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "a\tb\nonly one column\n").unwrap();
    let run = tqe(&["ped", "--input", bad.to_str().unwrap(), "--format", "pairs", "--out", out.to_str().unwrap()]);
    assert_eq!(run.code, EXIT_DOMAIN);
    assert!(run.stderr.contains("bad.tsv:2:"), "{}", run.stderr);

    assert_eq!(tqe(&["ped", "--model", "empirical", "--out", out.to_str().unwrap()]).code, EXIT_USAGE);
    assert_eq!(tqe(&["ped", "--c", "0", "--out", out.to_str().unwrap()]).code, EXIT_DOMAIN);
    assert_eq!(tqe(&["ped", "--input", "/nonexistent.tsv", "--out", out.to_str().unwrap()]).code, EXIT_IO);

    let values = dir.path().join("values.txt");
    fs::write(&values, "0.1\n0.4\n2.5\n").unwrap();
    let run = tqe(&["ped", "--input", values.to_str().unwrap(), "--sweep", "10", "--replicates", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let segments = fs::read_to_string(out.join("segments.tsv")).unwrap();
    assert!(segments.lines().nth(1).unwrap().starts_with("1\t\t\t0.1\t"));
}
