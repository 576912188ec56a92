//! End-to-end runs of the command-line tool on a small simulated panel.

use std::path::Path;
use std::process::Command;

fn cmsnb(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_cmsnb")).args(args).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        out.status.success(),
        "cmsnb {args:?} failed:\n{stdout}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn simulate_fit_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    cmsnb(&["simulate", "--design", "coupled", "--areas", "4", "--weeks", "30", "--seed", "4", "--out", p(&sim)]);
    for f in ["counts.csv", "covariates.csv", "neighbors.csv", "truth.csv", "truth_params.csv"] {
        assert!(sim.join(f).exists(), "{f} missing");
    }
    let counts = sim.join("counts.csv");
    let (cov, nbrs) = (sim.join("covariates.csv"), sim.join("neighbors.csv"));
    let model = [
        "--counts",
        p(&counts),
        "--covariates",
        p(&cov),
        "--neighbors",
        p(&nbrs),
        "--set",
        "emission_covariates=beds,mobility",
        "--set",
        "spatial=23,33",
        "--set",
        "parallel=false",
    ];
    let with = |extra: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        v.extend(model.iter().map(|s| s.to_string()));
        v
    };
    let run = |v: Vec<String>| cmsnb(&v.iter().map(String::as_str).collect::<Vec<_>>());

    let fit = dir.path().join("fit");
    let text = run(with(&["fit", "--iters", "200", "--burnin", "50", "--chains", "2", "--seed", "3", "--out", p(&fit)]));
    assert!(text.contains("2 chains x 200 iterations"), "{text}");
    let draws = fit.join("draws");

    let diag = dir.path().join("diag.csv");
    cmsnb(&["diagnose", "--draws", p(&draws), "--out", p(&diag)]);
    assert!(csv_rows(&diag).len() > 10);

    let states = dir.path().join("states.csv");
    run(with(&["states", "--draws", p(&draws), "--out", p(&states)]));
    assert_eq!(csv_rows(&states).len(), 1 + 4 * 30);

    // a 200-iteration run cannot pass the gate
    let mut strict = with(&["states", "--draws", p(&draws), "--out", p(&states)]);
    strict.push("--require-gate".into());
    let out = Command::new(env!("CARGO_BIN_EXE_cmsnb")).args(&strict).output().unwrap();
    assert!(!out.status.success());

    let waic = dir.path().join("waic.csv");
    let text = run(with(&["waic", "--draws", p(&draws), "--out", p(&waic), "--label", "coupled"]));
    assert!(text.starts_with("waic: "), "{text}");
    assert!(csv_rows(&waic)[1].starts_with("coupled"));

    let fc = dir.path().join("forecast.csv");
    run(with(&["forecast", "--draws", p(&draws), "--out", p(&fc), "--horizon", "2"]));
    assert_eq!(csv_rows(&fc).len(), 1 + 4 * 2);

    let scores = dir.path().join("scores.csv");
    let text = run(with(&["score", "--weeks", "2", "--iters", "60", "--burnin", "20", "--chains", "1", "--out", p(&scores)]));
    assert!(text.contains("over 2 weeks"), "{text}");
    assert_eq!(csv_rows(&scores).len(), 3);

    let rt = dir.path().join("realtime.csv");
    run(with(&["realtime-states", "--weeks", "3", "--iters", "60", "--burnin", "20", "--chains", "1", "--out", p(&rt)]));
    let rows = csv_rows(&rt);
    assert_eq!(rows.len(), 1 + 4 * 3);
    assert!(rows[1].split(',').nth(1) == Some("28"), "{}", rows[1]);

    let text = cmsnb(&["eval-detect", "--counts", p(&counts), "--states", p(&states), "--truth", p(&sim.join("truth.csv"))]);
    assert!(text.contains("auc: ") && text.contains("timeliness: "), "{text}");
}

#[test]
fn weights_from_patient_samples() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.csv");
    std::fs::write(
        &samples,
        "area_id,neighborhood_id,n\na,x,10\na,y,5\nb,x,4\nb,y,8\nc,y,3\nc,z,9\n",
    )
    .unwrap();
    let out = dir.path().join("neighbors.csv");
    cmsnb(&["weights", "--samples", p(&samples), "--k", "1", "--out", p(&out)]);
    let rows = csv_rows(&out);
    assert!(rows.iter().any(|r| r == "from_area,to_area,weight"), "{rows:?}");
    assert_eq!(rows.iter().filter(|r| !r.starts_with('#') && !r.starts_with("from")).count(), 3);
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    std::fs::write(&counts, "area_id,week,count\na,1,3\na,2,-1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cmsnb"))
        .args(["fit", "--counts", p(&counts), "--iters", "10", "--burnin", "2"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("counts.csv:3: negative count"), "{err}");
}
