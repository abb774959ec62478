use std::path::{Path, PathBuf};

use gistress::report::{write_fixture, FixtureSpec, ModelArtifact, ReportError, RunConfig, RunOptions, Runner};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic")
}

fn small_fixture(dir: &Path) -> RunConfig {
    fixture_with(dir, 4)
}

fn fixture_with(dir: &Path, per_block: usize) -> RunConfig {
    let spec = FixtureSpec { quarters: 60, per_block, ..FixtureSpec::default() };
    let cfg = write_fixture(dir, &spec).unwrap();
    let mut c = RunConfig::load(&cfg).unwrap();
    c.pipeline.impute_factors = 4;
    c.subsampling.replications = 8;
    c
}

fn quick() -> RunOptions {
    RunOptions { skip_subsampling: true, ..RunOptions::default() }
}

#[test]
fn bundled_fixture_matches_its_generator() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &FixtureSpec::default()).unwrap();
    for f in ["series.csv", "config.toml"] {
        let a = std::fs::read(dir.path().join(f)).unwrap();
        let b = std::fs::read(fixture_dir().join(f)).unwrap();
        assert!(a == b, "{f} differs from the bundled copy");
    }
}

#[test]
fn ingest_reproduces_the_golden_panel() {
    let out = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&fixture_dir().join("config.toml")).unwrap();
    let runner = Runner::new(cfg, &RunOptions { out: Some(out.path().to_path_buf()), ..quick() }).unwrap();
    let o = runner.ingest().unwrap();
    assert!(!o.skipped);
    for f in ["panel.csv", "panel.json", "outliers.csv"] {
        let got = std::fs::read(o.dir.join(f)).unwrap();
        let want = std::fs::read(fixture_dir().join("golden").join(f)).unwrap();
        assert!(got == want, "{f} differs from the golden file");
    }
}

#[test]
fn stages_skip_when_up_to_date_and_rerun_on_change() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fixture(dir.path());
    {
        let r = Runner::new(cfg.clone(), &quick()).unwrap();
        assert!(r.all().unwrap().iter().all(|o| !o.skipped));
        let again = r.all().unwrap();
        assert!(again.iter().all(|o| o.skipped));
    }
    let mut changed = cfg.clone();
    changed.stress.delta = 6;
    let r = Runner::new(changed, &quick()).unwrap();
    let o = r.all().unwrap();
    assert_eq!(o.iter().map(|o| o.skipped).collect::<Vec<_>>(), vec![true, true, false]);
    let t3 = std::fs::read_to_string(o[2].dir.join("table3.csv")).unwrap();
    assert!(t3.starts_with("country,factor,joint,macro_only,univariate:0"));
    // financial factors are frozen in the macro-only scenario
    for line in t3.lines().skip(1).filter(|l| l.contains("-F,") || l.contains("global-F")) {
        assert_eq!(line.split(',').nth(3), Some("0"), "{line}");
    }
}

#[test]
fn missing_upstream_stage_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fixture(dir.path());
    let r = Runner::new(cfg.clone(), &quick()).unwrap();
    let err = r.vulnerability().unwrap_err();
    assert!(matches!(&err, ReportError::MissingArtifact { stage, .. } if stage == "estimate"), "{err}");
    assert_eq!(err.exit_code(), 4);
    let err = r.estimate().unwrap_err();
    assert!(matches!(&err, ReportError::MissingArtifact { stage, .. } if stage == "ingest"));
    r.ingest().unwrap();
    r.estimate().unwrap();
    drop(r);
    // outputs produced under another configuration count as missing
    let mut other = cfg;
    other.factors.local_m = 1;
    let r = Runner::new(other, &quick()).unwrap();
    assert!(matches!(r.vulnerability(), Err(ReportError::MissingArtifact { .. })));
}

#[test]
fn early_stop_is_recorded_and_artifacts_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_fixture(dir.path());
    cfg.em.max_iter = 1;
    let r = Runner::new(cfg, &quick()).unwrap();
    r.ingest().unwrap();
    let o = r.estimate().unwrap();
    let m: ModelArtifact = serde_json::from_str(&std::fs::read_to_string(o.dir.join("model.json")).unwrap()).unwrap();
    assert!(!m.converged);
    assert_eq!(m.format_version, 1);
    for f in ["factors.csv", "gamma_tilde.csv", "em_path.csv", "idio_corr.csv", "idio_groups.csv", "factor_mse.csv"] {
        assert!(o.dir.join(f).exists(), "{f}");
    }
    assert!(!o.dir.join("gamma_hat.csv").exists());
}

#[test]
fn subsampling_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_with(dir.path(), 6);
    let read = |out: &Path, seed: u64| {
        let r = Runner::new(cfg.clone(), &RunOptions { seed: Some(seed), out: Some(out.to_path_buf()), ..RunOptions::default() }).unwrap();
        r.ingest().unwrap();
        let o = r.estimate().unwrap();
        std::fs::read(o.dir.join("gamma_hat.csv")).unwrap()
    };
    let a = read(&dir.path().join("a"), 3);
    let b = read(&dir.path().join("b"), 3);
    let c = read(&dir.path().join("c"), 4);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn output_directory_is_locked_during_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fixture(dir.path());
    let _r = Runner::new(cfg.clone(), &quick()).unwrap();
    let err = Runner::new(cfg.clone(), &quick()).err().expect("second runner on the same directory");
    assert!(matches!(err, ReportError::Locked(_)));
    assert_eq!(err.exit_code(), 2);
    drop(_r);
    assert!(Runner::new(cfg, &quick()).is_ok());
}
