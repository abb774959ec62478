use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::artifacts::{read_json, read_matrix, validate_file, write_csv, write_json, write_matrix, ColType, FileSchema, Schema};
use super::config::RunConfig;
use super::tables;
use super::ReportError;
use crate::data::{build_panel, load_series, Country, Panel, Quarter};
use crate::dfm::{fit_em, idio_correlation_diagnostic, subsample_factor_cov, FactorEstimates, MLDFMParams, SubsamplingConfig};

/// Version of the model JSON layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;
const RECORD: &str = "stage.json";
const LOCK: &str = ".gistress.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Estimate,
    Vulnerability,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Estimate => "estimate",
            Stage::Vulnerability => "vulnerability",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub skip_subsampling: bool,
    /// Rerun stages even when their recorded hash matches.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub skipped: bool,
    pub dir: PathBuf,
    pub files: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StageRecord {
    stage: String,
    hash: String,
    files: BTreeMap<String, FileSchema>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsamplingSummary {
    pub replications: usize,
    pub seed: u64,
    pub kept: usize,
    pub dropped: usize,
    pub n_star: BTreeMap<String, usize>,
}

/// Estimated model as written by the estimate stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub converged: bool,
    pub iterations: usize,
    pub last_delta: f64,
    pub loglik_path: Vec<f64>,
    pub factor_labels: Vec<String>,
    pub subsampling: Option<SubsamplingSummary>,
    pub params: MLDFMParams,
}

/// Exclusive ownership of an output directory for the lifetime of a run.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self, ReportError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(ReportError::Locked(path)),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_parts(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex(&h.finalize())
}

fn input_digest(path: &Path) -> Result<String, ReportError> {
    let mut files = Vec::new();
    if path.is_dir() {
        for e in std::fs::read_dir(path)? {
            let p = e?.path();
            if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut h = Sha256::new();
    for f in files {
        h.update(f.file_name().map(|n| n.as_encoded_bytes().to_vec()).unwrap_or_default());
        h.update(std::fs::read(&f)?);
    }
    Ok(hex(&h.finalize()))
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("serializable settings")
}

pub struct Runner {
    pub config: RunConfig,
    pub out: PathBuf,
    subsampling: Option<SubsamplingConfig>,
    force: bool,
    hashes: [String; 3],
    _lock: OutputLock,
}

impl Runner {
    pub fn new(mut config: RunConfig, opts: &RunOptions) -> Result<Self, ReportError> {
        if let Some(out) = &opts.out {
            config.output = out.clone();
        }
        if let Some(seed) = opts.seed {
            config.subsampling.seed = seed;
        }
        config.validate()?;
        let subsampling = (config.subsampling.enabled && !opts.skip_subsampling).then_some(SubsamplingConfig {
            replications: config.subsampling.replications,
            seed: config.subsampling.seed,
            fraction_override: config.subsampling.fraction_override,
            em: config.em,
        });
        let ingest = hash_parts(&[b"ingest", input_digest(&config.data.path)?.as_bytes(), &json_bytes(&config.pipeline)]);
        let estimate = hash_parts(&[
            b"estimate",
            ingest.as_bytes(),
            &json_bytes(&config.factors),
            &json_bytes(&config.em),
            &json_bytes(&subsampling),
        ]);
        let vulnerability =
            hash_parts(&[b"vulnerability", estimate.as_bytes(), &json_bytes(&config.qr), &json_bytes(&config.stress)]);
        let lock = OutputLock::acquire(&config.output)?;
        Ok(Self {
            out: config.output.clone(),
            config,
            subsampling,
            force: opts.force,
            hashes: [ingest, estimate, vulnerability],
            _lock: lock,
        })
    }

    fn hash(&self, stage: Stage) -> &str {
        &self.hashes[stage as usize]
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.name())
    }

    fn completed(&self, stage: Stage) -> Option<StageRecord> {
        let rec: StageRecord = read_json(&self.stage_dir(stage).join(RECORD)).ok()?;
        if rec.hash != self.hash(stage) {
            return None;
        }
        let dir = self.stage_dir(stage);
        rec.files.iter().all(|(f, s)| validate_file(&dir.join(f), s).is_ok()).then_some(rec)
    }

    /// Fail unless `stage` has valid outputs for the current configuration.
    fn require(&self, stage: Stage) -> Result<PathBuf, ReportError> {
        let dir = self.stage_dir(stage);
        let record = dir.join(RECORD);
        if !record.exists() {
            return Err(ReportError::MissingArtifact { stage: stage.name().into(), path: record, reason: "not run".into() });
        }
        if self.completed(stage).is_none() {
            return Err(ReportError::MissingArtifact {
                stage: stage.name().into(),
                path: record,
                reason: "outputs are stale or invalid for this configuration".into(),
            });
        }
        Ok(dir)
    }

    fn run_stage(
        &self,
        stage: Stage,
        produce: impl FnOnce(&Path) -> Result<BTreeMap<String, FileSchema>, ReportError>,
    ) -> Result<StageOutcome, ReportError> {
        let dir = self.stage_dir(stage);
        if !self.force {
            if let Some(rec) = self.completed(stage) {
                log::info!("{}: outputs up to date, skipping", stage.name());
                return Ok(StageOutcome { stage, skipped: true, dir, files: rec.files.into_keys().collect() });
            }
        }
        if dir.exists() {
            std::fs::remove_dir_all(&dir)?;
        }
        std::fs::create_dir_all(&dir)?;
        let files = produce(&dir)?;
        for (f, s) in &files {
            validate_file(&dir.join(f), s)?;
        }
        let rec = StageRecord { stage: stage.name().into(), hash: self.hash(stage).into(), files };
        write_json(&dir.join(RECORD), &rec)?;
        Ok(StageOutcome { stage, skipped: false, dir, files: rec.files.into_keys().collect() })
    }

    pub fn ingest(&self) -> Result<StageOutcome, ReportError> {
        self.run_stage(Stage::Ingest, |dir| {
            let series = load_series(&self.config.data.path)?;
            let built = build_panel(&series, &self.config.pipeline)?;
            let panel = &built.panel;
            let mut files = BTreeMap::new();
            panel.write_csv(File::create(dir.join("panel.csv"))?)?;
            files.insert("panel.csv".into(), FileSchema::Csv { schema: Schema::keyed("quarter", ColType::Quarter, &panel.series_ids) });
            panel.write_sidecar(File::create(dir.join("panel.json"))?)?;
            files.insert("panel.json".into(), FileSchema::Json);

            let quarters = panel.quarters();
            let countries: Vec<String> = built.gdp.iter().map(|g| g.country.to_string()).collect();
            let mut cols = vec![("quarter", ColType::Quarter)];
            cols.extend(countries.iter().map(|c| (c.as_str(), ColType::OptFloat)));
            let schema = Schema::new(&cols);
            let rows: Vec<Vec<String>> = quarters
                .iter()
                .enumerate()
                .map(|(t, q)| {
                    let mut r = vec![q.to_string()];
                    r.extend(built.gdp.iter().map(|g| super::artifacts::fmt_opt(g.values[t])));
                    r
                })
                .collect();
            write_csv(&dir.join("gdp.csv"), &schema, &rows)?;
            files.insert("gdp.csv".into(), FileSchema::Csv { schema });

            let schema = Schema::new(&[("series", ColType::Str), ("quarter", ColType::Quarter)]);
            let rows: Vec<Vec<String>> = built
                .outliers
                .iter()
                .flat_map(|(id, pos)| pos.iter().map(|&t| vec![id.clone(), quarters[t].to_string()]))
                .collect();
            write_csv(&dir.join("outliers.csv"), &schema, &rows)?;
            files.insert("outliers.csv".into(), FileSchema::Csv { schema });
            log::info!(
                "ingest: {} series x {} quarters ({}..{}), {} outliers replaced",
                panel.n_series(),
                panel.n_obs(),
                panel.first_quarter,
                panel.last_quarter,
                rows.len()
            );
            Ok(files)
        })
    }

    fn read_panel(&self) -> Result<Panel, ReportError> {
        let dir = self.require(Stage::Ingest)?;
        Ok(Panel::read(File::open(dir.join("panel.csv"))?, File::open(dir.join("panel.json"))?)?)
    }

    pub fn estimate(&self) -> Result<StageOutcome, ReportError> {
        let panel = self.read_panel()?;
        self.run_stage(Stage::Estimate, |dir| {
            let x = &panel.observations;
            let blocks = self.config.factors.structure(panel.block_index.clone());
            blocks.validate()?;
            let mut fit = fit_em(x, &blocks, &self.config.em)?;
            if !fit.estimates.converged {
                log::warn!("EM stopped after {} iterations without meeting the tolerance", fit.iterations);
            }
            let mut summary = None;
            if let Some(cfg) = &self.subsampling {
                let res = subsample_factor_cov(x, &fit, cfg)?;
                summary = Some(SubsamplingSummary {
                    replications: cfg.replications,
                    seed: cfg.seed,
                    kept: res.kept,
                    dropped: res.dropped,
                    n_star: res.n_star.iter().map(|(k, n)| (k.to_string(), *n)).collect(),
                });
                fit.estimates.static_cov_subsampled = Some(res.gamma_hat);
            }
            let labels = blocks.factor_labels();
            let quarters: Vec<String> = panel.quarters().iter().map(|q| q.to_string()).collect();
            let est = &fit.estimates;
            let mut files = BTreeMap::new();

            let model = ModelArtifact {
                format_version: MODEL_FORMAT_VERSION,
                converged: est.converged,
                iterations: fit.iterations,
                last_delta: fit.last_delta,
                loglik_path: est.em_path.clone(),
                factor_labels: labels.clone(),
                subsampling: summary,
                params: fit.params.clone(),
            };
            write_json(&dir.join("model.json"), &model)?;
            files.insert("model.json".into(), FileSchema::Json);

            let s = write_matrix(&dir.join("factors.csv"), "quarter", ColType::Quarter, &quarters, &labels, &est.factors)?;
            files.insert("factors.csv".into(), FileSchema::Csv { schema: s });
            let s = write_matrix(&dir.join("gamma_tilde.csv"), "factor", ColType::Str, &labels, &labels, &est.static_cov_analytic)?;
            files.insert("gamma_tilde.csv".into(), FileSchema::Csv { schema: s });
            if let Some(g) = &est.static_cov_subsampled {
                let s = write_matrix(&dir.join("gamma_hat.csv"), "factor", ColType::Str, &labels, &labels, g)?;
                files.insert("gamma_hat.csv".into(), FileSchema::Csv { schema: s });
            }

            let schema = Schema::new(&[("quarter", ColType::Quarter), ("row", ColType::Str), ("col", ColType::Str), ("value", ColType::Float)]);
            let mut rows = Vec::new();
            for (t, p) in est.mse.iter().enumerate() {
                for i in 0..p.nrows() {
                    for j in 0..p.ncols() {
                        rows.push(vec![quarters[t].clone(), labels[i].clone(), labels[j].clone(), super::artifacts::fmt_f(p[(i, j)])]);
                    }
                }
            }
            write_csv(&dir.join("factor_mse.csv"), &schema, &rows)?;
            files.insert("factor_mse.csv".into(), FileSchema::Csv { schema });

            let schema = Schema::new(&[("iteration", ColType::Int), ("loglik", ColType::Float), ("relative_change", ColType::OptFloat)]);
            let rows: Vec<Vec<String>> = est
                .em_path
                .iter()
                .enumerate()
                .map(|(k, &l)| {
                    let rel = (k > 0).then(|| crate::dfm::relative_change(est.em_path[k - 1], l));
                    vec![k.to_string(), super::artifacts::fmt_f(l), super::artifacts::fmt_opt(rel)]
                })
                .collect();
            write_csv(&dir.join("em_path.csv"), &schema, &rows)?;
            files.insert("em_path.csv".into(), FileSchema::Csv { schema });
            let path: Vec<Option<f64>> = est.em_path.iter().map(|&v| Some(v)).collect();
            let iters: Vec<String> = (0..path.len()).map(|k| k.to_string()).collect();
            std::fs::write(dir.join("em_path.svg"), super::plot::line_chart("EM log-likelihood", &iters, &[("loglik".into(), path)]))?;
            files.insert("em_path.svg".into(), FileSchema::Svg);

            let groups: Vec<(String, Vec<usize>)> = blocks
                .r_local
                .keys()
                .map(|&k| (k.to_string(), (0..panel.n_series()).filter(|&j| panel.block_index[j] == k).collect()))
                .collect();
            let diag = idio_correlation_diagnostic(x, &fit.params.lambda, &est.factors, &groups);
            let s = write_matrix(&dir.join("idio_corr.csv"), "series", ColType::Str, &panel.series_ids, &panel.series_ids, &diag.corr)?;
            files.insert("idio_corr.csv".into(), FileSchema::Csv { schema: s });
            let schema = Schema::new(&[("group", ColType::Str), ("size", ColType::Int), ("mean_abs_corr", ColType::Float)]);
            let mut rows: Vec<Vec<String>> = diag
                .groups
                .iter()
                .map(|g| vec![g.name.clone(), g.members.len().to_string(), super::artifacts::fmt_f(g.mean_abs_corr)])
                .collect();
            rows.push(vec!["background".into(), "0".into(), super::artifacts::fmt_f(diag.background)]);
            write_csv(&dir.join("idio_groups.csv"), &schema, &rows)?;
            files.insert("idio_groups.csv".into(), FileSchema::Csv { schema });
            log::info!(
                "estimate: {} factors, {} EM iterations, converged = {}",
                labels.len(),
                fit.iterations,
                est.converged
            );
            Ok(files)
        })
    }

    /// Estimation outputs read back from disk.
    pub fn read_estimates(&self) -> Result<(ModelArtifact, FactorEstimates, Vec<Quarter>), ReportError> {
        let dir = self.require(Stage::Estimate)?;
        let model: ModelArtifact = read_json(&dir.join("model.json"))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ReportError::MissingArtifact {
                stage: "estimate".into(),
                path: dir.join("model.json"),
                reason: format!("model format version {} is not {MODEL_FORMAT_VERSION}", model.format_version),
            });
        }
        let (keys, _, factors) = read_matrix(&dir.join("factors.csv"))?;
        let quarters = keys.iter().map(|k| k.parse::<Quarter>()).collect::<Result<Vec<_>, _>>()?;
        let (_, _, gamma_tilde) = read_matrix(&dir.join("gamma_tilde.csv"))?;
        let gamma_hat = dir.join("gamma_hat.csv");
        let gamma_hat = if gamma_hat.exists() { Some(read_matrix(&gamma_hat)?.2) } else { None };
        let mse = if self.config.stress.covariance == "smoother_mse" { read_mse(&dir.join("factor_mse.csv"), &quarters, &model.factor_labels)? } else { Vec::new() };
        let est = FactorEstimates {
            factors,
            mse,
            static_cov_analytic: gamma_tilde,
            static_cov_subsampled: gamma_hat,
            em_path: model.loglik_path.clone(),
            converged: model.converged,
        };
        Ok((model, est, quarters))
    }

    pub fn read_gdp(&self) -> Result<BTreeMap<Country, Vec<Option<f64>>>, ReportError> {
        let dir = self.require(Stage::Ingest)?;
        let mut rdr = csv::Reader::from_path(dir.join("gdp.csv"))?;
        let countries = rdr.headers()?.iter().skip(1).map(|c| c.parse::<Country>()).collect::<Result<Vec<_>, _>>()?;
        let mut out: BTreeMap<Country, Vec<Option<f64>>> = countries.iter().map(|&c| (c, Vec::new())).collect();
        for rec in rdr.records() {
            let rec = rec?;
            for (c, cell) in countries.iter().zip(rec.iter().skip(1)) {
                let v = if cell.is_empty() { None } else { Some(cell.parse::<f64>().map_err(|e| ReportError::Schema(format!("gdp.csv: {e}")))?) };
                out.get_mut(c).expect("known country").push(v);
            }
        }
        Ok(out)
    }

    pub fn vulnerability(&self) -> Result<StageOutcome, ReportError> {
        let (model, est, quarters) = self.read_estimates()?;
        let gdp = self.read_gdp()?;
        self.run_stage(Stage::Vulnerability, |dir| tables::vulnerability(&self.config, &model, &est, &quarters, &gdp, dir))
    }

    pub fn all(&self) -> Result<Vec<StageOutcome>, ReportError> {
        Ok(vec![self.ingest()?, self.estimate()?, self.vulnerability()?])
    }
}

fn read_mse(path: &Path, quarters: &[Quarter], labels: &[String]) -> Result<Vec<DMatrix<f64>>, ReportError> {
    let r = labels.len();
    let pos: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut out = vec![DMatrix::zeros(r, r); quarters.len()];
    let mut rdr = csv::Reader::from_path(path)?;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let (t, i, j) = (k / (r * r), pos.get(&rec[1]), pos.get(&rec[2]));
        match (out.get_mut(t), i, j, rec[3].parse::<f64>()) {
            (Some(m), Some(&i), Some(&j), Ok(v)) => m[(i, j)] = v,
            _ => return Err(ReportError::Schema(format!("{}: malformed row {}", path.display(), k + 1))),
        }
    }
    Ok(out)
}
