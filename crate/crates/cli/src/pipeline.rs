use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aeromon_core::baselines::ClassifierConfig;

use crate::config::{DataSource, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, RunStatus};
use crate::stages::{self, Workspace, AUTOENCODER};

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(ws: &Workspace) -> CliResult<Self> {
        let path = ws.path(Workspace::LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked {
                dir: ws.root().to_path_buf(),
                lock: path,
            }),
            Err(e) => Err(CliError::io(&path)(e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

struct Runner<'a> {
    ws: &'a Workspace,
    manifest: RunManifest,
    quiet: bool,
}

impl Runner<'_> {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> CliResult<(Vec<PathBuf>, T)>) -> CliResult<T> {
        let start = Instant::now();
        let result = f();
        self.manifest.time(name, start.elapsed().as_secs_f64());
        match result {
            Ok((paths, value)) => {
                self.manifest.record(self.ws.root(), &paths)?;
                if !self.quiet {
                    eprintln!("[{name}] ok ({:.2}s)", start.elapsed().as_secs_f64());
                }
                Ok(value)
            }
            Err(e) => {
                self.manifest.fail(name, &e);
                Err(e)
            }
        }
    }
}

fn plain(r: CliResult<Vec<PathBuf>>) -> CliResult<(Vec<PathBuf>, ())> {
    r.map(|p| (p, ()))
}

/// Runs every stage in order against one output directory and writes the
/// manifest, also when a stage fails.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path, quiet: bool) -> CliResult<RunManifest> {
    cfg.validate()?;
    let ws = Workspace::new(out)?;
    let _lock = RunLock::acquire(&ws)?;
    let mut runner = Runner {
        ws: &ws,
        manifest: RunManifest::new(cfg.hash(), cfg.seed),
        quiet,
    };
    let result = run_stages(cfg, &mut runner);
    let manifest = runner.manifest;
    let manifest_path = ws.path(Workspace::MANIFEST);
    manifest.save(&manifest_path)?;
    result.map(|()| manifest)
}

fn run_stages(cfg: &PipelineConfig, r: &mut Runner<'_>) -> CliResult<()> {
    let ws = r.ws;
    if matches!(cfg.source(), DataSource::Synthetic(_)) {
        r.stage("generate", || plain(stages::generate(cfg, ws)))?;
    }
    r.stage("split", || plain(stages::split(cfg, ws, None)))?;
    r.stage("histogram", || plain(stages::histogram(cfg, ws, None, None)))?;
    r.stage("train-ae", || stages::train_ae(cfg, ws))?;
    r.stage("calibrate", || stages::calibrate(cfg, ws))?;
    let scorer = ws.path(Workspace::SCORER);
    r.stage("score autoencoder", || plain(stages::score(ws, &scorer, None, None)))?;

    let jobs: Vec<(_, Vec<ClassifierConfig>)> = cfg.baselines.iter().map(|&k| (k, cfg.candidates(k))).collect();
    r.stage("train-clf", || plain(stages::train_clf(cfg, ws, &jobs)))?;
    let mut models = vec![AUTOENCODER.to_string()];
    for &kind in &cfg.baselines {
        let model = ws.clf_model(kind);
        r.stage(&format!("score {kind}"), || plain(stages::score(ws, &model, None, None)))?;
        models.push(kind.to_string());
    }
    r.stage("evaluate", || stages::evaluate(ws, &models))?;
    r.stage("compare", || plain(stages::compare(ws, &models)))?;
    Ok(())
}

/// True when the manifest's artifacts all exist and match their hashes.
pub fn verify_manifest(root: &Path, manifest: &RunManifest) -> CliResult<bool> {
    if manifest.status != RunStatus::Success {
        return Ok(false);
    }
    for a in &manifest.artifacts {
        let p = root.join(&a.path);
        if !p.exists() || crate::manifest::file_digest(&p)?.0 != a.sha256 {
            return Ok(false);
        }
    }
    Ok(true)
}
