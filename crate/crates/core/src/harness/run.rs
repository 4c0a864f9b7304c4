use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::GaussianPolicy;
use crate::oracle::{self, VerifyReport};

use super::checkpoint::load_actor;
use super::config::RunConfig;
use super::evaluate::{evaluate, EvalReport};
use super::metrics::{header, MetricsLog};
use super::seeding::{stream, Stream};
use super::train::{build_suite, Trainer};

pub const OUT_ENV: &str = "TDRL_OUT";

/// `$TDRL_OUT`, or `runs` when unset.
pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// `<out root>/<config file stem>-seed<seed>`.
pub fn default_run_dir(config_path: &Path, seed: u64) -> PathBuf {
    let stem = config_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    default_out_root().join(format!("{stem}-seed{seed}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub iterations: usize,
    pub episodes: usize,
    pub wall_seconds: f64,
    pub eval: EvalReport,
}

/// Trains from scratch into `run_dir`: `config.json`, `metrics.csv`,
/// `checkpoints/`, `verdicts/eval.json`. An existing `metrics.csv` is replaced.
pub fn train(config: RunConfig, run_dir: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    let checkpoints = run_dir.join("checkpoints");
    let verdicts = run_dir.join("verdicts");
    std::fs::create_dir_all(&checkpoints)?;
    std::fs::create_dir_all(&verdicts)?;
    std::fs::write(run_dir.join("config.json"), config.to_json())?;
    let metrics_path = run_dir.join("metrics.csv");
    if metrics_path.exists() {
        std::fs::remove_file(&metrics_path)?;
    }

    let mut trainer = Trainer::new(config.clone())?;
    let mut log = MetricsLog::open(&metrics_path, &header(trainer.suite()))?;
    while trainer.iteration() < config.total_iterations {
        if let Some(row) = trainer.step()? {
            log.append(&row)?;
        }
        let it = trainer.iteration();
        if config.checkpoint_interval > 0 && it % config.checkpoint_interval == 0 {
            trainer.save(&checkpoints.join(format!("iter-{it}")))?;
        }
    }
    trainer.save(&checkpoints.join("final"))?;

    let mut rng = stream(config.seed, Stream::Eval);
    let eval = evaluate(trainer.policy(), &config.env, trainer.suite(), config.eval_episodes, &mut rng)?;
    std::fs::write(verdicts.join("eval.json"), serde_json::to_string_pretty(&eval)?)?;
    Ok(RunSummary {
        run_dir: run_dir.to_path_buf(),
        iterations: trainer.iteration(),
        episodes: trainer.episodes(),
        wall_seconds: started.elapsed().as_secs_f64(),
        eval,
    })
}

/// Rolls out the final checkpointed actor of `run_dir` in the configured
/// environment.
pub fn compare(config: &RunConfig, run_dir: &Path, episodes: usize) -> Result<EvalReport> {
    let actor = load_actor(&run_dir.join("checkpoints").join("final"))?;
    let env = config.env.build()?;
    if actor.input_dim() != env.state_dim() || actor.output_dim() != 2 * env.action_dim() {
        return Err(Error::Checkpoint {
            artifact: "actor.mlp".into(),
            message: format!("does not fit environment `{}`", config.env.name()),
        });
    }
    let policy = GaussianPolicy::from_actor(actor, env.action_low(), env.action_high(), config.init_alpha);
    let suite = build_suite(config)?;
    let mut rng = stream(config.seed, Stream::Eval);
    evaluate(&policy, &config.env, &suite, episodes, &mut rng)
}

/// Re-emits `metrics.csv` after checking every record has the header's width.
pub fn export_csv(run_dir: &Path) -> Result<String> {
    let path = run_dir.join("metrics.csv");
    if !path.is_file() {
        return Err(Error::Checkpoint {
            artifact: "metrics.csv".into(),
            message: format!("missing from {}", run_dir.display()),
        });
    }
    let mut reader = csv::Reader::from_path(&path)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(reader.headers()?)?;
    for record in reader.records() {
        writer.write_record(&record?)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs the oracle sweep and writes `verdicts/verify-seed<seed>.json` under `out_dir`.
pub fn verify(instances: usize, seed: u64, out_dir: &Path) -> Result<(VerifyReport, PathBuf)> {
    let mut rng = stream(seed, Stream::Init);
    let report = oracle::verify_theory(instances, seed, &mut rng)?;
    let dir = out_dir.join("verdicts");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("verify-seed{seed}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    Ok((report, path))
}

pub fn render_verify(report: &VerifyReport) -> String {
    let mut out = format!(
        "instances: {}\nprobability ratio non-increasing in distance: {:?}\ndistance to optimal set does not grow (p=1 and p=2): {:?}\n",
        report.instances.len(),
        report.lemma1,
        report.theorem1
    );
    out.push_str(&format!("first instance: d1 = {:.6}, d2 = {:.6}\n", report.d1, report.d2));
    out.push_str(&format!("mean comparator agreement with exact distances: {:.4}\n", report.mean_agreement));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dir_uses_config_stem_and_seed() {
        let dir = default_run_dir(Path::new("configs/point_mass_es.json"), 3);
        assert!(dir.ends_with("point_mass_es-seed3"));
    }

    #[test]
    fn verify_writes_a_verdict() {
        let tmp = tempfile::tempdir().unwrap();
        let (report, path) = verify(1, 0, tmp.path()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(json["lemma1"], "pass");
        assert_eq!(json["theorem1"], "pass");
        assert_eq!(json["d1"].as_f64().unwrap(), report.d1);
        assert!(render_verify(&report).contains("probability ratio"));
    }
}
