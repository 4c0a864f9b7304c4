use std::fs::{File, OpenOptions};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::testkit::TestSuite;

/// Most recent value of every logged loss and learning statistic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LastLosses {
    pub loss_dis: f64,
    pub loss_penalty: f64,
    pub loss_reward: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub alpha: f64,
    pub grad_norm_dis: f64,
    pub grad_norm_pen: f64,
    pub es_stopped: bool,
}

/// One CSV record. The rolling columns average the most recent episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub episodes: usize,
    pub pass_rates: Vec<f64>,
    pub all_pass_rate: f64,
    pub indicative_means: Vec<f64>,
    pub losses: LastLosses,
}

/// Column names: `iteration, episodes, pass_rate:<pf>..., all_pass_rate,
/// mean:<ind>..., loss_dis, loss_penalty, loss_reward, actor_loss,
/// critic_loss, alpha, grad_norm_dis, grad_norm_pen, es_stopped`.
pub fn header(suite: &TestSuite) -> Vec<String> {
    let mut cols = vec!["iteration".to_string(), "episodes".to_string()];
    cols.extend(suite.passfail_tests().iter().map(|t| format!("pass_rate:{}", t.name())));
    cols.push("all_pass_rate".into());
    cols.extend(suite.indicative_tests().iter().map(|t| format!("mean:{}", t.name())));
    for c in [
        "loss_dis",
        "loss_penalty",
        "loss_reward",
        "actor_loss",
        "critic_loss",
        "alpha",
        "grad_norm_dis",
        "grad_norm_pen",
        "es_stopped",
    ] {
        cols.push(c.into());
    }
    cols
}

impl MetricsRow {
    pub fn fields(&self) -> Vec<String> {
        let l = &self.losses;
        let mut out = vec![self.iteration.to_string(), self.episodes.to_string()];
        out.extend(self.pass_rates.iter().map(f64::to_string));
        out.push(self.all_pass_rate.to_string());
        out.extend(self.indicative_means.iter().map(f64::to_string));
        for v in [
            l.loss_dis,
            l.loss_penalty,
            l.loss_reward,
            l.actor_loss,
            l.critic_loss,
            l.alpha,
            l.grad_norm_dis,
            l.grad_norm_pen,
        ] {
            out.push(v.to_string());
        }
        out.push(u8::from(l.es_stopped).to_string());
        out
    }
}

/// Append-only CSV log. The header is written only when the file is new.
pub struct MetricsLog {
    writer: csv::Writer<File>,
    columns: usize,
}

impl MetricsLog {
    pub fn open(path: &Path, header: &[String]) -> Result<Self> {
        let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut writer = csv::Writer::from_writer(file);
        if fresh {
            writer.write_record(header)?;
            writer.flush()?;
        }
        Ok(Self {
            writer,
            columns: header.len(),
        })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        let fields = row.fields();
        debug_assert_eq!(fields.len(), self.columns);
        self.writer.write_record(&fields)?;
        self.writer.flush()?;
        Ok(())
    }
}
