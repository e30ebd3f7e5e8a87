//! Argument parsing and subcommand logic for the `oodknn` binary.
//!
//! Every subcommand talks to the service through `oodknn-client`. Without
//! `--server`, a private service is started on a loopback port inside the
//! same process.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use oodknn_client::api::{
    CalibrateRequest, DecideRequest, EvalRequest, EvalResponse, FitRequest, HistRequest, LoadRequest, ScoreRequest,
};
use oodknn_client::{Client, ClientError};
use oodknn_core::eval::DEFAULT_TPR;
use oodknn_core::pipeline::{scores_from_text, scores_to_text};
use oodknn_core::{ErrorKind, Method, ScoreVector, ScorerConfig};

pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
pub const SCORES_DIR: &str = "scores";

#[derive(Debug, Parser)]
#[command(name = "oodknn", version, about = "Deep kNN out-of-distribution detection over exported embeddings")]
pub struct Cli {
    /// Base URL of a running service. Paths are then resolved on the
    /// service host. Without it an in-process service is used.
    #[arg(long, global = true)]
    pub server: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a scorer on the manifest's id-train entry and save its state.
    Fit {
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long)]
        manifest: PathBuf,
        /// Directory that receives the fitted state.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score one embedding (or, for msp, logit) file with a saved scorer.
    Score {
        /// Directory written by `fit`.
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Score file to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the ID threshold from a score file.
    Calibrate {
        /// ID calibration scores, one per line.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TPR)]
        tpr: f64,
        /// Optional scores to classify against the calibrated threshold.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every ood-test entry against id-test.
    Eval {
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long)]
        manifest: PathBuf,
        /// Evaluate a saved scorer instead of fitting one.
        #[arg(long, conflicts_with_all = ["method", "k", "seed", "param"])]
        state: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TPR)]
        tpr: f64,
        /// Report directory; the text report goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a histogram of each score file with this many bins.
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Two-column histogram (bin left edge, count) of a score file.
    Hist {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct ScorerArgs {
    #[arg(long, default_value_t = Method::Knn)]
    pub method: Method,
    /// Neighbor count for knn and lof.
    #[arg(long)]
    pub k: Option<usize>,
    /// Seed for iforest and loda; ignored by deterministic methods.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Any other hyperparameter as key=value, e.g. n_components=64.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub param: Vec<String>,
}

impl ScorerArgs {
    pub fn config(&self) -> Result<ScorerConfig, CliError> {
        let mut cfg = ScorerConfig::default_for(self.method);
        if let Some(k) = self.k {
            cfg.set("k", &k.to_string())?;
        }
        if let Some(seed) = self.seed {
            if matches!(self.method, Method::Iforest | Method::Loda) {
                cfg.set("seed", &seed.to_string())?;
            }
        }
        for p in &self.param {
            let (key, value) = p
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--param expects KEY=VALUE, got {p:?}")))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] oodknn_core::Error),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot start service: {0}")]
    Serve(std::io::Error),
}

impl CliError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Client(e) => e.kind(),
            CliError::Usage(_) => ErrorKind::Config,
            CliError::Serve(_) => ErrorKind::Io,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }
}

/// Paths travel to the service, which may have a different working
/// directory.
fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| oodknn_core::Error::io(p, e).into())
}

fn read_scores(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| oodknn_core::Error::io(path, e))?;
    Ok(scores_from_text(&text)?)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| oodknn_core::Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| oodknn_core::Error::io(path, e))?;
    Ok(())
}

/// Writes `text` to `out`, or to stdout when there is no path.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn score_file_name(v: &ScoreVector, role: &str) -> String {
    let safe: String = v
        .dataset
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{role}.{safe}.scores")
}

async fn write_eval(client: &Client, run: &EvalResponse, out: &Path, bins: Option<usize>) -> Result<(), CliError> {
    write_file(&out.join(REPORT_TEXT), &run.summary.to_text())?;
    write_file(&out.join(REPORT_JSON), &run.summary.to_json())?;
    let dir = out.join(SCORES_DIR);
    let all = std::iter::once((&run.id_scores, "id-test")).chain(run.ood_scores.iter().map(|v| (v, "ood-test")));
    for (v, role) in all {
        let name = score_file_name(v, role);
        write_file(&dir.join(&name), &scores_to_text(&v.scores))?;
        if let Some(n_bins) = bins {
            let h = client
                .hist(&HistRequest {
                    scores: v.scores.clone(),
                    n_bins,
                })
                .await?;
            write_file(&dir.join(format!("{name}.hist")), &h.to_text())?;
        }
    }
    Ok(())
}

async fn execute(client: &Client, command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit { scorer, manifest, out } => {
            let resp = client
                .fit(&FitRequest {
                    manifest: absolute(&manifest)?,
                    config: scorer.config()?,
                    out_dir: Some(absolute(&out)?),
                })
                .await?;
            eprintln!("fitted {}", resp.scorer.config);
            for f in &resp.files {
                println!("{}", f.display());
            }
        }
        Command::Score { state, input, out } => {
            let info = client.load(&LoadRequest { state_dir: absolute(&state)? }).await?;
            let v = client
                .score(&ScoreRequest {
                    scorer_id: info.scorer_id,
                    input: absolute(&input)?,
                    dataset: None,
                })
                .await?;
            emit(out.as_deref(), &scores_to_text(&v.scores))?;
        }
        Command::Calibrate { scores, tpr, test, out } => {
            let threshold = client
                .calibrate(&CalibrateRequest {
                    scores: read_scores(&scores)?,
                    tpr_level: tpr,
                })
                .await?;
            let mut text = format!(
                "gamma={}\ttpr_level={}\tn_id={}\n",
                threshold.gamma, threshold.tpr_level, threshold.n_id
            );
            if let Some(test) = test {
                let test_scores = read_scores(&test)?;
                let d = client
                    .decide(&DecideRequest {
                        scores: test_scores.clone(),
                        threshold,
                    })
                    .await?;
                text.push_str(&format!("accepted={}\tn={}\n", d.accepted, test_scores.len()));
                for (s, v) in test_scores.iter().zip(&d.verdicts) {
                    text.push_str(&format!("{s}\t{v}\n"));
                }
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Eval {
            scorer,
            manifest,
            state,
            tpr,
            out,
            bins,
        } => {
            let manifest = absolute(&manifest)?;
            let req = match state {
                Some(dir) => {
                    let info = client.load(&LoadRequest { state_dir: absolute(&dir)? }).await?;
                    EvalRequest {
                        manifest,
                        config: None,
                        scorer_id: Some(info.scorer_id),
                        tpr_level: tpr,
                    }
                }
                None => EvalRequest {
                    manifest,
                    config: Some(scorer.config()?),
                    scorer_id: None,
                    tpr_level: tpr,
                },
            };
            let run = client.eval(&req).await?;
            match out {
                Some(dir) => write_eval(client, &run, &dir, bins).await?,
                None => print!("{}", run.summary.to_text()),
            }
        }
        Command::Hist { scores, bins, out } => {
            let h = client
                .hist(&HistRequest {
                    scores: read_scores(&scores)?,
                    n_bins: bins,
                })
                .await?;
            emit(out.as_deref(), &h.to_text())?;
        }
        Command::Serve { .. } => unreachable!("handled by run"),
    }
    Ok(())
}

/// Runs one parsed invocation to completion.
pub async fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Serve { addr } = cli.command {
        let (bound, task) = oodknn_service::spawn(addr).await.map_err(CliError::Serve)?;
        eprintln!("listening on http://{bound}");
        return match task.await {
            Ok(r) => r.map_err(CliError::Serve),
            Err(e) => Err(CliError::Serve(std::io::Error::other(e))),
        };
    }
    let client = match &cli.server {
        Some(url) => Client::new(url.clone()),
        None => {
            let (addr, _task) = oodknn_service::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
                .await
                .map_err(CliError::Serve)?;
            Client::new(format!("http://{addr}"))
        }
    };
    execute(&client, cli.command).await
}
