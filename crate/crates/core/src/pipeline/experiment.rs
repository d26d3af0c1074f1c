use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{dnn_tag, PipelineConfig};
use super::corpus::{Corpus, Song, Split};
use super::separate::{oracle_separate, separate_with, Enhancer};
use super::stages::{gen_enh_training, train_dnn_a, train_dnn_b, train_nmf_bases};
use crate::data_io::{
    generate_synthetic_corpus, load_corpus, save_config, write_wav, BitDepth, MANIFEST_FILE,
};
use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::eval::{
    metrics_csv, song_average_csv, song_report, summarize, summary_csv, ModelSummary, SongResult,
};
use crate::neural::{save_mlp, Mlp};
use crate::nmf::{save_basis, NmfBasis};

pub const MODEL_S: &str = "S";
pub const MODEL_N: &str = "N";

#[derive(Debug, Clone)]
pub struct TrainedEnhancer {
    pub lambda: f64,
    pub net: Mlp,
    pub costs: Vec<f64>,
}

/// Every model of the experiment matrix.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub dnn_a: Mlp,
    pub dnn_a_costs: Vec<f64>,
    pub enhancers: Vec<TrainedEnhancer>,
    /// Vocal and accompaniment bases.
    pub nmf: Option<(NmfBasis, NmfBasis)>,
}

impl TrainedModels {
    /// Names in experiment order: S, N, then one D tag per λ.
    pub fn model_names(&self) -> Vec<String> {
        let mut names = vec![MODEL_S.to_string()];
        if self.nmf.is_some() {
            names.push(MODEL_N.to_string());
        }
        names.extend(self.enhancers.iter().map(|e| dnn_tag(e.lambda)));
        names
    }

    pub fn enhancer(&self, model: &str) -> Result<Enhancer<'_>> {
        if model == MODEL_S {
            return Ok(Enhancer::None);
        }
        if model == MODEL_N {
            return match &self.nmf {
                Some((v, a)) => Ok(Enhancer::Nmf(v, a)),
                None => Err(Error::InvalidConfig("model N requested but no NMF bases trained".into())),
            };
        }
        self.enhancers
            .iter()
            .find(|e| dnn_tag(e.lambda) == model)
            .map(|e| Enhancer::Dnn(&e.net))
            .ok_or_else(|| Error::InvalidConfig(format!("model `{model}` has not been trained")))
    }
}

/// Train the separator, one enhancer per configured λ, and the NMF bases.
pub fn train_all(corpus: &Corpus, cfg: &PipelineConfig) -> Result<TrainedModels> {
    cfg.validate()?;
    let train_a = corpus.split(Split::TrainA);
    let train_b = corpus.split(Split::TrainB);
    let a = train_dnn_a(&train_a, cfg)?;
    let (u, v) = gen_enh_training(&train_b, &a.net, cfg)?;
    let enhancers = cfg
        .lambdas
        .iter()
        .map(|&lambda| {
            train_dnn_b(u.view(), v.view(), lambda, cfg).map(|o| TrainedEnhancer {
                lambda,
                net: o.net,
                costs: o.costs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    log::info!("training NMF bases (rank {})", cfg.nmf.rank);
    let nmf = Some(train_nmf_bases(&train_b, cfg)?);
    Ok(TrainedModels {
        dnn_a: a.net,
        dnn_a_costs: a.costs,
        enhancers,
        nmf,
    })
}

/// Separated sources of one song under one model.
#[derive(Debug, Clone)]
pub struct SongEstimate {
    pub model: String,
    pub song_id: String,
    pub sources: Vec<Waveform>,
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Separate and score every song under every requested model. Results are
/// ordered model-major, then by song, whatever `jobs` is.
pub fn run_experiment(
    songs: &[&Song],
    models: &TrainedModels,
    requested: &[String],
    cfg: &PipelineConfig,
    jobs: usize,
) -> Result<(Vec<SongResult>, Vec<SongEstimate>)> {
    let enhancers = requested
        .iter()
        .map(|m| models.enhancer(m).map(|e| (m.as_str(), e)))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<_> = enhancers
        .iter()
        .flat_map(|&(m, e)| songs.iter().map(move |s| (m, e, *s)))
        .collect();
    let outcomes = with_jobs(jobs, || {
        tasks
            .par_iter()
            .map(|&(model, enhancer, song)| {
                let sep = separate_with(&song.mixture(), &models.dnn_a, enhancer, cfg)?;
                let report = song_report(&sep.waveforms, &song.references())?;
                Ok((
                    SongResult {
                        song_id: song.id.clone(),
                        model: model.to_string(),
                        report,
                    },
                    SongEstimate {
                        model: model.to_string(),
                        song_id: song.id.clone(),
                        sources: sep.waveforms,
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(outcomes.into_iter().unzip())
}

/// Oracle ratio-mask scores for every song, labelled model `IRM`.
pub fn run_oracle(songs: &[&Song], cfg: &PipelineConfig, jobs: usize) -> Result<Vec<SongResult>> {
    with_jobs(jobs, || {
        songs
            .par_iter()
            .map(|song| {
                let est = oracle_separate(song, cfg)?;
                Ok(SongResult {
                    song_id: song.id.clone(),
                    model: "IRM".into(),
                    report: song_report(&est, &song.references())?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// `epoch,cost` with 1-based epochs.
pub fn cost_trace_csv(costs: &[f64]) -> String {
    let mut out = String::from("epoch,cost\n");
    for (i, c) in costs.iter().enumerate() {
        writeln!(out, "{},{c:.12e}", i + 1).unwrap();
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Write models and cost traces under `dir`.
pub fn save_models(models: &TrainedModels, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    save_mlp(&models.dnn_a, &dir.join("dnn_a.model"))?;
    write_text(&dir.join("dnn_a.costs.csv"), &cost_trace_csv(&models.dnn_a_costs))?;
    for e in &models.enhancers {
        let tag = dnn_tag(e.lambda);
        save_mlp(&e.net, &dir.join(format!("dnn_b_{tag}.model")))?;
        write_text(&dir.join(format!("dnn_b_{tag}.costs.csv")), &cost_trace_csv(&e.costs))?;
    }
    if let Some((v, a)) = &models.nmf {
        save_basis(v, &dir.join("nmf_vocal.basis"))?;
        save_basis(a, &dir.join("nmf_accompaniment.basis"))?;
    }
    Ok(())
}

/// Path of source `k` (0-based) of a song's estimate under `root`.
pub fn estimate_path(root: &Path, model: &str, song_id: &str, k: usize) -> PathBuf {
    root.join(model).join(song_id).join(format!("source_{}.wav", k + 1))
}

#[derive(Debug, Clone)]
pub struct ReproduceOutput {
    pub results: Vec<SongResult>,
    pub summaries: Vec<ModelSummary>,
    pub oracle: Vec<ModelSummary>,
}

/// The full experiment: generate the corpus if `corpus_root` has no
/// manifest, train every model, separate and score the test split.
///
/// Writes under `out`: `config.toml`, `models/`, `estimates/<model>/<song>/`,
/// `metrics.csv`, `song_averages.csv`, `summary.csv` and
/// `oracle_summary.csv`.
pub fn reproduce(corpus_root: &Path, cfg: &PipelineConfig, out: &Path, jobs: usize) -> Result<ReproduceOutput> {
    cfg.validate()?;
    if !corpus_root.join(MANIFEST_FILE).is_file() {
        log::info!("no manifest in {}, generating corpus", corpus_root.display());
        generate_synthetic_corpus(&cfg.synth, corpus_root)?;
    }
    let corpus = load_corpus(corpus_root)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    save_config(cfg, &out.join("config.toml"))?;

    let models = train_all(&corpus, cfg)?;
    save_models(&models, &out.join("models"))?;

    let test = corpus.split(Split::Test);
    let names = models.model_names();
    let (results, estimates) = run_experiment(&test, &models, &names, cfg, jobs)?;
    let est_root = out.join("estimates");
    for e in &estimates {
        for (k, w) in e.sources.iter().enumerate() {
            write_wav(w, &estimate_path(&est_root, &e.model, &e.song_id, k), BitDepth::Float32)?;
        }
    }
    let summaries = summarize(&results);
    write_text(&out.join("metrics.csv"), &metrics_csv(&results))?;
    write_text(&out.join("song_averages.csv"), &song_average_csv(&results))?;
    write_text(&out.join("summary.csv"), &summary_csv(&summaries))?;

    let oracle = summarize(&run_oracle(&test, cfg, jobs)?);
    write_text(&out.join("oracle_summary.csv"), &summary_csv(&oracle))?;
    Ok(ReproduceOutput {
        results,
        summaries,
        oracle,
    })
}
