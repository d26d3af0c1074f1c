use std::path::{Path, PathBuf};

use maskforge::data_io::{
    generate_synthetic_corpus, load_config, load_corpus, read_wav, save_config, write_wav,
    BitDepth, SynthSpec, CONFIG_FILE,
};
use maskforge::dsp::align_lengths;
use maskforge::eval::{
    metrics_csv, song_average_csv, song_report, summarize, summary_csv, summary_table, SongResult,
};
use maskforge::neural::{load_mlp, save_mlp};
use maskforge::nmf::{load_basis, save_basis};
use maskforge::pipeline::{
    cost_trace_csv, estimate_path, gen_enh_training, reproduce, separate_with, train_dnn_a,
    train_dnn_b, train_nmf_bases, Enhancer, PipelineConfig, Split, MODEL_N, MODEL_S,
};
use maskforge::{Error, Result};

use crate::args::{
    Cli, Command, CorpusArgs, Evaluate, GenData, Reproduce, Separate, TrainEnh, TrainNmf,
    TrainSep,
};

pub fn run(cli: Cli) -> Result<()> {
    let jobs = cli.jobs as usize;
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::TrainSep(a) => train_sep(a),
        Command::TrainEnh(a) => train_enh(a),
        Command::TrainNmf(a) => train_nmf(a),
        Command::Separate(a) => separate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Reproduce(a) => run_reproduce(a, jobs),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(parent) => create_dir(parent),
        None => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

/// `dir/name.model` → `dir/name.costs.csv`.
fn cost_trace_path(model: &Path) -> PathBuf {
    model.with_extension("costs.csv")
}

/// `dir/report.csv` → `dir/report.<suffix>.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Explicit config, else `<corpus>/config.toml`, else the desk preset; then
/// the seed override.
fn resolve_config(args: &CorpusArgs) -> Result<PipelineConfig> {
    let default_path = args.corpus.join(CONFIG_FILE);
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None if default_path.is_file() => load_config(&default_path)?,
        None => {
            log::info!("no config given, using the desk preset");
            PipelineConfig::desk()
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn gen_data(a: GenData) -> Result<()> {
    if a.songs.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "--songs takes three counts (train_a,train_b,test), got {}",
            a.songs.len()
        )));
    }
    let spec = SynthSpec {
        songs_per_split: [a.songs[0], a.songs[1], a.songs[2]],
        duration_s: a.duration,
        sample_rate: a.rate,
        seed: a.seed,
    };
    spec.validate()?;
    let (corpus, _) = generate_synthetic_corpus(&spec, &a.out)?;
    let mut cfg = PipelineConfig::desk();
    cfg.seed = a.seed;
    cfg.synth = spec;
    save_config(&cfg, &a.out.join(CONFIG_FILE))?;
    println!(
        "wrote {} songs and {CONFIG_FILE} to {}",
        corpus.songs.len(),
        a.out.display()
    );
    Ok(())
}

fn train_sep(a: TrainSep) -> Result<()> {
    let cfg = resolve_config(&a.corpus)?;
    let corpus = load_corpus(&a.corpus.corpus)?;
    let out = train_dnn_a(&corpus.split(Split::TrainA), &cfg)?;
    ensure_parent(&a.out)?;
    save_mlp(&out.net, &a.out)?;
    write_text(&cost_trace_path(&a.out), &cost_trace_csv(&out.costs))?;
    println!("final cost {:.6}", out.costs.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

fn train_enh(a: TrainEnh) -> Result<()> {
    if !(0.0..1.0).contains(&a.lambda) {
        return Err(Error::InvalidConfig(format!(
            "lambda {} outside [0, 1)",
            a.lambda
        )));
    }
    let cfg = resolve_config(&a.corpus)?;
    let dnn_a = load_mlp(&a.dnn_a)?;
    let corpus = load_corpus(&a.corpus.corpus)?;
    let (u, v) = gen_enh_training(&corpus.split(Split::TrainB), &dnn_a, &cfg)?;
    let out = train_dnn_b(u.view(), v.view(), a.lambda, &cfg)?;
    ensure_parent(&a.out)?;
    save_mlp(&out.net, &a.out)?;
    write_text(&cost_trace_path(&a.out), &cost_trace_csv(&out.costs))?;
    println!(
        "model {}: final cost {:.6}",
        out.net.tag,
        out.costs.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn train_nmf(a: TrainNmf) -> Result<()> {
    let mut cfg = resolve_config(&a.corpus)?;
    if let Some(k) = a.k {
        cfg.nmf.rank = k;
        cfg.validate()?;
    }
    let corpus = load_corpus(&a.corpus.corpus)?;
    let (vocal, acc) = train_nmf_bases(&corpus.split(Split::TrainB), &cfg)?;
    create_dir(&a.out)?;
    save_basis(&vocal, &a.out.join("nmf_vocal.basis"))?;
    save_basis(&acc, &a.out.join("nmf_accompaniment.basis"))?;
    println!("wrote {} basis vectors per source to {}", cfg.nmf.rank, a.out.display());
    Ok(())
}

/// Desk preset with the STFT geometry implied by a separator's width.
fn config_for_width(bins: usize) -> Result<PipelineConfig> {
    if bins < 3 {
        return Err(Error::InvalidConfig(format!(
            "separator width {bins} does not correspond to an STFT"
        )));
    }
    let mut cfg = PipelineConfig::desk();
    let fft_len = 2 * (bins - 1);
    cfg.stft.fft_len = fft_len;
    cfg.stft.window_len = fft_len;
    cfg.stft.hop = (fft_len / 4).max(1);
    Ok(cfg)
}

fn separate(a: Separate) -> Result<()> {
    let mixture = read_wav(&a.mixture)?;
    let dnn_a = load_mlp(&a.dnn_a)?;
    let cfg = match &a.config {
        Some(path) => load_config(path)?,
        None => config_for_width(dnn_a.input_width())?,
    };
    let dnn_b = a.dnn_b.as_deref().map(load_mlp).transpose()?;
    let bases = match &a.nmf {
        Some(paths) => Some((load_basis(&paths[0])?, load_basis(&paths[1])?)),
        None => None,
    };
    let enhancer = match (&dnn_b, &bases) {
        (Some(net), _) => Enhancer::Dnn(net),
        (None, Some((v, acc))) => Enhancer::Nmf(v, acc),
        (None, None) => Enhancer::None,
    };
    let sep = separate_with(&mixture, &dnn_a, enhancer, &cfg)?;
    create_dir(&a.out)?;
    for (k, w) in sep.waveforms.iter().enumerate() {
        write_wav(w, &a.out.join(format!("source_{}.wav", k + 1)), BitDepth::Float32)?;
    }
    println!("wrote {} sources to {}", sep.waveforms.len(), a.out.display());
    Ok(())
}

/// S, N, then D tags in numeric order, then anything else by name.
fn model_order(name: &str) -> (u8, f64, String) {
    if name == MODEL_S {
        (0, 0.0, String::new())
    } else if name == MODEL_N {
        (1, 0.0, String::new())
    } else if let Some(v) = name.strip_prefix('D').and_then(|r| r.parse::<f64>().ok()) {
        (2, v, String::new())
    } else {
        (3, 0.0, name.to_string())
    }
}

fn sort_models<S: AsRef<str>>(models: &mut [S]) {
    models.sort_by(|a, b| {
        let (ka, kb) = (model_order(a.as_ref()), model_order(b.as_ref()));
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.cmp(&kb.2))
    });
}

fn list_models(estimates: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(estimates)
        .map_err(|e| Error::io(format!("reading {}", estimates.display()), e))?;
    let mut models = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(format!("reading {}", estimates.display()), e))?;
        if entry.path().is_dir() {
            models.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    sort_models(&mut models);
    if models.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no model directories under {}",
            estimates.display()
        )));
    }
    Ok(models)
}

fn evaluate(a: Evaluate) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let test = corpus.split(Split::Test);
    let models = list_models(&a.estimates)?;
    let mut results = Vec::with_capacity(models.len() * test.len());
    for model in &models {
        for song in &test {
            let refs = song.references();
            let estimates = (0..refs.len())
                .map(|k| read_wav(&estimate_path(&a.estimates, model, &song.id, k)))
                .collect::<Result<Vec<_>>>()?;
            let aligned = align_lengths(&estimates.iter().chain(&refs).collect::<Vec<_>>());
            let (est, refs) = aligned.split_at(refs.len());
            results.push(SongResult {
                song_id: song.id.clone(),
                model: model.clone(),
                report: song_report(est, refs)?,
            });
        }
    }
    let summaries = summarize(&results);
    write_text(&a.out, &metrics_csv(&results))?;
    write_text(&sibling(&a.out, "songs"), &song_average_csv(&results))?;
    write_text(&sibling(&a.out, "summary"), &summary_csv(&summaries))?;
    print!("{}", summary_table(&summaries));
    Ok(())
}

fn run_reproduce(a: Reproduce, jobs: usize) -> Result<()> {
    let cfg = resolve_config(&a.corpus)?;
    let out = reproduce(&a.corpus.corpus, &cfg, &a.out, jobs)?;
    print!("{}", summary_table(&out.summaries));
    println!("oracle ratio masks:");
    print!("{}", summary_table(&out.oracle));
    Ok(())
}
