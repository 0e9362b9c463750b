use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use emoser_core::audio::read_wav;
use emoser_core::models::{self, gradient_suite, load_checkpoint, save_checkpoint, Model, ModelKind};
use emoser_core::ravdess::{
    load_examples, read_feature_cache, scan_corpus, split_indices, stage_archive, write_feature_cache, CachedExample,
    FeatureCache, SplitIndices,
};
use emoser_core::train::{
    compare_models, evaluate, export_history, init_rng, render_curves, train_with_progress, HistoryFormat,
};

use crate::config::AppConfig;
use crate::{Command, ModelArg, UsageError};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Prepare {
            corpus,
            out,
            archive,
            config,
        } => {
            let cfg = AppConfig::load(config.as_deref())?;
            let corpus = required(corpus, &cfg.paths.corpus, "--corpus")?;
            let out = required(out, &cfg.paths.cache, "--out")?;
            prepare(&cfg, &corpus, &out, archive.as_deref())
        }
        Command::Split {
            cache,
            ratio,
            seed,
            strategy,
            out,
            config,
        } => {
            let mut cfg = AppConfig::load(config.as_deref())?;
            if let Some(r) = ratio {
                cfg.split.ratio = r;
            }
            if let Some(s) = seed {
                cfg.split.seed = s;
            }
            if let Some(s) = strategy {
                cfg.split.strategy = s.into();
            }
            cfg.validate().map_err(|e| UsageError(e.to_string()))?;
            let cache = required(cache, &cfg.paths.cache, "--cache")?;
            split(&cfg, &cache, &out)
        }
        Command::Train {
            cache,
            split,
            config,
            model,
            checkpoint_out,
            history_out,
            curves_out,
            epochs,
        } => {
            let mut cfg = AppConfig::load(config.as_deref())?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(m) = model {
                cfg.model.kind = match m {
                    ModelArg::Cnn => ModelKind::CnnFig1,
                    ModelArg::Dnn => ModelKind::DnnBaseline,
                };
            }
            cfg.validate().map_err(|e| UsageError(e.to_string()))?;
            let cache = required(cache, &cfg.paths.cache, "--cache")?;
            let checkpoint_out = required(checkpoint_out, &cfg.paths.checkpoint, "--checkpoint-out")?;
            train(
                &cfg,
                &cache,
                split.as_deref(),
                &checkpoint_out,
                history_out.as_deref(),
                curves_out.as_deref(),
            )
        }
        Command::Eval {
            checkpoint,
            cache,
            split,
            report_out,
            config,
        } => {
            let cfg = AppConfig::load(config.as_deref())?;
            let checkpoint = required(checkpoint, &cfg.paths.checkpoint, "--checkpoint")?;
            let cache = required(cache, &cfg.paths.cache, "--cache")?;
            let report_out = report_out.or_else(|| cfg.paths.reports.as_ref().map(|d| d.join("eval.json")));
            eval(&checkpoint, &cache, split.as_deref(), report_out.as_deref())
        }
        Command::Compare {
            cache,
            split,
            config,
            report_out,
            epochs,
        } => {
            let mut cfg = AppConfig::load(config.as_deref())?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate().map_err(|e| UsageError(e.to_string()))?;
            let cache = required(cache, &cfg.paths.cache, "--cache")?;
            let report_out = report_out.or_else(|| cfg.paths.reports.as_ref().map(|d| d.join("compare.json")));
            compare(&cfg, &cache, split.as_deref(), report_out.as_deref())
        }
        Command::Predict { checkpoint, wav } => predict(&checkpoint, &wav),
        Command::Gradcheck { seed, seeds } => gradcheck(seed, seeds),
        Command::Serve {
            checkpoint,
            addr,
            static_dir,
        } => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(emoser_serve::start(&checkpoint, &addr, static_dir.as_deref()))?;
            Ok(())
        }
    }
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| UsageError(format!("{name} is required (or set it under \"paths\" in the config)")).into())
}

fn prepare(cfg: &AppConfig, corpus: &Path, out: &Path, archive: Option<&Path>) -> Result<()> {
    if let Some(archive) = archive {
        let report = stage_archive(archive, corpus)?;
        println!("extracted {} files from {}", report.extracted_files, archive.display());
    }
    let (entries, census) = scan_corpus(corpus)?;
    print!("{census}");
    if entries.is_empty() {
        bail!("no RAVDESS speech recordings found under {}", corpus.display());
    }
    let examples = load_examples(&entries, &cfg.pipeline)?;
    let cache = FeatureCache {
        config: cfg.pipeline.clone(),
        examples: examples.iter().map(CachedExample::from).collect(),
    };
    write_feature_cache(&cache, out)?;
    let (h, w) = cache.shape();
    println!("wrote {} examples ({h}x{w}) to {}", cache.examples.len(), out.display());
    Ok(())
}

fn split(cfg: &AppConfig, cache: &Path, out: &Path) -> Result<()> {
    let cache = read_feature_cache(cache)?;
    let idx = split_indices(&cache.examples, cfg.split.ratio, cfg.split.seed, cfg.split.strategy)?;
    let json = serde_json::to_string_pretty(&idx)?;
    fs::write(out, json).with_context(|| format!("cannot write {}", out.display()))?;
    println!(
        "train {} / test {} ({:?}, ratio {}, seed {}) -> {}",
        idx.train.len(),
        idx.test.len(),
        idx.strategy,
        idx.ratio,
        idx.seed,
        out.display()
    );
    Ok(())
}

fn read_split(path: &Path, n: usize) -> Result<SplitIndices> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read split {}", path.display()))?;
    let idx: SplitIndices =
        serde_json::from_str(&text).with_context(|| format!("malformed split {}", path.display()))?;
    let mut seen = vec![false; n];
    for &i in idx.train.iter().chain(&idx.test) {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            bail!("split {} does not match a cache of {n} examples", path.display());
        }
    }
    if seen.iter().any(|s| !s) {
        bail!("split {} does not cover all {n} cached examples", path.display());
    }
    Ok(idx)
}

/// Train and test sides of the cache.
fn partition<'a>(
    cache: &'a FeatureCache,
    split: Option<&Path>,
    cfg: &AppConfig,
) -> Result<(Vec<&'a CachedExample>, Vec<&'a CachedExample>)> {
    let idx = match split {
        Some(path) => read_split(path, cache.examples.len())?,
        None => split_indices(&cache.examples, cfg.split.ratio, cfg.split.seed, cfg.split.strategy)?,
    };
    let pick = |ids: &[usize]| ids.iter().map(|&i| &cache.examples[i]).collect::<Vec<_>>();
    Ok((pick(&idx.train), pick(&idx.test)))
}

fn load_cache(path: &Path, cfg: &AppConfig) -> Result<FeatureCache> {
    let cache = read_feature_cache(path)?;
    if cache.config != cfg.pipeline {
        log::warn!(
            "using the pipeline settings stored in {}, not those in the config",
            path.display()
        );
    }
    Ok(cache)
}

fn print_epoch(prefix: &str, r: &emoser_core::train::EpochRecord, total: usize) {
    eprintln!(
        "{prefix}epoch {:>3}/{total}  train_loss {:.4}  train_acc {:.4}  val_loss {:.4}  val_acc {:.4}",
        r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
    );
}

fn train(
    cfg: &AppConfig,
    cache: &Path,
    split: Option<&Path>,
    checkpoint_out: &Path,
    history_out: Option<&Path>,
    curves_out: Option<&Path>,
) -> Result<()> {
    let cache = load_cache(cache, cfg)?;
    let (train_set, test_set) = partition(&cache, split, cfg)?;
    let mut model = Model::build(
        cfg.model.kind,
        &cache.config,
        cfg.model.num_classes,
        &mut init_rng(cfg.train.seed),
    )?;
    eprintln!(
        "training {} ({} parameters) on {} examples, validating on {}",
        model.kind().display_name(),
        model.param_count(),
        train_set.len(),
        test_set.len()
    );
    let history = train_with_progress(&mut model, &train_set, &test_set, &cfg.train, |r| {
        print_epoch("", r, cfg.train.epochs)
    })?;
    save_checkpoint(&model, checkpoint_out)?;
    println!("checkpoint written to {}", checkpoint_out.display());
    if let Some(path) = history_out {
        export_history(&history, path, HistoryFormat::from_path(path))?;
        println!("history written to {}", path.display());
    }
    if let Some(path) = curves_out {
        render_curves(&history, path)?;
        println!("curves written to {}", path.display());
    }
    let last = history.last().expect("at least one epoch");
    println!(
        "final train_loss {:.4} train_acc {:.4} val_loss {:.4} val_acc {:.4}",
        last.train_loss, last.train_acc, last.val_loss, last.val_acc
    );
    Ok(())
}

fn write_json(path: &Path, json: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, json).with_context(|| format!("cannot write {}", path.display()))
}

fn eval(checkpoint: &Path, cache: &Path, split: Option<&Path>, report_out: Option<&Path>) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    let cache = read_feature_cache(cache)?;
    if cache.config != model.pipeline {
        bail!("cache features were made with different pipeline settings than the checkpoint");
    }
    let set: Vec<&CachedExample> = match split {
        Some(path) => {
            let idx = read_split(path, cache.examples.len())?;
            idx.test.iter().map(|&i| &cache.examples[i]).collect()
        }
        None => cache.examples.iter().collect(),
    };
    let report = evaluate(&model, &set)?;
    print!("{report}");
    if let Some(path) = report_out {
        write_json(path, &serde_json::to_string_pretty(&report)?)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn compare(cfg: &AppConfig, cache: &Path, split: Option<&Path>, report_out: Option<&Path>) -> Result<()> {
    let cache = load_cache(cache, cfg)?;
    let (train_set, test_set) = partition(&cache, split, cfg)?;
    let total = cfg.train.epochs;
    let report = compare_models(
        &train_set,
        &test_set,
        &cache.config,
        cfg.model.num_classes,
        &cfg.train,
        |kind, r| print_epoch(&format!("[{}] ", kind.display_name()), r, total),
    )?;
    print!("{report}");
    if let Some(path) = report_out {
        write_json(path, &report.to_json())?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn predict(checkpoint: &Path, wav: &Path) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    let bytes = fs::read(wav).with_context(|| format!("cannot read {}", wav.display()))?;
    let clip = read_wav(&bytes).with_context(|| wav.display().to_string())?;
    let scores = models::predict(&model, &clip)?;
    println!("{}", serde_json::to_string_pretty(&scores)?);
    Ok(())
}

fn gradcheck(first: u64, count: u64) -> Result<()> {
    if count == 0 {
        return Err(UsageError("--seeds must be at least 1".into()).into());
    }
    let mut worst: Vec<models::SuiteEntry> = Vec::new();
    for seed in first..first + count {
        for entry in gradient_suite(seed)? {
            match worst.iter_mut().find(|w| w.name == entry.name) {
                Some(w) => w.report.merge(&entry.report),
                None => worst.push(entry),
            }
        }
    }
    println!(
        "{:<16} {:>14} {:>10} {:>9} {:>9}  status",
        "check", "max_rel_error", "tolerance", "checked", "skipped"
    );
    let mut failed = 0;
    for w in &worst {
        let ok = w.passed();
        failed += usize::from(!ok);
        println!(
            "{:<16} {:>14.3e} {:>10.0e} {:>9} {:>9}  {}",
            w.name,
            w.report.max_rel_error,
            w.tolerance,
            w.report.checked,
            w.report.skipped,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!("{count} seeds starting at {first}");
    if failed > 0 {
        bail!("{failed} gradient checks exceeded their tolerance");
    }
    Ok(())
}
