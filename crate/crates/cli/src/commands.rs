use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dualenc::analysis::{
    emit_scatter, language_representations, laplacian_eigenmap, score_matrix, SvccaScoreMatrix,
};
use dualenc::config::RunConfig;
use dualenc::corpus::{
    generate_world, read_image_text_file, read_rating_file, read_translation_file, translate_train_augment,
    BilingualDictionary, ImageTextExample, TranslationExample, EVAL_I2T_FILE, RATINGS_FILE, TRAIN_I2T_FILE,
    TRAIN_T2T_FILE,
};
use dualenc::evaluation::{correlation_eval, evaluate_split, translate_test_eval, EvalOptions, LanguageReport};
use dualenc::experiment::{average_mean_recall, train_model};
use dualenc::trainer::{config_hash, load_checkpoint, save_checkpoint, write_log, Checkpoint};
use dualenc::{Error, Result};
use serde::Serialize;
use serde_json::json;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| io_err(dir, e)),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn data_file(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.paths.data_dir.join(name)
}

fn model_id(path: &Path, ckpt: &Checkpoint) -> String {
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    format!("{name}@{}", &ckpt.config_hash[..12])
}

fn eval_options(cfg: &RunConfig) -> EvalOptions {
    EvalOptions {
        text_head: cfg.eval.text_head,
    }
}

/// Dictionaries from each non-pivot language into the pivot that exist on disk.
fn read_dictionaries(cfg: &RunConfig) -> Result<Vec<BilingualDictionary>> {
    let pivot = cfg.world.pivot();
    let mut out = Vec::new();
    for lang in &cfg.world.languages[1..] {
        let path = data_file(cfg, &BilingualDictionary::file_name(lang, pivot));
        if path.exists() {
            out.push(BilingualDictionary::read(&path, lang, pivot)?);
        }
    }
    Ok(out)
}

fn read_eval_split(cfg: &RunConfig, ckpt: &Checkpoint) -> Result<Vec<ImageTextExample>> {
    read_image_text_file(&data_file(cfg, EVAL_I2T_FILE), Some(ckpt.params.dims().d_img))
}

pub fn gen(cfg: &RunConfig) -> Result<()> {
    let world = generate_world(&cfg.world)?;
    world.write(&cfg.paths.data_dir)?;
    println!(
        "wrote {} image-caption pairs, {} translation pairs, {} eval pairs to {}",
        world.all_train_i2t().len(),
        world.all_train_t2t().len(),
        world.all_eval_i2t().len(),
        cfg.paths.data_dir.display()
    );
    Ok(())
}

/// Training pairs from the data directory. The translation corpus is read
/// when `need_t2t` is set or the file exists.
fn training_corpora(cfg: &RunConfig, need_t2t: bool) -> Result<(Vec<ImageTextExample>, Vec<TranslationExample>)> {
    let mut i2t = read_image_text_file(&data_file(cfg, TRAIN_I2T_FILE), Some(cfg.model.d_img))?;
    if !cfg.i2t_languages.is_empty() {
        i2t.retain(|e| cfg.i2t_languages.contains(&e.lang));
    }
    if cfg.translate_train {
        let from_pivot: Vec<_> = read_dictionaries(cfg)?.iter().map(BilingualDictionary::inverted).collect();
        let extra = translate_train_augment(&i2t, &from_pivot);
        log::info!("translate-train added {} pairs", extra.len());
        i2t.extend(extra);
    }
    let t2t_path = data_file(cfg, TRAIN_T2T_FILE);
    let t2t = if need_t2t || t2t_path.exists() {
        read_translation_file(&t2t_path)?
    } else {
        Vec::new()
    };
    Ok((i2t, t2t))
}

fn train_and_save(
    cfg: &RunConfig,
    i2t: &[ImageTextExample],
    t2t: &[TranslationExample],
    checkpoint: &Path,
    log_path: Option<&Path>,
) -> Result<Checkpoint> {
    let init = match &cfg.init_checkpoint {
        Some(p) => {
            let c = load_checkpoint(p)?;
            Some((c.params, c.optimizer, c.vocab))
        }
        None => None,
    };
    let model = train_model(i2t, t2t, &cfg.model, &cfg.train, &cfg.loss, init)?;
    if let Some(p) = log_path {
        ensure_parent(p)?;
        write_log(p, &model.log)?;
    }
    let ckpt = Checkpoint::new(model.params, model.optimizer, model.vocab, cfg.to_map());
    ensure_parent(checkpoint)?;
    save_checkpoint(checkpoint, &ckpt)?;
    if let Some(last) = model.log.last() {
        log::info!("step {}: total loss {:.5}", last.step, last.total);
    }
    Ok(ckpt)
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let (i2t, t2t) = training_corpora(cfg, cfg.loss.w_t2t > 0.0)?;
    train_and_save(cfg, &i2t, &t2t, &cfg.paths.checkpoint, Some(&cfg.paths.log))?;
    println!("wrote {} and {}", cfg.paths.checkpoint.display(), cfg.paths.log.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let path = &cfg.paths.checkpoint;
    let ckpt = load_checkpoint(path)?;
    let split = read_eval_split(cfg, &ckpt)?;
    let opts = eval_options(cfg);
    let per_lang = evaluate_split(&ckpt.params, &ckpt.vocab, &split, Some(cfg.world.pivot()), &opts)?;
    let ratings_path = data_file(cfg, RATINGS_FILE);
    let correlations = if cfg.eval.correlations && ratings_path.exists() {
        let rated = read_rating_file(&ratings_path)?;
        Some(correlation_eval(&ckpt.params, &ckpt.vocab, &rated, &split, &opts)?)
    } else {
        None
    };
    let config = cfg.to_map();
    let doc = json!({
        "model_id": model_id(path, &ckpt),
        "split": EVAL_I2T_FILE,
        "per_lang": per_lang,
        "correlations": correlations,
        "config_hash": config_hash(&config),
        "config": config,
    });
    write_json(&cfg.paths.report, &doc)?;
    for r in &per_lang {
        println!("{}\tmean_recall {:.4}", r.lang, r.mean_recall);
    }
    Ok(())
}

pub fn translate_test(cfg: &RunConfig) -> Result<()> {
    let path = &cfg.paths.checkpoint;
    let ckpt = load_checkpoint(path)?;
    let split = read_eval_split(cfg, &ckpt)?;
    let dicts = read_dictionaries(cfg)?;
    let outcomes = translate_test_eval(&ckpt.params, &ckpt.vocab, cfg.world.pivot(), &dicts, &split)?;
    let config = cfg.to_map();
    let doc = json!({
        "model_id": model_id(path, &ckpt),
        "split": EVAL_I2T_FILE,
        "pivot": cfg.world.pivot(),
        "per_lang": outcomes,
        "config_hash": config_hash(&config),
        "config": config,
    });
    write_json(&cfg.paths.translate_report, &doc)?;
    println!("wrote {}", cfg.paths.translate_report.display());
    Ok(())
}

pub fn svcca(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_checkpoint(&cfg.paths.checkpoint)?;
    let split = read_eval_split(cfg, &ckpt)?;
    let reps = language_representations(&ckpt.params, &ckpt.vocab, &split, cfg.analysis.source)?;
    let scores = score_matrix(&reps, cfg.analysis.variance_threshold, cfg.analysis.ridge)?;
    write_json(&cfg.paths.svcca, &scores)?;
    println!("wrote {}", cfg.paths.svcca.display());
    Ok(())
}

pub fn map(cfg: &RunConfig) -> Result<()> {
    let path = &cfg.paths.svcca;
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let scores: SvccaScoreMatrix = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let coords = laplacian_eigenmap(&scores)?;
    let groups: BTreeMap<String, String> = scores
        .langs
        .iter()
        .map(|l| (l.clone(), cfg.world.family_of(l).to_string()))
        .collect();
    write_json(&cfg.paths.map, &coords)?;
    ensure_parent(&cfg.paths.plot)?;
    emit_scatter(&coords, &groups, &cfg.paths.plot)?;
    println!("wrote {} and {}", cfg.paths.map.display(), cfg.paths.plot.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    w_t2t: f64,
    checkpoint: String,
    mean_recall: BTreeMap<String, f64>,
    average: f64,
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let (i2t, t2t) = training_corpora(cfg, cfg.sweep_w_t2t.iter().any(|&w| w > 0.0))?;
    let dir = &cfg.paths.sweep_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut rows = Vec::new();
    for &w in &cfg.sweep_w_t2t {
        let mut run = cfg.clone();
        run.set("loss.w_t2t", &w.to_string())?;
        let ckpt_path = dir.join(format!("model_w_t2t_{w}.ckpt"));
        let ckpt = train_and_save(&run, &i2t, &t2t, &ckpt_path, None)?;
        let split = read_eval_split(&run, &ckpt)?;
        let reports: BTreeMap<String, LanguageReport> =
            evaluate_split(&ckpt.params, &ckpt.vocab, &split, None, &eval_options(&run))?
                .into_iter()
                .map(|r| (r.lang.clone(), r))
                .collect();
        let average = average_mean_recall(&reports, reports.keys().map(String::as_str));
        log::info!("w_t2t {w}: average mean recall {average:.4}");
        rows.push(SweepRow {
            w_t2t: w,
            checkpoint: ckpt_path.display().to_string(),
            mean_recall: reports.iter().map(|(l, r)| (l.clone(), r.mean_recall)).collect(),
            average,
        });
    }

    let langs: Vec<String> = rows.first().map(|r| r.mean_recall.keys().cloned().collect()).unwrap_or_default();
    let mut table = String::from("lang");
    for r in &rows {
        table.push_str(&format!("\tw_t2t={}", r.w_t2t));
    }
    table.push('\n');
    for lang in langs.iter().map(String::as_str).chain(["average"]) {
        table.push_str(lang);
        for r in &rows {
            let v = if lang == "average" { r.average } else { r.mean_recall[lang] };
            table.push_str(&format!("\t{v:.4}"));
        }
        table.push('\n');
    }
    let table_path = dir.join("summary.tsv");
    fs::write(&table_path, &table).map_err(|e| io_err(&table_path, e))?;
    let config = cfg.to_map();
    write_json(
        &dir.join("summary.json"),
        &json!({ "rows": rows, "config_hash": config_hash(&config), "config": config }),
    )?;
    print!("{table}");
    Ok(())
}
