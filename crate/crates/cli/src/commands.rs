use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fadkit_core::embedding::{
    generate_synthetic, listing_hash, read_set, write_set, EmbeddingModelInfo, EmbeddingSet,
    SyntheticSpec,
};
use fadkit_core::estimators::{
    extreme_count, fad_infinity, fad_set, outlier_report, per_song_scores, resolve_sizes,
    BootstrapPool, BootstrapUnit, FadInfConfig, SongScoreTable,
};
use fadkit_core::eval::{
    align_truth, binarize_labels, pearson_by_testset, predict_labels, prf, read_labels_csv,
    read_mos_csv, sensitivity_normalize, PrfResult, QualityTarget,
};
use fadkit_core::format::sig6;
use fadkit_core::stats::{fit_set, frechet_distance, FadScore, GaussianStats, StatsCache};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::report::Report;
use crate::RefArgs;

pub struct InfOptions {
    pub sizes: Option<Vec<usize>>,
    pub repeats: usize,
    pub seed: u64,
    pub unit: BootstrapUnit,
}

struct Reference {
    stats: GaussianStats,
    id: String,
}

fn load_reference(args: &RefArgs) -> Result<Reference> {
    let path = &args.reference;
    let id = path.display().to_string();
    if path.is_dir() {
        let set = read_set(path)?;
        return Ok(Reference {
            stats: fit_set(&set)?,
            id,
        });
    }
    let verify = match (&args.ref_dir, args.no_verify) {
        (Some(dir), _) => Some(dir.as_path()),
        (None, true) => None,
        (None, false) => bail!(
            "{id}: cannot verify the cache without its set directory; pass --ref-dir DIR or --no-verify"
        ),
    };
    Ok(Reference {
        stats: StatsCache::load(path, verify)?.stats,
        id,
    })
}

fn read_test_set(dir: &Path, reference: &Reference) -> Result<EmbeddingSet> {
    let set = read_set(dir)?;
    ensure!(
        set.dim() == reference.stats.dim(),
        "{}: dim {} does not match reference dim {}",
        dir.display(),
        set.dim(),
        reference.stats.dim()
    );
    Ok(set)
}

fn describe_reference(report: &mut Report, reference: &Reference) {
    report.set("reference", reference.id.as_str());
    report.set("reference_frames", reference.stats.count());
    report.set("dim", reference.stats.dim());
}

fn flags_of(score: &FadScore) -> Vec<&'static str> {
    score.flags.iter().map(|f| f.as_str()).collect()
}

pub fn stats(ref_dir: &Path, cache_path: &Path) -> Result<Report> {
    let set = read_set(ref_dir)?;
    let stats = fit_set(&set)?;
    let cache = StatsCache {
        source_hash: listing_hash(ref_dir)?,
        stats,
    };
    cache.write(cache_path)?;
    let mut report = Report::new("stats");
    report.set("ref_dir", ref_dir.display().to_string());
    report.set("cache", cache_path.display().to_string());
    let (songs, frames, dim) = (set.songs.len(), cache.stats.count(), cache.stats.dim());
    report.body.insert("songs".into(), json!(songs));
    report.body.insert("frames".into(), json!(frames));
    report.body.insert("dim".into(), json!(dim));
    report.csv = format!("songs,frames,dim\n{songs},{frames},{dim}\n");
    report.text = format!("fitted {songs} songs, {frames} frames, dim {dim}\n");
    Ok(report)
}

pub fn score(args: &RefArgs, test_dir: &Path, inf: Option<InfOptions>) -> Result<Report> {
    let reference = load_reference(args)?;
    let set = read_test_set(test_dir, &reference)?;
    let plain = fad_set(&reference.stats, &set.songs)?;

    let mut report = Report::new("score");
    describe_reference(&mut report, &reference);
    report.set("test_dir", test_dir.display().to_string());
    report.set("test_songs", plain.n_songs);
    report.set("test_frames", plain.n_frames);

    let s = &plain.score;
    report.body.insert(
        "fad".into(),
        json!({
            "value": s.value,
            "mean_term": s.mean_term,
            "trace_term": s.trace_term,
            "flags": flags_of(s),
            "undersampled": plain.undersampled,
        }),
    );
    let mut csv_header = "fad,mean_term,trace_term,n_songs,n_frames,flags".to_string();
    let mut csv_row = format!(
        "{},{},{},{},{},{}",
        s.value,
        s.mean_term,
        s.trace_term,
        plain.n_songs,
        plain.n_frames,
        flags_of(s).join(";")
    );
    let mut text = format!("fad {}\n", sig6(s.value));
    if !s.flags.is_empty() {
        text.push_str(&format!("flags {}\n", flags_of(s).join(";")));
    }
    if plain.undersampled {
        text.push_str("warning: fewer test frames than dim + 1, covariance is singular\n");
    }

    if let Some(opts) = inf {
        let pool = match opts.unit {
            BootstrapUnit::Frame => BootstrapPool::frames_of(&set.songs)?,
            BootstrapUnit::Song => BootstrapPool::songs_of(&set.songs)?,
        };
        let sizes = resolve_sizes(&pool, reference.stats.dim(), opts.sizes.as_deref())?;
        let grid = if opts.sizes.is_some() {
            "given"
        } else {
            "default"
        };
        report.set("sizes", json!(sizes));
        report.set("sizes_source", grid);
        report.set("repeats", opts.repeats);
        report.set("seed", opts.seed);
        report.set("unit", unit_name(opts.unit));
        let config = FadInfConfig {
            sizes: Some(sizes),
            repeats: opts.repeats,
            seed: opts.seed,
            unit: opts.unit,
        };
        let est = fad_infinity(&reference.stats, &pool, &config)?;
        report
            .body
            .insert("fad_inf".into(), serde_json::to_value(&est)?);
        csv_header.push_str(",fad_inf,slope,r_squared,unstable");
        csv_row.push_str(&format!(
            ",{},{},{},{}",
            est.fad_inf, est.slope, est.r_squared, est.unstable
        ));
        text.push_str(&format!(
            "fad_inf {}  slope {}  r2 {}\n",
            sig6(est.fad_inf),
            sig6(est.slope),
            sig6(est.r_squared)
        ));
        if est.unstable {
            text.push_str("warning: intercept is well below zero, the extrapolation is unstable\n");
        }
        text.push_str("  size      mean fad\n");
        for p in &est.points {
            text.push_str(&format!("  {:>8}  {}\n", p.size, sig6(p.mean_fad)));
        }
    }
    report.csv = format!("{csv_header}\n{csv_row}\n");
    report.text = text;
    Ok(report)
}

fn unit_name(unit: BootstrapUnit) -> &'static str {
    match unit {
        BootstrapUnit::Frame => "frame",
        BootstrapUnit::Song => "song",
    }
}

pub fn songs(
    args: &RefArgs,
    test_dir: &Path,
    fraction: f64,
    top_k: Option<usize>,
    scores_out: Option<&Path>,
) -> Result<Report> {
    ensure!(
        fraction > 0.0 && fraction < 0.5,
        "--fraction must be in (0, 0.5), got {fraction}"
    );
    let reference = load_reference(args)?;
    let set = read_test_set(test_dir, &reference)?;
    let table = per_song_scores(&reference.stats, &set.songs, &reference.id)?;
    if let Some(path) = scores_out {
        let file = File::create(path).with_context(|| path.display().to_string())?;
        table.write_csv(file)?;
    }
    let scored = table.scored_len();
    // a fraction too small to select anyone still reports one song per side
    let k = top_k.unwrap_or_else(|| extreme_count(fraction, scored).max(1));
    let outliers = outlier_report(&table, k)?;

    let mut report = Report::new("songs");
    describe_reference(&mut report, &reference);
    report.set("test_dir", test_dir.display().to_string());
    report.set("fraction", fraction);
    report.set("k", k);
    report.set(
        "k_source",
        if top_k.is_some() { "top-k" } else { "fraction" },
    );
    report.body.insert("songs".into(), json!(table.len()));
    report.body.insert("scored".into(), json!(scored));
    report
        .body
        .insert("clamped".into(), json!(table.clamp_count()));
    report
        .body
        .insert("outliers".into(), serde_json::to_value(&outliers)?);
    report
        .body
        .insert("table".into(), serde_json::to_value(&table.rows)?);
    report.csv = table.to_csv_string()?;
    report.text = format!(
        "{} songs, {} scored, {} with clamped eigenvalues\n{}",
        table.len(),
        scored,
        table.clamp_count(),
        outliers.to_text()
    );
    Ok(report)
}

fn read_scores(path: &Path) -> Result<SongScoreTable> {
    let file = File::open(path).with_context(|| path.display().to_string())?;
    SongScoreTable::read_csv(file, path.display().to_string())
        .with_context(|| path.display().to_string())
}

fn prf_json(r: &PrfResult) -> Value {
    serde_json::to_value(r).expect("plain struct serializes")
}

pub fn eval_labels(scores: &Path, labels: &Path, fraction: f64) -> Result<Report> {
    let table = read_scores(scores)?;
    let file = File::open(labels).with_context(|| labels.display().to_string())?;
    let records = read_labels_csv(file).with_context(|| labels.display().to_string())?;
    let (aq_truth, mq_truth) = binarize_labels(&records)?;
    let (aq_pred, mq_pred) = predict_labels(&table, fraction)?;
    let aq = prf(&aq_pred, &align_truth(&aq_pred, &aq_truth)?)?;
    let mq = prf(&mq_pred, &align_truth(&mq_pred, &mq_truth)?)?;
    let k = extreme_count(fraction, table.scored_len());

    let mut report = Report::new("eval labels");
    report.set("scores", scores.display().to_string());
    report.set("labels", labels.display().to_string());
    report.set("fraction", fraction);
    report.set("k", k);
    report.body.insert("aq_low".into(), prf_json(&aq));
    report.body.insert("mq_high".into(), prf_json(&mq));
    let mut csv =
        "metric,precision,recall,f1,true_positives,false_positives,false_negatives,support\n"
            .to_string();
    let mut text = String::from("metric   precision  recall     f1\n");
    for (name, r) in [("aq_low", &aq), ("mq_high", &mq)] {
        csv.push_str(&format!(
            "{name},{},{},{},{},{},{},{}\n",
            r.precision,
            r.recall,
            r.f1,
            r.true_positives,
            r.false_positives,
            r.false_negatives,
            r.support
        ));
        text.push_str(&format!(
            "{name:<8} {:<10} {:<10} {}\n",
            sig6(r.precision),
            sig6(r.recall),
            sig6(r.f1)
        ));
        if r.precision_undefined {
            text.push_str(&format!(
                "  {name}: no positive predictions, precision reported as 0\n"
            ));
        }
        if r.recall_undefined {
            text.push_str(&format!(
                "  {name}: no positive labels, recall reported as 0\n"
            ));
        }
    }
    report.csv = csv;
    report.text = text;
    Ok(report)
}

pub fn eval_mos(scores: &Path, mos: &Path) -> Result<Report> {
    let table = read_scores(scores)?;
    let file = File::open(mos).with_context(|| mos.display().to_string())?;
    let records = read_mos_csv(file).with_context(|| mos.display().to_string())?;

    let mut report = Report::new("eval mos");
    report.set("scores", scores.display().to_string());
    report.set("mos", mos.display().to_string());
    let mut csv = "target,testset,n,pcc,note\n".to_string();
    let mut text = String::from("target  testset              n       pcc\n");
    for (name, target) in [("aq", QualityTarget::Aq), ("mq", QualityTarget::Mq)] {
        let by_set = pearson_by_testset(&table, &records, target)?;
        let mut obj = serde_json::Map::new();
        for (testset, r) in &by_set {
            let pcc_text = r.pcc.map_or("undefined".to_string(), |v| v.to_string());
            let note = r.undefined_reason.clone().unwrap_or_default();
            csv.push_str(&format!("{name},{testset},{},{pcc_text},{note}\n", r.n));
            let shown = r.pcc.map_or_else(|| format!("undefined ({note})"), sig6);
            text.push_str(&format!("{name:<7} {testset:<20} {:>3}  {shown}\n", r.n));
            obj.insert(
                testset.clone(),
                json!({"n": r.n, "pcc": r.pcc.map_or(json!("undefined"), |v| json!(v)), "note": r.undefined_reason}),
            );
        }
        report
            .body
            .insert(format!("pcc_{name}"), Value::Object(obj));
    }
    report.csv = csv;
    report.text = text;
    Ok(report)
}

pub fn eval_sensitivity(
    args: &RefArgs,
    clean: &Path,
    effects: &[(String, PathBuf)],
) -> Result<Report> {
    let reference = load_reference(args)?;
    let score_dir = |dir: &Path| -> Result<FadScore> {
        let set = read_test_set(dir, &reference)?;
        Ok(frechet_distance(&reference.stats, &fit_set(&set)?)?)
    };
    let clean_score = score_dir(clean)?;
    let mut effected = BTreeMap::new();
    let mut dirs = BTreeMap::new();
    for (name, dir) in effects {
        effected.insert(name.clone(), score_dir(dir)?);
        dirs.insert(name.clone(), dir.display().to_string());
    }
    let rel = sensitivity_normalize(&clean_score, &effected)?;

    let mut report = Report::new("eval sensitivity");
    describe_reference(&mut report, &reference);
    report.set("clean", clean.display().to_string());
    report.set("effects", json!(dirs));
    report.body.insert("clean_fad".into(), json!(rel.clean));
    report
        .body
        .insert("normalized".into(), json!(rel.normalized));
    report.body.insert("values".into(), json!(rel.values));
    let kind = if rel.normalized { "ratio" } else { "fad" };
    let mut csv = format!("effect,{kind}\n");
    let mut text = format!("clean fad {}\n", sig6(rel.clean));
    if !rel.normalized {
        text.push_str("clean fad is 0: showing absolute scores, not ratios\n");
    }
    for (name, v) in &rel.values {
        csv.push_str(&format!("{name},{v}\n"));
        text.push_str(&format!("{name:<12} {}\n", sig6(*v)));
    }
    report.csv = csv;
    report.text = text;
    Ok(report)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelChoice {
    Name(String),
    Info(EmbeddingModelInfo),
}

/// Synthetic set request. Mean and covariance default to zero and identity.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthRequest {
    dim: usize,
    n_frames: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    mean: Option<Vec<f64>>,
    covariance: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    n_songs: usize,
    model: Option<ModelChoice>,
}

fn default_seed() -> u64 {
    fadkit_core::estimators::DEFAULT_SEED
}

fn one() -> usize {
    1
}

pub fn synth(spec_path: &Path, out: &Path) -> Result<Report> {
    let text = fs::read_to_string(spec_path).with_context(|| spec_path.display().to_string())?;
    let req: SynthRequest =
        serde_json::from_str(&text).with_context(|| spec_path.display().to_string())?;
    ensure!(req.n_songs >= 1, "n_songs must be >= 1");
    let model = match req.model {
        None => EmbeddingModelInfo::synthetic(req.dim),
        Some(ModelChoice::Info(m)) => m,
        Some(ModelChoice::Name(name)) => fadkit_core::embedding::model::lookup(&name)
            .with_context(|| format!("unknown model {name:?}"))?,
    };
    ensure!(
        model.dim == req.dim,
        "model {} has dim {}, spec asks for {}",
        model.name,
        model.dim,
        req.dim
    );
    let mut base = SyntheticSpec::standard(req.dim, req.n_frames, req.seed);
    if let Some(mean) = req.mean {
        base.mean = mean;
    }
    if let Some(cov) = req.covariance {
        base.covariance = cov;
    }
    base.validate()?;
    let width = (req.n_songs - 1).to_string().len().max(4);
    let songs = (0..req.n_songs)
        .map(|i| {
            let spec = SyntheticSpec {
                seed: req.seed.wrapping_add(i as u64),
                ..base.clone()
            };
            let mut song = generate_synthetic(&spec)?;
            song.song_id = format!("song-{i:0width$}");
            song.model = model.clone();
            Ok(song)
        })
        .collect::<fadkit_core::Result<Vec<_>>>()?;
    write_set(out, &model, &songs)?;

    let mut report = Report::new("synth");
    report.set("spec", spec_path.display().to_string());
    report.set("out", out.display().to_string());
    report.set("model", model.name.as_str());
    report.set("seed", req.seed);
    let frames = req.n_songs * req.n_frames;
    report.body.insert("songs".into(), json!(req.n_songs));
    report.body.insert("frames".into(), json!(frames));
    report.body.insert("dim".into(), json!(req.dim));
    report.csv = format!("songs,frames,dim\n{},{frames},{}\n", req.n_songs, req.dim);
    report.text = format!(
        "wrote {} songs of {} frames, dim {}\n",
        req.n_songs, req.n_frames, req.dim
    );
    Ok(report)
}
