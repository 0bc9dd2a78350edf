use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use xmodal_core::embedding_io::{
    gen_synthetic, Dataset, Modality, SPEAKER_EMB, SPEAKER_MANIFEST, TEXT_EMB, TEXT_MANIFEST,
};
use xmodal_core::linker::{load_checkpoint, project, Activation, LinkerConfig, LinkerParams};
use xmodal_core::metrics::{self, EvalOptions, MeanRankMode, RetrievalReport, UnlinkedOptions};
use xmodal_core::numerics::{pca_2d, Matrix};
use xmodal_core::retrieval::{
    self, write_ranked_lists, FusionWeighting, RetrievalMode, SearchIndex,
};
use xmodal_core::trainer::{self, LossMode, TrainingData, LOSS_LOG};

use crate::config::{write_json, RunConfig};
use crate::{
    ActivationArg, BaselineArgs, BuildIndexArgs, DirectionArg, EvalFlags, EvaluateArgs,
    Export2dArgs, GenSynthArgs, GradCheckArgs, LossArg, MeanRankArg, ModalityArg, RetrieveArgs,
    TrainArgs, UsageError, WeightingArg,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn required(flag: &str, value: Option<PathBuf>) -> Result<PathBuf> {
    value.ok_or_else(|| usage(format!("{flag} is required (flag or config)")))
}

fn check_dataset_dir(dir: &Path) -> Result<()> {
    for name in [SPEAKER_EMB, SPEAKER_MANIFEST, TEXT_EMB, TEXT_MANIFEST] {
        let p = dir.join(name);
        if !p.is_file() {
            bail!(usage(format!("missing dataset file {}", p.display())));
        }
    }
    Ok(())
}

fn check_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!(usage(format!("missing file {}", path.display())));
    }
    Ok(())
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    check_dataset_dir(dir)?;
    Dataset::load(dir).with_context(|| format!("loading dataset {}", dir.display()))
}

fn load_model(path: &Path) -> Result<(LinkerParams, LinkerConfig)> {
    check_file(path)?;
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Gelu => Activation::Gelu,
        }
    }
}

impl From<LossArg> for LossMode {
    fn from(a: LossArg) -> Self {
        match a {
            LossArg::Cts => LossMode::Cts,
            LossArg::CtsSpk => LossMode::CtsSpk,
            LossArg::CtsSupcon => LossMode::CtsSupcon,
        }
    }
}

impl From<ModalityArg> for Modality {
    fn from(a: ModalityArg) -> Self {
        match a {
            ModalityArg::Speaker => Modality::Speaker,
            ModalityArg::Text => Modality::Text,
        }
    }
}

impl From<WeightingArg> for FusionWeighting {
    fn from(a: WeightingArg) -> Self {
        match a {
            WeightingArg::Uniform => FusionWeighting::Uniform,
            WeightingArg::Similarity => FusionWeighting::Similarity,
        }
    }
}

impl From<MeanRankArg> for MeanRankMode {
    fn from(a: MeanRankArg) -> Self {
        match a {
            MeanRankArg::First => MeanRankMode::First,
            MeanRankArg::All => MeanRankMode::All,
        }
    }
}

pub fn gen_synth(a: GenSynthArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    cfg.resolve_seed(a.common.seed)?;
    let s = &mut cfg.synth;
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { s.$field = v; })*
        };
    }
    set!(speakers => n_speakers, utts => utts_per_speaker, prompts => prompts_per_speaker,
        dim_speaker => dim_speaker, dim_text => dim_text, latent_dim => latent_dim,
        noise => intra_speaker_noise, text_noise => text_noise,
        correlation => cross_modal_correlation, first_speaker => first_speaker);
    if s.n_speakers < 2 {
        bail!(usage("at least 2 speakers are needed for contrastive training"));
    }
    s.validate()?;

    let synth = gen_synthetic(s)?;
    synth.dataset.save(&a.out)?;
    write_json(
        &a.out.join("synth_config.json"),
        &json!({ "command": "gen-synth", "synth": s }),
    )?;
    let pairing = synth.dataset.pairing()?;
    println!(
        "wrote {}: {} speakers, {} utterances ({}-d), {} prompts ({}-d)",
        a.out.display(),
        pairing.n_speakers,
        pairing.n_utterances,
        synth.dataset.speaker.dim(),
        pairing.n_prompts,
        synth.dataset.text.dim()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    cfg.resolve_seed(a.common.seed)?;
    let data_dir = required("--data", a.data.or(cfg.data.take()))?;
    let out = required("--out", a.out.or(cfg.out.take()))?;
    check_dataset_dir(&data_dir)?;

    let t = &mut cfg.train;
    if let Some(v) = a.loss {
        t.loss_mode = v.into();
    }
    if let Some(v) = a.lambda {
        t.lambda = v;
    }
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.lr {
        t.learning_rate = v;
    }
    if a.no_shuffle {
        t.shuffle = false;
    }
    let l = &mut cfg.linker;
    if let Some(v) = a.common_dim {
        l.common_dim = v;
    }
    if let Some(v) = a.layers {
        l.n_transform_layers = v;
    }
    if let Some(v) = a.activation {
        l.activation = v.into();
    }
    cfg.train.validate()?;

    let dataset = load_dataset(&data_dir)?;
    cfg.linker.dim_speaker_in = dataset.speaker.dim();
    cfg.linker.dim_text_in = dataset.text.dim();
    cfg.linker.n_speakers_train = match cfg.train.loss_mode {
        LossMode::CtsSpk => TrainingData::new(&dataset)?.n_classes(),
        _ => 0,
    };
    cfg.linker.validate()?;
    cfg.data = Some(data_dir);
    cfg.out = Some(out.clone());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join("run_config.json"), &cfg)?;

    let outcome = trainer::train(&cfg.linker, &cfg.train, &dataset, Some(&out))?;
    for e in &outcome.log {
        let parts: Vec<String> = e.components.iter().map(|(k, v)| format!("{k} {v:.6}")).collect();
        println!(
            "epoch {:>4}  loss {:.6}  tau {:.4}  {}",
            e.epoch,
            e.mean_loss,
            e.temperature,
            parts.join("  ")
        );
    }
    if let Some(ckpt) = &outcome.checkpoint {
        println!("checkpoint {}", ckpt.display());
    }
    println!("loss log {}", out.join(LOSS_LOG).display());
    Ok(())
}

pub fn grad_check(a: GradCheckArgs) -> Result<()> {
    let report = trainer::grad_check(a.activation.into(), a.seed, a.tolerance)?;
    for e in &report.entries {
        println!(
            "{} {:<10} max_rel_err {:.3e} (worst tensor {})",
            if e.pass { "PASS" } else { "FAIL" },
            e.loss,
            e.max_relative_error,
            e.worst_tensor
        );
    }
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    if !report.all_pass() {
        bail!("gradient check failed at tolerance {:e}", a.tolerance);
    }
    Ok(())
}

fn labeled(data: &Dataset, m: Modality) -> &xmodal_core::embedding_io::LabeledSet {
    match m {
        Modality::Speaker => &data.speaker,
        Modality::Text => &data.text,
    }
}

pub fn build_index(a: BuildIndexArgs) -> Result<()> {
    check_file(&a.ckpt)?;
    check_dataset_dir(&a.data)?;
    let (params, config) = load_model(&a.ckpt)?;
    let data = load_dataset(&a.data)?;
    let modality: Modality = a.modality.into();
    let index = retrieval::build_index(&params, &config, labeled(&data, modality), modality)?;
    let stem = format!("{}.index", modality.as_str());
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let emb = a.out.join(format!("{stem}.emb"));
    index.save(&emb, &a.out.join(format!("{stem}.jsonl")))?;
    write_json(
        &a.out.join(format!("{stem}.json")),
        &json!({
            "command": "build-index",
            "checkpoint": a.ckpt,
            "data": a.data,
            "modality": modality,
            "rows": index.len(),
            "dim": index.dim(),
            "linker": config,
        }),
    )?;
    println!("wrote {} ({} rows, {}-d)", emb.display(), index.len(), index.dim());
    Ok(())
}

pub fn retrieve(a: RetrieveArgs) -> Result<()> {
    check_file(&a.ckpt)?;
    check_dataset_dir(&a.data)?;
    if a.k == 0 || a.fuse_n == 0 {
        bail!(usage("--k and --fuse-n must be at least 1"));
    }
    let (params, config) = load_model(&a.ckpt)?;
    let data = load_dataset(&a.data)?;
    let speaker = retrieval::build_index(&params, &config, &data.speaker, Modality::Speaker)?;
    let text = retrieval::build_index(&params, &config, &data.text, Modality::Text)?;
    let (queries, target) = match a.direction {
        DirectionArg::S2t => (&speaker, &text),
        DirectionArg::T2s => (&text, &speaker),
    };
    let mode = if a.fused {
        RetrievalMode::Fused {
            n: a.fuse_n,
            weighting: a.weighting.into(),
        }
    } else {
        RetrievalMode::Plain
    };
    let selected: Vec<usize> = match &a.query {
        Some(id) => vec![queries
            .ids()
            .iter()
            .position(|q| q == id)
            .ok_or_else(|| xmodal_core::Error::UnknownId(id.clone()))?],
        None => (0..queries.len()).collect(),
    };
    let mut lists = Vec::with_capacity(selected.len());
    for i in selected {
        let mut list = retrieval::retrieve(target, &queries.ids()[i], queries.row(i), mode)?;
        list.results.truncate(a.k);
        lists.push(list);
    }
    match &a.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_ranked_lists(&lists, BufWriter::new(file))?;
            write_json(
                &path.with_extension("config.json"),
                &json!({
                    "command": "retrieve",
                    "checkpoint": a.ckpt,
                    "data": a.data,
                    "direction": format!("{:?}", a.direction).to_lowercase(),
                    "retrieval": mode,
                    "k": a.k,
                    "query": a.query,
                    "linker": config,
                }),
            )?;
        }
        None => write_ranked_lists(&lists, io::stdout().lock())?,
    }
    Ok(())
}

fn apply_eval_flags(opts: &mut EvalOptions, f: &EvalFlags) {
    if let Some(v) = f.k {
        opts.k = v;
    }
    if let Some(v) = f.fuse_n {
        opts.fuse_n = v;
    }
    if let Some(v) = f.weighting {
        opts.weighting = v.into();
    }
    if let Some(v) = f.mean_rank {
        opts.mean_rank = v.into();
    }
}

#[derive(Serialize)]
struct ReportFile<'a, C: Serialize> {
    config: C,
    #[serde(flatten)]
    report: &'a RetrievalReport,
}

fn print_table(report: &RetrievalReport) {
    let k = report.k;
    println!(
        "{:<10}{:<18}{:<18}{:<18}{:<18}",
        "", "s->t", "t->s", "s->t(fusion)", "t->s(fusion)"
    );
    let head = format!("{:<9}{:<9}", format!("mAP{k}"), "MeanR");
    println!("{:<10}{head}{head}{head}{head}", "mode");
    let mut row = format!("{:<10}", report.mode);
    for name in ["s2t", "t2s", "s2t_fused", "t2s_fused"] {
        if let Some(c) = report.condition(name) {
            row.push_str(&format!("{:<9.2}{:<9.3}", c.map_at_k, c.mean_rank));
        }
    }
    println!("{row}");
}

fn emit_report<C: Serialize>(report: &RetrievalReport, config: C, out: Option<&Path>) -> Result<()> {
    let file = ReportFile { config, report };
    match out {
        Some(path) => {
            write_json(path, &file)?;
            print_table(report);
        }
        None => {
            let mut stdout = io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &file)?;
            writeln!(stdout)?;
        }
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    cfg.resolve_seed(a.common.seed)?;
    let ckpt = required("--ckpt", a.ckpt.or(cfg.checkpoint.take()))?;
    let eval_dir = required("--eval", a.eval.or(cfg.eval_data.take()))?;
    check_file(&ckpt)?;
    check_dataset_dir(&eval_dir)?;
    apply_eval_flags(&mut cfg.eval, &a.flags);
    cfg.eval.validate()?;

    let (params, config) = load_model(&ckpt)?;
    let data = load_dataset(&eval_dir)?;
    let report = metrics::evaluate(&params, &config, &data, &cfg.eval)?;
    emit_report(
        &report,
        json!({
            "command": "evaluate",
            "checkpoint": ckpt,
            "eval_data": eval_dir,
            "eval": cfg.eval,
            "linker": config,
        }),
        a.flags.out.as_deref(),
    )
}

pub fn baseline_unlinked(a: BaselineArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    cfg.resolve_seed(a.common.seed)?;
    let eval_dir = required("--eval", a.eval.or(cfg.eval_data.take()))?;
    check_dataset_dir(&eval_dir)?;
    apply_eval_flags(&mut cfg.eval, &a.flags);
    if let Some(v) = a.target_dim {
        cfg.baseline.target_dim = v;
    }
    if let Some(v) = a.shrinkage {
        cfg.baseline.shrinkage = v;
    }
    cfg.eval.validate()?;

    let data = load_dataset(&eval_dir)?;
    let options = UnlinkedOptions {
        eval: cfg.eval.clone(),
        target_dim: cfg.baseline.target_dim,
        shrinkage: cfg.baseline.shrinkage,
    };
    let report = metrics::evaluate_unlinked(&data, &options)?;
    emit_report(
        &report,
        json!({
            "command": "baseline-unlinked",
            "eval_data": eval_dir,
            "eval": cfg.eval,
            "baseline": cfg.baseline,
        }),
        a.flags.out.as_deref(),
    )
}

#[derive(Serialize)]
struct Point<'a> {
    id: &'a str,
    speaker: &'a str,
    modality: Modality,
    x: f64,
    y: f64,
}

pub fn export_2d(a: Export2dArgs) -> Result<()> {
    check_dataset_dir(&a.data)?;
    if let Some(ckpt) = &a.ckpt {
        check_file(ckpt)?;
    }
    let modalities: Vec<Modality> = match (a.modality, &a.ckpt) {
        (Some(m), _) => vec![m.into()],
        (None, Some(_)) => vec![Modality::Speaker, Modality::Text],
        (None, None) => bail!(usage(
            "--modality is required without --ckpt (raw embeddings differ in width)"
        )),
    };
    let model = a.ckpt.as_deref().map(load_model).transpose()?;
    let data = load_dataset(&a.data)?;

    let mut blocks = Vec::new();
    for &m in &modalities {
        let set = labeled(&data, m);
        let rows = match &model {
            Some((params, config)) => project(params, config, m, &set.matrix())?,
            None => set.matrix(),
        };
        let index = SearchIndex::from_labeled(m, set, &rows)?;
        blocks.push(index);
    }
    let dim = blocks[0].dim();
    let stacked: Vec<Vec<f64>> = blocks
        .iter()
        .flat_map(|b| (0..b.len()).map(move |i| b.row(i).to_vec()))
        .collect();
    let coords = pca_2d(&Matrix::from_rows(&stacked))?;
    let mut points = Vec::with_capacity(stacked.len());
    let mut r = 0;
    for b in &blocks {
        for i in 0..b.len() {
            points.push(Point {
                id: &b.ids()[i],
                speaker: &b.speakers()[i],
                modality: b.modality(),
                x: coords[(r, 0)],
                y: coords[(r, 1)],
            });
            r += 1;
        }
    }
    write_json(
        &a.out,
        &json!({
            "config": {
                "command": "export-2d",
                "checkpoint": a.ckpt,
                "data": a.data,
                "modalities": modalities,
                "input_dim": dim,
            },
            "points": points,
        }),
    )?;
    println!("wrote {} points to {}", points.len(), a.out.display());
    Ok(())
}
