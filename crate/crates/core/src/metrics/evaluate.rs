use serde::{Deserialize, Serialize};

use super::ranking::{
    average_precision_at_k, first_relevant_rank, map_at_k, mean_rank, mean_relevant_rank,
    MeanRankMode,
};
use crate::embedding_io::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::linker::{LinkerConfig, LinkerParams};
use crate::numerics::Matrix;
use crate::retrieval::{
    build_index, lda_apply, lda_fit, retrieve, Direction, FusionWeighting, LdaProjection,
    RetrievalMode, SearchIndex, DEFAULT_FUSE_N, DEFAULT_SHRINKAGE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub k: usize,
    pub fuse_n: usize,
    pub weighting: FusionWeighting,
    pub mean_rank: MeanRankMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            k: 10,
            fuse_n: DEFAULT_FUSE_N,
            weighting: FusionWeighting::Uniform,
            mean_rank: MeanRankMode::First,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.fuse_n == 0 {
            return Err(Error::Config("fuse_n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_id: String,
    pub speaker: String,
    /// MeanR contribution; absent for excluded queries.
    pub rank: Option<f64>,
    pub ap: Option<f64>,
    pub top_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub direction: Direction,
    pub fused: bool,
    /// Percent.
    pub map_at_k: f64,
    pub mean_rank: f64,
    pub n_queries: usize,
    /// Queries without any relevant item in the database.
    pub n_excluded: usize,
    pub queries: Vec<QueryResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    /// `linked` for a trained model, `unlinked` for the LDA baseline.
    pub mode: String,
    pub k: usize,
    pub fuse_n: usize,
    pub weighting: FusionWeighting,
    pub mean_rank_mode: MeanRankMode,
    pub map_normalizer: String,
    pub n_speaker_rows: usize,
    pub n_text_rows: usize,
    pub conditions: Vec<ConditionReport>,
}

impl RetrievalReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == name)
    }
}

fn run_condition(
    queries: &SearchIndex,
    target: &SearchIndex,
    direction: Direction,
    mode: RetrievalMode,
    options: &EvalOptions,
) -> Result<ConditionReport> {
    let mut results = Vec::with_capacity(queries.len());
    let mut aps = Vec::new();
    let mut ranks = Vec::new();
    for i in 0..queries.len() {
        let speaker = &queries.speakers()[i];
        let list = retrieve(target, &queries.ids()[i], queries.row(i), mode)?;
        let labels: Vec<&String> = list.results.iter().map(|c| &c.speaker).collect();
        let ap = average_precision_at_k(&labels, &speaker, options.k);
        let rank = match options.mean_rank {
            MeanRankMode::First => first_relevant_rank(&labels, &speaker).map(|r| r as f64),
            MeanRankMode::All => mean_relevant_rank(&labels, &speaker),
        };
        if let (Some(ap), Some(rank)) = (ap, rank) {
            aps.push(ap);
            ranks.push(rank);
        }
        results.push(QueryResult {
            query_id: list.query_id,
            speaker: speaker.clone(),
            rank,
            ap,
            top_id: list.results[0].id.clone(),
        });
    }
    let fused = matches!(mode, RetrievalMode::Fused { .. });
    let condition = if fused {
        format!("{}_fused", direction.as_str())
    } else {
        direction.as_str().to_string()
    };
    Ok(ConditionReport {
        condition,
        direction,
        fused,
        map_at_k: map_at_k(&aps)?,
        mean_rank: mean_rank(&ranks)?,
        n_queries: aps.len(),
        n_excluded: results.len() - aps.len(),
        queries: results,
    })
}

/// All four conditions over prebuilt speaker and text indexes.
pub fn evaluate_indexes(
    speaker: &SearchIndex,
    text: &SearchIndex,
    options: &EvalOptions,
    mode: &str,
) -> Result<RetrievalReport> {
    options.validate()?;
    if speaker.dim() != text.dim() {
        return Err(Error::DimMismatch {
            context: "index dims",
            expected: speaker.dim(),
            found: text.dim(),
        });
    }
    let fused = RetrievalMode::Fused {
        n: options.fuse_n,
        weighting: options.weighting,
    };
    let mut conditions = Vec::with_capacity(4);
    for retrieval in [RetrievalMode::Plain, fused] {
        conditions.push(run_condition(speaker, text, Direction::S2t, retrieval, options)?);
        conditions.push(run_condition(text, speaker, Direction::T2s, retrieval, options)?);
    }
    Ok(RetrievalReport {
        mode: mode.to_string(),
        k: options.k,
        fuse_n: options.fuse_n,
        weighting: options.weighting,
        mean_rank_mode: options.mean_rank,
        map_normalizer: "min(R,K)".into(),
        n_speaker_rows: speaker.len(),
        n_text_rows: text.len(),
        conditions,
    })
}

fn check_pairing(data: &Dataset) -> Result<()> {
    let report = data.pairing()?;
    if !report.is_complete() {
        return Err(Error::Manifest(format!(
            "eval speakers without both modalities: {:?}",
            report
                .missing_speaker_side
                .iter()
                .chain(&report.missing_text_side)
                .collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// Every utterance queries the prompt index and every prompt the utterance
/// index, plain and fused.
pub fn evaluate(
    params: &LinkerParams,
    config: &LinkerConfig,
    data: &Dataset,
    options: &EvalOptions,
) -> Result<RetrievalReport> {
    check_pairing(data)?;
    let speaker = build_index(params, config, &data.speaker, Modality::Speaker)?;
    let text = build_index(params, config, &data.text, Modality::Text)?;
    evaluate_indexes(&speaker, &text, options, "linked")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnlinkedOptions {
    pub eval: EvalOptions,
    pub target_dim: usize,
    pub shrinkage: f64,
}

impl Default for UnlinkedOptions {
    fn default() -> Self {
        Self {
            eval: EvalOptions::default(),
            target_dim: 128,
            shrinkage: DEFAULT_SHRINKAGE,
        }
    }
}

fn truncate(p: &LdaProjection, rank: usize) -> LdaProjection {
    let d = p.directions.rows();
    let cols: Vec<Vec<f64>> = (0..rank).map(|k| p.directions.column(k)).collect();
    LdaProjection {
        directions: Matrix::from_vec(
            d,
            rank,
            (0..d * rank).map(|i| cols[i % rank][i / rank]).collect(),
        ),
        eigenvalues: p.eigenvalues[..rank].to_vec(),
        ..p.clone()
    }
}

/// Baseline without a linker: each modality is mapped by its own LDA, fitted
/// on the evaluation labels, to a shared width, and searched directly.
pub fn evaluate_unlinked(data: &Dataset, options: &UnlinkedOptions) -> Result<RetrievalReport> {
    check_pairing(data)?;
    let fit = |m: Modality| {
        let set = match m {
            Modality::Speaker => &data.speaker,
            Modality::Text => &data.text,
        };
        let x = set.matrix();
        let p = lda_fit(&x, &set.speakers(), options.target_dim, options.shrinkage)?;
        Ok::<_, Error>((x, p))
    };
    let (xs, ps) = fit(Modality::Speaker)?;
    let (xt, pt) = fit(Modality::Text)?;
    let rank = ps.rank().min(pt.rank());
    let speaker = SearchIndex::from_labeled(
        Modality::Speaker,
        &data.speaker,
        &lda_apply(&truncate(&ps, rank), &xs)?,
    )?;
    let text = SearchIndex::from_labeled(
        Modality::Text,
        &data.text,
        &lda_apply(&truncate(&pt, rank), &xt)?,
    )?;
    evaluate_indexes(&speaker, &text, &options.eval, "unlinked")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_io::{gen_synthetic, SynthSpec};
    use crate::linker::init_params;

    fn data() -> Dataset {
        gen_synthetic(&SynthSpec {
            n_speakers: 12,
            utts_per_speaker: 3,
            dim_speaker: 10,
            dim_text: 8,
            latent_dim: 4,
            ..SynthSpec::default()
        })
        .unwrap()
        .dataset
    }

    fn cfg() -> LinkerConfig {
        LinkerConfig {
            dim_speaker_in: 10,
            dim_text_in: 8,
            common_dim: 16,
            ..LinkerConfig::default()
        }
    }

    #[test]
    fn four_conditions_with_per_query_rows() {
        let d = data();
        let p = init_params(&cfg(), 1).unwrap();
        let r = evaluate(&p, &cfg(), &d, &EvalOptions::default()).unwrap();
        let names: Vec<_> = r.conditions.iter().map(|c| c.condition.as_str()).collect();
        assert_eq!(names, ["s2t", "t2s", "s2t_fused", "t2s_fused"]);
        assert_eq!(r.condition("s2t").unwrap().queries.len(), 36);
        assert_eq!(r.condition("t2s").unwrap().queries.len(), 12);
        for c in &r.conditions {
            assert!((0.0..=100.0).contains(&c.map_at_k));
            let db = if c.direction == Direction::S2t { 12.0 } else { 36.0 };
            assert!(c.mean_rank >= 1.0 && c.mean_rank <= db);
            assert_eq!(c.n_excluded, 0);
        }
        assert_eq!(r, evaluate(&p, &cfg(), &d, &EvalOptions::default()).unwrap());
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<RetrievalReport>(&json).unwrap(), r);
    }

    #[test]
    fn identical_modalities_score_perfectly() {
        let m = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let ids = |p: &str| (0..3).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let s = SearchIndex::new(Modality::Speaker, &m, ids("u"), ids("s")).unwrap();
        let t = SearchIndex::new(Modality::Text, &m, ids("t"), ids("s")).unwrap();
        let r = evaluate_indexes(&s, &t, &EvalOptions::default(), "linked").unwrap();
        let plain = r.condition("s2t").unwrap();
        assert_eq!(plain.map_at_k, 100.0);
        assert_eq!(plain.mean_rank, 1.0);
    }

    #[test]
    fn excluded_queries_are_counted() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        let s = SearchIndex::new(
            Modality::Speaker,
            &m,
            vec!["u0".into(), "u1".into()],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let t = SearchIndex::new(
            Modality::Text,
            &m,
            vec!["t0".into(), "t1".into()],
            vec!["a".into(), "c".into()],
        )
        .unwrap();
        let r = evaluate_indexes(&s, &t, &EvalOptions::default(), "linked").unwrap();
        let c = r.condition("s2t").unwrap();
        assert_eq!((c.n_queries, c.n_excluded), (1, 1));
        assert_eq!(c.queries[1].ap, None);
    }

    #[test]
    fn unlinked_baseline_runs() {
        let r = evaluate_unlinked(&data(), &UnlinkedOptions::default()).unwrap();
        assert_eq!(r.mode, "unlinked");
        assert_eq!(r.conditions.len(), 4);
    }

    #[test]
    fn incomplete_pairing_rejected() {
        let mut d = data();
        d.text.manifest.entries[0].speaker = "nobody".into();
        let p = init_params(&cfg(), 1).unwrap();
        assert!(matches!(
            evaluate(&p, &cfg(), &d, &EvalOptions::default()),
            Err(Error::Manifest(_))
        ));
    }
}
