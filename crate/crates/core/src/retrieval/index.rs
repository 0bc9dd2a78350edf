use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding_io::{EmbeddingSet, LabeledSet, Manifest, ManifestEntry, Modality};
use crate::error::{Error, Result};
use crate::linker::{project, LinkerConfig, LinkerParams};
use crate::numerics::{dot, l2_normalize, normalize_rows, Matrix};

/// Immutable set of unit-norm rows with their ids and speaker labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    modality: Modality,
    vectors: Matrix,
    ids: Vec<String>,
    speakers: Vec<String>,
}

impl SearchIndex {
    /// Rows are length-normalised on the way in.
    pub fn new(
        modality: Modality,
        vectors: &Matrix,
        ids: Vec<String>,
        speakers: Vec<String>,
    ) -> Result<Self> {
        if vectors.rows() == 0 {
            return Err(Error::EmptyIndex);
        }
        for (what, n) in [("index ids", ids.len()), ("index speakers", speakers.len())] {
            if n != vectors.rows() {
                return Err(Error::DimMismatch {
                    context: what,
                    expected: vectors.rows(),
                    found: n,
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::DuplicateId(dup.clone()));
        }
        vectors.check_finite()?;
        let (vectors, _) = normalize_rows(vectors)?;
        Ok(Self {
            modality,
            vectors,
            ids,
            speakers,
        })
    }

    /// Index over `vectors`, labelled by the manifest of `set`.
    pub fn from_labeled(modality: Modality, set: &LabeledSet, vectors: &Matrix) -> Result<Self> {
        Self::new(modality, vectors, set.ids(), set.speakers())
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn speakers(&self) -> &[String] {
        &self.speakers
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    /// Writes the rows as EMB1 and the labels as a manifest.
    pub fn save(&self, emb: &Path, manifest: &Path) -> Result<()> {
        let entries = (0..self.len())
            .map(|i| ManifestEntry {
                id: self.ids[i].clone(),
                row: i,
                speaker: self.speakers[i].clone(),
                modality: self.modality,
                text: None,
            })
            .collect();
        let set = LabeledSet::new(EmbeddingSet::from_matrix(&self.vectors, self.ids.clone())?, Manifest::new(entries))?;
        set.save(emb, manifest)
    }

    /// Reads an index written by [`SearchIndex::save`]; rows are
    /// renormalised after the f32 round trip.
    pub fn load(emb: &Path, manifest: &Path) -> Result<Self> {
        let set = LabeledSet::load(emb, manifest)?;
        let modality = set
            .manifest
            .entries
            .first()
            .map(|e| e.modality)
            .ok_or(Error::EmptyIndex)?;
        Self::from_labeled(modality, &set, &set.matrix())
    }
}

/// Projection-layer embeddings of every entry of `set`.
pub fn build_index(
    params: &LinkerParams,
    config: &LinkerConfig,
    set: &LabeledSet,
    modality: Modality,
) -> Result<SearchIndex> {
    let rows = set.matrix();
    let projected = project(params, config, modality, &rows)?;
    SearchIndex::from_labeled(modality, set, &projected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub speaker: String,
    pub score: f64,
}

/// Candidates by descending score, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub results: Vec<Candidate>,
}

fn rank_order(index: &SearchIndex, scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b]
        .total_cmp(&scores[a])
        .then_with(|| index.ids[a].cmp(&index.ids[b]))
}

/// Row positions and scores of the exact top-`k`, best first.
pub(crate) fn top_k_positions(index: &SearchIndex, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    if query.len() != index.dim() {
        return Err(Error::DimMismatch {
            context: "query",
            expected: index.dim(),
            found: query.len(),
        });
    }
    if k == 0 || k > index.len() {
        return Err(Error::Config(format!(
            "k must lie in 1..={}, got {k}",
            index.len()
        )));
    }
    let q = l2_normalize(query)?;
    let scores: Vec<f64> = index.vectors.row_iter().map(|r| dot(r, &q)).collect();
    let mut order: Vec<usize> = (0..index.len()).collect();
    let cmp = |a: &usize, b: &usize| rank_order(index, &scores, *a, *b);
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    Ok(order.into_iter().map(|i| (i, scores[i])).collect())
}

/// Exact top-`k` by cosine score. The query is normalised first.
pub fn nearest_k(index: &SearchIndex, query_id: &str, query: &[f64], k: usize) -> Result<RankedList> {
    let top = top_k_positions(index, query, k)?;
    Ok(RankedList {
        query_id: query_id.to_string(),
        results: top
            .into_iter()
            .map(|(i, score)| Candidate {
                id: index.ids[i].clone(),
                speaker: index.speakers[i].clone(),
                score,
            })
            .collect(),
    })
}

/// One JSON document per line.
pub fn write_ranked_lists<W: Write>(lists: &[RankedList], mut out: W) -> Result<()> {
    for list in lists {
        serde_json::to_writer(&mut out, list)?;
        out.write_all(b"\n").map_err(|e| Error::io("<ranked lists>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_io::{gen_synthetic, SynthSpec};
    use crate::linker::init_params;
    use crate::numerics::SeededRng;
    use proptest::prelude::*;

    fn index(rows: &[[f64; 2]]) -> SearchIndex {
        SearchIndex::new(
            Modality::Text,
            &Matrix::from_rows(rows),
            (0..rows.len()).map(|i| format!("c{i}")).collect(),
            (0..rows.len()).map(|i| format!("s{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_row_ranks_first() {
        let idx = index(&[[1.0, 0.0], [0.6, 0.8], [0.0, 1.0]]);
        let r = nearest_k(&idx, "q", &[0.6, 0.8], 2).unwrap();
        assert_eq!(r.results[0].id, "c1");
        assert!((r.results[0].score - 1.0).abs() < 1e-12);
        let all = nearest_k(&idx, "q", &[3.0, 4.0], 3).unwrap();
        let mut ids: Vec<_> = all.results.iter().map(|c| c.id.clone()).collect();
        ids.sort();
        assert_eq!(ids, vec!["c0", "c1", "c2"]);
    }

    #[test]
    fn ties_break_by_id() {
        let idx = SearchIndex::new(
            Modality::Text,
            &Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]),
            vec!["b".into(), "c".into(), "a".into()],
            vec!["x".into(); 3],
        )
        .unwrap();
        let r = nearest_k(&idx, "q", &[1.0, 0.0], 3).unwrap();
        let ids: Vec<_> = r.results.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(nearest_k(&idx, "q", &[1.0, 0.0], 1).unwrap().results[0].id, "a");
    }

    #[test]
    fn input_errors() {
        let idx = index(&[[1.0, 0.0]]);
        assert!(nearest_k(&idx, "q", &[1.0], 1).is_err());
        assert!(nearest_k(&idx, "q", &[1.0, 0.0], 0).is_err());
        assert!(nearest_k(&idx, "q", &[1.0, 0.0], 2).is_err());
        assert!(nearest_k(&idx, "q", &[0.0, 0.0], 1).is_err());
        assert!(matches!(
            SearchIndex::new(Modality::Text, &Matrix::zeros(0, 2), vec![], vec![]),
            Err(Error::EmptyIndex)
        ));
    }

    #[test]
    fn build_matches_forward_projection() {
        let data = gen_synthetic(&SynthSpec {
            n_speakers: 30,
            dim_speaker: 8,
            dim_text: 6,
            latent_dim: 4,
            ..SynthSpec::default()
        })
        .unwrap()
        .dataset;
        let cfg = LinkerConfig {
            dim_speaker_in: 8,
            dim_text_in: 6,
            common_dim: 16,
            ..LinkerConfig::default()
        };
        let p = init_params(&cfg, 0).unwrap();
        let idx = build_index(&p, &cfg, &data.text, Modality::Text).unwrap();
        assert_eq!(idx.len(), 30);
        assert_eq!(idx, build_index(&p, &cfg, &data.text, Modality::Text).unwrap());
        let out = crate::linker::forward(&p, &cfg, &data.speaker.matrix(), &data.text.matrix())
            .unwrap();
        for k in 0..30 {
            for (a, b) in idx.row(k).iter().zip(out.x_t_p.row(k)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(build_index(&p, &cfg, &data.text, Modality::Speaker).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let idx = index(&[[1.0, 0.0], [0.6, 0.8]]);
        let (e, m) = (dir.path().join("i.emb"), dir.path().join("i.jsonl"));
        idx.save(&e, &m).unwrap();
        let back = SearchIndex::load(&e, &m).unwrap();
        assert_eq!(back.ids(), idx.ids());
        assert_eq!(back.modality(), Modality::Text);
        for i in 0..2 {
            for (a, b) in back.row(i).iter().zip(idx.row(i)) {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn ranked_lists_as_jsonl() {
        let idx = index(&[[1.0, 0.0], [0.0, 1.0]]);
        let lists = vec![
            nearest_k(&idx, "q0", &[1.0, 0.1], 2).unwrap(),
            nearest_k(&idx, "q1", &[0.1, 1.0], 1).unwrap(),
        ];
        let mut buf = Vec::new();
        write_ranked_lists(&lists, &mut buf).unwrap();
        let back: Vec<RankedList> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(back, lists);
    }

    proptest! {
        #[test]
        fn matches_full_sort(seed in 0u64..1000, n in 1usize..40, k_frac in 0.0f64..1.0) {
            let mut rng = SeededRng::new(seed);
            // coarse values make exact ties common
            let rows: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.below(3) as f64 - 1.0, rng.below(3) as f64 - 0.5])
                .collect();
            let idx = index(&rows);
            let k = 1 + ((n - 1) as f64 * k_frac) as usize;
            let q = [rng.normal(), rng.normal()];
            let got = nearest_k(&idx, "q", &q, k).unwrap();
            let full = nearest_k(&idx, "q", &q, n).unwrap();
            prop_assert_eq!(&got.results[..], &full.results[..k]);
            for w in full.results.windows(2) {
                prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].id < w[1].id));
            }
            let scale = 1.0 + rng.uniform() * 10.0;
            let scaled = nearest_k(&idx, "q", &[q[0] * scale, q[1] * scale], k).unwrap();
            let ids = |r: &RankedList| r.results.iter().map(|c| c.id.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(&scaled), ids(&got));
        }
    }
}
