use std::collections::BTreeMap;

use crate::embedding_io::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::losses::BatchLabels;
use crate::numerics::{Matrix, SeededRng};

/// Training pairs and the row matrices they index into.
///
/// The `u`-th utterance of a speaker is paired with prompt `u mod P`, so a
/// speaker with one prompt repeats it across all of its utterances.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub speaker_rows: Matrix,
    pub text_rows: Matrix,
    /// `(speaker row, text row, class)` triples.
    pub pairs: Vec<(usize, usize, usize)>,
    /// Speaker label of each class index, sorted.
    pub classes: Vec<String>,
}

impl TrainingData {
    pub fn new(data: &Dataset) -> Result<Self> {
        for (set, modality) in [(&data.speaker, Modality::Speaker), (&data.text, Modality::Text)] {
            if let Some(e) = set.manifest.entries.iter().find(|e| e.modality != modality) {
                return Err(Error::Manifest(format!(
                    "entry `{}` has modality {} in the {} manifest",
                    e.id,
                    e.modality.as_str(),
                    modality.as_str()
                )));
            }
        }
        let report = data.pairing()?;
        if !report.is_complete() {
            let missing: Vec<&String> = report
                .missing_speaker_side
                .iter()
                .chain(&report.missing_text_side)
                .collect();
            return Err(Error::Manifest(format!(
                "speakers without both modalities: {missing:?}"
            )));
        }
        if report.n_speakers < 2 {
            return Err(Error::TooFew {
                what: "speakers",
                needed: 2,
                found: report.n_speakers,
            });
        }

        let mut by_speaker: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (i, e) in data.speaker.manifest.entries.iter().enumerate() {
            by_speaker.entry(&e.speaker).or_default().0.push(i);
        }
        for (i, e) in data.text.manifest.entries.iter().enumerate() {
            by_speaker.entry(&e.speaker).or_default().1.push(i);
        }
        let mut pairs = Vec::new();
        let mut classes = Vec::with_capacity(by_speaker.len());
        for (class, (speaker, (utts, prompts))) in by_speaker.into_iter().enumerate() {
            classes.push(speaker.to_string());
            for (u, &row) in utts.iter().enumerate() {
                pairs.push((row, prompts[u % prompts.len()], class));
            }
        }
        Ok(Self {
            speaker_rows: data.speaker.matrix(),
            text_rows: data.text.matrix(),
            pairs,
            classes,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Batch made of the given pairs, in order.
    pub fn batch(&self, pair_indices: &[usize]) -> PairedBatch {
        let pairs: Vec<(usize, usize, usize)> =
            pair_indices.iter().map(|&k| self.pairs[k]).collect();
        let s: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let t: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        PairedBatch {
            speaker_rows: self.speaker_rows.select_rows(&s),
            text_rows: self.text_rows.select_rows(&t),
            labels: BatchLabels(pairs.iter().map(|p| p.2).collect()),
            pairs: pairs.iter().map(|p| (p.0, p.1)).collect(),
        }
    }
}

/// Aligned speaker and text rows; row `i` of each belongs to the same speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedBatch {
    pub speaker_rows: Matrix,
    pub text_rows: Matrix,
    pub labels: BatchLabels,
    /// `(speaker row, text row)` indices into [`TrainingData`].
    pub pairs: Vec<(usize, usize)>,
}

impl PairedBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Splits all pairs into batches, shuffled when `rng` is given. A trailing
/// batch with fewer than two pairs is dropped.
pub fn make_batches(
    data: &TrainingData,
    batch_size: usize,
    rng: Option<&mut SeededRng>,
) -> Result<Vec<PairedBatch>> {
    if batch_size < 2 {
        return Err(Error::Config("batch_size must be at least 2".into()));
    }
    let mut order: Vec<usize> = (0..data.pairs.len()).collect();
    if let Some(rng) = rng {
        rng.shuffle(&mut order);
    }
    Ok(order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(|c| data.batch(c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_io::{gen_synthetic, SynthSpec};

    fn dataset(speakers: usize, utts: usize) -> Dataset {
        gen_synthetic(&SynthSpec {
            n_speakers: speakers,
            utts_per_speaker: utts,
            dim_speaker: 6,
            dim_text: 5,
            latent_dim: 3,
            ..SynthSpec::default()
        })
        .unwrap()
        .dataset
    }

    #[test]
    fn covers_all_speakers() {
        let data = TrainingData::new(&dataset(4, 1)).unwrap();
        let batches = make_batches(&data, 2, None).unwrap();
        assert_eq!(batches.len(), 2);
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.labels.0.clone()).collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_prompt_repeats() {
        let data = TrainingData::new(&dataset(2, 3)).unwrap();
        let texts: Vec<usize> = data.pairs.iter().filter(|p| p.2 == 0).map(|p| p.1).collect();
        assert_eq!(texts.len(), 3);
        assert!(texts.iter().all(|&t| t == texts[0]));
        let b = data.batch(&[0, 1]);
        assert_eq!(b.text_rows.row(0), b.text_rows.row(1));
        assert_ne!(b.speaker_rows.row(0), b.speaker_rows.row(1));
    }

    #[test]
    fn seeded_shuffle_is_reproducible() {
        let data = TrainingData::new(&dataset(5, 3)).unwrap();
        let a = make_batches(&data, 4, Some(&mut SeededRng::new(3))).unwrap();
        let b = make_batches(&data, 4, Some(&mut SeededRng::new(3))).unwrap();
        let c = make_batches(&data, 4, Some(&mut SeededRng::new(4))).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // 15 pairs in batches of 4: the trailing 3 are kept
        assert_eq!(a.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![4, 4, 4, 3]);
        for batch in &a {
            let mut p = batch.pairs.clone();
            p.sort();
            p.dedup();
            assert_eq!(p.len(), batch.len());
        }
    }

    #[test]
    fn short_tail_dropped() {
        let data = TrainingData::new(&dataset(5, 1)).unwrap();
        let b = make_batches(&data, 2, None).unwrap();
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn rejects_single_speaker_and_incomplete_pairing() {
        let one = dataset(2, 2);
        let mut d = one.clone();
        d.text.manifest.entries.iter_mut().for_each(|e| e.speaker = "spk0000".into());
        d.speaker.manifest.entries.iter_mut().for_each(|e| e.speaker = "spk0000".into());
        assert!(matches!(
            TrainingData::new(&d),
            Err(Error::TooFew { what: "speakers", .. })
        ));
        let mut d = one;
        d.text.manifest.entries[1].speaker = "spk0000".into();
        assert!(matches!(TrainingData::new(&d), Err(Error::Manifest(_))));
    }
}
