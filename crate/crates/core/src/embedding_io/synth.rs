//! Deterministic synthetic speaker/text embeddings.
//!
//! Each speaker `k` owns a latent unit vector `z_k`. Two fixed random linear
//! maps stand in for the speaker and text encoders:
//!
//! - speaker rows: `normalize(P_s·z_k + noise·ε)`
//! - text rows:    `normalize(c·P_t·z_k + (1−c)·u_k + text_noise·ε')`
//!
//! where `u_k` is a per-speaker vector independent of `z_k` and `c` is the
//! cross-modal correlation. Map entries are standard normal, so with a unit
//! latent every clean component has unit variance and the noise levels are
//! relative to that.
//!
//! Speaker `k` draws from its own RNG stream, so a dataset generated with
//! `first_speaker = 100` shares encoders with, but is disjoint from, one
//! generated with `first_speaker = 0` under the same seed.

use serde::{Deserialize, Serialize};

use super::emb1::EmbeddingSet;
use super::manifest::{Dataset, LabeledSet, Manifest, ManifestEntry, Modality};
use crate::error::{Error, Result};
use crate::numerics::{l2_normalize, splitmix64, Matrix, SeededRng};

const SPEAKER_MAP_STREAM: u64 = u64::MAX;
const TEXT_MAP_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub n_speakers: usize,
    pub utts_per_speaker: usize,
    pub prompts_per_speaker: usize,
    pub dim_speaker: usize,
    pub dim_text: usize,
    pub latent_dim: usize,
    /// Standard deviation of per-utterance noise on speaker rows.
    pub intra_speaker_noise: f64,
    /// Standard deviation of per-prompt noise on text rows.
    pub text_noise: f64,
    pub cross_modal_correlation: f64,
    /// Global index of the first generated speaker.
    pub first_speaker: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_speakers: 30,
            utts_per_speaker: 5,
            prompts_per_speaker: 1,
            dim_speaker: 192,
            dim_text: 768,
            latent_dim: 32,
            intra_speaker_noise: 0.05,
            text_noise: 0.0,
            cross_modal_correlation: 1.0,
            first_speaker: 0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_speakers", self.n_speakers),
            ("utts_per_speaker", self.utts_per_speaker),
            ("prompts_per_speaker", self.prompts_per_speaker),
            ("dim_speaker", self.dim_speaker),
            ("dim_text", self.dim_text),
            ("latent_dim", self.latent_dim),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.intra_speaker_noise >= 0.0 && self.intra_speaker_noise.is_finite()) {
            return Err(Error::Config("intra_speaker_noise must be >= 0".into()));
        }
        if !(self.text_noise >= 0.0 && self.text_noise.is_finite()) {
            return Err(Error::Config("text_noise must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.cross_modal_correlation) {
            return Err(Error::Config(
                "cross_modal_correlation must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// Latent unit vector of each generated speaker, in generation order.
    pub latents: Vec<Vec<f64>>,
}

pub fn speaker_label(k: usize) -> String {
    format!("spk{k:04}")
}

pub fn gen_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let map_s = random_map(spec.seed, SPEAKER_MAP_STREAM, spec.latent_dim, spec.dim_speaker);
    let map_t = random_map(spec.seed, TEXT_MAP_STREAM, spec.latent_dim, spec.dim_text);
    let c = spec.cross_modal_correlation;

    let n_utts = spec.n_speakers * spec.utts_per_speaker;
    let n_prompts = spec.n_speakers * spec.prompts_per_speaker;
    let mut spk_data = Vec::with_capacity(n_utts * spec.dim_speaker);
    let mut txt_data = Vec::with_capacity(n_prompts * spec.dim_text);
    let mut spk_entries = Vec::with_capacity(n_utts);
    let mut txt_entries = Vec::with_capacity(n_prompts);
    let mut latents = Vec::with_capacity(spec.n_speakers);

    for k in spec.first_speaker..spec.first_speaker + spec.n_speakers {
        let mut rng = SeededRng::derive(spec.seed, k as u64);
        let z = loop {
            let raw: Vec<f64> = (0..spec.latent_dim).map(|_| rng.normal()).collect();
            if let Ok(z) = l2_normalize(&raw) {
                break z;
            }
        };
        let unrelated: Vec<f64> = (0..spec.dim_text).map(|_| rng.normal()).collect();
        let clean_s = apply(&map_s, &z);
        let clean_t = apply(&map_t, &z);
        let label = speaker_label(k);

        for u in 0..spec.utts_per_speaker {
            let row: Vec<f64> = clean_s
                .iter()
                .map(|x| x + spec.intra_speaker_noise * rng.normal())
                .collect();
            spk_entries.push(ManifestEntry {
                id: format!("{label}_utt{u:02}"),
                row: spk_entries.len(),
                speaker: label.clone(),
                modality: Modality::Speaker,
                text: None,
            });
            push_normalized(&mut spk_data, &row)?;
        }
        for p in 0..spec.prompts_per_speaker {
            let row: Vec<f64> = clean_t
                .iter()
                .zip(&unrelated)
                .map(|(t, u)| c * t + (1.0 - c) * u + spec.text_noise * rng.normal())
                .collect();
            txt_entries.push(ManifestEntry {
                id: format!("{label}_txt{p:02}"),
                row: txt_entries.len(),
                speaker: label.clone(),
                modality: Modality::Text,
                text: Some(prompt_text(spec.seed, k, p)),
            });
            push_normalized(&mut txt_data, &row)?;
        }
        latents.push(z);
    }

    let spk_ids = spk_entries.iter().map(|e| e.id.clone()).collect();
    let txt_ids = txt_entries.iter().map(|e| e.id.clone()).collect();
    let speaker = LabeledSet::new(
        EmbeddingSet::new(spec.dim_speaker, spk_data, spk_ids)?,
        Manifest::new(spk_entries),
    )?;
    let text = LabeledSet::new(
        EmbeddingSet::new(spec.dim_text, txt_data, txt_ids)?,
        Manifest::new(txt_entries),
    )?;
    Ok(SyntheticData {
        dataset: Dataset { speaker, text },
        latents,
    })
}

/// `latent_dim × out_dim` map with standard-normal entries.
fn random_map(seed: u64, stream: u64, latent_dim: usize, out_dim: usize) -> Matrix {
    let mut rng = SeededRng::derive(seed, stream);
    Matrix::from_vec(
        latent_dim,
        out_dim,
        (0..latent_dim * out_dim).map(|_| rng.normal()).collect(),
    )
}

fn apply(map: &Matrix, z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; map.cols()];
    for (zi, row) in z.iter().zip(map.row_iter()) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += zi * w;
        }
    }
    out
}

fn push_normalized(dst: &mut Vec<f32>, row: &[f64]) -> Result<()> {
    dst.extend(l2_normalize(row)?.into_iter().map(|x| x as f32));
    Ok(())
}

const AGES: [&str; 3] = ["young", "middle-aged", "older"];
const GENDERS: [&str; 2] = ["female", "male"];
const PITCHES: [&str; 4] = ["low", "deep", "moderate", "high"];
const PACES: [&str; 4] = ["slow", "relaxed", "steady", "brisk"];

/// Slot-filled description for speaker `k`; `variant` rotates the template.
fn prompt_text(seed: u64, k: usize, variant: usize) -> String {
    let h = splitmix64(seed ^ splitmix64(k as u64));
    let pick = |slots: &[&'static str], shift: u32| slots[((h >> shift) as usize) % slots.len()];
    let (age, gender) = (pick(&AGES, 0), pick(&GENDERS, 8));
    let (pitch, pace) = (pick(&PITCHES, 16), pick(&PACES, 24));
    match variant % 3 {
        0 => format!("A {age} {gender} speaker with a {pitch}-pitched voice, talking at a {pace} pace."),
        1 => format!("This {gender} voice sounds {age}, {pitch} in pitch and {pace} in delivery."),
        _ => format!("{pace} speech from a {age} {gender} talker whose voice is {pitch}."),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, norm};

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            n_speakers: 6,
            utts_per_speaker: 3,
            dim_speaker: 12,
            dim_text: 10,
            latent_dim: 4,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = gen_synthetic(&small(5)).unwrap();
        let b = gen_synthetic(&small(5)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = gen_synthetic(&small(6)).unwrap();
        assert_ne!(a.dataset.speaker.set.data(), c.dataset.speaker.set.data());
    }

    #[test]
    fn shapes_and_labels() {
        let d = gen_synthetic(&small(1)).unwrap().dataset;
        assert_eq!(d.speaker.len(), 18);
        assert_eq!(d.text.len(), 6);
        assert_eq!(d.speaker.dim(), 12);
        assert_eq!(d.text.dim(), 10);
        let r = d.pairing().unwrap();
        assert!(r.is_complete());
        for row in d.speaker.matrix().row_iter() {
            assert!((norm(row) - 1.0).abs() < 1e-6);
        }
        let t = &d.text.manifest.entries[0];
        assert!(t.text.as_deref().unwrap().contains("speaker"));
    }

    #[test]
    fn noiseless_full_correlation_text_is_function_of_latent() {
        let spec = SynthSpec {
            intra_speaker_noise: 0.0,
            cross_modal_correlation: 1.0,
            ..small(3)
        };
        let out = gen_synthetic(&spec).unwrap();
        let map_t = random_map(spec.seed, TEXT_MAP_STREAM, spec.latent_dim, spec.dim_text);
        let expected: Vec<Vec<f64>> = out
            .latents
            .iter()
            .map(|z| l2_normalize(&apply(&map_t, z)).unwrap())
            .collect();
        let text = out.dataset.text.matrix();
        for (i, row) in text.row_iter().enumerate() {
            // nearest latent-derived text direction is the speaker's own
            let best = (0..expected.len())
                .max_by(|&a, &b| dot(row, &expected[a]).total_cmp(&dot(row, &expected[b])))
                .unwrap();
            assert_eq!(best, i);
            assert!((dot(row, &expected[i]) - 1.0).abs() < 1e-6);
        }
        // all utterances of one speaker coincide
        let spk = out.dataset.speaker.matrix();
        assert_eq!(spk.row(0), spk.row(1));
    }

    #[test]
    fn offset_speakers_share_encoders() {
        let a = gen_synthetic(&SynthSpec {
            n_speakers: 4,
            ..small(9)
        })
        .unwrap();
        let b = gen_synthetic(&SynthSpec {
            n_speakers: 2,
            first_speaker: 2,
            ..small(9)
        })
        .unwrap();
        assert_eq!(a.latents[2..], b.latents[..]);
        assert_eq!(
            a.dataset.speaker.matrix().row(6),
            b.dataset.speaker.matrix().row(0)
        );
    }

    #[test]
    fn invalid_settings_rejected() {
        let bad = SynthSpec {
            cross_modal_correlation: 1.5,
            ..small(0)
        };
        assert!(gen_synthetic(&bad).is_err());
        let bad = SynthSpec {
            n_speakers: 0,
            ..small(0)
        };
        assert!(gen_synthetic(&bad).is_err());
    }
}
