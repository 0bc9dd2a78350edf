//! JSON-lines manifests that attach ids, speaker labels and modality to the
//! rows of an EMB1 file.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::emb1::{read_embeddings, write_embeddings, EmbeddingSet};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Speaker,
    Text,
}

impl Modality {
    pub fn other(self) -> Modality {
        match self {
            Modality::Speaker => Modality::Text,
            Modality::Text => Modality::Speaker,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Speaker => "speaker",
            Modality::Text => "text",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub row: usize,
    pub speaker: String,
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every row index below `row_count`, every id and every row used once.
    pub fn validate(&self, row_count: usize) -> Result<()> {
        let mut ids = HashSet::with_capacity(self.entries.len());
        let mut rows = HashSet::with_capacity(self.entries.len());
        for e in &self.entries {
            if e.row >= row_count {
                return Err(Error::Manifest(format!(
                    "entry {:?} points at row {} but the set has {row_count} rows",
                    e.id, e.row
                )));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
            if !rows.insert(e.row) {
                return Err(Error::Manifest(format!("row {} listed twice", e.row)));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| {
                Error::Manifest(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One modality's embeddings together with their manifest, viewed in
/// manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub set: EmbeddingSet,
    pub manifest: Manifest,
}

impl LabeledSet {
    pub fn new(set: EmbeddingSet, manifest: Manifest) -> Result<Self> {
        manifest.validate(set.count())?;
        let mut ids: Vec<String> = set.ids().to_vec();
        for e in &manifest.entries {
            ids[e.row] = e.id.clone();
        }
        // manifest ids become the row ids; unlisted rows keep positional ids
        let set = set.with_ids(ids)?;
        Ok(Self { set, manifest })
    }

    pub fn len(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn ids(&self) -> Vec<String> {
        self.manifest.entries.iter().map(|e| e.id.clone()).collect()
    }

    pub fn speakers(&self) -> Vec<String> {
        self.manifest.entries.iter().map(|e| e.speaker.clone()).collect()
    }

    /// Rows in manifest order, widened to `f64`.
    pub fn matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.len(), self.dim());
        for (i, e) in self.manifest.entries.iter().enumerate() {
            for (dst, &src) in m.row_mut(i).iter_mut().zip(self.set.row(e.row)) {
                *dst = f64::from(src);
            }
        }
        m
    }

    pub fn load(emb: &Path, manifest: &Path) -> Result<Self> {
        Self::new(read_embeddings(emb)?, Manifest::read(manifest)?)
    }

    pub fn save(&self, emb: &Path, manifest: &Path) -> Result<()> {
        write_embeddings(&self.set, emb)?;
        self.manifest.write(manifest)
    }
}

/// Paired speaker and text data, stored as four files in one directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub speaker: LabeledSet,
    pub text: LabeledSet,
}

pub const SPEAKER_EMB: &str = "speaker.emb";
pub const SPEAKER_MANIFEST: &str = "speaker.jsonl";
pub const TEXT_EMB: &str = "text.emb";
pub const TEXT_MANIFEST: &str = "text.jsonl";

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let speaker = LabeledSet::load(&dir.join(SPEAKER_EMB), &dir.join(SPEAKER_MANIFEST))?;
        let text = LabeledSet::load(&dir.join(TEXT_EMB), &dir.join(TEXT_MANIFEST))?;
        Ok(Self { speaker, text })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.speaker
            .save(&dir.join(SPEAKER_EMB), &dir.join(SPEAKER_MANIFEST))?;
        self.text.save(&dir.join(TEXT_EMB), &dir.join(TEXT_MANIFEST))
    }

    pub fn pairing(&self) -> Result<PairingReport> {
        validate_pairing(&self.speaker.manifest, &self.text.manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairingReport {
    pub n_speakers: usize,
    pub n_utterances: usize,
    pub n_prompts: usize,
    pub utterances_per_speaker: BTreeMap<String, usize>,
    pub prompts_per_speaker: BTreeMap<String, usize>,
    /// Speakers that have prompts but no utterances.
    pub missing_speaker_side: BTreeSet<String>,
    /// Speakers that have utterances but no prompts.
    pub missing_text_side: BTreeSet<String>,
}

impl PairingReport {
    pub fn is_complete(&self) -> bool {
        self.missing_speaker_side.is_empty() && self.missing_text_side.is_empty()
    }
}

/// Cross-checks that every speaker has both utterances and prompts.
///
/// Entries are classified by their own `modality` field, whichever manifest
/// they come from.
pub fn validate_pairing(speaker: &Manifest, text: &Manifest) -> Result<PairingReport> {
    let mut ids = HashSet::new();
    let mut utts: BTreeMap<String, usize> = BTreeMap::new();
    let mut prompts: BTreeMap<String, usize> = BTreeMap::new();
    for e in speaker.entries.iter().chain(&text.entries) {
        if !ids.insert(e.id.as_str()) {
            return Err(Error::DuplicateId(e.id.clone()));
        }
        let side = match e.modality {
            Modality::Speaker => &mut utts,
            Modality::Text => &mut prompts,
        };
        *side.entry(e.speaker.clone()).or_default() += 1;
    }
    let missing_speaker_side = prompts
        .keys()
        .filter(|s| !utts.contains_key(*s))
        .cloned()
        .collect();
    let missing_text_side = utts
        .keys()
        .filter(|s| !prompts.contains_key(*s))
        .cloned()
        .collect();
    let all: BTreeSet<&String> = utts.keys().chain(prompts.keys()).collect();
    Ok(PairingReport {
        n_speakers: all.len(),
        n_utterances: utts.values().sum(),
        n_prompts: prompts.values().sum(),
        utterances_per_speaker: utts,
        prompts_per_speaker: prompts,
        missing_speaker_side,
        missing_text_side,
    })
}
