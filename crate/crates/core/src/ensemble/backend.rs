use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::worker::{WorkerClient, WorkerRequest};
use crate::dataset::{Sample, Template};
use crate::error::{Error, Result};
use crate::scorer::{score_sample, ScoreVector, ToyScorerParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// In-process toy scorer; source is a params file.
    Toy,
    /// Precomputed scores; source is a JSON-lines logits file.
    LogitsFile,
    /// External process speaking the worker protocol; source is its command
    /// line (whitespace-separated).
    ExternalWorker,
}

/// Where one model's scores come from.
///
/// The textual form is `kind:id:source` with kind one of `toy`, `logits` or
/// `worker`, e.g. `logits:roberta:dev_roberta.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerBackend {
    pub kind: BackendKind,
    pub id: String,
    pub source: String,
}

impl FromStr for ScorerBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, ':');
        let (Some(kind), Some(id), Some(source)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::InvalidInput(format!("backend {s:?} is not kind:id:source")));
        };
        let kind = match kind {
            "toy" => BackendKind::Toy,
            "logits" | "logits_file" => BackendKind::LogitsFile,
            "worker" | "external_worker" => BackendKind::ExternalWorker,
            other => return Err(Error::InvalidInput(format!("unknown backend kind {other:?}"))),
        };
        if id.is_empty() || source.is_empty() {
            return Err(Error::InvalidInput(format!("backend {s:?} has an empty id or source")));
        }
        Ok(Self { kind, id: id.into(), source: source.into() })
    }
}

impl fmt::Display for ScorerBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            BackendKind::Toy => "toy",
            BackendKind::LogitsFile => "logits",
            BackendKind::ExternalWorker => "worker",
        };
        write!(f, "{kind}:{}:{}", self.id, self.source)
    }
}

/// Score vectors of one backend keyed by sample id, all of one length.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    pub backend_id: String,
    pub choice_count: usize,
    scores: BTreeMap<String, Vec<f64>>,
}

impl ScoreMatrix {
    pub fn from_vectors(backend_id: impl Into<String>, vectors: impl IntoIterator<Item = ScoreVector>) -> Result<Self> {
        let mut scores = BTreeMap::new();
        let mut choice_count = None;
        for v in vectors {
            v.validate()?;
            match choice_count {
                None => choice_count = Some(v.len()),
                Some(n) if n != v.len() => {
                    return Err(Error::Shape(format!("{}: {} scores, expected {n}", v.sample_id, v.len())))
                }
                Some(_) => {}
            }
            if scores.insert(v.sample_id.clone(), v.scores).is_some() {
                return Err(Error::DuplicateId(v.sample_id));
            }
        }
        Ok(Self { backend_id: backend_id.into(), choice_count: choice_count.unwrap_or(0), scores })
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.scores.get(id).map(Vec::as_slice)
    }

    pub fn vector(&self, id: &str) -> Option<ScoreVector> {
        self.get(id).map(|s| ScoreVector { sample_id: id.to_string(), scores: s.to_vec() })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.scores.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// The sub-matrix over exactly `ids`; errors listing any id not present.
    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut scores = BTreeMap::new();
        let mut missing = Vec::new();
        for id in ids {
            match self.scores.get(id) {
                Some(s) => {
                    scores.insert(id.to_string(), s.clone());
                }
                None => missing.push(id.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingIds(missing));
        }
        Ok(Self { backend_id: self.backend_id.clone(), choice_count: self.choice_count, scores })
    }

    /// Labels predicted by this backend alone.
    pub fn predictions(&self) -> BTreeMap<String, usize> {
        self.scores.iter().map(|(id, s)| (id.clone(), crate::scorer::argmax(s))).collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Template for the texts sent to external workers.
    pub template: Template,
    /// Use these parameters for toy backends instead of reading the source.
    pub toy_params: Option<ToyScorerParams>,
}

#[derive(Deserialize)]
struct LogitsRecord {
    id: String,
    scores: Vec<f64>,
}

fn read_logits_file(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: LogitsRecord = serde_json::from_str(line)
            .map_err(|e| Error::Record { line: i + 1, message: format!("{}: {e}", path.display()) })?;
        if records.insert(record.id.clone(), record.scores).is_some() {
            return Err(Error::DuplicateId(record.id));
        }
    }
    Ok(records)
}

/// One `{"id": …, "scores": […]}` line per sample, sorted by id.
pub fn write_logits_file(path: impl AsRef<Path>, matrix: &ScoreMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (id, scores) in &matrix.scores {
        let line = serde_json::json!({ "id": id, "scores": scores });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn check_arity(samples: &[Sample], matrix: &ScoreMatrix) -> Result<()> {
    for s in samples {
        let got = matrix.get(s.id()).map_or(0, <[f64]>::len);
        if got != s.choice_count() {
            return Err(Error::Shape(format!(
                "{}: backend {} gave {got} scores for {} choices",
                s.id(),
                matrix.backend_id,
                s.choice_count()
            )));
        }
    }
    Ok(())
}

/// Scores every sample with one backend.
pub fn load_score_matrix(backend: &ScorerBackend, samples: &[Sample], options: &LoadOptions) -> Result<ScoreMatrix> {
    let mut seen = HashSet::new();
    if let Some(dup) = samples.iter().find(|s| !seen.insert(s.id())) {
        return Err(Error::DuplicateId(dup.id().to_string()));
    }
    let matrix = match backend.kind {
        BackendKind::Toy => {
            let loaded;
            let params = match &options.toy_params {
                Some(p) => p,
                None => {
                    loaded = ToyScorerParams::load(&backend.source)?.0;
                    &loaded
                }
            };
            let vectors = samples.iter().map(|s| score_sample(params, s)).collect::<Result<Vec<_>>>()?;
            ScoreMatrix::from_vectors(&backend.id, vectors)?
        }
        BackendKind::LogitsFile => {
            let records = read_logits_file(Path::new(&backend.source))?;
            let full = ScoreMatrix::from_vectors(
                &backend.id,
                records.into_iter().map(|(id, scores)| ScoreVector { sample_id: id, scores }),
            )?;
            full.restrict(samples.iter().map(Sample::id))?
        }
        BackendKind::ExternalWorker => {
            let command: Vec<String> = backend.source.split_whitespace().map(String::from).collect();
            let requests = samples
                .iter()
                .map(|s| {
                    let texts = s.reconstruct(&options.template)?.into_iter().map(|r| r.text).collect();
                    Ok(WorkerRequest { id: s.id().to_string(), texts })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut client = WorkerClient::spawn(&command)?;
            let scores = client.score(&requests)?;
            client.finish()?;
            ScoreMatrix::from_vectors(
                &backend.id,
                samples.iter().map(|s| ScoreVector { sample_id: s.id().to_string(), scores: scores[s.id()].clone() }),
            )?
        }
    };
    check_arity(samples, &matrix)?;
    Ok(matrix)
}
