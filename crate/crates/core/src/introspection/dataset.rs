//! Activation dataset collection and persistence (JSONL).

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbrl::{fe_forward, FeatureExtractor};
use crate::env::{BehaviourId, PickPlaceEnv};
use crate::rng::{stream_rng, Stream};
use crate::Scalar;

/// One timestep's captured activations with its behaviour label.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    pub episode: u32,
    pub timestep: u32,
    pub behaviour: BehaviourId,
    pub activations: Vec<Scalar>,
}

/// Where a dataset came from: the noise level applied to observations and the
/// checkpoint identifier of the feature extractor that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProvenance {
    pub noise_level: Scalar,
    pub fe_checkpoint: String,
    pub episodes: u32,
}

/// An ordered, non-empty collection of activation records sharing one
/// activation dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDataset {
    pub provenance: DatasetProvenance,
    pub records: Vec<ActivationRecord>,
}

impl ActivationDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn activation_dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.activations.len())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    Empty,
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Roll expert episodes and capture one record per timestep.
///
/// The scripted schedule provides behaviour labels, the expert provides the
/// executed actions, and `noise_level` perturbs the observation before it
/// reaches the feature extractor. Failed expert episodes are still recorded.
pub fn collect_activation_dataset(
    env: &PickPlaceEnv,
    fe: &FeatureExtractor,
    episodes: u32,
    noise_level: Scalar,
    fe_checkpoint: &str,
    seed: u64,
) -> ActivationDataset {
    let mut reset_rng = stream_rng(seed, Stream::EnvReset);
    let mut noise_rng = stream_rng(seed, Stream::Noise);
    let mut records = Vec::new();
    for episode in 0..episodes {
        let (mut state, mut obs) = env.reset(&mut reset_rng);
        let mut timestep = 0u32;
        loop {
            let behaviour = env.scripted_behaviour_schedule(&state);
            let noisy = env.inject_noise(&obs, noise_level, &mut noise_rng);
            let (_features, activations) = fe_forward(fe, &noisy);
            records.push(ActivationRecord { episode, timestep, behaviour, activations });
            let action = env.expert_action(&state, behaviour);
            let (next, next_obs, _reward, done) = env.step(&state, behaviour, &action);
            state = next;
            obs = next_obs;
            timestep += 1;
            if done {
                break;
            }
        }
    }
    ActivationDataset {
        provenance: DatasetProvenance { noise_level, fe_checkpoint: fe_checkpoint.to_string(), episodes },
        records,
    }
}

/// Disjoint shuffled index split: `⌊n·f⌋` train indices, the rest validation.
pub fn split_dataset<R: Rng>(
    ds: &ActivationDataset,
    train_fraction: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    assert!(!ds.is_empty(), "split of an empty dataset");
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train_fraction {train_fraction} outside (0,1)"
    );
    let n = ds.len();
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let n_train = (n as f64 * train_fraction).floor() as usize;
    let validation = indices.split_off(n_train);
    (indices, validation)
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    provenance: DatasetProvenance,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    episode: u32,
    timestep: u32,
    behaviour: String,
    activations: Vec<Scalar>,
}

/// Serialize as JSONL: one provenance header line, then one record per line.
pub fn write_jsonl<W: Write>(ds: &ActivationDataset, mut w: W) -> Result<(), DatasetError> {
    let header = HeaderLine { provenance: ds.provenance.clone() };
    serde_json::to_writer(&mut w, &header).map_err(io_err)?;
    w.write_all(b"\n")?;
    for r in &ds.records {
        let line = RecordLine {
            episode: r.episode,
            timestep: r.timestep,
            behaviour: r.behaviour.label().to_string(),
            activations: r.activations.clone(),
        };
        serde_json::to_writer(&mut w, &line).map_err(io_err)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn io_err(e: serde_json::Error) -> DatasetError {
    DatasetError::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
}

/// Parse a JSONL dataset, reporting the 1-based line number of any malformed
/// line.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<ActivationDataset, DatasetError> {
    let mut lines = r.lines();
    let header_text = match lines.next() {
        Some(line) => line?,
        None => return Err(DatasetError::Empty),
    };
    let header: HeaderLine = serde_json::from_str(&header_text)
        .map_err(|e| DatasetError::Malformed { line: 1, msg: e.to_string() })?;

    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = serde_json::from_str(&text)
            .map_err(|e| DatasetError::Malformed { line: line_no, msg: e.to_string() })?;
        let behaviour = BehaviourId::parse(&parsed.behaviour).ok_or_else(|| DatasetError::Malformed {
            line: line_no,
            msg: format!("unknown behaviour label {:?}", parsed.behaviour),
        })?;
        if let Some(d) = dim {
            if parsed.activations.len() != d {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    msg: format!("activation length {} != {}", parsed.activations.len(), d),
                });
            }
        } else {
            dim = Some(parsed.activations.len());
        }
        records.push(ActivationRecord {
            episode: parsed.episode,
            timestep: parsed.timestep,
            behaviour,
            activations: parsed.activations,
        });
    }
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(ActivationDataset { provenance: header.provenance, records })
}
