//! JSON checkpoints: every parameter block with its shape, the producing
//! configuration, and which epoch was selected.

use std::path::Path;

use fairrep_core::model::{DecoderParams, EncoderParams, HeadParams};
use fairrep_core::train::{SelectCriterion, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Which parameters a run keeps: the last iterate, or the running best
/// under one of the validation criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectPolicy {
    Final,
    AccMinusDp,
    MinValLoss,
}

impl SelectPolicy {
    pub fn parse(s: &str) -> Option<SelectPolicy> {
        match s {
            "final" => Some(SelectPolicy::Final),
            "acc-minus-dp" => Some(SelectPolicy::AccMinusDp),
            "min-val-loss" => Some(SelectPolicy::MinValLoss),
            _ => None,
        }
    }

    pub fn criterion(self) -> Option<SelectCriterion> {
        match self {
            SelectPolicy::Final => None,
            SelectPolicy::AccMinusDp => Some(SelectCriterion::AccMinusDp),
            SelectPolicy::MinValLoss => Some(SelectCriterion::MinValLoss),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub selected_epoch: usize,
    pub policy: SelectPolicy,
    pub encoder: EncoderParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub head: Option<HeadParams>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decoder: Option<DecoderParams>,
}

pub const FORMAT_VERSION: u32 = 1;

pub fn save(checkpoint: &Checkpoint, path: &Path) -> CliResult<()> {
    let json = serde_json::to_string_pretty(checkpoint)
        .map_err(|e| CliError::user(format!("checkpoint encode: {e}")))?;
    std::fs::write(path, json)
        .map_err(|e| CliError::user(format!("cannot write `{}`: {e}", path.display())))?;
    Ok(())
}

pub fn load(path: &Path) -> CliResult<Checkpoint> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::user(format!("cannot open checkpoint `{}`: {e}", path.display())))?;
    let ck: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| CliError::user(format!("checkpoint parse: {e}")))?;
    if ck.format_version != FORMAT_VERSION {
        return Err(CliError::user(format!(
            "checkpoint format {} unsupported (expected {FORMAT_VERSION})",
            ck.format_version
        )));
    }
    if !ck.encoder.w.is_finite() || !ck.encoder.b.is_finite() {
        return Err(CliError::user("checkpoint: non-finite encoder parameters"));
    }
    Ok(ck)
}
