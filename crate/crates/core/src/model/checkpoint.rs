use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Model;
use crate::optim::OptimState;
use crate::{Error, Result};

/// First line of every checkpoint file.
pub const CHECKPOINT_MAGIC: &str = "LGIN-CHECKPOINT v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<OptimState>,
}

/// Writes the magic line followed by JSON.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{CHECKPOINT_MAGIC}")?;
    serde_json::to_writer(&mut f, ckpt)?;
    writeln!(f)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let (head, body) = text.split_once('\n').unwrap_or((&text, ""));
    if head.trim_end() != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "expected header `{CHECKPOINT_MAGIC}`, found `{}`",
            head.chars().take(40).collect::<String>()
        )));
    }
    let mut ckpt: Checkpoint = serde_json::from_str(body)?;
    ckpt.model.config.validate()?;
    ckpt.model.params.restore_grads();
    if let Some(o) = &ckpt.optimizer {
        if o.m.len() != ckpt.model.params.len() {
            return Err(Error::Checkpoint("optimizer state does not match parameters".into()));
        }
    }
    Ok(ckpt)
}
