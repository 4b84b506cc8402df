//! Kind-tagged JSON problem files.
//!
//! ```json
//! { "kind": "mdp", "states": [...], "actions": [[{"label": .., "p": [..], "r": [..]}], ..] }
//! { "kind": "tree", "root": {"type": "decision", "branches": [..]} }
//! { "kind": "staged", "stages": [[..], ..], "initial": {..}, "allow_substochastic": false }
//! ```
//!
//! Every kind accepts an optional `notes` array of free-form strings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_problem, ActionSpec, ControlledMarkovProblem, ModelError, ProblemDraft,
};
use crate::stages::{StageError, StagedDraft, StagedModel, StateDraft};
use crate::tree::{TreeError, TreeNode};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Model(#[from] ModelError),
    #[error("validation error: {0}")]
    Tree(#[from] TreeError),
    #[error("validation error: {0}")]
    Stage(#[from] StageError),
}

impl FormatError {
    pub fn is_parse(&self) -> bool {
        matches!(self, FormatError::Read { .. } | FormatError::Parse(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mdp(ControlledMarkovProblem),
    Tree(TreeNode),
    Staged(StagedModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mdp(_) => "mdp",
            Model::Tree(_) => "tree",
            Model::Staged(_) => "staged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub model: Model,
    pub notes: Vec<String>,
}

impl ProblemFile {
    /// Warnings accepted during validation.
    pub fn warnings(&self) -> Vec<String> {
        match &self.model {
            Model::Staged(m) => m.warnings().to_vec(),
            _ => Vec::new(),
        }
    }
}

#[derive(Deserialize)]
struct KindProbe {
    kind: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
    states: Vec<String>,
    actions: Vec<Vec<ActionSpec>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
    root: TreeNode,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StagedFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_substochastic: bool,
    stages: Vec<Vec<StateDraft>>,
    initial: std::collections::BTreeMap<String, f64>,
}

fn deserialize_with_path<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, FormatError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path.is_empty() || path == "." {
            FormatError::Parse(inner.to_string())
        } else {
            FormatError::Parse(format!("at `{path}`: {inner}"))
        }
    })?;
    de.end().map_err(|e| FormatError::Parse(e.to_string()))?;
    Ok(value)
}

/// Parses and validates a problem document.
pub fn parse_problem_str(text: &str) -> Result<ProblemFile, FormatError> {
    if text.trim().is_empty() {
        return Err(FormatError::Parse("empty document".into()));
    }
    let probe: KindProbe =
        serde_json::from_str(text).map_err(|e| FormatError::Parse(e.to_string()))?;
    match probe.kind.as_str() {
        "mdp" => {
            let file: MdpFile = deserialize_with_path(text)?;
            let problem = validate_problem(ProblemDraft {
                states: file.states,
                actions: file.actions,
            })?;
            Ok(ProblemFile {
                model: Model::Mdp(problem),
                notes: file.notes,
            })
        }
        "tree" => {
            let file: TreeFile = deserialize_with_path(text)?;
            file.root.validate()?;
            Ok(ProblemFile {
                model: Model::Tree(file.root),
                notes: file.notes,
            })
        }
        "staged" => {
            let file: StagedFile = deserialize_with_path(text)?;
            let model = StagedModel::try_from(StagedDraft {
                stages: file.stages,
                initial: file.initial,
                allow_substochastic: file.allow_substochastic,
            })?;
            Ok(ProblemFile {
                model: Model::Staged(model),
                notes: file.notes,
            })
        }
        other => Err(FormatError::Parse(format!(
            "unknown kind {other:?} (expected \"mdp\", \"tree\" or \"staged\")"
        ))),
    }
}

pub fn parse_problem_file(path: impl AsRef<Path>) -> Result<ProblemFile, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FormatError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_problem_str(&text).map_err(|e| match e {
        FormatError::Parse(msg) => FormatError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Serializes a problem back to its file form, full precision.
pub fn render_problem_file(file: &ProblemFile) -> String {
    let notes = file.notes.clone();
    let json = match &file.model {
        Model::Mdp(problem) => {
            let draft = ProblemDraft::from(problem.clone());
            serde_json::to_string_pretty(&MdpFile {
                kind: "mdp".into(),
                notes,
                states: draft.states,
                actions: draft.actions,
            })
        }
        Model::Tree(root) => serde_json::to_string_pretty(&TreeFile {
            kind: "tree".into(),
            notes,
            root: root.clone(),
        }),
        Model::Staged(model) => {
            let draft = StagedDraft::from(model.clone());
            serde_json::to_string_pretty(&StagedFile {
                kind: "staged".into(),
                notes,
                allow_substochastic: draft.allow_substochastic,
                stages: draft.stages,
                initial: draft.initial,
            })
        }
    };
    let mut out = json.expect("problem files always serialize");
    out.push('\n');
    out
}
