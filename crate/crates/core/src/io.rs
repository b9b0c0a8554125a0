//! JSON documents: instances (`*.uaq.json`), solutions (`*.sol.json`) and branch-tree dumps.
//!
//! Serialization is canonical: identifiers sorted lexicographically, role-permission pairs
//! sorted, constraint role lists sorted and constraints ordered by their first role label.
//! `pub` is always written out.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, InstanceBuilder, ModelError, Solution};
use crate::reduce::{BranchTree, TraceEntry};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Semantic(#[from] ModelError),
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDocument {
    pub roles: Vec<String>,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub roles: Vec<String>,
    pub permissions: Vec<String>,
    pub rp: Vec<(String, String)>,
    pub plb: Vec<String>,
    #[serde(rename = "pub", default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<String>>,
    #[serde(default)]
    pub constraints: Vec<ConstraintDocument>,
    pub kr: usize,
    pub kp: usize,
}

impl InstanceDocument {
    pub fn to_instance(&self) -> Result<Instance, ModelError> {
        let mut b = InstanceBuilder::new();
        for r in &self.roles {
            b.role(r.as_str());
        }
        for p in &self.permissions {
            b.permission(p.as_str());
        }
        for (r, p) in &self.rp {
            b.assign(r.as_str(), p.as_str());
        }
        for p in &self.plb {
            b.require(p.as_str());
        }
        if let Some(upper) = &self.upper {
            b.upper_bound(upper.iter().map(String::as_str));
        }
        for c in &self.constraints {
            b.constraint(c.roles.iter().map(String::as_str), c.t);
        }
        b.kr(self.kr).kp(self.kp).build()
    }

    /// The canonical document of `inst`.
    pub fn from_instance(inst: &Instance) -> Self {
        let sorted = |mut v: Vec<String>| {
            v.sort();
            v
        };
        let roles = sorted(inst.role_labels().to_vec());
        let permissions = sorted(inst.perm_labels().to_vec());
        let mut rp: Vec<(String, String)> = (0..inst.n_roles())
            .flat_map(|r| inst.perms(r).ones().map(move |p| (r, p)))
            .map(|(r, p)| (inst.role_label(r).to_owned(), inst.perm_label(p).to_owned()))
            .collect();
        rp.sort();
        let plb = sorted(
            inst.lower_bound()
                .ones()
                .map(|p| inst.perm_label(p).to_owned())
                .collect(),
        );
        let upper = sorted(
            inst.upper_bound()
                .ones()
                .map(|p| inst.perm_label(p).to_owned())
                .collect(),
        );
        let mut constraints: Vec<ConstraintDocument> = inst
            .constraints()
            .iter()
            .map(|c| ConstraintDocument {
                roles: sorted(
                    c.roles
                        .iter()
                        .map(|&r| inst.role_label(r).to_owned())
                        .collect(),
                ),
                t: c.threshold,
            })
            .collect();
        constraints.sort_by(|a, b| {
            (a.roles.first(), &a.roles, a.t).cmp(&(b.roles.first(), &b.roles, b.t))
        });
        InstanceDocument {
            roles,
            permissions,
            rp,
            plb,
            upper: Some(upper),
            constraints,
            kr: inst.kr(),
            kp: inst.kp(),
        }
    }
}

pub fn parse_instance(doc: &str) -> Result<Instance, IoError> {
    let parsed: InstanceDocument = serde_json::from_str(doc)?;
    Ok(parsed.to_instance()?)
}

pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = serde_json::to_string_pretty(&InstanceDocument::from_instance(inst))
        .expect("instance documents always serialize");
    out.push('\n');
    out
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance, IoError> {
    parse_instance(&read_text(path.as_ref())?)
}

fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Sat,
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<Vec<String>>,
    pub engine: String,
    pub wall_ms: u64,
}

impl SolutionDocument {
    pub fn new(
        inst: &Instance,
        solution: Option<&Solution>,
        engine: impl Into<String>,
        wall_ms: u64,
    ) -> Self {
        SolutionDocument {
            status: if solution.is_some() {
                Status::Sat
            } else {
                Status::Unsat
            },
            roles: solution.map(|s| {
                let mut labels: Vec<String> = s
                    .roles()
                    .iter()
                    .map(|&r| inst.role_label(r).to_owned())
                    .collect();
                labels.sort();
                labels
            }),
            engine: engine.into(),
            wall_ms,
        }
    }

    /// Resolves the role labels against `inst`; `None` for an unsat document.
    pub fn to_solution(&self, inst: &Instance) -> Result<Option<Solution>, ModelError> {
        match (&self.status, &self.roles) {
            (Status::Unsat, _) => Ok(None),
            (Status::Sat, roles) => {
                let roles = roles.as_deref().unwrap_or_default();
                let ids = roles
                    .iter()
                    .map(|l| {
                        inst.role_id(l)
                            .ok_or_else(|| ModelError::UnknownRole(l.clone()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Some(Solution::new(ids)))
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut out =
            serde_json::to_string_pretty(self).expect("solution documents always serialize");
        out.push('\n');
        out
    }
}

pub fn parse_solution(doc: &str) -> Result<SolutionDocument, IoError> {
    Ok(serde_json::from_str(doc)?)
}

pub fn read_solution(path: impl AsRef<Path>) -> Result<SolutionDocument, IoError> {
    parse_solution(&read_text(path.as_ref())?)
}

#[derive(Debug, Clone, Serialize)]
pub struct LeafDocument {
    pub instance: InstanceDocument,
    /// Roles forced into the solution, labelled as in the root instance.
    pub r1: Vec<String>,
    pub trace: Vec<TraceEntry>,
    pub infeasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeDocument {
    pub root: InstanceDocument,
    pub leaves: Vec<LeafDocument>,
}

impl TreeDocument {
    pub fn new(tree: &BranchTree) -> Self {
        TreeDocument {
            root: InstanceDocument::from_instance(&tree.root),
            leaves: tree
                .leaves
                .iter()
                .map(|leaf| {
                    let mut r1: Vec<String> = leaf
                        .r1
                        .iter()
                        .map(|&r| tree.root.role_label(r).to_owned())
                        .collect();
                    r1.sort();
                    LeafDocument {
                        instance: InstanceDocument::from_instance(&leaf.inst),
                        r1,
                        trace: leaf.trace.clone(),
                        infeasible: leaf.infeasible,
                    }
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("tree documents always serialize");
        out.push('\n');
        out
    }
}
