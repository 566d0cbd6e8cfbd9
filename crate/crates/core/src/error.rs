use thiserror::Error;

use crate::lang::{EdgeLabel, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: u32,
        col: u32,
        message: String,
    },
    #[error("unknown {what} `{name}`")]
    UnknownName { what: &'static str, name: String },
    #[error("{node} requires {missing}")]
    MissingEdge { node: NodeKind, missing: EdgeLabel },
    #[error("malformed {node}: {message}")]
    Malformed { node: NodeKind, message: String },
    #[error("duplicate declaration of `{name}` in {scope}")]
    DuplicateDeclaration { scope: String, name: String },
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("inheritance cycle through `{0}`")]
    InheritanceCycle(String),
    #[error("no function `{0}` in program")]
    UnknownFunction(String),
    #[error("type error in `{function}`: {message}")]
    Type { function: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("placeholder `{0}` has no mapping")]
    UnmappedPlaceholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("buggy span {start}..={end} lies outside lines {first}..={last}")]
    SpanOutside {
        start: u32,
        end: u32,
        first: u32,
        last: u32,
    },
    #[error("tree has no line annotations")]
    MissingLines,
    #[error("step {step} references node {parent} but only {available} exist")]
    MalformedSteps {
        step: usize,
        parent: usize,
        available: usize,
    },
    #[error("label `{0}` is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("label id {0} is out of range")]
    BadLabelId(usize),
    #[error("patch root {patch} differs from buggy root {buggy}")]
    RootMismatch { patch: String, buggy: String },
    #[error("step {0} emits the end-of-tree label before the final step")]
    EarlyEnd(usize),
    #[error("step {step}: {message}")]
    BadStep { step: usize, message: String },
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("invalid schema json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Name(#[from] LangError),
    #[error("edge `{label}` appears in more than one class for {kind}")]
    Overlap { kind: String, label: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("verdict sets do not partition {len} indices: {detail}")]
    NotPartition { len: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrepareError {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("focal function `{0}` has no body")]
    NoBody(String),
    #[error("vocabulary cannot hold the identifiers of `{0}`")]
    VocabOverflow(String),
}
