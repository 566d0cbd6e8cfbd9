//! From a program, a focal function and a buggy span to encoder inputs.

use crate::error::PrepareError;
use crate::graph::{build_asg, linearize_target, Asg, Record, Vocab};
use crate::lang::{extract_type_env, find_function, parse_program, parse_statements, AstNode, EdgeLabel, LineSpan, TypeEnv};
use crate::normalize::{normalize, normalize_patch, NormalizationMap};

/// A buggy function ready for the model.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub program: AstNode,
    pub focal: String,
    pub span: LineSpan,
    /// Normalized body of the focal function; the encoder input.
    pub body: AstNode,
    pub map: NormalizationMap,
    /// Concrete type facts at the focal function.
    pub concrete_env: TypeEnv,
    /// The same facts in placeholder space.
    pub env: TypeEnv,
    pub asg: Asg,
}

pub fn prepare(source: &str, focal: &str, span: LineSpan, vocab: &Vocab) -> Result<Prepared, PrepareError> {
    let program = parse_program(source)?;
    prepare_parsed(program, focal, span, vocab)
}

pub fn prepare_parsed(program: AstNode, focal: &str, span: LineSpan, vocab: &Vocab) -> Result<Prepared, PrepareError> {
    let concrete_env = extract_type_env(&program, focal)?;
    let (func, _) = find_function(&program, focal).ok_or_else(|| PrepareError::NoBody(focal.to_string()))?;
    let (norm, map) = normalize(func);
    if !vocab.covers(&map) {
        return Err(PrepareError::VocabOverflow(focal.to_string()));
    }
    let body = norm
        .child(EdgeLabel::Body)
        .cloned()
        .ok_or_else(|| PrepareError::NoBody(focal.to_string()))?;
    let asg = build_asg(&body, span, vocab)?;
    let env = map.normalize_env(&concrete_env);
    Ok(Prepared {
        focal: focal.to_string(),
        span,
        body,
        map,
        concrete_env,
        env,
        asg,
        program,
    })
}

impl Prepared {
    /// Normalized patch tree for replacement statements given as source.
    pub fn patch_tree(&self, patch_source: &str) -> Result<AstNode, PrepareError> {
        let block = parse_statements(patch_source)?;
        Ok(normalize_patch(&block, &self.map))
    }

    pub fn record(&self, id: &str, patch_source: &str, vocab: &Vocab) -> Result<Record, PrepareError> {
        let patch = self.patch_tree(patch_source)?;
        let steps = linearize_target(&patch).encode(vocab)?;
        Ok(Record {
            id: id.to_string(),
            node_seq: self.asg.node_seq.clone(),
            adjacency: self.asg.adjacency.clone(),
            buggy_loc: self.asg.buggy_loc.clone(),
            gold_steps: steps,
            normalization_map: self.map.clone(),
            type_env: self.env.clone(),
        })
    }
}
