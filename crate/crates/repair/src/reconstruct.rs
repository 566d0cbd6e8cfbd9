//! From a generated (normalized) patch tree to concrete source text.

use std::collections::BTreeSet;

use thiserror::Error;
use treemend_core::error::{LangError, NormalizeError};
use treemend_core::lang::{is_unk, print_statements, AstNode, TypeEnv};
use treemend_core::normalize::{denormalize, Family, NormalizationMap};
use treemend_core::rules::{violated_sites, PartialTree, SiteKey};

pub const DEFAULT_UNK_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReconstructError {
    #[error("placeholder `{0}` has no mapping")]
    Unmapped(String),
    #[error("cannot print patch: {0}")]
    Print(#[from] LangError),
}

/// Child-index path from the root to every unknown-placeholder leaf, in
/// pre-order.
fn unk_paths(node: &AstNode, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, String)>) {
    if let Some(t) = node.token.as_deref() {
        if is_unk(t) {
            out.push((path.clone(), t.to_string()));
        }
    }
    for (i, (_, c)) in node.children.iter().enumerate() {
        path.push(i);
        unk_paths(c, path, out);
        path.pop();
    }
}

fn set_token(node: &mut AstNode, path: &[usize], text: &str) {
    let mut n = node;
    for &i in path {
        n = &mut n.children[i].1;
    }
    n.token = Some(text.to_string());
}

fn violated(tree: &AstNode, env: &TypeEnv) -> BTreeSet<SiteKey> {
    violated_sites(&PartialTree::from_ast(tree), env).into_iter().map(|s| s.key).collect()
}

/// In-scope identifiers for one placeholder family.
pub fn family_candidates(family: Family, env: &TypeEnv) -> Vec<String> {
    let mut out = BTreeSet::new();
    match family {
        Family::Var => {
            out.extend(env.variables.keys().cloned());
            for c in env.classes.values() {
                out.extend(c.fields.keys().cloned());
            }
        }
        Family::Func => {
            out.extend(env.functions.keys().cloned());
            for c in env.classes.values() {
                out.extend(c.methods.keys().cloned());
            }
        }
        Family::Type => out.extend(env.classes.keys().cloned()),
        Family::Lit => {}
    }
    out.into_iter().collect()
}

/// Concrete tree with unknown placeholders left in place, plus the feasible
/// spellings of each of them. A spelling is feasible when substituting it
/// alone makes no type site newly violated.
pub fn feasible_choices(
    tree: &AstNode,
    map: &NormalizationMap,
    env: &TypeEnv,
) -> Result<(AstNode, Vec<(Vec<usize>, Vec<String>)>), ReconstructError> {
    let base = denormalize(tree, map).map_err(|e| match e {
        NormalizeError::UnmappedPlaceholder(p) => ReconstructError::Unmapped(p),
    })?;
    let mut unks = Vec::new();
    unk_paths(&base, &mut Vec::new(), &mut unks);
    let before = violated(&base, env);
    let mut choices = Vec::with_capacity(unks.len());
    for (path, text) in unks {
        let family = Family::of_placeholder(&text);
        let cands = family.map(|f| family_candidates(f, env)).unwrap_or_default();
        let mut trial = base.clone();
        let ok = cands
            .into_iter()
            .filter(|c| {
                set_token(&mut trial, &path, c);
                violated(&trial, env).is_subset(&before)
            })
            .collect();
        choices.push((path, ok));
    }
    Ok((base, choices))
}

/// Every concrete patch for `tree`, at most `cap`, in lexicographic order of
/// the per-placeholder choices.
pub fn reconstruct_patch(
    tree: &AstNode,
    map: &NormalizationMap,
    env: &TypeEnv,
    cap: usize,
) -> Result<Vec<String>, ReconstructError> {
    let (base, choices) = feasible_choices(tree, map, env)?;
    if choices.iter().any(|(_, c)| c.is_empty()) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut pick = vec![0usize; choices.len()];
    loop {
        if out.len() == cap {
            break;
        }
        let mut t = base.clone();
        for ((path, c), &k) in choices.iter().zip(&pick) {
            set_token(&mut t, path, &c[k]);
        }
        out.push(print_statements(&t, 0)?.join("\n"));
        // Odometer increment, last placeholder fastest.
        let mut i = choices.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            pick[i] += 1;
            if pick[i] < choices[i].1.len() {
                break;
            }
            pick[i] = 0;
        }
    }
    Ok(out)
}
