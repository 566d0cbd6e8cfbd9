//! End-to-end repair of one bug.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use treemend_core::corpus::BugFix;
use treemend_core::graph::Vocab;
use treemend_core::lang::{parse_program, print_statements, AstNode, EdgeLabel, LineSpan, NodeKind, TestCase};
use treemend_core::prepare::{prepare_parsed, Prepared};
use treemend_core::rules::{check_tree_valid, GrammarSchema};
use treemend_neural::Model;

use crate::beam::{beam_search, BeamConfig};
use crate::rank::rank_merge;
use crate::reconstruct::{reconstruct_patch, DEFAULT_UNK_CAP};
use crate::validate::{validate, Outcome, PatchVerdict, ValidateOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    Prepare,
    Search,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parse => "parse",
            Stage::Prepare => "prepare",
            Stage::Search => "search",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{stage}: {message}")]
pub struct RepairError {
    pub stage: Stage,
    pub message: String,
}

fn fail<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> RepairError {
    move |e| RepairError { stage, message: e.to_string() }
}

/// A buggy program with its fault location and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugInput {
    pub id: String,
    pub source: String,
    /// Derived from the span when absent.
    pub focal: Option<String>,
    pub span: LineSpan,
    pub tests: Vec<TestCase>,
}

impl From<&BugFix> for BugInput {
    fn from(b: &BugFix) -> Self {
        Self {
            id: b.id.clone(),
            source: b.buggy_source.clone(),
            focal: Some(b.focal.clone()),
            span: b.span,
            tests: b.tests.clone(),
        }
    }
}

/// Name of the function whose lines contain `span`: a top-level function or
/// `Class.method`.
pub fn focal_function(program: &AstNode, span: LineSpan) -> Option<String> {
    let inside = |n: &AstNode| n.lines.is_some_and(|l| l.contains(&span));
    for decl in program.children_with(EdgeLabel::Types) {
        match decl.kind {
            NodeKind::FuncDecl if inside(decl) => return decl.child_text(EdgeLabel::Name).map(str::to_string),
            NodeKind::ClassDecl => {
                for m in decl.children_with(EdgeLabel::Methods) {
                    if inside(m) {
                        return Some(format!("{}.{}", decl.child_text(EdgeLabel::Name)?, m.child_text(EdgeLabel::Name)?));
                    }
                }
            }
            _ => {}
        }
    }
    None
}

impl BugInput {
    pub fn prepare(&self, vocab: &Vocab) -> Result<Prepared, RepairError> {
        let program = parse_program(&self.source).map_err(fail(Stage::Parse))?;
        let focal = match &self.focal {
            Some(f) => f.clone(),
            None => focal_function(&program, self.span).ok_or_else(|| RepairError {
                stage: Stage::Prepare,
                message: format!("no function contains lines {}..={}", self.span.start, self.span.end),
            })?,
        };
        prepare_parsed(program, &focal, self.span, vocab).map_err(fail(Stage::Prepare))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOptions {
    pub beam: BeamConfig,
    pub unk_cap: usize,
    /// Concrete patches validated at most.
    pub max_candidates: usize,
    pub validate: ValidateOptions,
}

impl Default for RepairOptions {
    fn default() -> Self {
        Self {
            beam: BeamConfig::default(),
            unk_cap: DEFAULT_UNK_CAP,
            max_candidates: 500,
            validate: ValidateOptions::default(),
        }
    }
}

/// One merged tree.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTree {
    pub ast: AstNode,
    pub best_rank: usize,
    pub mean_score: f64,
    pub support: usize,
    pub valid: bool,
}

impl GeneratedTree {
    /// Normalized source, or the s-expression when it does not print.
    pub fn text(&self) -> String {
        print_statements(&self.ast, 0).map(|l| l.join("\n")).unwrap_or_else(|_| self.ast.sexpr())
    }
}

#[derive(Debug, Clone)]
pub struct Generation {
    /// Finished hypotheses over all models, before merging.
    pub generated: usize,
    pub trees: Vec<GeneratedTree>,
}

/// Beam search with every model, then merge by rank.
pub fn generate(
    models: &[Model<f32>],
    prepared: &Prepared,
    vocab: &Vocab,
    schema: &GrammarSchema,
    beam: &BeamConfig,
) -> Result<Generation, RepairError> {
    let mut lists = Vec::with_capacity(models.len());
    let mut asts = std::collections::BTreeMap::new();
    let mut generated = 0;
    for m in models {
        let hyps = beam_search(m, &prepared.asg, &prepared.env, vocab, schema, beam).map_err(fail(Stage::Search))?;
        generated += hyps.len();
        let list = hyps
            .iter()
            .map(|h| {
                let ast = h.ast();
                let key = ast.sexpr();
                asts.entry(key.clone()).or_insert(ast);
                (key, h.score())
            })
            .collect();
        lists.push(list);
    }
    let trees = rank_merge(&lists)
        .into_iter()
        .map(|r| {
            let ast = asts.remove(&r.item).expect("tree recorded");
            GeneratedTree {
                valid: check_tree_valid(&ast, schema, &prepared.env).valid,
                ast,
                best_rank: r.best_rank,
                mean_score: r.mean_score,
                support: r.support,
            }
        })
        .collect();
    Ok(Generation { generated, trees })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub rank: usize,
    pub tree: String,
    pub score: f64,
    pub support: usize,
    pub valid: bool,
}

/// A tree that yielded no concrete patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFailure {
    pub rank: usize,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausiblePatch {
    pub candidate: usize,
    /// Rank of the tree the patch came from.
    pub tree_rank: usize,
    pub outcome: Outcome,
    pub patch: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub bug: String,
    pub focal: String,
    pub models: usize,
    pub beam_width: usize,
    pub shaping: bool,
    /// Set when the bug has no tests; plausibility is then undefined.
    pub no_tests: bool,
    pub trees_generated: usize,
    pub unique_trees: usize,
    pub valid_trees: usize,
    /// `valid_trees / unique_trees`.
    pub validity_rate: f64,
    pub candidates: usize,
    pub validated: usize,
    pub plausible: Option<PlausiblePatch>,
    pub top_trees: Vec<TreeSummary>,
    pub failures: Vec<TreeFailure>,
    pub verdicts: Vec<PatchVerdict>,
}

/// Concrete patches of every tree in rank order, deduplicated, with the
/// rank of the originating tree.
pub fn concrete_candidates(
    trees: &[GeneratedTree],
    prepared: &Prepared,
    opts: &RepairOptions,
) -> (Vec<(String, usize)>, Vec<TreeFailure>) {
    let mut out: Vec<(String, usize)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut failures = Vec::new();
    for (rank, t) in trees.iter().enumerate() {
        if out.len() >= opts.max_candidates {
            break;
        }
        if !t.valid {
            failures.push(TreeFailure { rank, outcome: Outcome::InvalidTree, detail: "violates the grammar or type rules".into() });
            continue;
        }
        match reconstruct_patch(&t.ast, &prepared.map, &prepared.concrete_env, opts.unk_cap) {
            Ok(ps) if ps.is_empty() => failures.push(TreeFailure {
                rank,
                outcome: Outcome::ReconstructionFailed,
                detail: "no feasible identifier for an unknown placeholder".into(),
            }),
            Ok(ps) => {
                for p in ps {
                    if out.len() < opts.max_candidates && seen.insert(p.clone()) {
                        out.push((p, rank));
                    }
                }
            }
            Err(e) => failures.push(TreeFailure { rank, outcome: Outcome::ReconstructionFailed, detail: e.to_string() }),
        }
    }
    (out, failures)
}

const TOP_TREES: usize = 10;

pub fn repair(
    bug: &BugInput,
    models: &[Model<f32>],
    vocab: &Vocab,
    schema: &GrammarSchema,
    opts: &RepairOptions,
) -> Result<RepairReport, RepairError> {
    let prepared = bug.prepare(vocab)?;
    let gen = generate(models, &prepared, vocab, schema, &opts.beam)?;
    let valid_trees = gen.trees.iter().filter(|t| t.valid).count();
    let (cands, failures) = concrete_candidates(&gen.trees, &prepared, opts);
    let no_tests = bug.tests.is_empty();
    let log = if no_tests {
        None
    } else {
        let texts: Vec<String> = cands.iter().map(|(p, _)| p.clone()).collect();
        Some(validate(&bug.source, bug.span, &texts, &bug.tests, &opts.validate))
    };
    let plausible = log.as_ref().and_then(|l| l.plausible.map(|i| &l.verdicts[i])).map(|v| PlausiblePatch {
        candidate: v.candidate,
        tree_rank: cands[v.candidate].1,
        outcome: v.outcome,
        patch: cands[v.candidate].0.clone(),
    });
    let unique = gen.trees.len();
    Ok(RepairReport {
        bug: bug.id.clone(),
        focal: prepared.focal.clone(),
        models: models.len(),
        beam_width: opts.beam.width,
        shaping: opts.beam.shaping,
        no_tests,
        trees_generated: gen.generated,
        unique_trees: unique,
        valid_trees,
        validity_rate: if unique == 0 { 0.0 } else { valid_trees as f64 / unique as f64 },
        candidates: cands.len(),
        validated: log.as_ref().map_or(0, |l| l.verdicts.len()),
        plausible,
        top_trees: gen
            .trees
            .iter()
            .take(TOP_TREES)
            .enumerate()
            .map(|(rank, t)| TreeSummary { rank, tree: t.text(), score: t.mean_score, support: t.support, valid: t.valid })
            .collect(),
        failures,
        verdicts: log.map(|l| l.verdicts).unwrap_or_default(),
    })
}
