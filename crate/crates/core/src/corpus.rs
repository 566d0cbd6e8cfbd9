//! Synthetic single-edit bugs. Each bug comes from a generated program by
//! one mutation of a one-line statement in its last function; tests are
//! produced by running the original program.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gen::{random_program, GenConfig};
use crate::graph::Vocab;
use crate::lang::{
    check_program, interpret, parse_program, print_ast, print_statements, run, AstNode, EdgeLabel as E, LineSpan,
    NodeKind as K, TestCase, Type, Value,
};
use crate::prepare::prepare;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    OperatorSwap,
    WrongVariable,
    MissingStatement,
}

impl Mutation {
    pub const ALL: [Mutation; 3] = [Mutation::OperatorSwap, Mutation::WrongVariable, Mutation::MissingStatement];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugFix {
    pub id: String,
    pub mutation: Mutation,
    pub buggy_source: String,
    pub fixed_source: String,
    pub focal: String,
    pub span: LineSpan,
    /// Developer fix: statements replacing the lines of `span`.
    pub patch: String,
    pub tests: Vec<TestCase>,
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub program: GenConfig,
    pub tests_per_bug: usize,
    /// Interpreter fuel per test run.
    pub fuel: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            program: GenConfig {
                max_classes: 0,
                max_functions: 2,
                max_statements: 4,
                max_depth: 1,
                objects: false,
            },
            tests_per_bug: 6,
            fuel: TEST_FUEL,
        }
    }
}

/// Ample for generated programs, whose loops run a handful of times.
pub const TEST_FUEL: u64 = 50_000;

const ARITH: &[&str] = &["+", "-", "*"];
const COMPARE: &[&str] = &["<", "<=", ">", ">=", "==", "!="];
const LOGIC: &[&str] = &["&&", "||"];

fn swap_group(op: &str) -> Option<&'static [&'static str]> {
    [ARITH, COMPARE, LOGIC].into_iter().find(|g| g.contains(&op))
}

fn is_simple(n: &AstNode) -> bool {
    matches!(n.kind, K::LocalVarDecl | K::ExprStmt | K::ReturnStmt)
}

/// One-line statement inside some block: path of the block from the
/// function, index in the block, and whether its predecessor is also simple.
struct Site {
    block: Vec<usize>,
    index: usize,
    prev_simple: bool,
}

fn sites(node: &AstNode, path: &mut Vec<usize>, out: &mut Vec<Site>) {
    if node.kind == K::BlockStmt {
        for (i, (_, s)) in node.children.iter().enumerate() {
            if is_simple(s) {
                out.push(Site {
                    block: path.clone(),
                    index: i,
                    prev_simple: i > 0 && is_simple(&node.children[i - 1].1),
                });
            }
        }
    }
    for (i, (_, c)) in node.children.iter().enumerate() {
        if c.kind.is_statement() {
            path.push(i);
            sites(c, path, out);
            path.pop();
        }
    }
}

fn at<'a>(node: &'a AstNode, path: &[usize]) -> &'a AstNode {
    path.iter().fold(node, |n, &i| &n.children[i].1)
}

fn at_mut<'a>(node: &'a mut AstNode, path: &[usize]) -> &'a mut AstNode {
    path.iter().fold(node, |n, &i| &mut n.children[i].1)
}

fn declared_names(func: &AstNode) -> Vec<String> {
    let mut names: Vec<String> = func
        .preorder()
        .into_iter()
        .filter(|n| matches!(n.kind, K::Param | K::VarDecl))
        .filter_map(|n| n.child_text(E::Name).map(str::to_string))
        .collect();
    names.sort();
    names.dedup();
    names
}

fn random_arg<R: Rng>(rng: &mut R, t: &Type) -> Option<serde_json::Value> {
    Some(match t {
        Type::Int => rng.gen_range(-4i64..=9).into(),
        Type::Bool => rng.gen::<bool>().into(),
        Type::Str => ["", "a", "ok", "x y"].choose(rng)?.to_string().into(),
        _ => return None,
    })
}

/// Replace `span` lines of `source` with `patch`.
pub fn splice(source: &str, span: LineSpan, patch: &str) -> String {
    let lines: Vec<&str> = source.lines().collect();
    let (s, e) = (span.start as usize - 1, (span.end as usize).min(lines.len()));
    let mut out: Vec<&str> = lines[..s].to_vec();
    out.extend(patch.lines());
    out.extend(&lines[e..]);
    let mut text = out.join("\n");
    text.push('\n');
    text
}

fn try_bug<R: Rng>(rng: &mut R, mutation: Mutation, cfg: &CorpusConfig, vocab: &Vocab) -> Option<BugFix> {
    let g = random_program(rng, &cfg.program);
    let focal = g.functions.iter().rev().find(|f| !f.name.contains('.'))?.clone();
    let fixed = parse_program(&g.source).ok()?;
    let fi = fixed
        .children
        .iter()
        .position(|(_, c)| c.kind == K::FuncDecl && c.child_text(E::Name) == Some(focal.name.as_str()))?;
    let func = &fixed.children[fi].1;
    let mut all = Vec::new();
    sites(func, &mut Vec::new(), &mut all);
    all.shuffle(rng);

    let mut buggy = fixed.clone();
    let mut chosen = None;
    'outer: for site in &all {
        let mut stmt_path = site.block.clone();
        stmt_path.push(site.index);
        let stmt = at(func, &stmt_path);
        let mut attempts: Vec<AstNode> = Vec::new();
        match mutation {
            Mutation::OperatorSwap => {
                let mut s = stmt.clone();
                let mut targets = Vec::new();
                let mut k = 0;
                s.visit_mut(&mut |n| {
                    if n.kind == K::BinaryOp {
                        targets.push(k);
                    }
                    k += 1;
                });
                targets.shuffle(rng);
                for t in targets {
                    let mut m = stmt.clone();
                    let mut k = 0;
                    let mut done = false;
                    let pick = rng.gen::<usize>();
                    m.visit_mut(&mut |n| {
                        if k == t {
                            if let Some(op) = n.child_mut(E::Operator) {
                                let cur = op.text().unwrap_or_default().to_string();
                                if let Some(group) = swap_group(&cur) {
                                    let others: Vec<&&str> = group.iter().filter(|o| **o != cur).collect();
                                    op.token = Some(others[pick % others.len()].to_string());
                                    done = true;
                                }
                            }
                        }
                        k += 1;
                    });
                    if done {
                        attempts.push(m);
                    }
                }
            }
            Mutation::WrongVariable => {
                let names = declared_names(func);
                let mut refs = Vec::new();
                let mut k = 0;
                let mut s = stmt.clone();
                s.visit_mut(&mut |n| {
                    if n.kind == K::VarRef {
                        refs.push(k);
                    }
                    k += 1;
                });
                refs.shuffle(rng);
                for r in refs {
                    let mut cands = names.clone();
                    cands.shuffle(rng);
                    for name in cands {
                        let mut m = stmt.clone();
                        let mut k = 0;
                        let mut changed = false;
                        m.visit_mut(&mut |n| {
                            if k == r {
                                if let Some(leaf) = n.child_mut(E::Name) {
                                    if leaf.text() != Some(name.as_str()) {
                                        leaf.token = Some(name.clone());
                                        changed = true;
                                    }
                                }
                            }
                            k += 1;
                        });
                        if changed {
                            attempts.push(m);
                        }
                    }
                }
            }
            Mutation::MissingStatement => {
                if stmt.kind != K::ExprStmt || !site.prev_simple {
                    continue;
                }
            }
        }
        if mutation == Mutation::MissingStatement {
            let block = at_mut(&mut buggy.children[fi].1, &site.block);
            block.children.remove(site.index);
            if check_program(&reparse(&buggy)?).is_ok() {
                chosen = Some(site);
                break;
            }
            buggy = fixed.clone();
            continue;
        }
        for m in attempts {
            *at_mut(&mut buggy.children[fi].1, &stmt_path) = m;
            if let Some(b) = reparse(&buggy) {
                if check_program(&b).is_ok() {
                    chosen = Some(site);
                    break 'outer;
                }
            }
            buggy = fixed.clone();
        }
    }
    let site = chosen?;
    let buggy_source = print_ast(&buggy).ok()?;
    let buggy_ast = parse_program(&buggy_source).ok()?;
    let fixed_source = print_ast(&fixed).ok()?;

    let (span_index, fix_range) = match mutation {
        Mutation::MissingStatement => (site.index - 1, site.index - 1..site.index + 1),
        _ => (site.index, site.index..site.index + 1),
    };
    let mut span_path = site.block.clone();
    span_path.push(span_index);
    let span = at(&buggy_ast.children[fi].1, &span_path).lines?;
    let fixed_block = at(&fixed.children[fi].1, &site.block);
    let mut patch_block = AstNode::new(K::BlockStmt);
    for i in fix_range {
        patch_block.children.push(fixed_block.children[i].clone());
    }
    let patch = print_statements(&patch_block, 0).ok()?.join("\n");
    if splice_ast(&buggy_source, span, &patch)? != strip(&fixed) {
        return None;
    }

    let mut tests = Vec::new();
    let mut failing = 0;
    for _ in 0..40 {
        if tests.len() == cfg.tests_per_bug {
            break;
        }
        let args: Vec<serde_json::Value> = focal.sig.params.iter().map(|t| random_arg(rng, t)).collect::<Option<_>>()?;
        let vals: Vec<Value> = args.iter().filter_map(Value::from_json).collect();
        let Ok(expect) = run(&fixed, &focal.name, vals, cfg.fuel) else { continue };
        let mut t = TestCase {
            entry: focal.name.clone(),
            args,
            expect: expect.to_json(),
            originally_passing: true,
        };
        t.originally_passing = interpret(&buggy_ast, &t, cfg.fuel).passed();
        if !t.originally_passing {
            failing += 1;
        } else if tests.len() + 1 == cfg.tests_per_bug && failing == 0 {
            continue;
        }
        tests.push(t);
    }
    if failing == 0 || tests.len() < cfg.tests_per_bug {
        return None;
    }
    let bug = BugFix {
        id: String::new(),
        mutation,
        buggy_source,
        fixed_source,
        focal: focal.name,
        span,
        patch,
        tests,
    };
    let prepared = prepare(&bug.buggy_source, &bug.focal, bug.span, vocab).ok()?;
    prepared.record("", &bug.patch, vocab).ok()?;
    Some(bug)
}

fn reparse(ast: &AstNode) -> Option<AstNode> {
    parse_program(&print_ast(ast).ok()?).ok()
}

fn strip(ast: &AstNode) -> AstNode {
    let mut a = ast.clone();
    a.strip_lines();
    a
}

fn splice_ast(source: &str, span: LineSpan, patch: &str) -> Option<AstNode> {
    parse_program(&splice(source, span, patch)).ok().map(|a| strip(&a))
}

/// `n` bugs cycling through the mutation kinds; ids are `toy-000`, ...
pub fn toy_corpus<R: Rng>(rng: &mut R, n: usize, cfg: &CorpusConfig, vocab: &Vocab) -> Vec<BugFix> {
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while out.len() < n {
        let mutation = Mutation::ALL[out.len() % 3];
        if let Some(mut b) = try_bug(rng, mutation, cfg, vocab) {
            b.id = format!("toy-{:03}", out.len());
            out.push(b);
        }
        i += 1;
        assert!(i < 1000 * (n + 1), "bug generation keeps failing");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use crate::lang::DEFAULT_FUEL;

    #[test]
    fn bugs_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vocab = Vocab::default();
        let bugs = toy_corpus(&mut rng, 30, &CorpusConfig::default(), &vocab);
        for m in Mutation::ALL {
            assert_eq!(bugs.iter().filter(|b| b.mutation == m).count(), 10);
        }
        for b in &bugs {
            let buggy = parse_program(&b.buggy_source).unwrap();
            check_program(&buggy).unwrap();
            let fixed = parse_program(&splice(&b.buggy_source, b.span, &b.patch)).unwrap();
            assert_eq!(strip(&fixed), strip(&parse_program(&b.fixed_source).unwrap()), "{}", b.id);
            assert!(b.tests.iter().all(|t| interpret(&fixed, t, DEFAULT_FUEL).passed()));
            for t in &b.tests {
                assert_eq!(interpret(&buggy, t, DEFAULT_FUEL).passed(), t.originally_passing);
            }
            assert!(b.tests.iter().any(|t| !t.originally_passing));
            assert_ne!(b.buggy_source, b.fixed_source);
        }
        let mut again = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(toy_corpus(&mut again, 30, &CorpusConfig::default(), &vocab), bugs);
    }
}
