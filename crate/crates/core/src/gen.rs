//! Random well-typed programs in the mini-language.
//!
//! Programs are emitted as canonical source text. Loops are counter-bounded
//! and functions only call functions defined before them, so every generated
//! function terminates.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::lang::{FuncSig, Type};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_classes: usize,
    pub max_functions: usize,
    pub max_statements: usize,
    pub max_depth: usize,
    /// Allow object-typed parameters, fields and member accesses.
    pub objects: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_classes: 2,
            max_functions: 3,
            max_statements: 4,
            max_depth: 2,
            objects: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenFunction {
    /// Top-level name or `Class.method`.
    pub name: String,
    pub sig: FuncSig,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub source: String,
    pub functions: Vec<GenFunction>,
}

const VARS: &[&str] = &[
    "a", "b", "c", "n", "k", "sum", "acc", "count", "flag", "msg", "total", "val", "res", "tmp", "lo", "hi",
    "x", "y", "z", "s", "t", "ok", "step", "base",
];
const FUNCS: &[&str] = &["add", "calc", "check", "pick", "scale", "merge", "size", "apply", "fold", "label"];
const CLASSES: &[&str] = &["Node", "Box", "Item", "Cell"];
const FIELDS: &[&str] = &["len", "next", "tag", "weight", "open"];
const STRINGS: &[&str] = &["\"\"", "\"a\"", "\"ok\"", "\"x y\"", "\"id\""];

struct ClassGen {
    name: String,
    fields: Vec<(String, Type)>,
    methods: Vec<(String, FuncSig)>,
}

struct Scope {
    frames: Vec<Vec<(String, Type)>>,
    /// Names declared anywhere in the current function.
    used: Vec<String>,
    /// Loop counters; never assigned by generated statements.
    frozen: Vec<String>,
}

impl Scope {
    fn visible(&self) -> impl Iterator<Item = &(String, Type)> {
        self.frames.iter().flatten()
    }
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    cfg: GenConfig,
    classes: Vec<ClassGen>,
    functions: Vec<(String, FuncSig)>,
    fields: Vec<(String, Type)>,
    out: Vec<String>,
}

/// Generate one program.
pub fn random_program<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Generated {
    let mut g = Gen {
        rng,
        cfg: cfg.clone(),
        classes: Vec::new(),
        functions: Vec::new(),
        fields: Vec::new(),
        out: Vec::new(),
    };
    let mut listed = Vec::new();
    let n_classes = if cfg.objects { g.rng.gen_range(0..=cfg.max_classes) } else { 0 };
    for ci in 0..n_classes.min(CLASSES.len()) {
        listed.extend(g.class(ci));
    }
    let n_funcs = g.rng.gen_range(1..=cfg.max_functions.max(1)).min(FUNCS.len());
    for fi in 0..n_funcs {
        listed.push(g.function(fi));
    }
    Generated {
        source: g.out.join("\n") + "\n",
        functions: listed,
    }
}

impl<R: Rng> Gen<'_, R> {
    fn basic(&mut self) -> Type {
        [Type::Int, Type::Int, Type::Bool, Type::Str].choose(self.rng).unwrap().clone()
    }

    fn any_type(&mut self) -> Type {
        if self.cfg.objects && !self.classes.is_empty() && self.rng.gen_bool(0.2) {
            let c = &self.classes.choose(self.rng).unwrap().name;
            Type::Class(c.clone())
        } else {
            self.basic()
        }
    }

    fn class(&mut self, ci: usize) -> Vec<GenFunction> {
        let name = CLASSES[ci].to_string();
        let sup = if ci > 0 && self.rng.gen_bool(0.3) {
            Some(self.classes[self.rng.gen_range(0..ci)].name.clone())
        } else {
            None
        };
        let mut header = format!("class {name}");
        if let Some(s) = &sup {
            header += &format!(" extends {s}");
        }
        self.out.push(header + " {");
        let mut fields = Vec::new();
        let nf = self.rng.gen_range(1..=3);
        let mut pool: Vec<&str> = FIELDS.to_vec();
        pool.shuffle(self.rng);
        for f in pool.into_iter().take(nf) {
            let t = if self.rng.gen_bool(0.2) { Type::Class(name.clone()) } else { self.basic() };
            self.out.push(format!("  {} {f};", t.name()));
            fields.push((f.to_string(), t));
        }
        self.classes.push(ClassGen {
            name: name.clone(),
            fields: fields.clone(),
            methods: Vec::new(),
        });
        let mut listed = Vec::new();
        if self.rng.gen_bool(0.7) {
            let mname = FUNCS[self.rng.gen_range(0..FUNCS.len())].to_string();
            self.fields = fields;
            let sig = self.emit_function(&mname, 1);
            self.fields.clear();
            self.classes.last_mut().unwrap().methods.push((mname.clone(), sig.clone()));
            listed.push(GenFunction {
                name: format!("{name}.{mname}"),
                sig,
            });
        }
        self.out.push("}".into());
        listed
    }

    fn function(&mut self, fi: usize) -> GenFunction {
        let name = FUNCS[fi].to_string();
        let sig = self.emit_function(&name, 0);
        self.functions.push((name.clone(), sig.clone()));
        GenFunction { name, sig }
    }

    fn emit_function(&mut self, name: &str, indent: usize) -> FuncSig {
        let ret = self.any_type();
        let np = self.rng.gen_range(0..=3);
        let mut scope = Scope {
            frames: vec![Vec::new()],
            used: self.fields.iter().map(|(n, _)| n.clone()).collect(),
            frozen: Vec::new(),
        };
        scope.frames[0].extend(self.fields.iter().cloned());
        let mut params = Vec::new();
        let mut text = Vec::new();
        for _ in 0..np {
            let t = self.any_type();
            let n = self.fresh(&mut scope);
            text.push(format!("{} {n}", t.name()));
            scope.frames[0].push((n, t.clone()));
            params.push(t);
        }
        let pad = "  ".repeat(indent);
        self.out.push(format!("{pad}{} {name}({}) {{", ret.name(), text.join(", ")));
        let n = self.rng.gen_range(0..=self.cfg.max_statements);
        self.statements(&mut scope, n, indent + 1, self.cfg.max_depth, &ret);
        let e = self.expr(&scope, &ret, self.cfg.max_depth);
        self.out.push(format!("{pad}  return {e};"));
        self.out.push(format!("{pad}}}"));
        FuncSig { params, ret }
    }

    fn fresh(&mut self, scope: &mut Scope) -> String {
        let free: Vec<&str> = VARS.iter().copied().filter(|v| !scope.used.iter().any(|u| u == v)).collect();
        let name = match free.choose(self.rng) {
            Some(n) => n.to_string(),
            None => format!("v{}", scope.used.len()),
        };
        scope.used.push(name.clone());
        name
    }

    fn statements(&mut self, scope: &mut Scope, n: usize, indent: usize, depth: usize, ret: &Type) {
        for _ in 0..n {
            self.statement(scope, indent, depth, ret);
        }
    }

    fn block(&mut self, scope: &mut Scope, indent: usize, depth: usize, ret: &Type) {
        scope.frames.push(Vec::new());
        let n = self.rng.gen_range(1..=2);
        self.statements(scope, n, indent + 1, depth.saturating_sub(1), ret);
        scope.frames.pop();
    }

    fn statement(&mut self, scope: &mut Scope, indent: usize, depth: usize, ret: &Type) {
        let pad = "  ".repeat(indent);
        let assignable: Vec<(String, Type)> = scope
            .visible()
            .filter(|(n, _)| !scope.frozen.contains(n))
            .cloned()
            .collect();
        let choice = self.rng.gen_range(0..10);
        match choice {
            0..=2 => {
                let t = self.any_type();
                let e = self.expr(scope, &t, depth);
                let n = self.fresh(scope);
                let mut line = format!("{pad}{} {n} = {e}", t.name());
                if self.rng.gen_bool(0.15) {
                    let m = self.fresh(scope);
                    let e2 = self.expr(scope, &t, depth);
                    line += &format!(", {m} = {e2}");
                    scope.frames.last_mut().unwrap().push((m, t.clone()));
                }
                self.out.push(line + ";");
                scope.frames.last_mut().unwrap().push((n, t));
            }
            3..=4 if !assignable.is_empty() => {
                let (n, t) = assignable.choose(self.rng).unwrap().clone();
                let e = self.expr(scope, &t, depth);
                self.out.push(format!("{pad}{n} = {e};"));
            }
            5..=6 if depth > 0 => {
                let c = self.expr(scope, &Type::Bool, depth);
                self.out.push(format!("{pad}if ({c}) {{"));
                self.block(scope, indent, depth, ret);
                if self.rng.gen_bool(0.4) {
                    self.out.push(format!("{pad}}} else {{"));
                    self.block(scope, indent, depth, ret);
                }
                self.out.push(format!("{pad}}}"));
            }
            7 if depth > 0 => {
                let i = self.fresh(scope);
                let bound = self.rng.gen_range(1..=4);
                self.out.push(format!("{pad}int {i} = 0;"));
                scope.frames.last_mut().unwrap().push((i.clone(), Type::Int));
                scope.frozen.push(i.clone());
                self.out.push(format!("{pad}while ({i} < {bound}) {{"));
                self.block(scope, indent, depth, ret);
                self.out.push(format!("{pad}  {i} = {i} + 1;"));
                self.out.push(format!("{pad}}}"));
            }
            8 if !self.functions.is_empty() => {
                let (f, sig) = self.functions.choose(self.rng).unwrap().clone();
                let args = self.args(scope, &sig, depth);
                self.out.push(format!("{pad}{f}({args});"));
            }
            _ => {
                if self.rng.gen_bool(0.3) && depth < self.cfg.max_depth {
                    let e = self.expr(scope, ret, depth);
                    self.out.push(format!("{pad}return {e};"));
                } else {
                    let t = self.basic();
                    let e = self.expr(scope, &t, depth);
                    let n = self.fresh(scope);
                    self.out.push(format!("{pad}{} {n} = {e};", t.name()));
                    scope.frames.last_mut().unwrap().push((n, t));
                }
            }
        }
    }

    fn args(&mut self, scope: &Scope, sig: &FuncSig, depth: usize) -> String {
        sig.params
            .iter()
            .map(|p| self.expr(scope, p, depth.saturating_sub(1)))
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn leaf(&mut self, scope: &Scope, ty: &Type) -> String {
        let vars: Vec<&String> = scope.visible().filter(|(_, t)| t == ty).map(|(n, _)| n).collect();
        if !vars.is_empty() && self.rng.gen_bool(0.7) {
            return vars.choose(self.rng).unwrap().to_string();
        }
        match ty {
            Type::Int => self.rng.gen_range(0..=12).to_string(),
            Type::Bool => if self.rng.gen() { "true" } else { "false" }.into(),
            Type::Str => STRINGS.choose(self.rng).unwrap().to_string(),
            _ => "null".into(),
        }
    }

    /// Expression of type `ty`; compound operands are parenthesized.
    fn expr(&mut self, scope: &Scope, ty: &Type, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.4) {
            return self.leaf(scope, ty);
        }
        let d = depth - 1;
        let sub = |g: &mut Self, t: &Type| {
            let e = g.expr(scope, t, d);
            if e.contains(' ') && !e.starts_with('"') {
                format!("({e})")
            } else {
                e
            }
        };
        if self.rng.gen_bool(0.25) {
            if let Some(e) = self.access(scope, ty, d) {
                return e;
            }
        }
        match ty {
            Type::Int => {
                let op = *["+", "-", "*", "/", "%"].choose(self.rng).unwrap();
                let l = sub(self, &Type::Int);
                let r = if matches!(op, "/" | "%") {
                    self.rng.gen_range(1..=5).to_string()
                } else {
                    sub(self, &Type::Int)
                };
                format!("{l} {op} {r}")
            }
            Type::Bool => match self.rng.gen_range(0..3) {
                0 => {
                    let op = *["&&", "||"].choose(self.rng).unwrap();
                    format!("{} {op} {}", sub(self, &Type::Bool), sub(self, &Type::Bool))
                }
                1 => {
                    let op = *["<", "<=", ">", ">="].choose(self.rng).unwrap();
                    format!("{} {op} {}", sub(self, &Type::Int), sub(self, &Type::Int))
                }
                _ => {
                    let t = self.basic();
                    let op = *["==", "!="].choose(self.rng).unwrap();
                    format!("{} {op} {}", sub(self, &t), sub(self, &t))
                }
            },
            Type::Str => {
                let r = if self.rng.gen() { Type::Str } else { Type::Int };
                format!("{} + {}", sub(self, &Type::Str), sub(self, &r))
            }
            _ => self.leaf(scope, ty),
        }
    }

    /// Call or member access producing `ty`, when one is available.
    fn access(&mut self, scope: &Scope, ty: &Type, depth: usize) -> Option<String> {
        let mut options = Vec::new();
        for (f, sig) in &self.functions {
            if &sig.ret == ty {
                options.push((None, f.clone(), Some(sig.clone())));
            }
        }
        if self.cfg.objects {
            for (v, vt) in scope.visible() {
                if let Type::Class(c) = vt {
                    if let Some(cls) = self.classes.iter().find(|k| &k.name == c) {
                        for (f, ft) in &cls.fields {
                            if ft == ty {
                                options.push((Some(v.clone()), f.clone(), None));
                            }
                        }
                        for (m, sig) in &cls.methods {
                            if &sig.ret == ty {
                                options.push((Some(v.clone()), m.clone(), Some(sig.clone())));
                            }
                        }
                    }
                }
            }
        }
        let (q, m, sig) = options.choose(self.rng)?.clone();
        let head = match q {
            Some(q) => format!("{q}.{m}"),
            None => m,
        };
        Some(match sig {
            Some(sig) => format!("{head}({})", self.args(scope, &sig, depth)),
            None => head,
        })
    }
}
