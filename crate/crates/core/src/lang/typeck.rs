use std::collections::BTreeMap;

use super::ast::AstNode;
use super::grammar::{EdgeLabel as E, NodeKind as K};
use super::types::{function_locals, type_compatible, type_of_node, FuncSig, Globals, Type, TypeEnv};
use crate::error::LangError;

/// Type-check every function and method of a compilation unit.
pub fn check_program(program: &AstNode) -> Result<(), LangError> {
    if program.kind != K::CompilationUnit {
        return Err(LangError::Malformed {
            node: program.kind,
            message: "expected a compilation unit".into(),
        });
    }
    let globals = Globals::collect(program)?;
    let env = TypeEnv {
        variables: BTreeMap::new(),
        functions: globals.functions,
        classes: globals.classes,
    };
    for decl in program.children_with(E::Types) {
        match decl.kind {
            K::FuncDecl => check_function(decl, None, &env)?,
            K::ClassDecl => {
                let cname = decl.child_text(E::Name).unwrap_or_default();
                for m in decl.children_with(E::Methods) {
                    check_function(m, Some(cname), &env)?;
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn check_function(f: &AstNode, class: Option<&str>, env: &TypeEnv) -> Result<(), LangError> {
    let name = f.child_text(E::Name).unwrap_or("?");
    let name = match class {
        Some(c) => format!("{c}.{name}"),
        None => name.to_string(),
    };
    function_locals(f)?;
    let mut outer = BTreeMap::new();
    if let Some(c) = class {
        for (n, t) in env.all_fields(c) {
            outer.insert(n.to_string(), t.clone());
        }
    }
    let mut params = BTreeMap::new();
    for p in f.children_with(E::Parameters) {
        let t = type_of_node(p.child(E::Type).unwrap())?;
        if !env.type_exists(&t) {
            return Err(LangError::UndeclaredType(t.name().to_string()));
        }
        params.insert(p.child_text(E::Name).unwrap_or_default().to_string(), t);
    }
    let ret = type_of_node(f.child(E::Type).unwrap())?;
    let mut ck = Checker {
        env,
        function: name,
        ret,
        scopes: vec![outer, params],
    };
    let body = f.child(E::Body).ok_or(LangError::MissingEdge {
        node: K::FuncDecl,
        missing: E::Body,
    })?;
    ck.stmt(body)
}

struct Checker<'a> {
    env: &'a TypeEnv,
    function: String,
    ret: Type,
    scopes: Vec<BTreeMap<String, Type>>,
}

impl Checker<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, LangError> {
        Err(LangError::Type {
            function: self.function.clone(),
            message: message.into(),
        })
    }

    fn lookup(&self, name: &str) -> Option<&Type> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn child<'n>(&self, node: &'n AstNode, label: E) -> Result<&'n AstNode, LangError> {
        node.child(label).ok_or(LangError::MissingEdge {
            node: node.kind,
            missing: label,
        })
    }

    fn expect(&self, got: &Type, want: &Type, what: &str) -> Result<(), LangError> {
        if type_compatible(got, want, self.env) {
            Ok(())
        } else {
            self.err(format!("{what}: expected {want}, found {got}"))
        }
    }

    fn scoped(&mut self, s: &AstNode) -> Result<(), LangError> {
        self.scopes.push(BTreeMap::new());
        let r = self.stmt(s);
        self.scopes.pop();
        r
    }

    fn stmt(&mut self, s: &AstNode) -> Result<(), LangError> {
        match s.kind {
            K::BlockStmt => {
                self.scopes.push(BTreeMap::new());
                let r = s.children_with(E::Statements).try_for_each(|c| self.stmt(c));
                self.scopes.pop();
                r
            }
            K::LocalVarDecl => {
                let t = type_of_node(self.child(s, E::Type)?)?;
                if !self.env.type_exists(&t) {
                    return Err(LangError::UndeclaredType(t.name().to_string()));
                }
                self.child(s, E::Declarators)?;
                for v in s.children_with(E::Declarators) {
                    let name = v.child_text(E::Name).unwrap_or_default().to_string();
                    if let Some(init) = v.child(E::Initializer) {
                        let it = self.expr(init)?;
                        self.expect(&it, &t, &format!("initializer of `{name}`"))?;
                    }
                    self.scopes.last_mut().unwrap().insert(name, t.clone());
                }
                Ok(())
            }
            K::IfStmt => {
                let c = self.expr(self.child(s, E::Condition)?)?;
                self.expect(&c, &Type::Bool, "if condition")?;
                self.scoped(self.child(s, E::Then)?)?;
                if let Some(e) = s.child(E::Else) {
                    self.scoped(e)?;
                }
                Ok(())
            }
            K::WhileStmt => {
                let c = self.expr(self.child(s, E::Condition)?)?;
                self.expect(&c, &Type::Bool, "while condition")?;
                self.scoped(self.child(s, E::Body)?)
            }
            K::ReturnStmt => match s.child(E::Value) {
                Some(v) => {
                    let t = self.expr(v)?;
                    let ret = self.ret.clone();
                    self.expect(&t, &ret, "return value")
                }
                None => self.err("missing return value"),
            },
            K::ExprStmt => {
                let v = self.child(s, E::Value)?;
                match v.kind {
                    K::Assignment => {
                        let l = self.child(v, E::Left)?;
                        if !matches!(l.kind, K::VarRef | K::MemberRef) {
                            return self.err("assignment target must be a variable or field");
                        }
                        let lt = self.expr(l)?;
                        let rt = self.expr(self.child(v, E::Right)?)?;
                        self.expect(&rt, &lt, "assignment")
                    }
                    K::FuncInvoc => self.expr(v).map(|_| ()),
                    _ => self.err("expression statement must be a call or assignment"),
                }
            }
            other => self.err(format!("{other} is not a statement")),
        }
    }

    fn expr(&self, e: &AstNode) -> Result<Type, LangError> {
        match e.kind {
            K::Literal => {
                let text = e.child_text(E::Value).unwrap_or_default();
                match Type::of_literal(text) {
                    Some(t) => Ok(t),
                    None => self.err(format!("bad literal `{text}`")),
                }
            }
            K::VarRef => {
                let name = e.child_text(E::Name).unwrap_or_default();
                match self.lookup(name) {
                    Some(t) => Ok(t.clone()),
                    None => self.err(format!("undeclared variable `{name}`")),
                }
            }
            K::BinaryOp => {
                let l = self.expr(self.child(e, E::Left)?)?;
                let r = self.expr(self.child(e, E::Right)?)?;
                let op = e.child_text(E::Operator).unwrap_or_default();
                self.binary(op, &l, &r)
            }
            K::MemberRef | K::FuncInvoc => {
                let mut cur = match e.child(E::Qualifier) {
                    Some(q) => {
                        let qt = self.expr(q)?;
                        self.access(e, Some(&qt))?
                    }
                    None => self.access(e, None)?,
                };
                for sel in e.children_with(E::Selectors) {
                    if sel.child(E::Qualifier).is_some() {
                        return self.err("selector cannot carry a qualifier");
                    }
                    cur = self.access(sel, Some(&cur))?;
                    for inner in sel.children_with(E::Selectors) {
                        cur = self.access(inner, Some(&cur))?;
                    }
                }
                Ok(cur)
            }
            other => self.err(format!("{other} is not an expression")),
        }
    }

    fn binary(&self, op: &str, l: &Type, r: &Type) -> Result<Type, LangError> {
        use Type::*;
        match op {
            "&&" | "||" if *l == Bool && *r == Bool => Ok(Bool),
            "==" | "!=" if type_compatible(l, r, self.env) || type_compatible(r, l, self.env) => {
                Ok(Bool)
            }
            "<" | "<=" | ">" | ">=" if *l == Int && *r == Int => Ok(Bool),
            "+" if (*l == Str && matches!(r, Int | Bool | Str))
                || (*r == Str && matches!(l, Int | Bool)) =>
            {
                Ok(Str)
            }
            "+" | "-" | "*" | "/" | "%" if *l == Int && *r == Int => Ok(Int),
            _ => self.err(format!("operator `{op}` cannot combine {l} and {r}")),
        }
    }

    /// Type of one member access applied to a receiver (`None` for an
    /// unqualified call).
    fn access(&self, node: &AstNode, receiver: Option<&Type>) -> Result<Type, LangError> {
        let member = node.child_text(E::Member).unwrap_or_default();
        match (node.kind, receiver) {
            (K::FuncInvoc, None) => match self.env.functions.get(member) {
                Some(sig) => self.call(node, member, sig),
                None => self.err(format!("unknown function `{member}`")),
            },
            (_, None) => self.err(format!("field `{member}` needs a qualifier")),
            (_, Some(Type::Class(c))) => {
                if node.kind == K::FuncInvoc {
                    match self.env.method(c, member) {
                        Some(sig) => self.call(node, member, sig),
                        None => self.err(format!("class {c} has no method `{member}`")),
                    }
                } else {
                    match self.env.field(c, member) {
                        Some(t) => Ok(t.clone()),
                        None => self.err(format!("class {c} has no field `{member}`")),
                    }
                }
            }
            (_, Some(t)) => self.err(format!("type {t} has no members")),
        }
    }

    fn call(&self, node: &AstNode, name: &str, sig: &FuncSig) -> Result<Type, LangError> {
        let args: Vec<&AstNode> = node.children_with(E::Args).collect();
        if args.len() != sig.params.len() {
            return self.err(format!(
                "`{name}` takes {} arguments, given {}",
                sig.params.len(),
                args.len()
            ));
        }
        for (i, (a, p)) in args.iter().zip(&sig.params).enumerate() {
            let t = self.expr(a)?;
            self.expect(&t, p, &format!("argument {} of `{name}`", i + 1))?;
        }
        Ok(sig.ret.clone())
    }
}
