//! Types, signatures and the per-function type environment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::AstNode;
use super::grammar::{EdgeLabel as E, NodeKind as K};
use crate::error::LangError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Int,
    Bool,
    Str,
    Null,
    Class(String),
}

impl Type {
    pub fn from_name(name: &str) -> Type {
        match name {
            "int" => Type::Int,
            "bool" => Type::Bool,
            "string" => Type::Str,
            "null" => Type::Null,
            other => Type::Class(other.to_string()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Type::Int => "int",
            Type::Bool => "bool",
            Type::Str => "string",
            Type::Null => "null",
            Type::Class(c) => c,
        }
    }

    pub fn is_class(&self) -> bool {
        matches!(self, Type::Class(_))
    }

    /// Type of a literal token, `None` for text that is not a literal.
    pub fn of_literal(text: &str) -> Option<Type> {
        match text {
            "true" | "false" => Some(Type::Bool),
            "null" => Some(Type::Null),
            t if t.starts_with('"') => Some(Type::Str),
            t if !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit()) => Some(Type::Int),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Type {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Type {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Type::from_name(&String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuncSig {
    pub params: Vec<Type>,
    pub ret: Type,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub fields: BTreeMap<String, Type>,
    pub methods: BTreeMap<String, FuncSig>,
    pub supertype: Option<String>,
}

/// Identifiers visible from one focal function and their types.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeEnv {
    pub variables: BTreeMap<String, Type>,
    pub functions: BTreeMap<String, FuncSig>,
    pub classes: BTreeMap<String, ClassInfo>,
}

impl TypeEnv {
    pub fn type_exists(&self, t: &Type) -> bool {
        match t {
            Type::Class(c) => self.classes.contains_key(c),
            _ => true,
        }
    }

    /// Supertype chain starting at `class` itself.
    pub fn ancestors<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        let mut cur = Some(class);
        let mut guard = 0usize;
        std::iter::from_fn(move || {
            let c = cur?;
            guard += 1;
            if guard > self.classes.len() + 1 {
                return None;
            }
            cur = self.classes.get(c).and_then(|i| i.supertype.as_deref());
            Some(c)
        })
    }

    /// Field type looked up through the supertype chain.
    pub fn field(&self, class: &str, name: &str) -> Option<&Type> {
        self.ancestors(class)
            .find_map(|c| self.classes.get(c).and_then(|i| i.fields.get(name)))
    }

    pub fn method(&self, class: &str, name: &str) -> Option<&FuncSig> {
        self.ancestors(class)
            .find_map(|c| self.classes.get(c).and_then(|i| i.methods.get(name)))
    }

    pub fn all_fields(&self, class: &str) -> BTreeMap<&str, &Type> {
        let mut out = BTreeMap::new();
        for c in self.ancestors(class) {
            if let Some(info) = self.classes.get(c) {
                for (n, t) in &info.fields {
                    out.entry(n.as_str()).or_insert(t);
                }
            }
        }
        out
    }

    pub fn all_methods(&self, class: &str) -> BTreeMap<&str, &FuncSig> {
        let mut out = BTreeMap::new();
        for c in self.ancestors(class) {
            if let Some(info) = self.classes.get(c) {
                for (n, s) in &info.methods {
                    out.entry(n.as_str()).or_insert(s);
                }
            }
        }
        out
    }

    /// Rename identifiers through the three lookup functions; names for which
    /// a lookup returns `None` are kept as they are.
    pub fn renamed(
        &self,
        var: impl Fn(&str) -> Option<String>,
        func: impl Fn(&str) -> Option<String>,
        ty: impl Fn(&str) -> Option<String>,
    ) -> TypeEnv {
        let rt = |t: &Type| match t {
            Type::Class(c) => Type::Class(ty(c).unwrap_or_else(|| c.clone())),
            other => other.clone(),
        };
        let rs = |s: &FuncSig| FuncSig {
            params: s.params.iter().map(rt).collect(),
            ret: rt(&s.ret),
        };
        TypeEnv {
            variables: self
                .variables
                .iter()
                .map(|(n, t)| (var(n).unwrap_or_else(|| n.clone()), rt(t)))
                .collect(),
            functions: self
                .functions
                .iter()
                .map(|(n, s)| (func(n).unwrap_or_else(|| n.clone()), rs(s)))
                .collect(),
            classes: self
                .classes
                .iter()
                .map(|(n, info)| {
                    (
                        ty(n).unwrap_or_else(|| n.clone()),
                        ClassInfo {
                            fields: info
                                .fields
                                .iter()
                                .map(|(f, t)| (var(f).unwrap_or_else(|| f.clone()), rt(t)))
                                .collect(),
                            methods: info
                                .methods
                                .iter()
                                .map(|(m, s)| (func(m).unwrap_or_else(|| m.clone()), rs(s)))
                                .collect(),
                            supertype: info.supertype.as_ref().map(|s| ty(s).unwrap_or_else(|| s.clone())),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// `candidate ⪯ required`: equal, `null` into a class, or a transitive
/// subclass.
pub fn type_compatible(candidate: &Type, required: &Type, env: &TypeEnv) -> bool {
    if candidate == required {
        return true;
    }
    match (candidate, required) {
        (Type::Null, Type::Class(_)) => true,
        (Type::Class(c), Type::Class(r)) => env.ancestors(c).any(|a| a == r),
        _ => false,
    }
}

pub(crate) fn type_of_node(node: &AstNode) -> Result<Type, LangError> {
    match (node.kind, node.child_text(E::Name)) {
        (K::BasicType | K::RefType, Some(name)) => Ok(Type::from_name(name)),
        _ => Err(LangError::Malformed {
            node: node.kind,
            message: "expected a named type".into(),
        }),
    }
}

fn missing(node: &AstNode, label: E) -> LangError {
    LangError::MissingEdge {
        node: node.kind,
        missing: label,
    }
}

pub(crate) fn signature(f: &AstNode) -> Result<FuncSig, LangError> {
    let ret = type_of_node(f.child(E::Type).ok_or_else(|| missing(f, E::Type))?)?;
    let params = f
        .children_with(E::Parameters)
        .map(|p| type_of_node(p.child(E::Type).ok_or_else(|| missing(p, E::Type))?))
        .collect::<Result<_, _>>()?;
    Ok(FuncSig { params, ret })
}

fn name_of(node: &AstNode) -> Result<&str, LangError> {
    node.child_text(E::Name).ok_or_else(|| missing(node, E::Name))
}

/// Program-wide declarations: top-level functions and classes.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub functions: BTreeMap<String, FuncSig>,
    pub classes: BTreeMap<String, ClassInfo>,
}

impl Globals {
    pub fn collect(program: &AstNode) -> Result<Globals, LangError> {
        let mut g = Globals::default();
        let dup = |scope: &str, name: &str| LangError::DuplicateDeclaration {
            scope: scope.to_string(),
            name: name.to_string(),
        };
        for decl in program.children_with(E::Types) {
            let name = name_of(decl)?.to_string();
            match decl.kind {
                K::FuncDecl => {
                    if g.functions.insert(name.clone(), signature(decl)?).is_some() {
                        return Err(dup("program", &name));
                    }
                }
                K::ClassDecl => {
                    let mut info = ClassInfo {
                        supertype: match decl.child(E::Type) {
                            Some(t) => Some(name_of(t)?.to_string()),
                            None => None,
                        },
                        ..ClassInfo::default()
                    };
                    for field_decl in decl.children_with(E::Fields) {
                        let ty = type_of_node(
                            field_decl
                                .child(E::Type)
                                .ok_or_else(|| missing(field_decl, E::Type))?,
                        )?;
                        for v in field_decl.children_with(E::Declarators) {
                            let f = name_of(v)?.to_string();
                            if info.fields.insert(f.clone(), ty.clone()).is_some() {
                                return Err(dup(&name, &f));
                            }
                        }
                    }
                    for m in decl.children_with(E::Methods) {
                        let mname = name_of(m)?.to_string();
                        if info.methods.insert(mname.clone(), signature(m)?).is_some() {
                            return Err(dup(&name, &mname));
                        }
                    }
                    if g.classes.insert(name.clone(), info).is_some() {
                        return Err(dup("program", &name));
                    }
                }
                _ => {
                    return Err(LangError::Malformed {
                        node: decl.kind,
                        message: "expected a class or function declaration".into(),
                    })
                }
            }
        }
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), LangError> {
        let env = TypeEnv {
            variables: BTreeMap::new(),
            functions: BTreeMap::new(),
            classes: self.classes.clone(),
        };
        let check = |t: &Type| {
            if env.type_exists(t) && *t != Type::Null {
                Ok(())
            } else {
                Err(LangError::UndeclaredType(t.name().to_string()))
            }
        };
        let check_sig = |s: &FuncSig| -> Result<(), LangError> {
            s.params.iter().try_for_each(check)?;
            check(&s.ret)
        };
        for s in self.functions.values() {
            check_sig(s)?;
        }
        for (name, info) in &self.classes {
            if let Some(sup) = &info.supertype {
                if !self.classes.contains_key(sup) {
                    return Err(LangError::UndeclaredType(sup.clone()));
                }
            }
            let mut seen = BTreeSet::new();
            let mut cur = Some(name.as_str());
            while let Some(c) = cur {
                if !seen.insert(c) {
                    return Err(LangError::InheritanceCycle(name.clone()));
                }
                cur = self.classes.get(c).and_then(|i| i.supertype.as_deref());
            }
            info.fields.values().try_for_each(check)?;
            info.methods.values().try_for_each(check_sig)?;
        }
        Ok(())
    }
}

/// Locate a function by name: a top-level function, or `Class.method`.
pub fn find_function<'a>(program: &'a AstNode, name: &str) -> Option<(&'a AstNode, Option<&'a AstNode>)> {
    let (class, fname) = match name.split_once('.') {
        Some((c, f)) => (Some(c), f),
        None => (None, name),
    };
    for decl in program.children_with(E::Types) {
        match (decl.kind, class) {
            (K::FuncDecl, None) if decl.child_text(E::Name) == Some(fname) => {
                return Some((decl, None))
            }
            (K::ClassDecl, Some(c)) if decl.child_text(E::Name) == Some(c) => {
                return decl
                    .children_with(E::Methods)
                    .find(|m| m.child_text(E::Name) == Some(fname))
                    .map(|m| (m, Some(decl)));
            }
            _ => {}
        }
    }
    None
}

/// Collect parameters and locals of a function; every name must be unique
/// within the function.
pub(crate) fn function_locals(f: &AstNode) -> Result<BTreeMap<String, Type>, LangError> {
    let fname = f.child_text(E::Name).unwrap_or("?").to_string();
    let mut out = BTreeMap::new();
    let mut insert = |name: &str, t: Type| {
        if out.insert(name.to_string(), t).is_some() {
            Err(LangError::DuplicateDeclaration {
                scope: fname.clone(),
                name: name.to_string(),
            })
        } else {
            Ok(())
        }
    };
    for p in f.children_with(E::Parameters) {
        let t = type_of_node(p.child(E::Type).ok_or_else(|| missing(p, E::Type))?)?;
        insert(name_of(p)?, t)?;
    }
    if let Some(body) = f.child(E::Body) {
        for n in body.preorder() {
            if n.kind == K::LocalVarDecl {
                let t = type_of_node(n.child(E::Type).ok_or_else(|| missing(n, E::Type))?)?;
                for v in n.children_with(E::Declarators) {
                    insert(name_of(v)?, t.clone())?;
                }
            }
        }
    }
    Ok(out)
}

/// Static facts visible from `focal_function` (a top-level function name or
/// `Class.method`).
pub fn extract_type_env(program: &AstNode, focal_function: &str) -> Result<TypeEnv, LangError> {
    let globals = Globals::collect(program)?;
    let (f, class) = find_function(program, focal_function)
        .ok_or_else(|| LangError::UnknownFunction(focal_function.to_string()))?;
    let mut env = TypeEnv {
        variables: BTreeMap::new(),
        functions: globals.functions,
        classes: globals.classes,
    };
    if let Some(class) = class {
        let cname = name_of(class)?;
        let fields: Vec<(String, Type)> = env
            .all_fields(cname)
            .into_iter()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect();
        env.variables.extend(fields);
    }
    for (n, t) in function_locals(f)? {
        if !env.type_exists(&t) {
            return Err(LangError::UndeclaredType(t.name().to_string()));
        }
        env.variables.insert(n, t);
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_program;

    #[test]
    fn reads_signatures_and_classes() {
        let src = "class Node { int v; }\nclass Context { }\nclass A { }\nclass B extends A { int f; }\nContext getCtx(Node n) { return null; }\nint main() { return 0; }";
        let p = parse_program(src).unwrap();
        let env = extract_type_env(&p, "main").unwrap();
        assert_eq!(
            env.functions["getCtx"],
            FuncSig {
                params: vec![Type::Class("Node".into())],
                ret: Type::Class("Context".into())
            }
        );
        assert_eq!(env.classes["B"].fields["f"], Type::Int);
        assert_eq!(env.classes["B"].supertype.as_deref(), Some("A"));
    }

    #[test]
    fn local_shadows_field() {
        let src = "class C { string f; int m(int x) { bool f = true; return x; } }";
        let p = parse_program(src).unwrap();
        let env = extract_type_env(&p, "C.m").unwrap();
        assert_eq!(env.variables["f"], Type::Bool);
        assert_eq!(env.variables["x"], Type::Int);
    }

    #[test]
    fn rejects_bad_declarations() {
        let dup = parse_program("int f(int a) { int a = 1; return a; }").unwrap();
        assert!(matches!(
            extract_type_env(&dup, "f"),
            Err(LangError::DuplicateDeclaration { .. })
        ));
        let undeclared = parse_program("Foo f() { return null; }").unwrap();
        assert_eq!(
            extract_type_env(&undeclared, "f"),
            Err(LangError::UndeclaredType("Foo".into()))
        );
        let cycle = parse_program("class A extends B { }\nclass B extends A { }\nint f() { return 0; }").unwrap();
        assert!(matches!(
            extract_type_env(&cycle, "f"),
            Err(LangError::InheritanceCycle(_))
        ));
    }

    #[test]
    fn compatibility() {
        let p = parse_program("class A { }\nclass B extends A { }\nclass C extends B { }").unwrap();
        let g = Globals::collect(&p).unwrap();
        let env = TypeEnv {
            classes: g.classes,
            ..TypeEnv::default()
        };
        let (a, b, c) = (
            Type::Class("A".into()),
            Type::Class("B".into()),
            Type::Class("C".into()),
        );
        assert!(type_compatible(&Type::Int, &Type::Int, &env));
        assert!(type_compatible(&b, &a, &env));
        assert!(!type_compatible(&a, &b, &env));
        assert!(type_compatible(&c, &a, &env));
        assert!(type_compatible(&Type::Null, &c, &env));
        assert!(!type_compatible(&Type::Null, &Type::Int, &env));
    }
}
