//! Canonical pretty-printer: one statement per line, two-space indentation,
//! single spaces around binary operators and the minimum parentheses needed
//! to reproduce the tree on reparse.

use super::ast::AstNode;
use super::grammar::{precedence, EdgeLabel as E, NodeKind as K};
use crate::error::LangError;

pub fn print_ast(ast: &AstNode) -> Result<String, LangError> {
    let mut p = Printer::default();
    match ast.kind {
        K::CompilationUnit => {
            for (label, decl) in &ast.children {
                expect_label(ast, *label, &[E::Types])?;
                match decl.kind {
                    K::ClassDecl => p.class(decl)?,
                    K::FuncDecl => p.func(decl)?,
                    _ => return Err(malformed(decl, "expected a class or function")),
                }
            }
        }
        K::ClassDecl => p.class(ast)?,
        K::FuncDecl => p.func(ast)?,
        k if k.is_statement() => p.stmt(ast)?,
        _ => {
            let text = expr(ast)?;
            p.lines.push(text);
        }
    }
    Ok(p.lines.join("\n"))
}

/// Print the statements of a block without the surrounding braces, each line
/// prefixed by `indent` levels.
pub fn print_statements(block: &AstNode, indent: usize) -> Result<Vec<String>, LangError> {
    if block.kind != K::BlockStmt {
        return Err(malformed(block, "expected a block"));
    }
    let mut p = Printer {
        lines: Vec::new(),
        indent,
    };
    for (label, s) in &block.children {
        expect_label(block, *label, &[E::Statements])?;
        p.stmt(s)?;
    }
    Ok(p.lines)
}

pub fn print_expr(ast: &AstNode) -> Result<String, LangError> {
    expr(ast)
}

fn malformed(node: &AstNode, message: &str) -> LangError {
    LangError::Malformed {
        node: node.kind,
        message: message.to_string(),
    }
}

fn expect_label(node: &AstNode, label: E, allowed: &[E]) -> Result<(), LangError> {
    if allowed.contains(&label) {
        Ok(())
    } else {
        Err(malformed(node, &format!("unexpected edge `{label}`")))
    }
}

fn check_labels(node: &AstNode, allowed: &[E]) -> Result<(), LangError> {
    for (label, _) in &node.children {
        expect_label(node, *label, allowed)?;
    }
    Ok(())
}

fn required(node: &AstNode, label: E) -> Result<&AstNode, LangError> {
    let mut it = node.children_with(label);
    let first = it.next().ok_or(LangError::MissingEdge {
        node: node.kind,
        missing: label,
    })?;
    if it.next().is_some() {
        return Err(malformed(node, &format!("{label} multiplicity > 1")));
    }
    Ok(first)
}

fn optional(node: &AstNode, label: E) -> Result<Option<&AstNode>, LangError> {
    if node.count(label) > 1 {
        return Err(malformed(node, &format!("{label} multiplicity > 1")));
    }
    Ok(node.child(label))
}

fn token(node: &AstNode, label: E) -> Result<&str, LangError> {
    let leaf = required(node, label)?;
    match (leaf.kind, leaf.text()) {
        (K::Token, Some(t)) if !t.is_empty() && leaf.children.is_empty() => Ok(t),
        _ => Err(malformed(node, &format!("{label} must be a token leaf"))),
    }
}

fn type_name(node: &AstNode) -> Result<&str, LangError> {
    match node.kind {
        K::BasicType | K::RefType => {
            check_labels(node, &[E::Name])?;
            token(node, E::Name)
        }
        _ => Err(malformed(node, "expected a type")),
    }
}

#[derive(Default)]
struct Printer {
    lines: Vec<String>,
    indent: usize,
}

impl Printer {
    fn push(&mut self, text: String) {
        self.lines.push(format!("{}{}", "  ".repeat(self.indent), text));
    }

    /// Append `text` to the last emitted line.
    fn append(&mut self, text: &str) {
        self.lines.last_mut().unwrap().push_str(text);
    }

    fn class(&mut self, node: &AstNode) -> Result<(), LangError> {
        check_labels(node, &[E::Name, E::Type, E::Fields, E::Methods])?;
        let mut head = format!("class {}", token(node, E::Name)?);
        if let Some(sup) = optional(node, E::Type)? {
            if sup.kind != K::RefType {
                return Err(malformed(node, "supertype must be a class type"));
            }
            head.push_str(" extends ");
            head.push_str(type_name(sup)?);
        }
        head.push_str(" {");
        self.push(head);
        self.indent += 1;
        for (label, member) in &node.children {
            match label {
                E::Fields => {
                    if member.kind != K::LocalVarDecl {
                        return Err(malformed(node, "fields must be declarations"));
                    }
                    self.local(member)?
                }
                E::Methods => {
                    if member.kind != K::FuncDecl {
                        return Err(malformed(node, "methods must be functions"));
                    }
                    self.func(member)?
                }
                _ => {}
            }
        }
        self.indent -= 1;
        self.push("}".into());
        Ok(())
    }

    fn func(&mut self, node: &AstNode) -> Result<(), LangError> {
        check_labels(node, &[E::Type, E::Name, E::Parameters, E::Body])?;
        let ret = type_name(required(node, E::Type)?)?;
        let name = token(node, E::Name)?;
        let mut params = Vec::new();
        for p in node.children_with(E::Parameters) {
            if p.kind != K::Param {
                return Err(malformed(node, "parameters must be Param nodes"));
            }
            check_labels(p, &[E::Type, E::Name])?;
            params.push(format!(
                "{} {}",
                type_name(required(p, E::Type)?)?,
                token(p, E::Name)?
            ));
        }
        let body = required(node, E::Body)?;
        if body.kind != K::BlockStmt {
            return Err(malformed(node, "body must be a block"));
        }
        self.push(format!("{ret} {name}({}) ", params.join(", ")));
        self.block_tail(body)
    }

    /// Emit `{ ... }` continuing the current last line.
    fn block_tail(&mut self, block: &AstNode) -> Result<(), LangError> {
        check_labels(block, &[E::Statements])?;
        if block.children.is_empty() {
            self.append("{}");
            return Ok(());
        }
        self.append("{");
        self.indent += 1;
        for s in block.children_with(E::Statements) {
            self.stmt(s)?;
        }
        self.indent -= 1;
        self.push("}".into());
        Ok(())
    }

    /// Emit a nested statement after a header line such as `if (c)`.
    fn nested(&mut self, s: &AstNode) -> Result<(), LangError> {
        if s.kind == K::BlockStmt {
            self.append(" ");
            self.block_tail(s)
        } else {
            self.indent += 1;
            self.stmt(s)?;
            self.indent -= 1;
            Ok(())
        }
    }

    fn local(&mut self, node: &AstNode) -> Result<(), LangError> {
        check_labels(node, &[E::Type, E::Declarators])?;
        let ty = type_name(required(node, E::Type)?)?;
        let mut decls = Vec::new();
        for d in node.children_with(E::Declarators) {
            if d.kind != K::VarDecl {
                return Err(malformed(node, "declarators must be VarDecl nodes"));
            }
            check_labels(d, &[E::Name, E::Initializer])?;
            let mut text = token(d, E::Name)?.to_string();
            if let Some(init) = optional(d, E::Initializer)? {
                text.push_str(" = ");
                text.push_str(&expr(init)?);
            }
            decls.push(text);
        }
        if decls.is_empty() {
            return Err(LangError::MissingEdge {
                node: K::LocalVarDecl,
                missing: E::Declarators,
            });
        }
        self.push(format!("{ty} {};", decls.join(", ")));
        Ok(())
    }

    fn stmt(&mut self, node: &AstNode) -> Result<(), LangError> {
        match node.kind {
            K::BlockStmt => {
                self.push(String::new());
                self.block_tail(node)
            }
            K::LocalVarDecl => self.local(node),
            K::IfStmt => {
                check_labels(node, &[E::Condition, E::Then, E::Else])?;
                let cond = expr(required(node, E::Condition)?)?;
                let then = required(node, E::Then)?;
                let els = optional(node, E::Else)?;
                stmt_kind(then)?;
                self.push(format!("if ({cond})"));
                self.nested(then)?;
                if let Some(els) = els {
                    stmt_kind(els)?;
                    if then.kind == K::BlockStmt {
                        self.append(" else");
                    } else {
                        self.push("else".into());
                    }
                    if els.kind == K::IfStmt {
                        // `else if` chains stay on one line.
                        let mut sub = Printer {
                            lines: Vec::new(),
                            indent: self.indent,
                        };
                        sub.stmt(els)?;
                        let mut it = sub.lines.into_iter();
                        let first = it.next().unwrap();
                        self.append(" ");
                        self.append(first.trim_start());
                        self.lines.extend(it);
                    } else {
                        self.nested(els)?;
                    }
                }
                Ok(())
            }
            K::WhileStmt => {
                check_labels(node, &[E::Condition, E::Body])?;
                let cond = expr(required(node, E::Condition)?)?;
                let body = required(node, E::Body)?;
                stmt_kind(body)?;
                self.push(format!("while ({cond})"));
                self.nested(body)
            }
            K::ReturnStmt => {
                check_labels(node, &[E::Value])?;
                match optional(node, E::Value)? {
                    Some(v) => {
                        let v = expr(v)?;
                        self.push(format!("return {v};"));
                    }
                    None => self.push("return;".into()),
                }
                Ok(())
            }
            K::ExprStmt => {
                check_labels(node, &[E::Value])?;
                let v = required(node, E::Value)?;
                let text = match v.kind {
                    K::Assignment => {
                        check_labels(v, &[E::Left, E::Right])?;
                        let l = required(v, E::Left)?;
                        if !matches!(l.kind, K::VarRef | K::MemberRef) {
                            return Err(malformed(v, "left side must be a variable or field"));
                        }
                        format!("{} = {}", expr(l)?, expr(required(v, E::Right)?)?)
                    }
                    K::FuncInvoc => expr(v)?,
                    _ => return Err(malformed(node, "value must be a call or assignment")),
                };
                self.push(format!("{text};"));
                Ok(())
            }
            _ => Err(malformed(node, "expected a statement")),
        }
    }
}

fn stmt_kind(node: &AstNode) -> Result<(), LangError> {
    if node.kind.is_statement() {
        Ok(())
    } else {
        Err(malformed(node, "expected a statement"))
    }
}

fn expr(node: &AstNode) -> Result<String, LangError> {
    match node.kind {
        K::Literal => {
            check_labels(node, &[E::Value])?;
            Ok(token(node, E::Value)?.to_string())
        }
        K::VarRef => {
            check_labels(node, &[E::Name])?;
            Ok(token(node, E::Name)?.to_string())
        }
        K::BinaryOp => {
            check_labels(node, &[E::Left, E::Operator, E::Right])?;
            let op = token(node, E::Operator)?;
            let prec = precedence(op).ok_or_else(|| malformed(node, "unknown operator"))?;
            let l = required(node, E::Left)?;
            let r = required(node, E::Right)?;
            let wrap = |child: &AstNode, strict: bool| -> Result<String, LangError> {
                let text = expr(child)?;
                let child_prec = binop_prec(child);
                let needs = match child_prec {
                    Some(cp) => cp < prec || (strict && cp == prec),
                    None => false,
                };
                Ok(if needs { format!("({text})") } else { text })
            };
            Ok(format!("{} {op} {}", wrap(l, false)?, wrap(r, true)?))
        }
        K::MemberRef | K::FuncInvoc => access(node, true),
        _ => Err(malformed(node, "expected an expression")),
    }
}

fn binop_prec(node: &AstNode) -> Option<u8> {
    if node.kind == K::BinaryOp {
        node.child_text(E::Operator).and_then(precedence).or(Some(0))
    } else {
        None
    }
}

fn access(node: &AstNode, head: bool) -> Result<String, LangError> {
    let is_call = node.kind == K::FuncInvoc;
    if is_call {
        check_labels(node, &[E::Qualifier, E::Member, E::Args, E::Selectors])?;
    } else {
        check_labels(node, &[E::Qualifier, E::Member, E::Selectors])?;
    }
    let mut out = String::new();
    let member = token(node, E::Member)?;
    match optional(node, E::Qualifier)? {
        Some(_) if !head => return Err(malformed(node, "a selector cannot carry a qualifier")),
        Some(q) => {
            let text = expr(q)?;
            if matches!(q.kind, K::VarRef | K::Literal) {
                out.push_str(&text);
            } else {
                out.push('(');
                out.push_str(&text);
                out.push(')');
            }
            out.push('.');
        }
        None if !head => out.push('.'),
        None => {}
    }
    out.push_str(member);
    if is_call {
        let args: Result<Vec<String>, LangError> = node.children_with(E::Args).map(expr).collect();
        out.push('(');
        out.push_str(&args?.join(", "));
        out.push(')');
    }
    for sel in node.children_with(E::Selectors) {
        if !matches!(sel.kind, K::MemberRef | K::FuncInvoc) {
            return Err(malformed(node, "selectors must be member accesses"));
        }
        out.push_str(&access(sel, false)?);
    }
    Ok(out)
}
