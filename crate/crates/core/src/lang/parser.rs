//! Recursive-descent parser producing line-annotated [`AstNode`] trees.

use super::ast::{AstNode, LineSpan};
use super::grammar::{is_keyword, precedence, EdgeLabel as E, NodeKind as K, BASIC_TYPES};
use super::lexer::{lex, Lexeme, Tok};
use crate::error::LangError;

/// Parse a whole program.
///
/// Source starting with `{` (or blank source) is parsed as a single block,
/// which is how function bodies and patches are handled; anything else is a
/// compilation unit of classes and functions.
pub fn parse_program(source: &str) -> Result<AstNode, LangError> {
    let mut p = Parser::new(source)?;
    let node = match p.peek() {
        Tok::Eof => AstNode::new(K::BlockStmt).with_lines(LineSpan::new(1, 1)),
        Tok::Punct("{") => p.block()?,
        _ => p.compilation_unit()?,
    };
    p.expect_eof()?;
    Ok(node)
}

/// Parse a braced block.
pub fn parse_block(source: &str) -> Result<AstNode, LangError> {
    let mut p = Parser::new(source)?;
    let node = p.block()?;
    p.expect_eof()?;
    Ok(node)
}

/// Parse a bare statement sequence (no braces) into a `BlockStmt`.
pub fn parse_statements(source: &str) -> Result<AstNode, LangError> {
    let mut p = Parser::new(source)?;
    let mut block = AstNode::new(K::BlockStmt);
    let mut span: Option<LineSpan> = None;
    while *p.peek() != Tok::Eof {
        let s = p.statement()?;
        span = Some(match span {
            Some(sp) => sp.merge(s.lines.unwrap()),
            None => s.lines.unwrap(),
        });
        block.children.push((E::Statements, s));
    }
    block.lines = Some(span.unwrap_or(LineSpan::new(1, 1)));
    Ok(block)
}

/// Parse a single expression.
pub fn parse_expression(source: &str) -> Result<AstNode, LangError> {
    let mut p = Parser::new(source)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser {
    toks: Vec<Lexeme>,
    pos: usize,
}

impl Parser {
    fn new(source: &str) -> Result<Self, LangError> {
        Ok(Self {
            toks: lex(source)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn line(&self) -> u32 {
        self.toks[self.pos].line
    }

    fn prev_line(&self) -> u32 {
        self.toks[self.pos.saturating_sub(1)].line
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, LangError> {
        let l = &self.toks[self.pos];
        Err(LangError::Syntax {
            line: l.line,
            col: l.col,
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) | Tok::Int(s) | Tok::Str(s) => format!("`{s}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), LangError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn expect_eof(&self) -> Result<(), LangError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => self.error(format!("unexpected {}", self.describe())),
        }
    }

    fn ident(&mut self) -> Result<String, LangError> {
        match self.peek() {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.error(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn leaf(&mut self, text: String, line: u32) -> AstNode {
        AstNode::token(text).with_lines(LineSpan::new(line, line))
    }

    fn finish(&self, node: AstNode, start: u32) -> AstNode {
        node.with_lines(LineSpan::new(start, self.prev_line()))
    }

    fn compilation_unit(&mut self) -> Result<AstNode, LangError> {
        let start = self.line();
        let mut unit = AstNode::new(K::CompilationUnit);
        while *self.peek() != Tok::Eof {
            let decl = if matches!(self.peek(), Tok::Ident(s) if s == "class") {
                self.class_decl()?
            } else {
                let s = self.line();
                let ty = self.type_node()?;
                let name_line = self.line();
                let name = self.ident()?;
                let name = self.leaf(name, name_line);
                self.func_rest(ty, name, s)?
            };
            unit.children.push((E::Types, decl));
        }
        Ok(self.finish(unit, start))
    }

    fn class_decl(&mut self) -> Result<AstNode, LangError> {
        let start = self.line();
        self.eat_kw("class");
        let l = self.line();
        let name = self.ident()?;
        let mut class = AstNode::new(K::ClassDecl).with(E::Name, self.leaf(name, l));
        if self.eat_kw("extends") {
            let s = self.line();
            let sup = self.ident()?;
            let leaf = self.leaf(sup, s);
            class
                .children
                .push((E::Type, self.finish(AstNode::new(K::RefType).with(E::Name, leaf), s)));
        }
        self.expect("{")?;
        while !self.eat("}") {
            if *self.peek() == Tok::Eof {
                return self.error("expected `}`");
            }
            let s = self.line();
            let ty = self.type_node()?;
            let nl = self.line();
            let name = self.ident()?;
            let name = self.leaf(name, nl);
            if matches!(self.peek(), Tok::Punct("(")) {
                let f = self.func_rest(ty, name, s)?;
                class.children.push((E::Methods, f));
            } else {
                let mut decl = AstNode::new(K::LocalVarDecl).with(E::Type, ty);
                decl.children.push((
                    E::Declarators,
                    self.finish(AstNode::new(K::VarDecl).with(E::Name, name), nl),
                ));
                while self.eat(",") {
                    let vl = self.line();
                    let v = self.ident()?;
                    let leaf = self.leaf(v, vl);
                    decl.children.push((
                        E::Declarators,
                        self.finish(AstNode::new(K::VarDecl).with(E::Name, leaf), vl),
                    ));
                }
                self.expect(";")?;
                class.children.push((E::Fields, self.finish(decl, s)));
            }
        }
        Ok(self.finish(class, start))
    }

    fn func_rest(&mut self, ty: AstNode, name: AstNode, start: u32) -> Result<AstNode, LangError> {
        let mut f = AstNode::new(K::FuncDecl).with(E::Type, ty).with(E::Name, name);
        self.expect("(")?;
        if !self.eat(")") {
            loop {
                let s = self.line();
                let pty = self.type_node()?;
                let nl = self.line();
                let pname = self.ident()?;
                let leaf = self.leaf(pname, nl);
                let param = AstNode::new(K::Param).with(E::Type, pty).with(E::Name, leaf);
                f.children.push((E::Parameters, self.finish(param, s)));
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        let body = self.block()?;
        f.children.push((E::Body, body));
        Ok(self.finish(f, start))
    }

    fn type_node(&mut self) -> Result<AstNode, LangError> {
        let l = self.line();
        match self.peek().clone() {
            Tok::Ident(s) if BASIC_TYPES.contains(&s.as_str()) => {
                self.bump();
                let leaf = self.leaf(s, l);
                Ok(self.finish(AstNode::new(K::BasicType).with(E::Name, leaf), l))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                let leaf = self.leaf(s, l);
                Ok(self.finish(AstNode::new(K::RefType).with(E::Name, leaf), l))
            }
            _ => self.error(format!("expected type, found {}", self.describe())),
        }
    }

    fn block(&mut self) -> Result<AstNode, LangError> {
        let start = self.line();
        self.expect("{")?;
        let mut block = AstNode::new(K::BlockStmt);
        while !self.eat("}") {
            if *self.peek() == Tok::Eof {
                return self.error("expected `}`");
            }
            let s = self.statement()?;
            block.children.push((E::Statements, s));
        }
        Ok(self.finish(block, start))
    }

    fn starts_local_decl(&self) -> bool {
        match (self.peek(), self.peek_at(1)) {
            (Tok::Ident(t), _) if BASIC_TYPES.contains(&t.as_str()) => true,
            (Tok::Ident(t), Tok::Ident(n)) => !is_keyword(t) && !is_keyword(n),
            _ => false,
        }
    }

    fn statement(&mut self) -> Result<AstNode, LangError> {
        let start = self.line();
        if matches!(self.peek(), Tok::Punct("{")) {
            return self.block();
        }
        if self.eat_kw("if") {
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let then = self.statement()?;
            let mut node = AstNode::new(K::IfStmt)
                .with(E::Condition, cond)
                .with(E::Then, then);
            if self.eat_kw("else") {
                let els = self.statement()?;
                node.children.push((E::Else, els));
            }
            return Ok(self.finish(node, start));
        }
        if self.eat_kw("while") {
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let body = self.statement()?;
            let node = AstNode::new(K::WhileStmt)
                .with(E::Condition, cond)
                .with(E::Body, body);
            return Ok(self.finish(node, start));
        }
        if self.eat_kw("return") {
            let mut node = AstNode::new(K::ReturnStmt);
            if !self.eat(";") {
                let v = self.expr()?;
                node.children.push((E::Value, v));
                self.expect(";")?;
            }
            return Ok(self.finish(node, start));
        }
        if self.starts_local_decl() {
            let ty = self.type_node()?;
            let mut node = AstNode::new(K::LocalVarDecl).with(E::Type, ty);
            loop {
                let vl = self.line();
                let name = self.ident()?;
                let mut var = AstNode::new(K::VarDecl).with(E::Name, self.leaf(name, vl));
                if self.eat("=") {
                    let init = self.expr()?;
                    var.children.push((E::Initializer, init));
                }
                node.children.push((E::Declarators, self.finish(var, vl)));
                if !self.eat(",") {
                    break;
                }
            }
            self.expect(";")?;
            return Ok(self.finish(node, start));
        }
        let lhs = self.expr()?;
        let value = if self.eat("=") {
            if !matches!(lhs.kind, K::VarRef | K::MemberRef) {
                return self.error("left side of assignment must be a variable or field");
            }
            let rhs = self.expr()?;
            self.finish(
                AstNode::new(K::Assignment)
                    .with(E::Left, lhs)
                    .with(E::Right, rhs),
                start,
            )
        } else if lhs.kind == K::FuncInvoc {
            lhs
        } else {
            return self.error("expression statement must be a call or assignment");
        };
        self.expect(";")?;
        Ok(self.finish(AstNode::new(K::ExprStmt).with(E::Value, value), start))
    }

    pub(crate) fn expr(&mut self) -> Result<AstNode, LangError> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> Result<AstNode, LangError> {
        let start = self.line();
        let mut left = self.postfix()?;
        loop {
            let (op, prec) = match self.peek() {
                Tok::Punct(p) => match precedence(p) {
                    Some(prec) if prec >= min_prec => (*p, prec),
                    _ => break,
                },
                _ => break,
            };
            let op_line = self.line();
            self.bump();
            let right = self.binary(prec + 1)?;
            let node = AstNode::new(K::BinaryOp)
                .with(E::Left, left)
                .with(E::Operator, self.leaf(op.to_string(), op_line))
                .with(E::Right, right);
            left = self.finish(node, start);
        }
        Ok(left)
    }

    fn args(&mut self, node: &mut AstNode) -> Result<(), LangError> {
        self.expect("(")?;
        if self.eat(")") {
            return Ok(());
        }
        loop {
            let a = self.expr()?;
            node.children.push((E::Args, a));
            if self.eat(")") {
                return Ok(());
            }
            self.expect(",")?;
        }
    }

    fn postfix(&mut self) -> Result<AstNode, LangError> {
        let start = self.line();
        let (mut base, parenthesized) = self.primary()?;
        let mut fresh = true;
        while self.eat(".") {
            let ml = self.line();
            let member = self.ident()?;
            let member = self.leaf(member, ml);
            let is_call = matches!(self.peek(), Tok::Punct("("));
            let mut access = AstNode::new(if is_call { K::FuncInvoc } else { K::MemberRef });
            // A plain variable, literal or parenthesized expression becomes the
            // qualifier; later accesses on an access chain become selectors.
            let qualify = (fresh && parenthesized)
                || !matches!(base.kind, K::MemberRef | K::FuncInvoc);
            if qualify {
                access.children.push((E::Qualifier, base));
                access.children.push((E::Member, member));
                if is_call {
                    self.args(&mut access)?;
                }
                base = self.finish(access, start);
            } else {
                access.children.push((E::Member, member));
                if is_call {
                    self.args(&mut access)?;
                }
                let access = self.finish(access, ml);
                base.children.push((E::Selectors, access));
                base = self.finish(base, start);
            }
            fresh = false;
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<(AstNode, bool), LangError> {
        let l = self.line();
        match self.peek().clone() {
            Tok::Int(text) | Tok::Str(text) => {
                self.bump();
                let leaf = self.leaf(text, l);
                Ok((self.finish(AstNode::new(K::Literal).with(E::Value, leaf), l), false))
            }
            Tok::Ident(s) if matches!(s.as_str(), "true" | "false" | "null") => {
                self.bump();
                let leaf = self.leaf(s, l);
                Ok((self.finish(AstNode::new(K::Literal).with(E::Value, leaf), l), false))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                let leaf = self.leaf(s, l);
                if matches!(self.peek(), Tok::Punct("(")) {
                    let mut call = AstNode::new(K::FuncInvoc).with(E::Member, leaf);
                    self.args(&mut call)?;
                    Ok((self.finish(call, l), false))
                } else {
                    Ok((self.finish(AstNode::new(K::VarRef).with(E::Name, leaf), l), false))
                }
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok((e, true))
            }
            _ => self.error(format!("expected expression, found {}", self.describe())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_with_local() {
        let t = parse_program("{ int x = 1; }").unwrap();
        assert_eq!(
            t.sexpr(),
            "(BlockStmt statements:(LocalVarDecl type:(BasicType name:int) \
             declarators:(VarDecl name:x initializer:(Literal value:1))))"
        );
    }

    #[test]
    fn empty_source_is_empty_block() {
        let t = parse_program("").unwrap();
        assert_eq!(t.kind, K::BlockStmt);
        assert!(t.children.is_empty());
    }

    #[test]
    fn missing_initializer_reports_position() {
        match parse_program("{ int x = ; }") {
            Err(LangError::Syntax { line, col, .. }) => assert_eq!((line, col), (1, 11)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn access_chains() {
        let e = parse_expression("a.b.c(1)").unwrap();
        assert_eq!(
            e.sexpr(),
            "(MemberRef qualifier:(VarRef name:a) member:b \
             selectors:(FuncInvoc member:c args:(Literal value:1)))"
        );
        let e = parse_expression("(a.b).c").unwrap();
        assert_eq!(
            e.sexpr(),
            "(MemberRef qualifier:(MemberRef qualifier:(VarRef name:a) member:b) member:c)"
        );
        let e = parse_expression("f(x).g").unwrap();
        assert_eq!(
            e.sexpr(),
            "(FuncInvoc member:f args:(VarRef name:x) selectors:(MemberRef member:g))"
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expression("a - b - c * d").unwrap();
        assert_eq!(
            e.sexpr(),
            "(BinaryOp left:(BinaryOp left:(VarRef name:a) operator:- right:(VarRef name:b)) \
             operator:- right:(BinaryOp left:(VarRef name:c) operator:* right:(VarRef name:d)))"
        );
    }

    #[test]
    fn statement_lines() {
        let t = parse_program("{\n  int x = 1;\n  if (x > 0) {\n    x = 2;\n  }\n}").unwrap();
        let stmts: Vec<_> = t.children_with(E::Statements).collect();
        assert_eq!(stmts[0].lines, Some(LineSpan::new(2, 2)));
        assert_eq!(stmts[1].lines, Some(LineSpan::new(3, 5)));
        assert_eq!(t.lines, Some(LineSpan::new(1, 6)));
    }

    #[test]
    fn compilation_unit() {
        let src = "class B extends A { int f; int get(int x) { return x; } }\nint main() { return 0; }";
        let t = parse_program(src).unwrap();
        assert_eq!(t.kind, K::CompilationUnit);
        assert_eq!(t.count(E::Types), 2);
        let class = t.child(E::Types).unwrap();
        assert_eq!(class.count(E::Fields), 1);
        assert_eq!(class.count(E::Methods), 1);
    }
}
