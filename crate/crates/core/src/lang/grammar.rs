//! Node kinds, edge labels and token classes of the mini-language.
//!
//! The vocabulary mirrors a Java-style labeled AST: interior nodes carry a
//! [`NodeKind`], every parent→child edge carries an [`EdgeLabel`], and all
//! identifier/literal/operator text lives in dedicated [`NodeKind::Token`]
//! leaves so that a decoder can emit them as ordinary node labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::LangError;

macro_rules! closed_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            /// Dense index in `ALL`.
            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = LangError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(LangError::UnknownName {
                        what: stringify!($name),
                        name: other.to_string(),
                    }),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

closed_enum! {
    /// Every node kind that may appear in an AST.
    pub enum NodeKind {
        CompilationUnit => "CompilationUnit",
        ClassDecl => "ClassDecl",
        FuncDecl => "FuncDecl",
        Param => "Param",
        BlockStmt => "BlockStmt",
        LocalVarDecl => "LocalVarDecl",
        VarDecl => "VarDecl",
        IfStmt => "IfStmt",
        WhileStmt => "WhileStmt",
        ReturnStmt => "ReturnStmt",
        ExprStmt => "ExprStmt",
        Assignment => "Assignment",
        BinaryOp => "BinaryOp",
        Literal => "Literal",
        VarRef => "VarRef",
        MemberRef => "MemberRef",
        FuncInvoc => "FuncInvoc",
        RefType => "RefType",
        BasicType => "BasicType",
        Token => "Token",
    }
}

closed_enum! {
    /// Labels on parent→child edges.
    pub enum EdgeLabel {
        Statements => "statements",
        Type => "type",
        Declarators => "declarators",
        Initializer => "initializer",
        Condition => "condition",
        Then => "then",
        Else => "else",
        Body => "body",
        Member => "member",
        Qualifier => "qualifier",
        Args => "args",
        Selectors => "selectors",
        Left => "left",
        Right => "right",
        Name => "name",
        Operator => "operator",
        Parameters => "parameters",
        Fields => "fields",
        Methods => "methods",
        Value => "value",
        Types => "types",
    }
}

impl NodeKind {
    pub fn is_statement(self) -> bool {
        matches!(
            self,
            NodeKind::BlockStmt
                | NodeKind::LocalVarDecl
                | NodeKind::IfStmt
                | NodeKind::WhileStmt
                | NodeKind::ReturnStmt
                | NodeKind::ExprStmt
        )
    }

    pub fn is_expression(self) -> bool {
        matches!(
            self,
            NodeKind::BinaryOp
                | NodeKind::Literal
                | NodeKind::VarRef
                | NodeKind::MemberRef
                | NodeKind::FuncInvoc
        )
    }

    pub fn is_type(self) -> bool {
        matches!(self, NodeKind::BasicType | NodeKind::RefType)
    }

    /// Canonical position of `label` among this kind's children; children are
    /// kept sorted by this rank (stable within one label).
    pub fn child_rank(self, label: EdgeLabel) -> usize {
        use EdgeLabel as E;
        let order: &[EdgeLabel] = match self {
            NodeKind::ClassDecl => &[E::Name, E::Type, E::Fields, E::Methods],
            NodeKind::FuncDecl => &[E::Type, E::Name, E::Parameters, E::Body],
            NodeKind::Param => &[E::Type, E::Name],
            NodeKind::LocalVarDecl => &[E::Type, E::Declarators],
            NodeKind::VarDecl => &[E::Name, E::Initializer],
            NodeKind::IfStmt => &[E::Condition, E::Then, E::Else],
            NodeKind::WhileStmt => &[E::Condition, E::Body],
            NodeKind::Assignment => &[E::Left, E::Right],
            NodeKind::BinaryOp => &[E::Left, E::Operator, E::Right],
            NodeKind::MemberRef => &[E::Qualifier, E::Member, E::Selectors],
            NodeKind::FuncInvoc => &[E::Qualifier, E::Member, E::Args, E::Selectors],
            _ => &[],
        };
        order
            .iter()
            .position(|l| *l == label)
            .unwrap_or(order.len() + label.index())
    }
}

/// Binary operators, loosest binding first.
pub const OPERATORS: &[&str] = &[
    "||", "&&", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/", "%",
];

pub const BASIC_TYPES: &[&str] = &["int", "bool", "string"];

/// Precedence level of a binary operator (higher binds tighter).
pub fn precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "==" | "!=" => 3,
        "<" | "<=" | ">" | ">=" => 4,
        "+" | "-" => 5,
        "*" | "/" | "%" => 6,
        _ => return None,
    })
}

/// Coarse lexical class of a token leaf's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenClass {
    /// Normalized variable placeholder (`VARk`, `VAR-UNK`).
    Var,
    /// Normalized function placeholder (`FUNCk`, `FUNC-UNK`).
    Func,
    /// Normalized type placeholder (`TYPEk`, `TYPE-UNK`).
    Type,
    /// Concrete identifier whose class depends on position.
    Ident,
    Literal,
    Operator,
    BasicType,
}

impl TokenClass {
    /// Whether a token of this class may fill a slot that expects `want`.
    pub fn fits(self, want: TokenClass) -> bool {
        self == want
            || (self == TokenClass::Ident
                && matches!(want, TokenClass::Var | TokenClass::Func | TokenClass::Type))
    }
}

pub fn is_keyword(text: &str) -> bool {
    matches!(
        text,
        "class"
            | "extends"
            | "if"
            | "else"
            | "while"
            | "return"
            | "true"
            | "false"
            | "null"
            | "int"
            | "bool"
            | "string"
    )
}

fn placeholder_class(text: &str) -> Option<TokenClass> {
    for (prefix, class) in [
        ("FUNC", TokenClass::Func),
        ("TYPE", TokenClass::Type),
        ("VAR", TokenClass::Var),
        ("LIT", TokenClass::Literal),
    ] {
        if let Some(rest) = text.strip_prefix(prefix) {
            if rest == "-UNK"
                || (!rest.is_empty()
                    && rest.bytes().all(|b| b.is_ascii_digit())
                    && !rest.starts_with('0'))
            {
                return Some(class);
            }
        }
    }
    None
}

/// Parse `VARk`-style placeholders into `(prefix, k)`; `None` for UNK and
/// anything else.
pub fn placeholder_index(text: &str) -> Option<(TokenClass, usize)> {
    let class = placeholder_class(text)?;
    let digits = text.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    digits.parse().ok().map(|k| (class, k))
}

pub fn is_unk(text: &str) -> bool {
    text.ends_with("-UNK") && placeholder_class(text).is_some()
}

pub fn classify_token(text: &str) -> TokenClass {
    if let Some(class) = placeholder_class(text) {
        return class;
    }
    if precedence(text).is_some() {
        return TokenClass::Operator;
    }
    if BASIC_TYPES.contains(&text) {
        return TokenClass::BasicType;
    }
    if matches!(text, "true" | "false" | "null")
        || text.starts_with('"')
        || text.bytes().next().is_some_and(|b| b.is_ascii_digit())
    {
        return TokenClass::Literal;
    }
    TokenClass::Ident
}

/// What kind of child an edge slot admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Kinds(&'static [NodeKind]),
    Token(TokenClass),
}

const STMT: &[NodeKind] = &[
    NodeKind::BlockStmt,
    NodeKind::LocalVarDecl,
    NodeKind::IfStmt,
    NodeKind::WhileStmt,
    NodeKind::ReturnStmt,
    NodeKind::ExprStmt,
];
const EXPR: &[NodeKind] = &[
    NodeKind::BinaryOp,
    NodeKind::Literal,
    NodeKind::VarRef,
    NodeKind::MemberRef,
    NodeKind::FuncInvoc,
];
const TYPE_NODE: &[NodeKind] = &[NodeKind::BasicType, NodeKind::RefType];
const ACCESS: &[NodeKind] = &[NodeKind::MemberRef, NodeKind::FuncInvoc];

/// Admissible children for `(parent kind, edge label)`; `None` when the edge
/// is not part of the kind's edge classes at all.
pub fn slot_kind(parent: NodeKind, label: EdgeLabel) -> Option<SlotKind> {
    use EdgeLabel as E;
    use NodeKind as K;
    use SlotKind::{Kinds, Token};
    Some(match (parent, label) {
        (K::CompilationUnit, E::Types) => Kinds(&[K::ClassDecl, K::FuncDecl]),
        (K::ClassDecl, E::Name) => Token(TokenClass::Type),
        (K::ClassDecl, E::Type) => Kinds(&[K::RefType]),
        (K::ClassDecl, E::Fields) => Kinds(&[K::LocalVarDecl]),
        (K::ClassDecl, E::Methods) => Kinds(&[K::FuncDecl]),
        (K::FuncDecl, E::Type) | (K::Param, E::Type) | (K::LocalVarDecl, E::Type) => {
            Kinds(TYPE_NODE)
        }
        (K::FuncDecl, E::Name) => Token(TokenClass::Func),
        (K::FuncDecl, E::Parameters) => Kinds(&[K::Param]),
        (K::FuncDecl, E::Body) => Kinds(&[K::BlockStmt]),
        (K::Param, E::Name) | (K::VarDecl, E::Name) | (K::VarRef, E::Name) => {
            Token(TokenClass::Var)
        }
        (K::BlockStmt, E::Statements) => Kinds(STMT),
        (K::LocalVarDecl, E::Declarators) => Kinds(&[K::VarDecl]),
        (K::VarDecl, E::Initializer) => Kinds(EXPR),
        (K::IfStmt, E::Condition) | (K::WhileStmt, E::Condition) => Kinds(EXPR),
        (K::IfStmt, E::Then) | (K::IfStmt, E::Else) | (K::WhileStmt, E::Body) => Kinds(STMT),
        (K::ReturnStmt, E::Value) => Kinds(EXPR),
        (K::ExprStmt, E::Value) => Kinds(&[K::Assignment, K::FuncInvoc]),
        (K::Assignment, E::Left) => Kinds(&[K::VarRef, K::MemberRef]),
        (K::Assignment, E::Right) => Kinds(EXPR),
        (K::BinaryOp, E::Left) | (K::BinaryOp, E::Right) => Kinds(EXPR),
        (K::BinaryOp, E::Operator) => Token(TokenClass::Operator),
        (K::Literal, E::Value) => Token(TokenClass::Literal),
        (K::MemberRef, E::Qualifier) | (K::FuncInvoc, E::Qualifier) => Kinds(EXPR),
        (K::MemberRef, E::Member) => Token(TokenClass::Var),
        (K::FuncInvoc, E::Member) => Token(TokenClass::Func),
        (K::FuncInvoc, E::Args) => Kinds(EXPR),
        (K::MemberRef, E::Selectors) | (K::FuncInvoc, E::Selectors) => Kinds(ACCESS),
        (K::RefType, E::Name) => Token(TokenClass::Type),
        (K::BasicType, E::Name) => Token(TokenClass::BasicType),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip_through_from_str() {
        for k in NodeKind::ALL {
            assert_eq!(k.as_str().parse::<NodeKind>().unwrap(), *k);
        }
        for e in EdgeLabel::ALL {
            assert_eq!(e.as_str().parse::<EdgeLabel>().unwrap(), *e);
        }
        assert!("extends".parse::<EdgeLabel>().is_err());
        assert!("ClassCreator".parse::<NodeKind>().is_err());
    }

    #[test]
    fn token_classes() {
        assert_eq!(classify_token("VAR3"), TokenClass::Var);
        assert_eq!(classify_token("VAR-UNK"), TokenClass::Var);
        assert_eq!(classify_token("FUNC13"), TokenClass::Func);
        assert_eq!(classify_token("TYPE-UNK"), TokenClass::Type);
        assert_eq!(classify_token("LIT2"), TokenClass::Literal);
        assert_eq!(classify_token("VAR0"), TokenClass::Ident);
        assert_eq!(classify_token("VARx"), TokenClass::Ident);
        assert_eq!(classify_token("42"), TokenClass::Literal);
        assert_eq!(classify_token("\"hi\""), TokenClass::Literal);
        assert_eq!(classify_token("null"), TokenClass::Literal);
        assert_eq!(classify_token("<="), TokenClass::Operator);
        assert_eq!(classify_token("string"), TokenClass::BasicType);
        assert_eq!(classify_token("rhsContext"), TokenClass::Ident);
        assert_eq!(placeholder_index("FUNC13"), Some((TokenClass::Func, 13)));
        assert_eq!(placeholder_index("VAR-UNK"), None);
        assert!(is_unk("TYPE-UNK") && !is_unk("TYPE2"));
    }

    #[test]
    fn every_schema_edge_has_a_slot() {
        for k in NodeKind::ALL {
            let ranks: Vec<_> = EdgeLabel::ALL.iter().map(|e| k.child_rank(*e)).collect();
            let mut sorted = ranks.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), ranks.len(), "ranks of {k} must be distinct");
        }
    }
}
