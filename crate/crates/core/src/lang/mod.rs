//! The mini-language: grammar, syntax trees, parsing, printing, typing and
//! evaluation.

pub mod ast;
pub mod grammar;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod typeck;
pub mod types;

pub use ast::{AstNode, LineSpan, NodeLabel, EOT_TEXT};
pub use grammar::{
    classify_token, is_unk, placeholder_index, slot_kind, EdgeLabel, NodeKind, SlotKind,
    TokenClass, BASIC_TYPES, OPERATORS,
};
pub use interp::{interpret, run, TestCase, TestOutcome, Value, DEFAULT_FUEL};
pub use parser::{parse_block, parse_expression, parse_program, parse_statements};
pub use printer::{print_ast, print_expr, print_statements};
pub use typeck::check_program;
pub use types::{extract_type_env, find_function, type_compatible, ClassInfo, FuncSig, Type, TypeEnv};
