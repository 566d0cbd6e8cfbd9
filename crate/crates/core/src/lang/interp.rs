//! Big-step interpreter used to run test cases against candidate programs.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::AstNode;
use super::grammar::{EdgeLabel as E, NodeKind as K};
use super::lexer::{quote, unquote};

pub const DEFAULT_FUEL: u64 = 1_000_000;
const MAX_CALL_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
    Null,
}

impl Value {
    pub fn from_json(v: &serde_json::Value) -> Option<Value> {
        match v {
            serde_json::Value::Null => Some(Value::Null),
            serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
            serde_json::Value::Number(n) => n.as_i64().map(Value::Int),
            serde_json::Value::String(s) => Some(Value::Str(s.clone())),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Int(i) => (*i).into(),
            Value::Bool(b) => (*b).into(),
            Value::Str(s) => s.clone().into(),
            Value::Null => serde_json::Value::Null,
        }
    }

    fn from_literal(text: &str) -> Value {
        match text {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            "null" => Value::Null,
            t if t.starts_with('"') => Value::Str(unquote(t)),
            t => Value::Int(t.parse().unwrap_or(0)),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => f.write_str(&quote(s)),
            Value::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub entry: String,
    pub args: Vec<serde_json::Value>,
    pub expect: serde_json::Value,
    pub originally_passing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TestOutcome {
    Pass,
    Fail { actual: String },
    RuntimeError { message: String },
    Timeout,
}

impl TestOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, TestOutcome::Pass)
    }
}

enum Halt {
    Error(String),
    OutOfFuel,
}

enum Flow {
    Next,
    Return(Value),
}

type Exec<T> = Result<T, Halt>;

/// Run one test case.
pub fn interpret(program: &AstNode, test: &TestCase, fuel: u64) -> TestOutcome {
    let expect = match Value::from_json(&test.expect) {
        Some(v) => v,
        None => {
            return TestOutcome::RuntimeError {
                message: format!("unsupported expected value {}", test.expect),
            }
        }
    };
    let mut args = Vec::with_capacity(test.args.len());
    for a in &test.args {
        match Value::from_json(a) {
            Some(v) => args.push(v),
            None => {
                return TestOutcome::RuntimeError {
                    message: format!("unsupported argument {a}"),
                }
            }
        }
    }
    match run(program, &test.entry, args, fuel) {
        Ok(v) if v == expect => TestOutcome::Pass,
        Ok(v) => TestOutcome::Fail {
            actual: v.to_string(),
        },
        Err(o) => o,
    }
}

/// Call function `entry`; a runtime error or fuel exhaustion comes back as
/// the corresponding outcome.
pub fn run(program: &AstNode, entry: &str, args: Vec<Value>, fuel: u64) -> Result<Value, TestOutcome> {
    let mut functions = HashMap::new();
    for decl in program.children_with(E::Types) {
        if decl.kind == K::FuncDecl {
            if let Some(name) = decl.child_text(E::Name) {
                functions.insert(name, decl);
            }
        }
    }
    let mut m = Machine {
        functions,
        fuel,
        depth: 0,
    };
    m.call(entry, args).map_err(|h| match h {
        Halt::Error(message) => TestOutcome::RuntimeError { message },
        Halt::OutOfFuel => TestOutcome::Timeout,
    })
}

struct Machine<'a> {
    functions: HashMap<&'a str, &'a AstNode>,
    fuel: u64,
    depth: usize,
}

fn fail<T>(message: impl Into<String>) -> Exec<T> {
    Err(Halt::Error(message.into()))
}

impl<'a> Machine<'a> {
    fn tick(&mut self) -> Exec<()> {
        if self.fuel == 0 {
            return Err(Halt::OutOfFuel);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> Exec<Value> {
        let f = match self.functions.get(name) {
            Some(f) => *f,
            None => return fail(format!("no function `{name}`")),
        };
        let params: Vec<&str> = f
            .children_with(E::Parameters)
            .map(|p| p.child_text(E::Name).unwrap_or_default())
            .collect();
        if params.len() != args.len() {
            return fail(format!(
                "`{name}` takes {} arguments, given {}",
                params.len(),
                args.len()
            ));
        }
        if self.depth >= MAX_CALL_DEPTH {
            return fail("call depth exceeded");
        }
        self.depth += 1;
        let mut frame = Frame {
            scopes: vec![params.into_iter().zip(args).collect()],
        };
        let body = f.child(E::Body);
        let result = match body {
            Some(b) => self.stmt(b, &mut frame),
            None => fail("function without body"),
        };
        self.depth -= 1;
        match result? {
            Flow::Return(v) => Ok(v),
            Flow::Next => fail(format!("`{name}` ended without returning")),
        }
    }

    fn stmt(&mut self, s: &'a AstNode, frame: &mut Frame<'a>) -> Exec<Flow> {
        self.tick()?;
        match s.kind {
            K::BlockStmt => {
                frame.scopes.push(HashMap::new());
                let mut flow = Flow::Next;
                for c in s.children_with(E::Statements) {
                    match self.stmt(c, frame) {
                        Ok(Flow::Next) => {}
                        other => {
                            flow = match other {
                                Ok(f) => f,
                                Err(e) => {
                                    frame.scopes.pop();
                                    return Err(e);
                                }
                            };
                            break;
                        }
                    }
                }
                frame.scopes.pop();
                Ok(flow)
            }
            K::LocalVarDecl => {
                for v in s.children_with(E::Declarators) {
                    let value = match v.child(E::Initializer) {
                        Some(init) => self.expr(init, frame)?,
                        None => default_value(s),
                    };
                    let name = v.child_text(E::Name).unwrap_or_default();
                    frame.scopes.last_mut().unwrap().insert(name, value);
                }
                Ok(Flow::Next)
            }
            K::IfStmt => {
                let c = self.cond(s, frame)?;
                let branch = if c { s.child(E::Then) } else { s.child(E::Else) };
                match branch {
                    Some(b) => self.scoped(b, frame),
                    None => Ok(Flow::Next),
                }
            }
            K::WhileStmt => {
                while self.cond(s, frame)? {
                    self.tick()?;
                    if let Some(body) = s.child(E::Body) {
                        if let Flow::Return(v) = self.scoped(body, frame)? {
                            return Ok(Flow::Return(v));
                        }
                    }
                }
                Ok(Flow::Next)
            }
            K::ReturnStmt => match s.child(E::Value) {
                Some(v) => Ok(Flow::Return(self.expr(v, frame)?)),
                None => fail("return without value"),
            },
            K::ExprStmt => {
                let v = match s.child(E::Value) {
                    Some(v) => v,
                    None => return fail("empty expression statement"),
                };
                if v.kind == K::Assignment {
                    let rhs = match v.child(E::Right) {
                        Some(r) => self.expr(r, frame)?,
                        None => return fail("assignment without right side"),
                    };
                    match v.child(E::Left) {
                        Some(l) if l.kind == K::VarRef => {
                            let name = l.child_text(E::Name).unwrap_or_default();
                            frame.assign(name, rhs)?;
                        }
                        Some(l) => {
                            // Objects are never allocated, so any field store
                            // dereferences a null receiver.
                            self.expr_receiver(l, frame)?;
                            return fail("null dereference");
                        }
                        None => return fail("assignment without target"),
                    }
                } else {
                    self.expr(v, frame)?;
                }
                Ok(Flow::Next)
            }
            other => fail(format!("cannot execute {other}")),
        }
    }

    fn scoped(&mut self, s: &'a AstNode, frame: &mut Frame<'a>) -> Exec<Flow> {
        frame.scopes.push(HashMap::new());
        let r = self.stmt(s, frame);
        frame.scopes.pop();
        r
    }

    fn cond(&mut self, s: &'a AstNode, frame: &mut Frame<'a>) -> Exec<bool> {
        match s.child(E::Condition) {
            Some(c) => match self.expr(c, frame)? {
                Value::Bool(b) => Ok(b),
                other => fail(format!("condition evaluated to {other}")),
            },
            None => fail("missing condition"),
        }
    }

    fn expr_receiver(&mut self, access: &'a AstNode, frame: &mut Frame<'a>) -> Exec<()> {
        if let Some(q) = access.child(E::Qualifier) {
            self.expr(q, frame)?;
        }
        Ok(())
    }

    fn expr(&mut self, e: &'a AstNode, frame: &mut Frame<'a>) -> Exec<Value> {
        match e.kind {
            K::Literal => Ok(Value::from_literal(
                e.child_text(E::Value).unwrap_or_default(),
            )),
            K::VarRef => frame.get(e.child_text(E::Name).unwrap_or_default()),
            K::BinaryOp => {
                let op = e.child_text(E::Operator).unwrap_or_default();
                let (l, r) = match (e.child(E::Left), e.child(E::Right)) {
                    (Some(l), Some(r)) => (l, r),
                    _ => return fail("incomplete binary operation"),
                };
                let lv = self.expr(l, frame)?;
                match (op, &lv) {
                    ("&&", Value::Bool(false)) => return Ok(Value::Bool(false)),
                    ("||", Value::Bool(true)) => return Ok(Value::Bool(true)),
                    _ => {}
                }
                let rv = self.expr(r, frame)?;
                binary(op, lv, rv)
            }
            K::FuncInvoc if e.child(E::Qualifier).is_none() => {
                let mut args = Vec::new();
                for a in e.children_with(E::Args) {
                    args.push(self.expr(a, frame)?);
                }
                let v = self.call(e.child_text(E::Member).unwrap_or_default(), args)?;
                if e.count(E::Selectors) > 0 {
                    return fail(format!("null dereference on {v}"));
                }
                Ok(v)
            }
            K::FuncInvoc | K::MemberRef => {
                let receiver = match e.child(E::Qualifier) {
                    Some(q) => self.expr(q, frame)?,
                    None => Value::Null,
                };
                fail(format!("null dereference on {receiver}"))
            }
            other => fail(format!("cannot evaluate {other}")),
        }
    }
}

fn default_value(decl: &AstNode) -> Value {
    match decl.child(E::Type).and_then(|t| t.child_text(E::Name)) {
        Some("int") => Value::Int(0),
        Some("bool") => Value::Bool(false),
        Some("string") => Value::Str(String::new()),
        _ => Value::Null,
    }
}

fn binary(op: &str, l: Value, r: Value) -> Exec<Value> {
    use Value::*;
    Ok(match (op, l, r) {
        ("&&", Bool(a), Bool(b)) => Bool(a && b),
        ("||", Bool(a), Bool(b)) => Bool(a || b),
        ("==", a, b) => Bool(a == b),
        ("!=", a, b) => Bool(a != b),
        ("<", Int(a), Int(b)) => Bool(a < b),
        ("<=", Int(a), Int(b)) => Bool(a <= b),
        (">", Int(a), Int(b)) => Bool(a > b),
        (">=", Int(a), Int(b)) => Bool(a >= b),
        ("+", Int(a), Int(b)) => Int(a.wrapping_add(b)),
        ("+", Str(a), b) => Str(a + &plain(&b)),
        ("+", a, Str(b)) => Str(plain(&a) + &b),
        ("-", Int(a), Int(b)) => Int(a.wrapping_sub(b)),
        ("*", Int(a), Int(b)) => Int(a.wrapping_mul(b)),
        ("/" | "%", Int(_), Int(0)) => return fail("division by zero"),
        ("/", Int(a), Int(b)) => Int(a.wrapping_div(b)),
        ("%", Int(a), Int(b)) => Int(a.wrapping_rem(b)),
        (op, a, b) => return fail(format!("cannot apply `{op}` to {a} and {b}")),
    })
}

/// Concatenation form of a value (strings unquoted).
fn plain(v: &Value) -> String {
    match v {
        Value::Str(s) => s.clone(),
        other => other.to_string(),
    }
}

struct Frame<'a> {
    scopes: Vec<HashMap<&'a str, Value>>,
}

impl<'a> Frame<'a> {
    fn get(&self, name: &str) -> Exec<Value> {
        for s in self.scopes.iter().rev() {
            if let Some(v) = s.get(name) {
                return Ok(v.clone());
            }
        }
        fail(format!("unbound variable `{name}`"))
    }

    fn assign(&mut self, name: &str, value: Value) -> Exec<()> {
        for s in self.scopes.iter_mut().rev() {
            if let Some(slot) = s.get_mut(name) {
                *slot = value;
                return Ok(());
            }
        }
        fail(format!("unbound variable `{name}`"))
    }
}
