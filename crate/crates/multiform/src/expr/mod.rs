//! Symbolic scalar expressions over named real variables.
//!
//! This is the calculus bedrock for the rest of the crate: Hamiltonians are
//! parsed into [`Expression`] trees, and every gradient consumed by the flow
//! integrators and Newton solvers is produced by exact symbolic
//! differentiation of those trees. No dual numbers and no finite differencing
//! on the hot path; finite differences appear only in verification code that
//! cross-checks the symbolic results.
//!
//! The concrete grammar lives in `docs/expr-grammar.md`. Precedence, tightest
//! first: `^`, unary `-`, `*` `/`, binary `+` `-`. A power takes a constant
//! exponent (`q1^2` parses, `q1^p1` is rejected). Built-in functions: `exp`,
//! `log`, `sin`, `cos`, `sqrt`.
//!
//! Differentiation applies textbook rules plus constant folding. Nothing else
//! is simplified, so printed derivatives stay close to what a hand
//! calculation produces.

mod parse;

pub use parse::ParseError;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Function {
    pub fn name(self) -> &'static str {
        match self {
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp" => Some(Function::Exp),
            "log" => Some(Function::Log),
            "sin" => Some(Function::Sin),
            "cos" => Some(Function::Cos),
            "sqrt" => Some(Function::Sqrt),
            _ => None,
        }
    }

    /// Raw IEEE application, no domain checks.
    fn apply(self, x: f64) -> f64 {
        match self {
            Function::Exp => x.exp(),
            Function::Log => x.ln(),
            Function::Sin => x.sin(),
            Function::Cos => x.cos(),
            Function::Sqrt => x.sqrt(),
        }
    }
}

/// An expression tree. Structural equality (`==`) is what the parse/print
/// round-trip guarantee speaks about.
///
/// `Pow` stores its exponent as a plain number rather than a subtree; the
/// parser enforces this by constant-folding whatever follows `^`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Constant(f64),
    Variable(String),
    Neg(Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, f64),
    Call(Function, Box<Expression>),
}

/// Errors raised while evaluating an expression.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{name}`")]
    UnboundVariable { name: String },
    /// `expr` is the printed form of the offending subexpression.
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
}

/// A map from variable names to values.
#[derive(Debug, Clone, Default)]
pub struct Binding(HashMap<String, f64>);

impl Binding {
    pub fn new() -> Self {
        Binding(HashMap::new())
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Binding {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Binding(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Integer exponents up to this magnitude evaluate through `powi`, which is
/// faster and slightly more accurate than `powf`. The compiled evaluator uses
/// the same rule so both paths produce identical bits.
const POWI_LIMIT: f64 = 64.0;

fn apply_pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() <= POWI_LIMIT {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

impl Expression {
    /// Parses source text into the unique tree the grammar assigns to it.
    /// No folding or rewriting happens here; `2*3` stays a product.
    pub fn parse(input: &str) -> Result<Expression, ParseError> {
        parse::parse(input)
    }

    pub fn constant(value: f64) -> Expression {
        Expression::Constant(value)
    }

    pub fn variable(name: impl Into<String>) -> Expression {
        Expression::Variable(name.into())
    }
}

// Folding combinators. These are used by `differentiate` and by code that
// assembles expressions programmatically; they fold constants (and the
// identities 0 and 1) so derivative trees stay readable, but perform no
// other simplification. They stay associated functions rather than operator
// impls so call sites read as tree construction, not arithmetic.
#[allow(clippy::should_implement_trait)]
impl Expression {
    pub fn add(a: Expression, b: Expression) -> Expression {
        use Expression::*;
        match (a, b) {
            (Constant(x), Constant(y)) => Constant(x + y),
            (Constant(0.0), b) => b,
            (a, Constant(0.0)) => a,
            (a, b) => Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expression, b: Expression) -> Expression {
        use Expression::*;
        match (a, b) {
            (Constant(x), Constant(y)) => Constant(x - y),
            (a, Constant(0.0)) => a,
            (Constant(0.0), b) => Expression::neg(b),
            (a, b) => Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expression, b: Expression) -> Expression {
        use Expression::*;
        match (a, b) {
            (Constant(x), Constant(y)) => Constant(x * y),
            (Constant(0.0), _) | (_, Constant(0.0)) => Constant(0.0),
            (Constant(1.0), b) => b,
            (a, Constant(1.0)) => a,
            (Constant(-1.0), b) => Expression::neg(b),
            (a, Constant(-1.0)) => Expression::neg(a),
            // keep constants on the left so nested products fold
            (a, Constant(y)) => Expression::mul(Constant(y), a),
            (Constant(x), Mul(b, c)) => {
                if let Constant(y) = *b {
                    Expression::mul(Constant(x * y), *c)
                } else {
                    Mul(Box::new(Constant(x)), Box::new(Mul(b, c)))
                }
            }
            (a, b) => Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expression, b: Expression) -> Expression {
        use Expression::*;
        match (a, b) {
            (Constant(x), Constant(y)) if y != 0.0 => Constant(x / y),
            (Constant(0.0), _) => Constant(0.0),
            (a, Constant(1.0)) => a,
            (Mul(a1, a2), Constant(y)) if y != 0.0 => {
                if let Constant(x) = *a1 {
                    Expression::mul(Constant(x / y), *a2)
                } else {
                    Div(Box::new(Mul(a1, a2)), Box::new(Constant(y)))
                }
            }
            (a, b) => Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expression) -> Expression {
        use Expression::*;
        match a {
            Constant(x) => Constant(-x),
            Neg(inner) => *inner,
            a => Neg(Box::new(a)),
        }
    }
}

impl Expression {

    pub fn pow(base: Expression, exponent: f64) -> Expression {
        use Expression::*;
        if exponent == 0.0 {
            return Constant(1.0);
        }
        if exponent == 1.0 {
            return base;
        }
        if let Constant(b) = base {
            let v = apply_pow(b, exponent);
            if v.is_finite() {
                return Constant(v);
            }
            return Pow(Box::new(Constant(b)), exponent);
        }
        Pow(Box::new(base), exponent)
    }

    pub fn call(f: Function, arg: Expression) -> Expression {
        if let Expression::Constant(c) = arg {
            let v = f.apply(c);
            if v.is_finite() {
                return Expression::Constant(v);
            }
            // out-of-domain constant: keep the node so eval reports it
            return Expression::Call(f, Box::new(Expression::Constant(c)));
        }
        Expression::Call(f, Box::new(arg))
    }

    /// The set of variable names appearing in the tree.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match self {
            Expression::Constant(_) => {}
            Expression::Variable(name) => {
                out.insert(name.clone());
            }
            Expression::Neg(a) | Expression::Pow(a, _) | Expression::Call(_, a) => {
                a.collect_variables(out)
            }
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    /// Replaces each listed variable by a constant node. Used to bake model
    /// parameters into Hamiltonians at load time.
    pub fn substitute(&self, values: &HashMap<String, f64>) -> Expression {
        match self {
            Expression::Constant(_) => self.clone(),
            Expression::Variable(name) => match values.get(name) {
                Some(v) => Expression::Constant(*v),
                None => self.clone(),
            },
            Expression::Neg(a) => Expression::Neg(Box::new(a.substitute(values))),
            Expression::Add(a, b) => Expression::Add(
                Box::new(a.substitute(values)),
                Box::new(b.substitute(values)),
            ),
            Expression::Sub(a, b) => Expression::Sub(
                Box::new(a.substitute(values)),
                Box::new(b.substitute(values)),
            ),
            Expression::Mul(a, b) => Expression::Mul(
                Box::new(a.substitute(values)),
                Box::new(b.substitute(values)),
            ),
            Expression::Div(a, b) => Expression::Div(
                Box::new(a.substitute(values)),
                Box::new(b.substitute(values)),
            ),
            Expression::Pow(a, e) => Expression::Pow(Box::new(a.substitute(values)), *e),
            Expression::Call(f, a) => Expression::Call(*f, Box::new(a.substitute(values))),
        }
    }

    /// Evaluates at the given binding. Domain errors (`log` of a non-positive
    /// value, division by exactly zero, `sqrt` of a negative value, fractional
    /// powers of negative bases) report the printed offending subexpression.
    /// Overflow to infinity is not an error here; integrators watch for
    /// non-finite state themselves.
    pub fn eval(&self, binding: &Binding) -> Result<f64, EvalError> {
        match self {
            Expression::Constant(c) => Ok(*c),
            Expression::Variable(name) => {
                binding
                    .get(name)
                    .ok_or_else(|| EvalError::UnboundVariable { name: name.clone() })
            }
            Expression::Neg(a) => Ok(-a.eval(binding)?),
            Expression::Add(a, b) => Ok(a.eval(binding)? + b.eval(binding)?),
            Expression::Sub(a, b) => Ok(a.eval(binding)? - b.eval(binding)?),
            Expression::Mul(a, b) => Ok(a.eval(binding)? * b.eval(binding)?),
            Expression::Div(a, b) => {
                let num = a.eval(binding)?;
                let den = b.eval(binding)?;
                if den == 0.0 {
                    return Err(EvalError::Domain {
                        expr: self.to_string(),
                        reason: "division by zero".into(),
                    });
                }
                Ok(num / den)
            }
            Expression::Pow(base, e) => {
                let b = base.eval(binding)?;
                if b < 0.0 && e.fract() != 0.0 {
                    return Err(EvalError::Domain {
                        expr: self.to_string(),
                        reason: format!("negative base {b} under fractional exponent {e}"),
                    });
                }
                if b == 0.0 && *e < 0.0 {
                    return Err(EvalError::Domain {
                        expr: self.to_string(),
                        reason: "zero base under negative exponent".into(),
                    });
                }
                Ok(apply_pow(b, *e))
            }
            Expression::Call(f, arg) => {
                let x = arg.eval(binding)?;
                match f {
                    Function::Log if x <= 0.0 => Err(EvalError::Domain {
                        expr: self.to_string(),
                        reason: format!("log of non-positive value {x}"),
                    }),
                    Function::Sqrt if x < 0.0 => Err(EvalError::Domain {
                        expr: self.to_string(),
                        reason: format!("sqrt of negative value {x}"),
                    }),
                    _ => Ok(f.apply(x)),
                }
            }
        }
    }

    /// Exact partial derivative with respect to `var`. Total on all trees;
    /// the result is folded but otherwise unsimplified.
    pub fn differentiate(&self, var: &str) -> Expression {
        use Expression as E;
        match self {
            E::Constant(_) => E::Constant(0.0),
            E::Variable(name) => E::Constant(if name == var { 1.0 } else { 0.0 }),
            E::Neg(a) => E::neg(a.differentiate(var)),
            E::Add(a, b) => E::add(a.differentiate(var), b.differentiate(var)),
            E::Sub(a, b) => E::sub(a.differentiate(var), b.differentiate(var)),
            E::Mul(a, b) => E::add(
                E::mul(a.differentiate(var), (**b).clone()),
                E::mul((**a).clone(), b.differentiate(var)),
            ),
            E::Div(a, b) => E::sub(
                E::div(a.differentiate(var), (**b).clone()),
                E::div(
                    E::mul((**a).clone(), b.differentiate(var)),
                    E::mul((**b).clone(), (**b).clone()),
                ),
            ),
            E::Pow(base, e) => E::mul(
                E::mul(E::Constant(*e), E::pow((**base).clone(), e - 1.0)),
                base.differentiate(var),
            ),
            E::Call(f, a) => {
                let da = a.differentiate(var);
                let inner = (**a).clone();
                match f {
                    Function::Exp => E::mul(E::call(Function::Exp, inner), da),
                    Function::Log => E::div(da, inner),
                    Function::Sin => E::mul(E::call(Function::Cos, inner), da),
                    Function::Cos => E::neg(E::mul(E::call(Function::Sin, inner), da)),
                    Function::Sqrt => E::div(
                        da,
                        E::mul(E::Constant(2.0), E::call(Function::Sqrt, inner)),
                    ),
                }
            }
        }
    }

    /// Resolves variable names to slots in a value slice, for evaluation in
    /// inner loops without any hashing. Fails on variables absent from `vars`.
    pub fn compile(&self, vars: &[String]) -> Result<CompiledExpr, EvalError> {
        Ok(CompiledExpr {
            node: compile_node(self, vars)?,
        })
    }
}

// Precedence levels used by the printer; must mirror the grammar.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expression) -> u8 {
    match e {
        // a negative constant prints with a leading minus, so for bracketing
        // purposes it behaves like a unary negation
        Expression::Constant(c) if *c < 0.0 => PREC_NEG,
        Expression::Constant(_) | Expression::Variable(_) | Expression::Call(_, _) => PREC_ATOM,
        Expression::Neg(_) => PREC_NEG,
        Expression::Add(_, _) | Expression::Sub(_, _) => PREC_ADD,
        Expression::Mul(_, _) | Expression::Div(_, _) => PREC_MUL,
        Expression::Pow(_, _) => PREC_POW,
    }
}

fn write_operand(
    f: &mut fmt::Formatter<'_>,
    e: &Expression,
    parent: u8,
    strict: bool,
) -> fmt::Result {
    let needs_parens = if strict {
        precedence(e) <= parent
    } else {
        precedence(e) < parent
    };
    if needs_parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expression {
    /// Prints a form that reparses to a structurally equal tree. Binary `+`
    /// and `-` are spaced, `*` `/` `^` are not; parentheses are inserted only
    /// where the grammar requires them.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Constant(c) => write!(f, "{c}"),
            Expression::Variable(name) => write!(f, "{name}"),
            Expression::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, PREC_NEG, false)
            }
            Expression::Add(a, b) => {
                write_operand(f, a, PREC_ADD, false)?;
                write!(f, " + ")?;
                write_operand(f, b, PREC_ADD, true)
            }
            Expression::Sub(a, b) => {
                write_operand(f, a, PREC_ADD, false)?;
                write!(f, " - ")?;
                write_operand(f, b, PREC_ADD, true)
            }
            Expression::Mul(a, b) => {
                write_operand(f, a, PREC_MUL, false)?;
                write!(f, "*")?;
                write_operand(f, b, PREC_MUL, true)
            }
            Expression::Div(a, b) => {
                write_operand(f, a, PREC_MUL, false)?;
                write!(f, "/")?;
                write_operand(f, b, PREC_MUL, true)
            }
            Expression::Pow(base, e) => {
                write_operand(f, base, PREC_POW, true)?;
                write!(f, "^{e}")
            }
            Expression::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// An expression with variables resolved to indices into a value slice.
///
/// Evaluation uses raw IEEE arithmetic with no domain checks: out-of-domain
/// inputs produce NaN or infinity, which the callers (flow integrators)
/// detect as non-finite state. This keeps the per-step cost down where
/// expressions are evaluated millions of times.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    node: Node,
}

#[derive(Debug, Clone)]
enum Node {
    Constant(f64),
    Slot(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    PowI(Box<Node>, i32),
    PowF(Box<Node>, f64),
    Call(Function, Box<Node>),
}

fn compile_node(e: &Expression, vars: &[String]) -> Result<Node, EvalError> {
    Ok(match e {
        Expression::Constant(c) => Node::Constant(*c),
        Expression::Variable(name) => {
            let slot = vars.iter().position(|v| v == name).ok_or_else(|| {
                EvalError::UnboundVariable { name: name.clone() }
            })?;
            Node::Slot(slot)
        }
        Expression::Neg(a) => Node::Neg(Box::new(compile_node(a, vars)?)),
        Expression::Add(a, b) => Node::Add(
            Box::new(compile_node(a, vars)?),
            Box::new(compile_node(b, vars)?),
        ),
        Expression::Sub(a, b) => Node::Sub(
            Box::new(compile_node(a, vars)?),
            Box::new(compile_node(b, vars)?),
        ),
        Expression::Mul(a, b) => Node::Mul(
            Box::new(compile_node(a, vars)?),
            Box::new(compile_node(b, vars)?),
        ),
        Expression::Div(a, b) => Node::Div(
            Box::new(compile_node(a, vars)?),
            Box::new(compile_node(b, vars)?),
        ),
        Expression::Pow(base, e) => {
            let base = Box::new(compile_node(base, vars)?);
            if e.fract() == 0.0 && e.abs() <= POWI_LIMIT {
                Node::PowI(base, *e as i32)
            } else {
                Node::PowF(base, *e)
            }
        }
        Expression::Call(f, a) => Node::Call(*f, Box::new(compile_node(a, vars)?)),
    })
}

impl CompiledExpr {
    pub fn eval(&self, values: &[f64]) -> f64 {
        eval_node(&self.node, values)
    }
}

fn eval_node(node: &Node, values: &[f64]) -> f64 {
    match node {
        Node::Constant(c) => *c,
        Node::Slot(i) => values[*i],
        Node::Neg(a) => -eval_node(a, values),
        Node::Add(a, b) => eval_node(a, values) + eval_node(b, values),
        Node::Sub(a, b) => eval_node(a, values) - eval_node(b, values),
        Node::Mul(a, b) => eval_node(a, values) * eval_node(b, values),
        Node::Div(a, b) => eval_node(a, values) / eval_node(b, values),
        Node::PowI(a, e) => eval_node(a, values).powi(*e),
        Node::PowF(a, e) => eval_node(a, values).powf(*e),
        Node::Call(f, a) => f.apply(eval_node(a, values)),
    }
}
