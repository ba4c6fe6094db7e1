//! Immutable symbolic expression trees in a single variable `x`.
//!
//! [`Expr`] is the shared currency of the whole toolkit: generators build
//! them, guards inspect them, the tokenizer serializes them. Nodes are
//! reference-counted so subtree sharing is cheap and values can move
//! freely across threads.

use std::fmt;
use std::sync::Arc;

mod diff;
mod eval;
mod prefix;
mod profile;
pub(crate) mod poly;
mod simplify;

pub use diff::differentiate;
pub use eval::eval_numeric;
pub use prefix::{parse_prefix, parse_prefix_line, prefix_line, to_prefix, ParseError, ParseReason};
pub use profile::{profile, StructuralProfile};
pub use simplify::{simplify, SimplifyError};

/// Largest integer magnitude representable in a tree: 2^31.
///
/// Folding that would exceed this leaves the expression unfolded; the
/// token abstraction collapses anything with three or more digits anyway.
pub const MAX_INT_MAGNITUDE: i64 = 1 << 31;

/// Named unary functions admitted in expression trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Function {
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Tan,
    Asin,
    Atan,
    Sinh,
    Cosh,
    Tanh,
}

impl Function {
    pub const ALL: [Function; 12] = [
        Function::Exp,
        Function::Ln,
        Function::Sqrt,
        Function::Abs,
        Function::Sin,
        Function::Cos,
        Function::Tan,
        Function::Asin,
        Function::Atan,
        Function::Sinh,
        Function::Cosh,
        Function::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Exp => "exp",
            Function::Ln => "ln",
            Function::Sqrt => "sqrt",
            Function::Abs => "abs",
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Tan => "tan",
            Function::Asin => "asin",
            Function::Atan => "atan",
            Function::Sinh => "sinh",
            Function::Cosh => "cosh",
            Function::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        Function::ALL.iter().copied().find(|f| f.name() == name)
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A symbolic expression over the single variable `x`.
///
/// `Add` and `Mul` are strictly binary; n-ary sums and products are kept
/// left-associated, which makes prefix round trips structural identities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    /// Integer literal, |value| <= 2^31.
    Integer(i64),
    /// The variable `x`.
    Var,
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Func(Function, Arc<Expr>),
}

impl Expr {
    /// Integer literal constructor.
    ///
    /// Panics if |value| exceeds [`MAX_INT_MAGNITUDE`]; trees can never
    /// hold larger constants.
    pub fn int(value: i64) -> Expr {
        assert!(
            value.abs() <= MAX_INT_MAGNITUDE,
            "integer literal {value} exceeds magnitude cap 2^31"
        );
        Expr::Integer(value)
    }

    pub fn var() -> Expr {
        Expr::Var
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Arc::new(e))
    }

    pub fn add(l: Expr, r: Expr) -> Expr {
        Expr::Add(Arc::new(l), Arc::new(r))
    }

    /// `l - r`, represented as `Add(l, Neg(r))`; the grammar has no
    /// dedicated subtraction node.
    pub fn sub(l: Expr, r: Expr) -> Expr {
        Expr::add(l, Expr::neg(r))
    }

    pub fn mul(l: Expr, r: Expr) -> Expr {
        Expr::Mul(Arc::new(l), Arc::new(r))
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        Expr::Pow(Arc::new(base), Arc::new(exponent))
    }

    pub fn div(num: Expr, den: Expr) -> Expr {
        Expr::Div(Arc::new(num), Arc::new(den))
    }

    pub fn func(f: Function, child: Expr) -> Expr {
        Expr::Func(f, Arc::new(child))
    }

    /// Left-associated sum of one or more terms.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Option<Expr> {
        terms.into_iter().reduce(Expr::add)
    }

    /// Node count.
    pub fn size(&self) -> usize {
        match self {
            Expr::Integer(_) | Expr::Var => 1,
            Expr::Neg(c) | Expr::Func(_, c) => 1 + c.size(),
            Expr::Add(l, r) | Expr::Mul(l, r) | Expr::Pow(l, r) | Expr::Div(l, r) => {
                1 + l.size() + r.size()
            }
        }
    }

    /// Tree depth; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Integer(_) | Expr::Var => 1,
            Expr::Neg(c) | Expr::Func(_, c) => 1 + c.depth(),
            Expr::Add(l, r) | Expr::Mul(l, r) | Expr::Pow(l, r) | Expr::Div(l, r) => {
                1 + l.depth().max(r.depth())
            }
        }
    }

    /// True when `x` occurs anywhere in the tree.
    pub fn contains_var(&self) -> bool {
        match self {
            Expr::Var => true,
            Expr::Integer(_) => false,
            Expr::Neg(c) | Expr::Func(_, c) => c.contains_var(),
            Expr::Add(l, r) | Expr::Mul(l, r) | Expr::Pow(l, r) | Expr::Div(l, r) => {
                l.contains_var() || r.contains_var()
            }
        }
    }

    /// The exact integer value of a constant literal, looking through `Neg`.
    pub fn as_int_const(&self) -> Option<i64> {
        match self {
            Expr::Integer(v) => Some(*v),
            Expr::Neg(c) => c.as_int_const().map(|v| -v),
            _ => None,
        }
    }

    /// Replace every occurrence of `x` with `replacement`.
    pub fn substitute(&self, replacement: &Expr) -> Expr {
        match self {
            Expr::Var => replacement.clone(),
            Expr::Integer(v) => Expr::Integer(*v),
            Expr::Neg(c) => Expr::neg(c.substitute(replacement)),
            Expr::Func(f, c) => Expr::func(*f, c.substitute(replacement)),
            Expr::Add(l, r) => Expr::add(l.substitute(replacement), r.substitute(replacement)),
            Expr::Mul(l, r) => Expr::mul(l.substitute(replacement), r.substitute(replacement)),
            Expr::Pow(l, r) => Expr::pow(l.substitute(replacement), r.substitute(replacement)),
            Expr::Div(l, r) => Expr::div(l.substitute(replacement), r.substitute(replacement)),
        }
    }

    /// Visit every node in pre-order.
    pub fn for_each_node(&self, visit: &mut impl FnMut(&Expr)) {
        visit(self);
        match self {
            Expr::Integer(_) | Expr::Var => {}
            Expr::Neg(c) | Expr::Func(_, c) => c.for_each_node(visit),
            Expr::Add(l, r) | Expr::Mul(l, r) | Expr::Pow(l, r) | Expr::Div(l, r) => {
                l.for_each_node(visit);
                r.for_each_node(visit);
            }
        }
    }
}

impl fmt::Display for Expr {
    /// Infix rendering for logs and diagnostics; the prefix form in
    /// [`to_prefix`] is the interchange format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Integer(v) => write!(f, "{v}"),
            Expr::Var => f.write_str("x"),
            Expr::Neg(c) => write!(f, "-({c})"),
            Expr::Add(l, r) => write!(f, "({l} + {r})"),
            Expr::Mul(l, r) => write!(f, "({l} * {r})"),
            Expr::Pow(l, r) => write!(f, "({l})^({r})"),
            Expr::Div(l, r) => write!(f, "({l} / {r})"),
            Expr::Func(func, c) => write!(f, "{func}({c})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_and_size() {
        let e = Expr::add(Expr::var(), Expr::mul(Expr::int(2), Expr::var()));
        assert_eq!(e.depth(), 3);
        assert_eq!(e.size(), 5);
    }

    #[test]
    #[should_panic(expected = "magnitude cap")]
    fn int_cap_enforced() {
        Expr::int((1 << 31) + 1);
    }

    #[test]
    fn substitution_replaces_all_occurrences() {
        let e = Expr::mul(Expr::var(), Expr::func(Function::Sin, Expr::var()));
        let g = Expr::pow(Expr::var(), Expr::int(2));
        let s = e.substitute(&g);
        assert_eq!(
            s,
            Expr::mul(g.clone(), Expr::func(Function::Sin, g.clone()))
        );
    }

    #[test]
    fn as_int_const_sees_through_neg() {
        assert_eq!(Expr::neg(Expr::int(7)).as_int_const(), Some(-7));
        assert_eq!(Expr::var().as_int_const(), None);
    }
}
