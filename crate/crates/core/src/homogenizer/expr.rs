//! Expression trees over plant parameters.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::PlantParams;
use crate::{Error, Result};

/// Denominators smaller than this make division return 1.
pub const PROTECTED_DIV_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// Length `l`.
    L,
    /// Load or pendulum mass `m`.
    M,
    /// Vehicle mass `M`.
    BigM,
    /// Gravity `g`.
    G,
    /// State component `x_{i+1}`.
    State(usize),
}

impl Symbol {
    fn name(self) -> String {
        match self {
            Symbol::L => "l".into(),
            Symbol::M => "m".into(),
            Symbol::BigM => "M".into(),
            Symbol::G => "g".into(),
            Symbol::State(i) => format!("x{}", i + 1),
        }
    }
}

/// Values bound to the symbols during evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings<'a> {
    pub l: Option<f64>,
    pub m: Option<f64>,
    pub big_m: Option<f64>,
    pub g: Option<f64>,
    pub state: Option<&'a [f64]>,
}

impl Bindings<'_> {
    pub fn from_params(p: &PlantParams) -> Self {
        match p {
            PlantParams::Pendulum(p) => Self { l: Some(p.l), m: Some(p.m), g: Some(p.g), ..Self::default() },
            PlantParams::DriverLoad(p) => {
                Self { l: Some(p.l), m: Some(p.m), big_m: Some(p.big_m), g: Some(p.g), ..Self::default() }
            }
        }
    }

    /// Each parameter symbol bound to its ratio against `nominal`; symbols
    /// absent from either plant stay unbound.
    pub fn relative(p: &PlantParams, nominal: &PlantParams) -> Self {
        let (a, b) = (Self::from_params(p), Self::from_params(nominal));
        let ratio = |x: Option<f64>, y: Option<f64>| Some(x? / y?);
        Self {
            l: ratio(a.l, b.l),
            m: ratio(a.m, b.m),
            big_m: ratio(a.big_m, b.big_m),
            g: ratio(a.g, b.g),
            state: None,
        }
    }

    fn get(&self, s: Symbol) -> f64 {
        let v = match s {
            Symbol::L => self.l,
            Symbol::M => self.m,
            Symbol::BigM => self.big_m,
            Symbol::G => self.g,
            Symbol::State(i) => self.state.and_then(|x| x.get(i).copied()),
        };
        v.unwrap_or(f64::NAN)
    }
}

/// Expression tree. Division is protected; `sqrt` and fractional powers of
/// negative numbers evaluate to NaN, which callers treat as invalid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Sym(Symbol),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// `base ^ (num / den)`
    Pow(Box<Expr>, i32, u32),
    Sqrt(Box<Expr>),
}

fn pow_rational(x: f64, num: i32, den: u32) -> f64 {
    if den == 1 {
        x.powi(num)
    } else if x < 0.0 {
        f64::NAN
    } else {
        x.powf(num as f64 / den as f64)
    }
}

impl Expr {
    pub fn c(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn sym(s: Symbol) -> Self {
        Expr::Sym(s)
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Self {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, num: i32, den: u32) -> Self {
        Expr::Pow(Box::new(a), num, den)
    }

    pub fn sqrt(a: Expr) -> Self {
        Expr::Sqrt(Box::new(a))
    }

    pub fn eval(&self, env: &Bindings) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Sym(s) => env.get(*s),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => {
                let d = b.eval(env);
                if d.abs() < PROTECTED_DIV_EPS {
                    1.0
                } else {
                    a.eval(env) / d
                }
            }
            Expr::Pow(a, n, d) => pow_rational(a.eval(env), *n, *d),
            Expr::Sqrt(a) => {
                let v = a.eval(env);
                if v < 0.0 {
                    f64::NAN
                } else {
                    v.sqrt()
                }
            }
        }
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Sym(_) => vec![],
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => vec![a, b],
            Expr::Pow(a, _, _) | Expr::Sqrt(a) => vec![a],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::Const(_) | Expr::Sym(_) => vec![],
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => vec![a, b],
            Expr::Pow(a, _, _) | Expr::Sqrt(a) => vec![a],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Depth of the tree; a single terminal has depth 0.
    pub fn depth(&self) -> usize {
        self.children().iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    pub fn uses_state(&self) -> bool {
        matches!(self, Expr::Sym(Symbol::State(_))) || self.children().iter().any(|c| c.uses_state())
    }

    /// Subtree at preorder position `index`.
    pub fn subtree(&self, index: usize) -> Option<&Expr> {
        if index == 0 {
            return Some(self);
        }
        let mut offset = 1;
        for c in self.children() {
            let n = c.node_count();
            if index < offset + n {
                return c.subtree(index - offset);
            }
            offset += n;
        }
        None
    }

    pub fn subtree_mut(&mut self, index: usize) -> Option<&mut Expr> {
        if index == 0 {
            return Some(self);
        }
        let mut offset = 1;
        for c in self.children_mut() {
            let n = c.node_count();
            if index < offset + n {
                return c.subtree_mut(index - offset);
            }
            offset += n;
        }
        None
    }

    /// Depth of the node at preorder position `index` within this tree.
    pub fn depth_of(&self, index: usize) -> Option<usize> {
        if index == 0 {
            return Some(0);
        }
        let mut offset = 1;
        for c in self.children() {
            let n = c.node_count();
            if index < offset + n {
                return c.depth_of(index - offset).map(|d| d + 1);
            }
            offset += n;
        }
        None
    }

    /// Infix text that [`Expr::parse`] reads back.
    pub fn to_infix(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::InvalidInput(format!("unexpected trailing input in `{text}`")));
        }
        Ok(e)
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Const(v) if *v < 0.0 => 0,
        _ => 3,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| {
            if prec(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Const(v) => write!(f, "{v:?}"),
            Expr::Sym(s) => write!(f, "{}", s.name()),
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, " * ")?;
                wrap(f, b, 3)
            }
            Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, " / ")?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, n, d) => write!(f, "pow({a}, {n}/{d})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || ((chars[i] == '-' || chars[i] == '+') && matches!(chars[i - 1], 'e' | 'E'))) {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse().map_err(|_| Error::InvalidInput(format!("bad number `{s}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/(),".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::InvalidInput(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.next() {
            Some(Token::Op(o)) if o == c => Ok(()),
            other => Err(Error::InvalidInput(format!("expected `{c}`, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' { Expr::add(lhs, rhs) } else { Expr::sub(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if c == '*' { Expr::mul(lhs, rhs) } else { Expr::div(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn integer(&mut self) -> Result<i64> {
        let neg = if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            true
        } else {
            false
        };
        match self.next() {
            Some(Token::Num(v)) if v.fract() == 0.0 => Ok(if neg { -(v as i64) } else { v as i64 }),
            other => Err(Error::InvalidInput(format!("expected an integer, found {other:?}"))),
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::Op('-')) => match self.factor()? {
                Expr::Const(v) => Ok(Expr::Const(-v)),
                e => Ok(Expr::sub(Expr::Const(0.0), e)),
            },
            Some(Token::Op('(')) => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "l" => Ok(Expr::Sym(Symbol::L)),
                "m" => Ok(Expr::Sym(Symbol::M)),
                "M" => Ok(Expr::Sym(Symbol::BigM)),
                "g" => Ok(Expr::Sym(Symbol::G)),
                "sqrt" => {
                    self.expect('(')?;
                    let e = self.expr()?;
                    self.expect(')')?;
                    Ok(Expr::sqrt(e))
                }
                "pow" => {
                    self.expect('(')?;
                    let e = self.expr()?;
                    self.expect(',')?;
                    let n = self.integer()?;
                    self.expect('/')?;
                    let d = self.integer()?;
                    self.expect(')')?;
                    if d <= 0 || n.abs() > i32::MAX as i64 || d > u32::MAX as i64 {
                        return Err(Error::InvalidInput("pow exponent must be n/d with d > 0".into()));
                    }
                    Ok(Expr::pow(e, n as i32, d as u32))
                }
                s if s.starts_with('x') => {
                    let i: usize = s[1..].parse().map_err(|_| Error::InvalidInput(format!("unknown symbol `{s}`")))?;
                    if i == 0 {
                        return Err(Error::InvalidInput("state symbols start at x1".into()));
                    }
                    Ok(Expr::Sym(Symbol::State(i - 1)))
                }
                s => Err(Error::InvalidInput(format!("unknown symbol `{s}`"))),
            },
            other => Err(Error::InvalidInput(format!("unexpected token {other:?}"))),
        }
    }
}

/// Constant folding and identity removal (`x*1`, `x+0`, `x/x`, ...).
pub fn simplify(e: &Expr) -> Expr {
    use Expr::*;
    let s = match e {
        Const(_) | Sym(_) => return e.clone(),
        Add(a, b) => match (simplify(a), simplify(b)) {
            (Const(x), y) if x == 0.0 => y,
            (x, Const(y)) if y == 0.0 => x,
            (x, y) => Expr::add(x, y),
        },
        Sub(a, b) => match (simplify(a), simplify(b)) {
            (x, Const(y)) if y == 0.0 => x,
            (x, y) if x == y && !x.uses_state() => Const(0.0),
            (x, y) => Expr::sub(x, y),
        },
        Mul(a, b) => match (simplify(a), simplify(b)) {
            (Const(x), y) if x == 1.0 => y,
            (x, Const(y)) if y == 1.0 => x,
            (x, y) => Expr::mul(x, y),
        },
        Div(a, b) => match (simplify(a), simplify(b)) {
            (x, Const(y)) if y == 1.0 => x,
            // protected division also yields 1 when both sides vanish
            (x, y) if x == y => Const(1.0),
            (x, y) => Expr::div(x, y),
        },
        Pow(a, n, d) => match (simplify(a), *n, *d) {
            (x, 1, 1) => x,
            (x, n, d) => Expr::pow(x, n, d),
        },
        Sqrt(a) => Expr::sqrt(simplify(a)),
    };
    let constant = s.children().iter().all(|c| matches!(c, Const(_)));
    if constant {
        let v = s.eval(&Bindings::default());
        if v.is_finite() {
            return Const(v);
        }
    }
    s
}

/// Building blocks available to random tree generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSet {
    pub symbols: Vec<Symbol>,
    pub constants: Vec<f64>,
    /// Exponents `(num, den)` for the power node.
    pub exponents: Vec<(i32, u32)>,
}

impl PrimitiveSet {
    pub fn pendulum() -> Self {
        Self {
            symbols: vec![Symbol::L, Symbol::M, Symbol::G],
            constants: vec![0.5, 1.0, 2.0, 3.0],
            exponents: vec![(1, 2), (-1, 2), (2, 1), (-1, 1), (3, 2)],
        }
    }

    pub fn driver_load() -> Self {
        Self { symbols: vec![Symbol::L, Symbol::M, Symbol::BigM, Symbol::G], ..Self::pendulum() }
    }

    pub fn terminal<R: Rng>(&self, rng: &mut R) -> Expr {
        let n = self.symbols.len() + self.constants.len();
        let k = rng.random_range(0..n);
        if k < self.symbols.len() {
            Expr::Sym(self.symbols[k])
        } else {
            Expr::Const(self.constants[k - self.symbols.len()])
        }
    }

    fn operator<R: Rng>(&self, rng: &mut R, child: impl Fn(&mut R) -> Expr) -> Expr {
        match rng.random_range(0..6) {
            0 => Expr::add(child(rng), child(rng)),
            1 => Expr::sub(child(rng), child(rng)),
            2 => Expr::mul(child(rng), child(rng)),
            3 => Expr::div(child(rng), child(rng)),
            4 => {
                let (n, d) = self.exponents[rng.random_range(0..self.exponents.len())];
                Expr::pow(child(rng), n, d)
            }
            _ => Expr::sqrt(child(rng)),
        }
    }

    /// Random tree of depth at most `depth`; `full` forces operators down to
    /// the depth limit.
    pub fn random_tree<R: Rng>(&self, rng: &mut R, depth: usize, full: bool) -> Expr {
        if depth == 0 || (!full && rng.random_bool(0.3)) {
            return self.terminal(rng);
        }
        self.operator(rng, |r| self.random_tree(r, depth - 1, full))
    }

    /// Replaces the node at `index` with a random node of the same arity.
    pub fn point_mutate<R: Rng>(&self, e: &mut Expr, index: usize, rng: &mut R) {
        let Some(node) = e.subtree_mut(index) else { return };
        let replaced = match std::mem::replace(node, Expr::Const(0.0)) {
            Expr::Const(_) | Expr::Sym(_) => self.terminal(rng),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => match rng.random_range(0..4) {
                0 => Expr::Add(a, b),
                1 => Expr::Sub(a, b),
                2 => Expr::Mul(a, b),
                _ => Expr::Div(a, b),
            },
            Expr::Pow(a, _, _) | Expr::Sqrt(a) => {
                let k = rng.random_range(0..=self.exponents.len());
                if k == self.exponents.len() {
                    Expr::Sqrt(a)
                } else {
                    Expr::Pow(a, self.exponents[k].0, self.exponents[k].1)
                }
            }
        };
        *node = replaced;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn l() -> Expr {
        Expr::sym(Symbol::L)
    }

    fn g() -> Expr {
        Expr::sym(Symbol::G)
    }

    fn env(lv: f64, mv: f64, gv: f64) -> Bindings<'static> {
        Bindings { l: Some(lv), m: Some(mv), g: Some(gv), ..Default::default() }
    }

    #[test]
    fn simplify_examples() {
        assert_eq!(simplify(&Expr::mul(l(), Expr::c(1.0))), l());
        let s = Expr::sqrt(Expr::div(l(), g()));
        assert_eq!(simplify(&s), s);
        let e = Expr::mul(Expr::div(g(), g()), Expr::sqrt(l()));
        assert_eq!(simplify(&e), Expr::sqrt(l()));
        assert_eq!(simplify(&Expr::add(Expr::c(2.0), Expr::c(3.0))), Expr::c(5.0));
    }

    #[test]
    fn simplify_preserves_semantics() {
        let ps = PrimitiveSet::pendulum();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        for _ in 0..300 {
            let e = ps.random_tree(&mut rng, 5, false);
            let s = simplify(&e);
            assert!(s.node_count() <= e.node_count());
            for _ in 0..100 {
                let b = env(rng.random_range(0.1..50.0), rng.random_range(0.1..10.0), rng.random_range(1.0..20.0));
                let (a, c) = (e.eval(&b), s.eval(&b));
                if a.is_finite() {
                    assert!((a - c).abs() <= 1e-9 * a.abs().max(1.0), "{e} vs {s}: {a} {c}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 10_000);
    }

    #[test]
    fn protected_operators() {
        let b = env(2.0, 1.0, 9.81);
        assert_eq!(Expr::div(l(), Expr::c(0.0)).eval(&b), 1.0);
        assert!(Expr::sqrt(Expr::c(-1.0)).eval(&b).is_nan());
        assert!(Expr::pow(Expr::c(-2.0), 1, 2).eval(&b).is_nan());
        assert_eq!(Expr::pow(Expr::c(-2.0), 3, 1).eval(&b), -8.0);
        assert!(Expr::sym(Symbol::BigM).eval(&b).is_nan());
    }

    #[test]
    fn infix_round_trip() {
        let ps = PrimitiveSet::driver_load();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let e = ps.random_tree(&mut rng, 6, false);
            let back = Expr::parse(&e.to_infix()).unwrap();
            assert_eq!(back, e, "{e}");
        }
        assert_eq!(Expr::parse("m * l / g").unwrap(), Expr::div(Expr::mul(Expr::sym(Symbol::M), l()), g()));
        assert_eq!(Expr::parse("pow(l, -1/2)").unwrap(), Expr::pow(l(), -1, 2));
        assert!(Expr::parse("l +").is_err());
        assert!(Expr::parse("q").is_err());
    }

    #[test]
    fn subtree_indexing() {
        let e = Expr::mul(Expr::add(l(), g()), Expr::sqrt(l()));
        assert_eq!(e.node_count(), 6);
        assert_eq!(e.depth(), 2);
        assert_eq!(e.subtree(2), Some(&l()));
        assert_eq!(e.subtree(4), Some(&Expr::sqrt(l())));
        assert_eq!(e.depth_of(5), Some(2));
        assert!(e.subtree(6).is_none());
    }

    #[test]
    fn random_trees_respect_depth() {
        let ps = PrimitiveSet::pendulum();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 0..6 {
            for _ in 0..50 {
                assert!(ps.random_tree(&mut rng, d, false).depth() <= d);
                assert_eq!(ps.random_tree(&mut rng, d, true).depth(), d);
            }
        }
    }
}
