//! Formula representation, parsing, printing, normalization and closure.
//!
//! Formulas are kept in negation normal form: negation occurs only on
//! propositional and nominal literals.  Binders must be guarded (every bound
//! variable occurs under a modality); unguarded input is rejected, not
//! repaired.  The identity/non-identity abbreviations `'i == 'j` / `'i != 'j`
//! are stored as their definitions `@'i 'j` / `@'i ~'j` and only printed with
//! sugar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Negation-normal-form hybrid mu-calculus formula.
///
/// The `bool` on literals is the polarity: `true` for a positive literal.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Formula {
    Prop(String, bool),
    Nom(String, bool),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Dia(Box<Formula>),
    Boxm(Box<Formula>),
    At(String, Box<Formula>),
    Mu(String, Box<Formula>),
    Nu(String, Box<Formula>),
}

use Formula::*;

impl Formula {
    pub fn or(a: Formula, b: Formula) -> Formula {
        Or(Box::new(a), Box::new(b))
    }
    pub fn and(a: Formula, b: Formula) -> Formula {
        And(Box::new(a), Box::new(b))
    }
    pub fn dia(a: Formula) -> Formula {
        Dia(Box::new(a))
    }
    pub fn boxm(a: Formula) -> Formula {
        Boxm(Box::new(a))
    }
    pub fn at(i: impl Into<String>, a: Formula) -> Formula {
        At(i.into(), Box::new(a))
    }
    pub fn mu(x: impl Into<String>, a: Formula) -> Formula {
        Mu(x.into(), Box::new(a))
    }
    pub fn nu(x: impl Into<String>, a: Formula) -> Formula {
        Nu(x.into(), Box::new(a))
    }
    pub fn prop(p: impl Into<String>) -> Formula {
        Prop(p.into(), true)
    }
    pub fn nprop(p: impl Into<String>) -> Formula {
        Prop(p.into(), false)
    }
    pub fn nom(i: impl Into<String>) -> Formula {
        Nom(i.into(), true)
    }
    pub fn nnom(i: impl Into<String>) -> Formula {
        Nom(i.into(), false)
    }

    /// Is this a literal (propositional or nominal atom, either polarity)?
    pub fn is_literal(&self) -> bool {
        matches!(self, Prop(..) | Nom(..))
    }

    /// Number of syntax-tree nodes; the closure size is bounded by this.
    pub fn symbol_count(&self) -> usize {
        match self {
            Prop(..) | Nom(..) => 1,
            Or(a, b) | And(a, b) => 1 + a.symbol_count() + b.symbol_count(),
            Dia(a) | Boxm(a) | At(_, a) | Mu(_, a) | Nu(_, a) => 1 + a.symbol_count(),
        }
    }

    /// All nominals occurring anywhere in the formula.
    pub fn nominals(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| match f {
            Nom(i, _) => {
                out.insert(i.clone());
            }
            At(i, _) => {
                out.insert(i.clone());
            }
            _ => {}
        });
        out
    }

    /// All propositional variables with a free occurrence.
    pub fn free_vars(&self) -> BTreeSet<String> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match f {
                Prop(p, _) => {
                    if !bound.iter().any(|b| b == p) {
                        out.insert(p.clone());
                    }
                }
                Nom(..) => {}
                Or(a, b) | And(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                Dia(a) | Boxm(a) | At(_, a) => go(a, bound, out),
                Mu(x, a) | Nu(x, a) => {
                    bound.push(x.clone());
                    go(a, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// All variables bound by a `mu` or `nu` in the formula.
    pub fn bound_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            if let Mu(x, _) | Nu(x, _) = f {
                out.insert(x.clone());
            }
        });
        out
    }

    /// Does the variable occur at all (free, bound, or as a binder)?
    pub fn mentions_var(&self, x: &str) -> bool {
        let mut found = false;
        self.walk(&mut |f| match f {
            Prop(p, _) if p == x => found = true,
            Mu(y, _) | Nu(y, _) if y == x => found = true,
            _ => {}
        });
        found
    }

    fn walk(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Prop(..) | Nom(..) => {}
            Or(a, b) | And(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Dia(a) | Boxm(a) | At(_, a) | Mu(_, a) | Nu(_, a) => a.walk(f),
        }
    }

    /// Capture-free substitution of `repl` for free occurrences of the
    /// propositional variable `x`.  Callers arrange well-namedness so that
    /// capture cannot happen; debug builds assert it.
    fn subst(&self, x: &str, repl: &Formula) -> Formula {
        match self {
            Prop(p, true) if p == x => repl.clone(),
            Prop(p, false) if p == x => {
                // A bound variable never occurs under negation (NNF constraint
                // on binders), so this cannot be the substituted variable.
                Prop(p.clone(), false)
            }
            Prop(..) | Nom(..) => self.clone(),
            Or(a, b) => Formula::or(a.subst(x, repl), b.subst(x, repl)),
            And(a, b) => Formula::and(a.subst(x, repl), b.subst(x, repl)),
            Dia(a) => Formula::dia(a.subst(x, repl)),
            Boxm(a) => Formula::boxm(a.subst(x, repl)),
            At(i, a) => Formula::at(i.clone(), a.subst(x, repl)),
            Mu(y, a) => {
                if y == x {
                    self.clone()
                } else {
                    debug_assert!(!repl.free_vars().contains(y), "capture in subst");
                    Formula::mu(y.clone(), a.subst(x, repl))
                }
            }
            Nu(y, a) => {
                if y == x {
                    self.clone()
                } else {
                    debug_assert!(!repl.free_vars().contains(y), "capture in subst");
                    Formula::nu(y.clone(), a.subst(x, repl))
                }
            }
        }
    }

    /// Canonical printed form.  `to_string` via `Display` uses this.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

/// Dualize a formula: the NNF of its negation.
pub fn negate(f: &Formula) -> Formula {
    match f {
        Prop(p, pol) => Prop(p.clone(), !pol),
        Nom(i, pol) => Nom(i.clone(), !pol),
        Or(a, b) => Formula::and(negate(a), negate(b)),
        And(a, b) => Formula::or(negate(a), negate(b)),
        Dia(a) => Formula::boxm(negate(a)),
        Boxm(a) => Formula::dia(negate(a)),
        At(i, a) => Formula::at(i.clone(), negate(a)),
        // Bound variables stay positive: the body's occurrences of x are
        // positive on both sides of the duality.
        Mu(x, a) => Formula::nu(x.clone(), negate_keeping(a, x)),
        Nu(x, a) => Formula::mu(x.clone(), negate_keeping(a, x)),
    }
}

/// Negate `f` but leave occurrences of the bound variables in `keep` alone.
fn negate_keeping(f: &Formula, keep: &str) -> Formula {
    match f {
        Prop(p, pol) => {
            if p == keep {
                Prop(p.clone(), *pol)
            } else {
                Prop(p.clone(), !pol)
            }
        }
        Nom(i, pol) => Nom(i.clone(), !pol),
        Or(a, b) => Formula::and(negate_keeping(a, keep), negate_keeping(b, keep)),
        And(a, b) => Formula::or(negate_keeping(a, keep), negate_keeping(b, keep)),
        Dia(a) => Formula::boxm(negate_keeping(a, keep)),
        Boxm(a) => Formula::dia(negate_keeping(a, keep)),
        At(i, a) => Formula::at(i.clone(), negate_keeping(a, keep)),
        Mu(x, a) => {
            if x == keep {
                // Shadowed: the inner binder re-binds the name, negate as usual.
                negate(f)
            } else {
                Formula::nu(x.clone(), negate_keeping_two(a, keep, x))
            }
        }
        Nu(x, a) => {
            if x == keep {
                negate(f)
            } else {
                Formula::mu(x.clone(), negate_keeping_two(a, keep, x))
            }
        }
    }
}

fn negate_keeping_two(f: &Formula, keep1: &str, keep2: &str) -> Formula {
    // Generalize to a set of kept variables by chaining.
    fn go(f: &Formula, keep: &[String]) -> Formula {
        match f {
            Prop(p, pol) => {
                if keep.iter().any(|k| k == p) {
                    Prop(p.clone(), *pol)
                } else {
                    Prop(p.clone(), !pol)
                }
            }
            Nom(i, pol) => Nom(i.clone(), !pol),
            Or(a, b) => Formula::and(go(a, keep), go(b, keep)),
            And(a, b) => Formula::or(go(a, keep), go(b, keep)),
            Dia(a) => Formula::boxm(go(a, keep)),
            Boxm(a) => Formula::dia(go(a, keep)),
            At(i, a) => Formula::at(i.clone(), go(a, keep)),
            Mu(x, a) | Nu(x, a) => {
                let mut keep2: Vec<String> = keep.iter().filter(|k| *k != x).cloned().collect();
                keep2.push(x.clone());
                let body = go(a, &keep2);
                match f {
                    Mu(..) => Formula::nu(x.clone(), body),
                    _ => Formula::mu(x.clone(), body),
                }
            }
        }
    }
    go(f, &[keep1.to_string(), keep2.to_string()])
}

/// Unfold a fixpoint formula: `eta x. phi(x)` becomes `phi(eta x. phi(x))`.
pub fn unfold(f: &Formula) -> Result<Formula, SynError> {
    match f {
        Mu(x, a) | Nu(x, a) => Ok(a.subst(x, f)),
        _ => Err(SynError::NotFixpoint(f.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Printing

/// Precedence levels for the printer: higher binds tighter.
fn prec(f: &Formula) -> u8 {
    match f {
        Prop(..) | Nom(..) => 4,
        At(_, a) => match a.as_ref() {
            // Equality sugar is a primary expression.
            Nom(..) => 4,
            _ => 3,
        },
        Dia(_) | Boxm(_) => 3,
        And(..) => 2,
        Or(..) => 1,
        Mu(..) | Nu(..) => 0,
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(out: &mut fmt::Formatter<'_>, f: &Formula, min: u8) -> fmt::Result {
            if prec(f) < min {
                write!(out, "({f})")
            } else {
                write!(out, "{f}")
            }
        }
        match self {
            Prop(p, true) => write!(out, "{p}"),
            Prop(p, false) => write!(out, "~{p}"),
            Nom(i, true) => write!(out, "'{i}"),
            Nom(i, false) => write!(out, "~'{i}"),
            At(i, a) => match a.as_ref() {
                Nom(j, true) => write!(out, "'{i} == '{j}"),
                Nom(j, false) => write!(out, "'{i} != '{j}"),
                _ => {
                    write!(out, "@'{i} ")?;
                    child(out, a, 3)
                }
            },
            Dia(a) => {
                write!(out, "<>")?;
                child(out, a, 3)
            }
            Boxm(a) => {
                write!(out, "[]")?;
                child(out, a, 3)
            }
            And(a, b) => {
                child(out, a, 3)?;
                write!(out, " /\\ ")?;
                child(out, b, 3)
            }
            Or(a, b) => {
                child(out, a, 2)?;
                write!(out, " \\/ ")?;
                child(out, b, 2)
            }
            Mu(x, a) => write!(out, "mu {x}. {a}"),
            Nu(x, a) => write!(out, "nu {x}. {a}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynError {
    #[error("parse error at offset {0}: {1}")]
    Parse(usize, String),
    #[error("unguarded variable {0}: every occurrence of a bound variable must be under a modality")]
    Unguarded(String),
    #[error("variable {0} occurs both free and bound")]
    FreeAndBound(String),
    #[error("variable {0} is bound more than once")]
    BoundTwice(String),
    #[error("not a fixpoint formula: {0}")]
    NotFixpoint(String),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> SynError {
        SynError::Parse(self.pos, msg.into())
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, SynError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an identifier"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    /// or-level: `F \/ F \/ ...`
    fn formula(&mut self) -> Result<Formula, SynError> {
        let mut acc = self.conj()?;
        while self.eat("\\/") {
            let rhs = self.conj()?;
            acc = Formula::or(acc, rhs);
        }
        Ok(acc)
    }

    /// and-level: binds tighter than `\/`.
    fn conj(&mut self) -> Result<Formula, SynError> {
        let mut acc = self.unary()?;
        while self.eat("/\\") {
            let rhs = self.unary()?;
            acc = Formula::and(acc, rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula, SynError> {
        match self.peek() {
            Some(b'<') => {
                if !self.eat("<>") {
                    return Err(self.err("expected `<>`"));
                }
                Ok(Formula::dia(self.unary()?))
            }
            Some(b'[') => {
                if !self.eat("[]") {
                    return Err(self.err("expected `[]`"));
                }
                Ok(Formula::boxm(self.unary()?))
            }
            Some(b'@') => {
                self.eat("@");
                if !self.eat("'") {
                    return Err(self.err("expected a nominal after `@`"));
                }
                let i = self.ident()?;
                Ok(Formula::at(i, self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, SynError> {
        match self.peek() {
            Some(b'(') => {
                self.eat("(");
                let f = self.formula()?;
                if !self.eat(")") {
                    return Err(self.err("expected `)`"));
                }
                Ok(f)
            }
            Some(b'~') => {
                self.eat("~");
                if self.eat("'") {
                    Ok(Formula::nnom(self.ident()?))
                } else {
                    Ok(Formula::nprop(self.ident()?))
                }
            }
            Some(b'\'') => {
                self.eat("'");
                let i = self.ident()?;
                // Equality / inequality sugar.
                if self.eat("==") {
                    if !self.eat("'") {
                        return Err(self.err("expected a nominal after `==`"));
                    }
                    let j = self.ident()?;
                    Ok(Formula::at(i, Formula::nom(j)))
                } else if self.eat("!=") {
                    if !self.eat("'") {
                        return Err(self.err("expected a nominal after `!=`"));
                    }
                    let j = self.ident()?;
                    Ok(Formula::at(i, Formula::nnom(j)))
                } else {
                    Ok(Formula::nom(i))
                }
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.ident()?;
                match name.as_str() {
                    "mu" | "nu" => {
                        let x = self.ident()?;
                        if !self.eat(".") {
                            return Err(self.err("expected `.` after binder variable"));
                        }
                        let body = self.formula()?;
                        if name == "mu" {
                            Ok(Formula::mu(x, body))
                        } else {
                            Ok(Formula::nu(x, body))
                        }
                    }
                    _ => Ok(Formula::prop(name)),
                }
            }
            Some(c) => Err(self.err(format!("unexpected character `{}`", c as char))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Parse a formula and validate guardedness and well-formedness of binders.
///
/// Accepts input that is not locally well-named (e.g. a variable bound twice
/// in parallel); use [`make_well_named`] to normalize.  Rejects unguarded
/// binders and variables that occur both free and bound under the same binder
/// nesting.
pub fn parse(text: &str) -> Result<Formula, SynError> {
    let mut p = Parser::new(text);
    let f = p.formula()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(SynError::Parse(p.pos, "trailing input".into()));
    }
    check_guarded(&f)?;
    // A variable both free and bound cannot be repaired by renaming the free
    // occurrences, so it is always an error.
    let free = f.free_vars();
    for b in f.bound_vars() {
        if free.contains(&b) {
            return Err(SynError::FreeAndBound(b));
        }
    }
    Ok(f)
}

/// Check that every bound variable occurs under at least one modality within
/// its binder.
pub fn check_guarded(f: &Formula) -> Result<(), SynError> {
    // For each binder eta x. phi: no free occurrence of x in phi may be
    // reachable without passing a Dia/Boxm.
    fn unguarded_occurrence(f: &Formula, x: &str) -> bool {
        match f {
            Prop(p, _) => p == x,
            Nom(..) => false,
            Or(a, b) | And(a, b) => unguarded_occurrence(a, x) || unguarded_occurrence(b, x),
            Dia(_) | Boxm(_) => false,
            At(_, a) => unguarded_occurrence(a, x),
            Mu(y, a) | Nu(y, a) => y != x && unguarded_occurrence(a, x),
        }
    }
    let mut bad = None;
    f.walk(&mut |g| {
        if bad.is_none() {
            if let Mu(x, a) | Nu(x, a) = g {
                if unguarded_occurrence(a, x) {
                    bad = Some(x.clone());
                }
            }
        }
    });
    match bad {
        Some(x) => Err(SynError::Unguarded(x)),
        None => Ok(()),
    }
}

/// Is the formula locally well-named: no variable both free and bound, and
/// every binder of a given variable is the same subformula?  (Unfolding a
/// fixpoint duplicates its binder verbatim, so identical copies must be
/// allowed for the closure to stay well-named.)
pub fn is_well_named(f: &Formula) -> bool {
    let free = f.free_vars();
    let mut seen: BTreeMap<String, Formula> = BTreeMap::new();
    let mut ok = true;
    f.walk(&mut |g| {
        if let Mu(x, _) | Nu(x, _) = g {
            if free.contains(x) {
                ok = false;
            }
            match seen.get(x) {
                None => {
                    seen.insert(x.clone(), g.clone());
                }
                Some(prev) if prev == g => {}
                Some(_) => ok = false,
            }
        }
    });
    ok
}

/// Rename bound variables so the result is locally well-named and
/// alpha-equivalent to the input.  Earlier (leftmost-outermost) binders keep
/// their names; later conflicting binders get fresh `x_1`, `x_2`, ... names.
pub fn make_well_named(f: &Formula) -> Formula {
    fn fresh(base: &str, used: &BTreeSet<String>) -> String {
        if !used.contains(base) {
            return base.to_string();
        }
        for n in 1.. {
            let cand = format!("{base}_{n}");
            if !used.contains(&cand) {
                return cand;
            }
        }
        unreachable!()
    }
    // `used` collects every name that may no longer be (re)bound: free
    // variables and names already given to some binder.
    fn go(f: &Formula, ren: &BTreeMap<String, String>, used: &mut BTreeSet<String>) -> Formula {
        match f {
            Prop(p, pol) => match ren.get(p) {
                Some(q) => Prop(q.clone(), *pol),
                None => Prop(p.clone(), *pol),
            },
            Nom(..) => f.clone(),
            Or(a, b) => Formula::or(go(a, ren, used), go(b, ren, used)),
            And(a, b) => Formula::and(go(a, ren, used), go(b, ren, used)),
            Dia(a) => Formula::dia(go(a, ren, used)),
            Boxm(a) => Formula::boxm(go(a, ren, used)),
            At(i, a) => Formula::at(i.clone(), go(a, ren, used)),
            Mu(x, a) | Nu(x, a) => {
                let nx = fresh(x, used);
                used.insert(nx.clone());
                let mut ren2 = ren.clone();
                ren2.insert(x.clone(), nx.clone());
                let body = go(a, &ren2, used);
                match f {
                    Mu(..) => Formula::mu(nx, body),
                    _ => Formula::nu(nx, body),
                }
            }
        }
    }
    let mut used = f.free_vars();
    go(f, &BTreeMap::new(), &mut used)
}

// ---------------------------------------------------------------------------
// Variable order

/// Binder kind of a bound variable.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Kind {
    Mu,
    Nu,
}

/// A total strict order over the bound variables of a fixed root formula,
/// linearizing the dependency relation `<_phi`.  `vars[0]` is the
/// `<`-minimal, i.e. *highest ranking*, variable.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VariableOrder {
    vars: Vec<String>,
    kinds: BTreeMap<String, Kind>,
}

impl VariableOrder {
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn kind(&self, x: &str) -> Option<Kind> {
        self.kinds.get(x).copied()
    }

    pub fn is_nu(&self, x: &str) -> bool {
        self.kind(x) == Some(Kind::Nu)
    }

    /// Position in the order: 0 is the highest-ranking variable.
    pub fn rank(&self, x: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == x)
    }

    /// `x < y` in the order (x outranks y).
    pub fn lt(&self, x: &str, y: &str) -> bool {
        match (self.rank(x), self.rank(y)) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Build an order from an explicit variable list (highest ranking first),
    /// classifying kinds against the given root formula.  Used when reading
    /// proof files, which carry the order in their header.
    pub fn from_list(vars: Vec<String>, root: &Formula) -> Result<VariableOrder, SynError> {
        let mut kinds = BTreeMap::new();
        root.walk(&mut |g| match g {
            Mu(x, _) => {
                kinds.insert(x.clone(), Kind::Mu);
            }
            Nu(x, _) => {
                kinds.insert(x.clone(), Kind::Nu);
            }
            _ => {}
        });
        for v in &vars {
            if !kinds.contains_key(v) {
                return Err(SynError::NotFixpoint(format!(
                    "variable {v} is not bound in the root formula"
                )));
            }
        }
        Ok(VariableOrder { vars, kinds })
    }
}

/// Compute the dependency order of a locally well-named formula: a total
/// order extending `<_phi`, with incomparable variables tied by first
/// occurrence (left to right) in the formula.
pub fn dependency_order(f: &Formula) -> Result<VariableOrder, SynError> {
    if !is_well_named(f) {
        return Err(SynError::BoundTwice(
            "formula is not locally well-named".into(),
        ));
    }
    // x <_phi y iff some subformula `eta y. psi` has a free occurrence of x.
    let mut kinds: BTreeMap<String, Kind> = BTreeMap::new();
    let mut deps: BTreeMap<String, BTreeSet<String>> = BTreeMap::new(); // y -> {x : x < y}
    let mut first_occ: Vec<String> = Vec::new();
    f.walk(&mut |g| {
        if let Mu(y, a) | Nu(y, a) = g {
            kinds.insert(
                y.clone(),
                if matches!(g, Mu(..)) { Kind::Mu } else { Kind::Nu },
            );
            if !first_occ.contains(y) {
                first_occ.push(y.clone());
            }
            deps.entry(y.clone()).or_default().extend(a.free_vars());
        }
    });
    let all: Vec<String> = first_occ;
    for (y, ds) in &mut deps {
        ds.retain(|x| x != y && kinds.contains_key(x));
    }
    // Stable topological insertion: repeatedly take the first-occurring
    // variable whose dependencies are already placed.
    let mut placed: Vec<String> = Vec::new();
    while placed.len() < all.len() {
        let mut advanced = false;
        for v in &all {
            if placed.contains(v) {
                continue;
            }
            let ds = deps.get(v).cloned().unwrap_or_default();
            if ds.iter().all(|d| placed.contains(d)) {
                placed.push(v.clone());
                advanced = true;
                break;
            }
        }
        if !advanced {
            return Err(SynError::BoundTwice(
                "dependency relation is cyclic (formula not well-named)".into(),
            ));
        }
    }
    Ok(VariableOrder {
        vars: placed,
        kinds,
    })
}

// ---------------------------------------------------------------------------
// Fischer-Ladner closure

/// The Fischer-Ladner closure of a formula with stable integer ids assigned
/// in insertion (worklist) order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Closure {
    items: Vec<Formula>,
    index: BTreeMap<Formula, usize>,
}

impl Closure {
    pub fn iter(&self) -> impl Iterator<Item = &Formula> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn id(&self, f: &Formula) -> Option<usize> {
        self.index.get(f).copied()
    }

    pub fn get(&self, id: usize) -> &Formula {
        &self.items[id]
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.index.contains_key(f)
    }
}

/// Least set containing the formula and closed under the four Fischer-Ladner
/// clauses.
pub fn closure(f: &Formula) -> Closure {
    let mut items: Vec<Formula> = Vec::new();
    let mut index: BTreeMap<Formula, usize> = BTreeMap::new();
    let mut work: Vec<Formula> = vec![f.clone()];
    while let Some(g) = work.pop() {
        if index.contains_key(&g) {
            continue;
        }
        index.insert(g.clone(), items.len());
        items.push(g.clone());
        match &g {
            Or(a, b) | And(a, b) => {
                work.push(b.as_ref().clone());
                work.push(a.as_ref().clone());
            }
            Dia(a) | Boxm(a) | At(_, a) => work.push(a.as_ref().clone()),
            Mu(..) | Nu(..) => work.push(unfold(&g).expect("fixpoint")),
            Prop(..) | Nom(..) => {}
        }
    }
    Closure { items, index }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse(s).unwrap()
    }

    #[test]
    fn parse_basics() {
        assert_eq!(p("p"), Formula::prop("p"));
        assert_eq!(p("~p"), Formula::nprop("p"));
        assert_eq!(p("'i"), Formula::nom("i"));
        assert_eq!(p("~'i"), Formula::nnom("i"));
        assert_eq!(
            p("nu x. [](x \\/ []x)"),
            Formula::nu(
                "x",
                Formula::boxm(Formula::or(
                    Formula::prop("x"),
                    Formula::boxm(Formula::prop("x"))
                ))
            )
        );
    }

    #[test]
    fn parse_precedence() {
        // /\ binds tighter than \/; unary tightest; binder scope maximal.
        assert_eq!(p("p /\\ q \\/ r"), Formula::or(p("p /\\ q"), p("r")));
        assert_eq!(p("<>p \\/ []~p"), Formula::or(p("<>p"), p("[]~p")));
        assert_eq!(p("@'i p \\/ @'i ~p"), Formula::or(p("@'i p"), p("@'i ~p")));
        assert_eq!(p("mu x. p \\/ <>x"), Formula::mu("x", p("p \\/ <>x")));
    }

    #[test]
    fn parse_equality_sugar() {
        assert_eq!(p("'i == 'j"), Formula::at("i", Formula::nom("j")));
        assert_eq!(p("'i != 'j"), Formula::at("i", Formula::nnom("j")));
        assert_eq!(
            p("'i == 'j /\\ p"),
            Formula::and(p("'i == 'j"), Formula::prop("p"))
        );
    }

    #[test]
    fn parse_rejects_unguarded() {
        assert!(matches!(parse("mu x. x"), Err(SynError::Unguarded(_))));
        assert!(matches!(
            parse("mu x. p \\/ x"),
            Err(SynError::Unguarded(_))
        ));
        // Guarded through @ is still unguarded: @ is not a modality.
        assert!(matches!(
            parse("mu x. @'i x"),
            Err(SynError::Unguarded(_))
        ));
        assert!(parse("mu x. <>x").is_ok());
    }

    #[test]
    fn parse_rejects_free_and_bound() {
        assert!(matches!(
            parse("x /\\ mu x. <>x"),
            Err(SynError::FreeAndBound(_))
        ));
    }

    #[test]
    fn print_parse_roundtrip_samples() {
        for s in [
            "p",
            "~p",
            "'i",
            "~'i",
            "'i == 'j",
            "'i != 'j",
            "p /\\ q \\/ r",
            "(p \\/ q) /\\ r",
            "<>[]p",
            "@'i (p \\/ q)",
            "@'i p \\/ @'i ~p",
            "mu x. <>x",
            "nu x. [](x \\/ []x)",
            "(mu x. p \\/ []x) \\/ (nu y. ~p /\\ <>y)",
        ] {
            let f = p(s);
            assert_eq!(parse(&f.to_string()).unwrap(), f, "round-trip of {s}");
        }
    }

    #[test]
    fn negate_involution_and_examples() {
        assert_eq!(negate(&p("p")), p("~p"));
        assert_eq!(negate(&p("mu x. <>x")), p("nu x. []x"));
        assert_eq!(negate(&p("@'i p")), p("@'i ~p"));
        assert_eq!(
            negate(&p("(mu x. p \\/ []x)")),
            p("nu x. ~p /\\ <>x")
        );
        for s in ["p", "mu x. <>x", "@'i (p /\\ <>'j)", "nu x. [](x \\/ []x)"] {
            let f = p(s);
            assert_eq!(negate(&negate(&f)), f, "double negation of {s}");
        }
    }

    #[test]
    fn unfold_examples() {
        assert_eq!(unfold(&p("nu x. []x")).unwrap(), p("[](nu x. []x)"));
        assert_eq!(unfold(&p("mu x. <>x")).unwrap(), p("<>(mu x. <>x)"));
        // Derived by hand: nu x. [](x \/ []x) unfolds to
        // []( nu x. [](x \/ []x) \/ [] nu x. [](x \/ []x) ).
        let phi = p("nu x. [](x \\/ []x)");
        assert_eq!(
            unfold(&phi).unwrap(),
            Formula::boxm(Formula::or(phi.clone(), Formula::boxm(phi.clone())))
        );
        assert!(unfold(&p("p")).is_err());
    }

    #[test]
    fn well_naming() {
        let f = p("(mu x. <>x) /\\ (mu x. []x)");
        assert!(!is_well_named(&f));
        let g = make_well_named(&f);
        assert!(is_well_named(&g));
        assert_eq!(g, p("(mu x. <>x) /\\ (mu x_1. []x_1)"));
        // Identity on already-well-named input.
        let h = p("nu x. []x");
        assert_eq!(make_well_named(&h), h);
        // Inner shadowing binder renamed.
        let i = Formula::mu(
            "x",
            Formula::dia(Formula::and(
                Formula::nu("x", Formula::boxm(Formula::prop("x"))),
                Formula::prop("x"),
            )),
        );
        let j = make_well_named(&i);
        assert!(is_well_named(&j));
        assert_eq!(
            j,
            Formula::mu(
                "x",
                Formula::dia(Formula::and(
                    Formula::nu("x_1", Formula::boxm(Formula::prop("x_1"))),
                    Formula::prop("x"),
                ))
            )
        );
    }

    #[test]
    fn dependency_order_examples() {
        // mu x. nu y. <>(x /\ y): the nu y subformula has free x, so x < y.
        let f = p("mu x. nu y. <>(x /\\ y)");
        let ord = dependency_order(&f).unwrap();
        assert_eq!(ord.vars(), ["x".to_string(), "y".to_string()]);
        assert_eq!(ord.kind("x"), Some(Kind::Mu));
        assert_eq!(ord.kind("y"), Some(Kind::Nu));
        assert!(ord.lt("x", "y"));

        let g = p("nu x. []x");
        let ord = dependency_order(&g).unwrap();
        assert_eq!(ord.vars(), ["x".to_string()]);
        assert!(ord.is_nu("x"));

        // Incomparable variables tie-broken by first occurrence.
        let h = p("(nu x. []x) \\/ (nu y. <>y)");
        let ord = dependency_order(&h).unwrap();
        assert_eq!(ord.vars(), ["x".to_string(), "y".to_string()]);

        // Dependency beats occurrence order: y first in text but depends on x.
        let i = p("nu y. <>(y /\\ mu x. <>x) \\/ p");
        let ord = dependency_order(&i).unwrap();
        assert_eq!(ord.rank("y"), Some(0));
    }

    #[test]
    fn closure_examples() {
        let c = closure(&p("p"));
        assert_eq!(c.len(), 1);

        // Derived by hand: closure of mu x. <>x is {mu x. <>x, <>(mu x. <>x)}.
        let f = p("mu x. <>x");
        let c = closure(&f);
        assert_eq!(c.len(), 2);
        assert!(c.contains(&f));
        assert!(c.contains(&p("<>(mu x. <>x)")));

        // Satisfaction-operator clause.
        let c = closure(&p("@'i p"));
        assert_eq!(c.len(), 2);
        assert!(c.contains(&p("p")));
    }

    #[test]
    fn closure_bound_and_idempotence() {
        for s in [
            "p",
            "mu x. <>x",
            "nu x. [](x \\/ []x)",
            "(mu x. p \\/ []x) \\/ (nu y. ~p /\\ <>y)",
            "@'i (nu x. [](x /\\ @'j p))",
        ] {
            let f = p(s);
            let c = closure(&f);
            assert!(c.len() <= f.symbol_count(), "bound violated for {s}");
            for g in c.iter() {
                for h in closure(g).iter() {
                    assert!(c.contains(h), "closure not closed: {h} from {g} in {s}");
                }
            }
        }
    }

    #[test]
    fn unfolding_preserves_well_namedness() {
        // Self-unfolding duplicates the binder verbatim, which local
        // well-namedness tolerates.
        for s in ["nu x. []x", "nu x. [](x \\/ []x)", "nu y. <>(y /\\ mu x. <>x)"] {
            let f = p(s);
            let u = unfold(&f).unwrap();
            assert!(is_well_named(&u), "unfold of {s} not well-named");
        }
        // Unfolding across nested binders re-binds the inner variable with a
        // substituted body; guardedness and the bound-variable set survive.
        for s in ["mu x. nu y. <>(x /\\ y)", "nu x. [](x \\/ nu y. <>y)"] {
            let f = p(s);
            let u = unfold(&f).unwrap();
            assert!(check_guarded(&u).is_ok(), "unfold of {s} unguarded");
            assert_eq!(u.bound_vars(), f.bound_vars());
            assert!(is_well_named(&make_well_named(&u)));
        }
    }
}
