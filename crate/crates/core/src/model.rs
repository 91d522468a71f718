//! Terms, atoms, TGDs, programs and databases.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::symbol::Symbol;

/// A variable local to one TGD, an index into [`Tgd::var_names`].
///
/// Variables of different TGDs live in different index spaces, so no two TGDs
/// of a program can share a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom<T> {
    pub pred: Symbol,
    pub args: Vec<T>,
}

impl<T> Atom<T> {
    pub fn new(pred: impl Into<Symbol>, args: Vec<T>) -> Self {
        Atom {
            pred: pred.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

/// A database fact: an atom over constants.
pub type Fact = Atom<Symbol>;
pub type RuleAtom = Atom<Var>;

/// Builds a fact from string names.
pub fn fact(pred: &str, args: &[&str]) -> Fact {
    Atom::new(pred, args.iter().map(|a| Symbol::new(a)).collect())
}

/// Link from a derived TGD back to the TGD it was produced from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Origin {
    /// Index of the source TGD in the source program.
    pub source: usize,
    /// For every variable of the source TGD, its image in the derived TGD.
    pub var_map: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct Tgd {
    id: Symbol,
    var_names: Vec<Symbol>,
    body: Vec<RuleAtom>,
    head: Vec<RuleAtom>,
    frontier: Vec<Var>,
    existentials: Vec<Var>,
    guard: Option<usize>,
    origin: Option<Origin>,
}

impl PartialEq for Tgd {
    /// Structural equality: ids and provenance are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.var_names == other.var_names && self.body == other.body && self.head == other.head
    }
}

impl Tgd {
    pub fn new(
        id: impl Into<Symbol>,
        var_names: Vec<Symbol>,
        body: Vec<RuleAtom>,
        head: Vec<RuleAtom>,
    ) -> Result<Tgd> {
        if body.is_empty() {
            return Err(Error::InvalidTgd("empty body".into()));
        }
        if head.is_empty() {
            return Err(Error::InvalidTgd("empty head".into()));
        }
        let n = var_names.len();
        for atom in body.iter().chain(&head) {
            if atom.args.is_empty() {
                return Err(Error::InvalidTgd(format!(
                    "atom over `{}` has no arguments",
                    atom.pred
                )));
            }
            if let Some(v) = atom.args.iter().find(|v| v.index() >= n) {
                return Err(Error::InvalidTgd(format!(
                    "variable index {} out of range",
                    v.0
                )));
            }
        }
        let mut in_body = vec![false; n];
        let mut frontier = Vec::new();
        let mut existentials = Vec::new();
        for v in body.iter().flat_map(|a| &a.args) {
            in_body[v.index()] = true;
        }
        let mut seen = vec![false; n];
        for v in body.iter().flat_map(|a| &a.args) {
            if !seen[v.index()] {
                seen[v.index()] = true;
                if head.iter().any(|a| a.args.contains(v)) {
                    frontier.push(*v);
                }
            }
        }
        for v in head.iter().flat_map(|a| &a.args) {
            if !in_body[v.index()] && !existentials.contains(v) {
                existentials.push(*v);
            }
        }
        let body_vars: HashSet<Var> = body.iter().flat_map(|a| a.args.iter().copied()).collect();
        let guard = body
            .iter()
            .position(|a| body_vars.iter().all(|v| a.args.contains(v)));
        Ok(Tgd {
            id: id.into(),
            var_names,
            body,
            head,
            frontier,
            existentials,
            guard,
            origin: None,
        })
    }

    pub fn with_origin(mut self, origin: Origin) -> Tgd {
        self.origin = Some(origin);
        self
    }

    pub fn id(&self) -> Symbol {
        self.id
    }
    pub fn var_names(&self) -> &[Symbol] {
        &self.var_names
    }
    pub fn var_name(&self, v: Var) -> Symbol {
        self.var_names[v.index()]
    }
    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }
    pub fn body(&self) -> &[RuleAtom] {
        &self.body
    }
    pub fn head(&self) -> &[RuleAtom] {
        &self.head
    }
    /// Frontier variables in order of first occurrence in the body.
    pub fn frontier(&self) -> &[Var] {
        &self.frontier
    }
    /// Existential variables in order of first occurrence in the head.
    pub fn existentials(&self) -> &[Var] {
        &self.existentials
    }
    /// Index of the leftmost body atom containing every body variable.
    pub fn guard(&self) -> Option<usize> {
        self.guard
    }
    pub fn guard_atom(&self) -> Option<&RuleAtom> {
        self.guard.map(|g| &self.body[g])
    }
    pub fn origin(&self) -> Option<&Origin> {
        self.origin.as_ref()
    }

    /// Distinct body variables in order of first occurrence.
    pub fn body_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for v in self.body.iter().flat_map(|a| &a.args) {
            if !out.contains(v) {
                out.push(*v);
            }
        }
        out
    }

    pub fn is_linear(&self) -> bool {
        self.body.len() == 1
    }

    pub fn is_simple_linear(&self) -> bool {
        self.is_linear() && {
            let args = &self.body[0].args;
            args.iter().collect::<HashSet<_>>().len() == args.len()
        }
    }

    /// Number of distinct atoms in body and head.
    pub fn atom_count(&self) -> usize {
        self.body
            .iter()
            .chain(&self.head)
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn frontier_position(&self, v: Var) -> Option<usize> {
        self.frontier.iter().position(|&f| f == v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    SimpleLinear,
    Linear,
    Guarded,
    General,
}

impl Class {
    pub fn short(self) -> &'static str {
        match self {
            Class::SimpleLinear => "sl",
            Class::Linear => "l",
            Class::Guarded => "g",
            Class::General => "general",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::SimpleLinear => "SimpleLinear",
            Class::Linear => "Linear",
            Class::Guarded => "Guarded",
            Class::General => "General",
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct Program {
    tgds: Vec<Tgd>,
    schema: BTreeMap<Symbol, usize>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.tgds == other.tgds
    }
}

impl Program {
    pub fn new(tgds: Vec<Tgd>) -> Result<Program> {
        let mut schema = BTreeMap::new();
        for t in &tgds {
            for a in t.body.iter().chain(&t.head) {
                record_arity(&mut schema, a.pred, a.arity())?;
            }
        }
        Ok(Program { tgds, schema })
    }

    pub fn tgds(&self) -> &[Tgd] {
        &self.tgds
    }
    pub fn tgd(&self, i: usize) -> &Tgd {
        &self.tgds[i]
    }
    pub fn len(&self) -> usize {
        self.tgds.len()
    }
    pub fn is_empty(&self) -> bool {
        self.tgds.is_empty()
    }
    /// sch(Σ) with arities.
    pub fn schema(&self) -> &BTreeMap<Symbol, usize> {
        &self.schema
    }
    pub fn arity(&self, pred: Symbol) -> Option<usize> {
        self.schema.get(&pred).copied()
    }
    /// |atoms(Σ)|.
    pub fn atom_count(&self) -> usize {
        self.tgds.iter().map(Tgd::atom_count).sum()
    }
    /// |sch(Σ)|.
    pub fn pred_count(&self) -> usize {
        self.schema.len()
    }
    /// ar(Σ).
    pub fn max_arity(&self) -> usize {
        self.schema.values().copied().max().unwrap_or(0)
    }
    /// ||Σ|| = |atoms(Σ)| · |sch(Σ)| · ar(Σ).
    pub fn norm(&self) -> BigUint {
        BigUint::from(self.atom_count()) * self.pred_count() * self.max_arity()
    }

    pub fn classify(&self) -> Class {
        classify(self)
    }
}

fn record_arity(schema: &mut BTreeMap<Symbol, usize>, pred: Symbol, arity: usize) -> Result<()> {
    match schema.get(&pred) {
        Some(&a) if a != arity => Err(Error::ArityConflict {
            pred,
            first: a,
            second: arity,
        }),
        Some(_) => Ok(()),
        None => {
            schema.insert(pred, arity);
            Ok(())
        }
    }
}

/// Most specific syntactic class of the program.
pub fn classify(p: &Program) -> Class {
    if p.tgds.iter().all(Tgd::is_simple_linear) {
        Class::SimpleLinear
    } else if p.tgds.iter().all(Tgd::is_linear) {
        Class::Linear
    } else if p.tgds.iter().all(|t| t.guard.is_some()) {
        Class::Guarded
    } else {
        Class::General
    }
}

/// A finite set of facts, kept in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    facts: IndexSet<Fact>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    /// Inserts a fact; returns false when it was already present.
    pub fn insert(&mut self, f: Fact) -> bool {
        self.facts.insert(f)
    }

    pub fn contains(&self, f: &Fact) -> bool {
        self.facts.contains(f)
    }
    pub fn facts(&self) -> impl Iterator<Item = &Fact> + '_ {
        self.facts.iter()
    }
    pub fn len(&self) -> usize {
        self.facts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Predicates of the database in order of first appearance.
    pub fn predicates(&self) -> Vec<Symbol> {
        let mut out: IndexSet<Symbol> = IndexSet::new();
        for f in &self.facts {
            out.insert(f.pred);
        }
        out.into_iter().collect()
    }

    /// Active domain in order of first appearance.
    pub fn constants(&self) -> Vec<Symbol> {
        let mut out: IndexSet<Symbol> = IndexSet::new();
        for f in &self.facts {
            out.extend(f.args.iter().copied());
        }
        out.into_iter().collect()
    }

    /// Checks that facts agree with each other and with the program on arities.
    pub fn check_arities(&self, p: &Program) -> Result<()> {
        let mut schema = p.schema.clone();
        for f in &self.facts {
            record_arity(&mut schema, f.pred, f.arity())?;
        }
        Ok(())
    }
}

impl FromIterator<Fact> for Database {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        Database {
            facts: iter.into_iter().collect(),
        }
    }
}

/// A self-contained term value: the universe of chase values plus variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Constant(Symbol),
    Variable(Symbol),
    Null(Arc<NullTerm>),
}

/// The null invented for existential variable `var` by TGD `tgd` under the
/// given frontier binding.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NullTerm {
    pub tgd: Symbol,
    pub binding: Vec<(Symbol, Term)>,
    pub var: Symbol,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) | Term::Variable(c) => write!(f, "{c}"),
            Term::Null(n) => {
                write!(f, "_:{}.{}[", n.tgd, n.var)?;
                for (i, (x, t)) in n.binding.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}={t}")?;
                }
                f.write_str("]")
            }
        }
    }
}

pub fn term_depth(t: &Term) -> Result<usize> {
    match t {
        Term::Constant(_) => Ok(0),
        Term::Variable(v) => Err(Error::VariableDepth(*v)),
        Term::Null(n) => {
            let mut max = 0;
            for (_, u) in &n.binding {
                max = max.max(term_depth(u)?);
            }
            Ok(1 + max)
        }
    }
}

pub fn atom_depth(a: &Atom<Term>) -> Result<usize> {
    let mut max = 0;
    for t in &a.args {
        max = max.max(term_depth(t)?);
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tgd(body: &[(&str, &[u32])], head: &[(&str, &[u32])], nvars: u32) -> Tgd {
        let names = (0..nvars).map(|i| Symbol::new(&format!("X{i}"))).collect();
        let mk = |atoms: &[(&str, &[u32])]| {
            atoms
                .iter()
                .map(|(p, a)| Atom::new(*p, a.iter().map(|&v| Var(v)).collect()))
                .collect()
        };
        Tgd::new("t", names, mk(body), mk(head)).unwrap()
    }

    #[test]
    fn frontier_and_existentials() {
        // R(x,y) -> exists z R(y,z)
        let t = tgd(&[("R", &[0, 1])], &[("R", &[1, 2])], 3);
        assert_eq!(t.frontier(), &[Var(1)]);
        assert_eq!(t.existentials(), &[Var(2)]);
        assert_eq!(t.guard(), Some(0));
    }

    #[test]
    fn classify_examples() {
        let sl = Program::new(vec![tgd(&[("R", &[0, 1])], &[("R", &[1, 2])], 3)]).unwrap();
        assert_eq!(classify(&sl), Class::SimpleLinear);
        let l = Program::new(vec![tgd(&[("R", &[0, 0])], &[("R", &[1, 0])], 2)]).unwrap();
        assert_eq!(classify(&l), Class::Linear);
        // R(x,y), P(x,z,v) -> exists w P(y,w,z): no single atom holds x,y,z,v
        let g = Program::new(vec![tgd(
            &[("R", &[0, 1]), ("P", &[0, 2, 3])],
            &[("P", &[1, 4, 2])],
            5,
        )])
        .unwrap();
        assert_eq!(classify(&g), Class::General);
        let guarded = Program::new(vec![tgd(
            &[("P", &[0, 1, 2]), ("R", &[0, 1])],
            &[("S", &[2])],
            3,
        )])
        .unwrap();
        assert_eq!(classify(&guarded), Class::Guarded);
        assert_eq!(guarded.tgd(0).guard(), Some(0));
    }

    #[test]
    fn leftmost_guard_is_chosen() {
        let t = tgd(
            &[("A", &[0]), ("P", &[0, 1]), ("Q", &[1, 0])],
            &[("S", &[0])],
            2,
        );
        assert_eq!(t.guard(), Some(1));
    }

    #[test]
    fn norm_of_single_rule() {
        let p = Program::new(vec![tgd(&[("R", &[0, 1])], &[("R", &[1, 2])], 3)]).unwrap();
        assert_eq!(p.atom_count(), 2);
        assert_eq!(p.pred_count(), 1);
        assert_eq!(p.max_arity(), 2);
        assert_eq!(p.norm(), BigUint::from(4u32));
    }

    #[test]
    fn duplicate_atom_counted_once() {
        // R0(x) -> exists y R0(x), R1(y)
        let t = tgd(&[("R0", &[0])], &[("R0", &[0]), ("R1", &[1])], 2);
        assert_eq!(t.atom_count(), 2);
    }

    #[test]
    fn arity_conflict_detected() {
        let r = Program::new(vec![tgd(&[("R", &[0, 1])], &[("R", &[1])], 2)]);
        assert!(matches!(r, Err(Error::ArityConflict { .. })));
    }

    #[test]
    fn empty_body_rejected() {
        assert!(Tgd::new("t", vec![], vec![], vec![Atom::new("R", vec![])]).is_err());
    }

    fn null(binding: Vec<(&str, Term)>) -> Term {
        Term::Null(Arc::new(NullTerm {
            tgd: Symbol::new("s"),
            binding: binding
                .into_iter()
                .map(|(x, t)| (Symbol::new(x), t))
                .collect(),
            var: Symbol::new("Z"),
        }))
    }

    #[test]
    fn depths() {
        let a = Term::Constant(Symbol::new("a"));
        assert_eq!(term_depth(&a).unwrap(), 0);
        let n1 = null(vec![("Y", Term::Constant(Symbol::new("b")))]);
        assert_eq!(term_depth(&n1).unwrap(), 1);
        let n2 = null(vec![("Y", n1.clone())]);
        assert_eq!(term_depth(&n2).unwrap(), 2);
        assert_eq!(term_depth(&null(vec![])).unwrap(), 1);
        let n3 = null(vec![("Y", n2.clone())]);
        assert_eq!(atom_depth(&Atom::new("P", vec![n2, n3])).unwrap(), 3);
        assert_eq!(atom_depth(&Atom::new("R", vec![a.clone(), n1])).unwrap(), 1);
        assert_eq!(atom_depth(&Atom::new("R", vec![a.clone(), a])).unwrap(), 0);
        assert!(term_depth(&Term::Variable(Symbol::new("X"))).is_err());
    }
}
