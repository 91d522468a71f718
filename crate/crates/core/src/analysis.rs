//! Dependency graph over positions, position ranks, D-weak-acyclicity and the
//! UCQ that characterizes it.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::model::{Class, Database, Program};
use crate::simplify::{simplify_program, SimplifiedPredicate, DEFAULT_ARITY_CAP};
use crate::symbol::Symbol;
use crate::text::{render_atom_with, render_pred};

/// A predicate position; `index` is zero-based, displayed one-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub pred: Symbol,
    pub index: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", render_pred(self.pred), self.index + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Normal,
    Special,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: Position,
    pub to: Position,
    pub kind: EdgeKind,
    pub tgd: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rank {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Finite(n) => write!(f, "{n}"),
            Rank::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DependencyGraph {
    positions: Vec<Position>,
    index: HashMap<Position, usize>,
    edges: Vec<Edge>,
    /// Collapsed adjacency per (from, to, kind).
    adj: Vec<BTreeSet<(usize, EdgeKind)>>,
    pred_succ: BTreeMap<Symbol, BTreeSet<Symbol>>,
    comp: Vec<usize>,
    /// Components in topological order.
    comps: Vec<Vec<usize>>,
    special_comp: Vec<bool>,
}

pub fn build_dependency_graph(p: &Program) -> DependencyGraph {
    let mut positions = Vec::new();
    let mut index = HashMap::new();
    for (&pred, &ar) in p.schema() {
        for i in 0..ar {
            let pos = Position { pred, index: i };
            index.insert(pos, positions.len());
            positions.push(pos);
        }
    }
    let mut edges = Vec::new();
    let mut pred_succ: BTreeMap<Symbol, BTreeSet<Symbol>> =
        p.schema().keys().map(|&r| (r, BTreeSet::new())).collect();
    for (ti, t) in p.tgds().iter().enumerate() {
        for b in t.body() {
            for h in t.head() {
                pred_succ.entry(b.pred).or_default().insert(h.pred);
            }
        }
        let head_positions = |v| {
            t.head().iter().flat_map(move |a| {
                a.args
                    .iter()
                    .enumerate()
                    .filter(move |&(_, &w)| w == v)
                    .map(move |(i, _)| Position {
                        pred: a.pred,
                        index: i,
                    })
            })
        };
        for &x in t.frontier() {
            let body_positions = t.body().iter().flat_map(|a| {
                a.args
                    .iter()
                    .enumerate()
                    .filter(move |&(_, &w)| w == x)
                    .map(move |(i, _)| Position {
                        pred: a.pred,
                        index: i,
                    })
            });
            for from in body_positions {
                for to in head_positions(x) {
                    edges.push(Edge {
                        from,
                        to,
                        kind: EdgeKind::Normal,
                        tgd: ti,
                    });
                }
                for &z in t.existentials() {
                    for to in head_positions(z) {
                        edges.push(Edge {
                            from,
                            to,
                            kind: EdgeKind::Special,
                            tgd: ti,
                        });
                    }
                }
            }
        }
    }
    let mut adj = vec![BTreeSet::new(); positions.len()];
    for e in &edges {
        adj[index[&e.from]].insert((index[&e.to], e.kind));
    }

    let mut g: DiGraph<(), ()> = DiGraph::new();
    for _ in &positions {
        g.add_node(());
    }
    for (u, succ) in adj.iter().enumerate() {
        for &(v, _) in succ {
            g.add_edge(NodeIndex::new(u), NodeIndex::new(v), ());
        }
    }
    // tarjan_scc yields components in reverse topological order.
    let mut comps: Vec<Vec<usize>> = petgraph::algo::tarjan_scc(&g)
        .into_iter()
        .map(|c| c.into_iter().map(NodeIndex::index).collect())
        .collect();
    comps.reverse();
    let mut comp = vec![0; positions.len()];
    for (ci, c) in comps.iter().enumerate() {
        for &n in c {
            comp[n] = ci;
        }
    }
    let mut special_comp = vec![false; comps.len()];
    for (u, succ) in adj.iter().enumerate() {
        for &(v, k) in succ {
            if k == EdgeKind::Special && comp[u] == comp[v] {
                special_comp[comp[u]] = true;
            }
        }
    }
    DependencyGraph {
        positions,
        index,
        edges,
        adj,
        pred_succ,
        comp,
        comps,
        special_comp,
    }
}

impl DependencyGraph {
    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    /// All edges with multiplicity and originating TGD.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, from: Position, to: Position, kind: EdgeKind) -> bool {
        match (self.index.get(&from), self.index.get(&to)) {
            (Some(&u), Some(&v)) => self.adj[u].contains(&(v, kind)),
            _ => false,
        }
    }

    /// Predicate-graph successors of `r` (excluding the reflexive case).
    pub fn pred_successors(&self, r: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        self.pred_succ.get(&r).into_iter().flatten().copied()
    }

    /// Predicates reachable from any of `from`, reflexively.
    pub fn pred_reach(&self, from: impl IntoIterator<Item = Symbol>) -> BTreeSet<Symbol> {
        let mut seen: BTreeSet<Symbol> = BTreeSet::new();
        let mut queue: VecDeque<Symbol> = VecDeque::new();
        for r in from {
            if seen.insert(r) {
                queue.push_back(r);
            }
        }
        while let Some(r) = queue.pop_front() {
            for s in self.pred_successors(r) {
                if seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        seen
    }

    /// Whether `to` is reachable from `from` in the position graph (reflexively).
    pub fn reaches(&self, from: Position, to: Position) -> bool {
        self.path(from, to).is_some()
    }

    /// Shortest path of positions from `from` to `to`, both included.
    pub fn path(&self, from: Position, to: Position) -> Option<Vec<Position>> {
        let (&s, &t) = (self.index.get(&from)?, self.index.get(&to)?);
        let mut prev = vec![usize::MAX; self.positions.len()];
        prev[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                let mut path = vec![self.positions[t]];
                let mut cur = t;
                while cur != s {
                    cur = prev[cur];
                    path.push(self.positions[cur]);
                }
                path.reverse();
                return Some(path);
            }
            for &(v, _) in &self.adj[u] {
                if prev[v] == usize::MAX {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Positions lying on a cycle that contains a special edge.
    pub fn special_cycle_positions(&self) -> Vec<Position> {
        (0..self.positions.len())
            .filter(|&n| self.special_comp[self.comp[n]])
            .map(|n| self.positions[n])
            .collect()
    }

    pub fn has_special_cycle(&self) -> bool {
        self.special_comp.iter().any(|&b| b)
    }
}

/// Maximum number of special edges over all paths ending at each position.
pub fn position_ranks(g: &DependencyGraph) -> BTreeMap<Position, Rank> {
    let mut rank = vec![Rank::Finite(0); g.comps.len()];
    let mut incoming: Vec<Vec<(usize, EdgeKind)>> = vec![Vec::new(); g.comps.len()];
    for (u, succ) in g.adj.iter().enumerate() {
        for &(v, k) in succ {
            if g.comp[u] != g.comp[v] {
                incoming[g.comp[v]].push((g.comp[u], k));
            }
        }
    }
    for c in 0..g.comps.len() {
        rank[c] = if g.special_comp[c] {
            Rank::Infinite
        } else {
            incoming[c].iter().fold(Rank::Finite(0), |acc, &(from, k)| {
                let r = match rank[from] {
                    Rank::Infinite => Rank::Infinite,
                    Rank::Finite(n) => Rank::Finite(n + usize::from(k == EdgeKind::Special)),
                };
                acc.max(r)
            })
        };
    }
    g.positions
        .iter()
        .enumerate()
        .map(|(n, &pos)| (pos, rank[g.comp[n]]))
        .collect()
}

/// A D-supported cycle through a special edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub special: (Position, Position),
    pub tgd: usize,
    /// Closed walk starting and ending at `special.0`, whose first step is the special edge.
    pub cycle: Vec<Position>,
    /// A database predicate that reaches the cycle in the predicate graph.
    pub support: Symbol,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycle: Vec<String> = self.cycle.iter().map(Position::to_string).collect();
        write!(
            f,
            "special edge {} -> {} on cycle {} supported by {}",
            self.special.0,
            self.special.1,
            cycle.join(" -> "),
            render_pred(self.support)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeakAcyclicity {
    Acyclic,
    Cyclic(Witness),
}

impl WeakAcyclicity {
    pub fn is_acyclic(&self) -> bool {
        matches!(self, WeakAcyclicity::Acyclic)
    }
}

/// D-weak-acyclicity. Exact for the termination of simple-linear programs only.
pub fn is_d_weakly_acyclic(db: &Database, p: &Program) -> WeakAcyclicity {
    d_weak_acyclicity(db, &build_dependency_graph(p))
}

pub fn d_weak_acyclicity(db: &Database, g: &DependencyGraph) -> WeakAcyclicity {
    let db_preds = db.predicates();
    let reach = g.pred_reach(db_preds.iter().copied());
    for e in g.edges.iter().filter(|e| e.kind == EdgeKind::Special) {
        if !reach.contains(&e.from.pred) {
            continue;
        }
        let Some(back) = g.path(e.to, e.from) else {
            continue;
        };
        let support = db_preds
            .iter()
            .copied()
            .find(|&r| g.pred_reach([r]).contains(&e.from.pred))
            .expect("some database predicate reaches the cycle");
        let mut cycle = vec![e.from];
        cycle.extend(back);
        return WeakAcyclicity::Cyclic(Witness {
            special: (e.from, e.to),
            tgd: e.tgd,
            cycle,
            support,
        });
    }
    WeakAcyclicity::Acyclic
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disjunct {
    pub pred: Symbol,
    pub arity: usize,
    /// One-based position pairs `(i, j)` with `i < j`.
    pub equalities: BTreeSet<(usize, usize)>,
}

impl Disjunct {
    pub fn matches(&self, pred: Symbol, args: &[Symbol]) -> bool {
        pred == self.pred
            && args.len() == self.arity
            && self
                .equalities
                .iter()
                .all(|&(i, j)| args[i - 1] == args[j - 1])
    }

    /// Atom pattern with equal positions sharing a variable.
    pub fn render(&self) -> String {
        let mut class: Vec<usize> = (0..self.arity).collect();
        for &(i, j) in &self.equalities {
            let (a, b) = (find(&mut class, i - 1), find(&mut class, j - 1));
            class[a.max(b)] = a.min(b);
        }
        let mut names: HashMap<usize, usize> = HashMap::new();
        let args: Vec<String> = (0..self.arity)
            .map(|i| {
                let root = find(&mut class, i);
                let next = names.len() + 1;
                format!("X{}", names.entry(root).or_insert(next))
            })
            .collect();
        render_atom_with(self.pred, args)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ucq {
    pub disjuncts: Vec<Disjunct>,
}

impl fmt::Display for Ucq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.disjuncts.is_empty() {
            return writeln!(f, "% empty query: no database satisfies it");
        }
        for d in &self.disjuncts {
            writeln!(f, "{}", d.render())?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UcqVariant {
    SimpleLinear,
    LinearSimplified,
}

/// Predicates from which some special-edge cycle is reachable.
fn cycle_reaching_preds(g: &DependencyGraph, schema: &BTreeMap<Symbol, usize>) -> Vec<Symbol> {
    let targets: BTreeSet<Symbol> = g.special_cycle_positions().iter().map(|p| p.pred).collect();
    schema
        .keys()
        .copied()
        .filter(|&r| !g.pred_reach([r]).is_disjoint(&targets))
        .collect()
}

pub fn build_ucq(p: &Program, variant: UcqVariant) -> Result<Ucq> {
    let class = p.classify();
    match variant {
        UcqVariant::SimpleLinear => {
            if class != Class::SimpleLinear {
                return Err(Error::WrongClass {
                    expected: Class::SimpleLinear,
                    found: class,
                });
            }
            let g = build_dependency_graph(p);
            let disjuncts = cycle_reaching_preds(&g, p.schema())
                .into_iter()
                .map(|r| Disjunct {
                    pred: r,
                    arity: p.schema()[&r],
                    equalities: BTreeSet::new(),
                })
                .collect();
            Ok(Ucq { disjuncts })
        }
        UcqVariant::LinearSimplified => {
            if class > Class::Linear {
                return Err(Error::WrongClass {
                    expected: Class::Linear,
                    found: class,
                });
            }
            let s = simplify_program(&Database::new(), p, DEFAULT_ARITY_CAP)?;
            let g = build_dependency_graph(&s.program);
            let mut disjuncts = Vec::new();
            for r in cycle_reaching_preds(&g, s.program.schema()) {
                let sp: &SimplifiedPredicate = &s.preds[&r];
                let mut equalities = BTreeSet::new();
                for i in 0..sp.ids.len() {
                    for j in i + 1..sp.ids.len() {
                        if sp.ids[i] == sp.ids[j] {
                            equalities.insert((i + 1, j + 1));
                        }
                    }
                }
                disjuncts.push(Disjunct {
                    pred: sp.base,
                    arity: sp.ids.len(),
                    equalities,
                });
            }
            Ok(Ucq { disjuncts })
        }
    }
}

pub fn eval_ucq(q: &Ucq, db: &Database) -> bool {
    db.facts()
        .any(|f| q.disjuncts.iter().any(|d| d.matches(f.pred, &f.args)))
}
