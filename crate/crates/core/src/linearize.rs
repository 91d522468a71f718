//! Linearization of guarded TGDs.
//!
//! Each atom is replaced by an atom over a type predicate `[τ]` that records
//! the shape of the atom together with every atom over its terms. Type
//! predicates are written over the distinct terms of the guard only, so
//! `[τ]` has one argument per distinct integer of `guard(τ)`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::chase::{run_chase, AtomId, ChaseOptions, TermId};
use crate::error::{Error, Result};
use crate::model::{Atom, Class, Database, Fact, Origin, Program, Tgd, Var};
use crate::simplify::{specializations, unique_and_id, EquivCtx, PartitionReport};
use crate::symbol::Symbol;
use crate::text::render_pred;

/// Default cap on the number of types produced by linearization.
pub const DEFAULT_TYPE_BUDGET: usize = 1_000_000;
/// Default cap on the number of entries of the saturation table.
pub const DEFAULT_TABLE_BUDGET: usize = 1_000_000;

/// A guard shape over the integers `1..=k` and the atoms over its integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SigmaType {
    pub guard: Atom<u32>,
    pub side: BTreeSet<Atom<u32>>,
}

fn render_int_atom(a: &Atom<u32>) -> String {
    let args: Vec<String> = a.args.iter().map(u32::to_string).collect();
    format!("{}({})", render_pred(a.pred), args.join(","))
}

impl SigmaType {
    /// Number of distinct integers of the guard, the arity of `[τ]`.
    pub fn arity(&self) -> usize {
        self.guard.args.iter().copied().max().unwrap_or(0) as usize
    }

    /// Guard first, then side atoms in order.
    pub fn atoms(&self) -> impl Iterator<Item = &Atom<u32>> {
        std::iter::once(&self.guard).chain(self.side.iter())
    }

    pub fn contains(&self, a: &Atom<u32>) -> bool {
        *a == self.guard || self.side.contains(a)
    }

    pub fn render(&self) -> String {
        let side: Vec<String> = self.side.iter().map(render_int_atom).collect();
        format!("({}, {{{}}})", render_int_atom(&self.guard), side.join(","))
    }

    /// Stable content-addressed predicate name.
    pub fn name(&self) -> Symbol {
        let digest = Sha256::digest(self.render().as_bytes());
        let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Symbol::new(&format!("[tau#{hex}]"))
    }

    /// τ(ū): replaces integer `i` by `terms[i-1]`.
    pub fn instantiate<T: Clone>(&self, terms: &[T]) -> Vec<Atom<T>> {
        self.atoms()
            .map(|a| Atom {
                pred: a.pred,
                args: a
                    .args
                    .iter()
                    .map(|&i| terms[i as usize - 1].clone())
                    .collect(),
            })
            .collect()
    }
}

/// Relabels the guard's terms by first occurrence starting at 1, and the side
/// atoms consistently. The guard itself is dropped from the side atoms.
pub fn canonical_type<T: PartialEq + Clone + Debug>(
    guard: &Atom<T>,
    side: impl IntoIterator<Item = Atom<T>>,
) -> Result<SigmaType> {
    let (uniq, ids) = unique_and_id(&guard.args);
    let int = |t: &T| uniq.iter().position(|u| u == t).map(|i| i as u32 + 1);
    let mut out = BTreeSet::new();
    for a in side {
        if a == *guard {
            continue;
        }
        let args = a.args.iter().map(int).collect::<Option<Vec<u32>>>();
        match args {
            Some(args) => {
                out.insert(Atom { pred: a.pred, args });
            }
            None => return Err(Error::ForeignTerm(format!("{}{:?}", a.pred, a.args))),
        }
    }
    Ok(SigmaType {
        guard: Atom {
            pred: guard.pred,
            args: ids,
        },
        side: out,
    })
}

type LAtom = Atom<u32>;

struct Entry {
    key: Vec<LAtom>,
    enrich: BTreeSet<LAtom>,
    parents: BTreeSet<usize>,
}

const ROOT: usize = usize::MAX;

/// Computes completions of instances under a guarded program as a least
/// fixpoint over a table of canonical child instances. Each entry maps the
/// atoms a trigger creates (plus the parent atoms over its frontier terms) to
/// the further atoms derivable over the same terms.
pub struct Saturator<'p> {
    p: &'p Program,
    table: HashMap<Vec<LAtom>, usize>,
    entries: Vec<Entry>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
    budget: usize,
    changed: bool,
}

impl<'p> Saturator<'p> {
    pub fn new(p: &'p Program, budget: usize) -> Result<Saturator<'p>> {
        let class = p.classify();
        if class > Class::Guarded {
            return Err(Error::WrongClass {
                expected: Class::Guarded,
                found: class,
            });
        }
        Ok(Saturator {
            p,
            table: HashMap::new(),
            entries: Vec::new(),
            queue: VecDeque::new(),
            queued: Vec::new(),
            budget,
            changed: false,
        })
    }

    pub fn table_len(&self) -> usize {
        self.entries.len()
    }

    /// All atoms of the chase whose terms occur in `atoms`.
    pub fn complete(&mut self, atoms: impl IntoIterator<Item = LAtom>) -> Result<BTreeSet<LAtom>> {
        let mut bag: BTreeSet<LAtom> = atoms.into_iter().collect();
        loop {
            self.changed = false;
            self.evaluate(&mut bag, ROOT)?;
            self.drain()?;
            if !self.changed {
                return Ok(bag);
            }
        }
    }

    /// [`Saturator::complete`] over arbitrary terms.
    pub fn complete_atoms<T: Clone + Eq + Hash>(
        &mut self,
        atoms: &[Atom<T>],
    ) -> Result<Vec<Atom<T>>> {
        let mut ids: HashMap<T, u32> = HashMap::new();
        let mut terms: Vec<T> = Vec::new();
        let local: Vec<LAtom> = atoms
            .iter()
            .map(|a| Atom {
                pred: a.pred,
                args: a
                    .args
                    .iter()
                    .map(|t| {
                        *ids.entry(t.clone()).or_insert_with(|| {
                            terms.push(t.clone());
                            terms.len() as u32 - 1
                        })
                    })
                    .collect(),
            })
            .collect();
        let done = self.complete(local)?;
        Ok(done
            .into_iter()
            .map(|a| Atom {
                pred: a.pred,
                args: a.args.iter().map(|&i| terms[i as usize].clone()).collect(),
            })
            .collect())
    }

    fn drain(&mut self) -> Result<()> {
        while let Some(id) = self.queue.pop_front() {
            self.queued[id] = false;
            let e = &self.entries[id];
            let mut bag: BTreeSet<LAtom> = e.key.iter().chain(e.enrich.iter()).cloned().collect();
            self.evaluate(&mut bag, id)?;
            let key = &self.entries[id].key;
            let enrich: BTreeSet<LAtom> = bag
                .into_iter()
                .filter(|a| key.binary_search(a).is_err())
                .collect();
            if enrich.len() > self.entries[id].enrich.len() {
                self.entries[id].enrich = enrich;
                self.changed = true;
                let parents: Vec<usize> = self.entries[id].parents.iter().copied().collect();
                for p in parents {
                    self.enqueue(p);
                }
            }
        }
        Ok(())
    }

    fn enqueue(&mut self, id: usize) {
        if !self.queued[id] {
            self.queued[id] = true;
            self.queue.push_back(id);
        }
    }

    /// Saturates `bag` given the current table contents.
    fn evaluate(&mut self, bag: &mut BTreeSet<LAtom>, owner: usize) -> Result<()> {
        let p = self.p;
        loop {
            let mut new: Vec<LAtom> = Vec::new();
            for t in p.tgds() {
                let g = t.guard_atom().expect("guarded program");
                let lo = Atom {
                    pred: g.pred,
                    args: Vec::new(),
                };
                for a in bag.range(lo..).take_while(|a| a.pred == g.pred) {
                    let Some(h) = match_guard(g, a, t.num_vars()) else {
                        continue;
                    };
                    if !t.body().iter().all(|b| bag.contains(&map_atom(b, &h))) {
                        continue;
                    }
                    if t.existentials().is_empty() {
                        new.extend(
                            t.head()
                                .iter()
                                .map(|b| map_atom(b, &h))
                                .filter(|m| !bag.contains(m)),
                        );
                    } else {
                        let back = self.child(t, &h, bag, owner)?;
                        new.extend(back.into_iter().filter(|m| !bag.contains(m)));
                    }
                }
            }
            if new.is_empty() {
                return Ok(());
            }
            bag.extend(new);
        }
    }

    /// Looks up the entry for the trigger (t, h) and returns the atoms it
    /// currently contributes over the frontier terms.
    fn child(
        &mut self,
        t: &Tgd,
        h: &[u32],
        bag: &BTreeSet<LAtom>,
        owner: usize,
    ) -> Result<Vec<LAtom>> {
        let mut to_child: HashMap<u32, u32> = HashMap::new();
        let mut back: Vec<Option<u32>> = Vec::new();
        let mut fresh: HashMap<Var, u32> = HashMap::new();
        let mut key: Vec<LAtom> = Vec::new();
        for a in t.head() {
            let mut args = Vec::with_capacity(a.args.len());
            for &v in &a.args {
                let hv = h[v.index()];
                let id = if hv != u32::MAX {
                    *to_child.entry(hv).or_insert_with(|| {
                        back.push(Some(hv));
                        back.len() as u32 - 1
                    })
                } else {
                    *fresh.entry(v).or_insert_with(|| {
                        back.push(None);
                        back.len() as u32 - 1
                    })
                };
                args.push(id);
            }
            key.push(Atom { pred: a.pred, args });
        }
        for a in bag {
            if let Some(args) = a
                .args
                .iter()
                .map(|x| to_child.get(x).copied())
                .collect::<Option<Vec<u32>>>()
            {
                key.push(Atom { pred: a.pred, args });
            }
        }
        key.sort();
        key.dedup();
        let id = match self.table.get(&key) {
            Some(&id) => id,
            None => {
                if self.entries.len() >= self.budget {
                    return Err(Error::BudgetExceeded {
                        what: "type saturation table",
                        budget: self.budget,
                    });
                }
                let id = self.entries.len();
                self.table.insert(key.clone(), id);
                self.entries.push(Entry {
                    key,
                    enrich: BTreeSet::new(),
                    parents: BTreeSet::new(),
                });
                self.queued.push(false);
                self.enqueue(id);
                id
            }
        };
        if owner != ROOT {
            self.entries[id].parents.insert(owner);
        }
        let e = &self.entries[id];
        Ok(e.key
            .iter()
            .chain(e.enrich.iter())
            .filter_map(|a| {
                let args = a
                    .args
                    .iter()
                    .map(|&i| back[i as usize])
                    .collect::<Option<Vec<u32>>>()?;
                Some(Atom { pred: a.pred, args })
            })
            .collect())
    }
}

fn match_guard(g: &Atom<Var>, a: &LAtom, num_vars: usize) -> Option<Vec<u32>> {
    let mut h = vec![u32::MAX; num_vars];
    for (&v, &x) in g.args.iter().zip(&a.args) {
        let slot = &mut h[v.index()];
        if *slot == u32::MAX {
            *slot = x;
        } else if *slot != x {
            return None;
        }
    }
    Some(h)
}

fn map_atom(a: &Atom<Var>, h: &[u32]) -> LAtom {
    Atom {
        pred: a.pred,
        args: a.args.iter().map(|v| h[v.index()]).collect(),
    }
}

/// Which engine produced a completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompletionEngine {
    Chase,
    Saturation,
}

/// The chase atoms over the constants of `db`. Runs the chase first and
/// falls back to type saturation when the chase exceeds `opts`.
pub fn completion(
    db: &Database,
    p: &Program,
    opts: ChaseOptions,
    table_budget: usize,
) -> Result<(Database, CompletionEngine)> {
    let class = p.classify();
    if class > Class::Guarded {
        return Err(Error::WrongClass {
            expected: Class::Guarded,
            found: class,
        });
    }
    let out = run_chase(db, p, opts)?;
    if out.finished() {
        let arena = out.instance.arena();
        let facts = out
            .instance
            .atoms()
            .iter()
            .filter(|a| a.args.iter().all(|&t| !arena.is_null(t)))
            .map(|a| Atom {
                pred: a.pred,
                args: a.args.iter().map(|&t| constant_of(arena, t)).collect(),
            })
            .collect();
        return Ok((facts, CompletionEngine::Chase));
    }
    Ok((
        completion_by_saturation(db, p, table_budget)?,
        CompletionEngine::Saturation,
    ))
}

fn constant_of(arena: &crate::chase::TermArena, t: TermId) -> Symbol {
    match arena.get(t) {
        crate::chase::TermData::Const(c) => *c,
        crate::chase::TermData::Null { .. } => unreachable!("filtered out"),
    }
}

pub fn completion_by_saturation(
    db: &Database,
    p: &Program,
    table_budget: usize,
) -> Result<Database> {
    let mut sat = Saturator::new(p, table_budget)?;
    let facts: Vec<Fact> = db.facts().cloned().collect();
    Ok(sat.complete_atoms(&facts)?.into_iter().collect())
}

/// Types of atoms of a set, by restricting it to the terms of each atom.
struct TypeIndex<'a, T> {
    atoms: &'a [Atom<T>],
    by_term: HashMap<T, Vec<usize>>,
    nullary: Vec<usize>,
}

impl<'a, T: Clone + Eq + Hash + Debug> TypeIndex<'a, T> {
    fn new(atoms: &'a [Atom<T>]) -> Self {
        let mut by_term: HashMap<T, Vec<usize>> = HashMap::new();
        let mut nullary = Vec::new();
        for (i, a) in atoms.iter().enumerate() {
            if a.args.is_empty() {
                nullary.push(i);
            }
            let mut seen = HashSet::new();
            for t in &a.args {
                if seen.insert(t) {
                    by_term.entry(t.clone()).or_default().push(i);
                }
            }
        }
        TypeIndex {
            atoms,
            by_term,
            nullary,
        }
    }

    fn type_of(&self, a: &Atom<T>) -> Result<SigmaType> {
        let terms: HashSet<&T> = a.args.iter().collect();
        let mut idx: BTreeSet<usize> = self.nullary.iter().copied().collect();
        for t in &terms {
            idx.extend(self.by_term.get(*t).into_iter().flatten().copied());
        }
        let side = idx
            .into_iter()
            .map(|i| &self.atoms[i])
            .filter(|b| b.args.iter().all(|t| terms.contains(t)))
            .cloned();
        canonical_type(a, side)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LinOptions {
    /// Enumerate every type over the guard predicates instead of the types
    /// reachable from the database.
    pub full_type_enum: bool,
    pub type_budget: usize,
    pub table_budget: usize,
}

impl Default for LinOptions {
    fn default() -> Self {
        LinOptions {
            full_type_enum: false,
            type_budget: DEFAULT_TYPE_BUDGET,
            table_budget: DEFAULT_TABLE_BUDGET,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Linearized {
    pub db: Database,
    pub program: Program,
    /// Every type predicate occurring in `db` or `program`.
    pub types: BTreeMap<Symbol, SigmaType>,
}

impl Linearized {
    /// Name → {guard, side} table for the type predicates.
    pub fn type_table_json(&self) -> serde_json::Value {
        let table: serde_json::Map<String, serde_json::Value> = self
            .types
            .iter()
            .map(|(name, t)| {
                let side: Vec<String> = t.side.iter().map(render_int_atom).collect();
                (
                    name.as_str().to_owned(),
                    json!({ "guard": render_int_atom(&t.guard), "side": side }),
                )
            })
            .collect();
        serde_json::Value::Object(table)
    }
}

/// The type of every database fact over the program's schema, in database order.
pub fn database_types(
    db: &Database,
    p: &Program,
    sat: &mut Saturator<'_>,
) -> Result<Vec<(Fact, Option<SigmaType>)>> {
    db.check_arities(p)?;
    let own: Vec<Fact> = db
        .facts()
        .filter(|f| p.arity(f.pred).is_some())
        .cloned()
        .collect();
    let comp = sat.complete_atoms(&own)?;
    let index = TypeIndex::new(&comp);
    db.facts()
        .map(|f| {
            let ty = if p.arity(f.pred).is_some() {
                Some(index.type_of(f)?)
            } else {
                None
            };
            Ok((f.clone(), ty))
        })
        .collect()
}

/// The linearization of `t` induced by `ty`, with the child types it uses.
/// None when no homomorphism maps the body into `atoms(ty)` with guard onto guard.
pub fn linearize_tgd(
    p: &Program,
    index: usize,
    ty: &SigmaType,
    sat: &mut Saturator<'_>,
    id: Symbol,
) -> Result<Option<(Tgd, Vec<SigmaType>)>> {
    let t = p.tgd(index);
    let g = t.guard_atom().expect("guarded program");
    if g.pred != ty.guard.pred || g.args.len() != ty.guard.args.len() {
        return Ok(None);
    }
    let Some(h) = match_guard(g, &ty.guard, t.num_vars()) else {
        return Ok(None);
    };
    if !t.body().iter().all(|b| ty.contains(&map_atom(b, &h))) {
        return Ok(None);
    }
    let k = ty.arity();
    let mut names = Vec::with_capacity(k + t.existentials().len());
    let mut rep = vec![Var(u32::MAX); k + 1];
    for &v in &g.args {
        let i = h[v.index()] as usize;
        if rep[i] == Var(u32::MAX) {
            rep[i] = Var(names.len() as u32);
            names.push(t.var_name(v));
        }
    }
    let mut var_map = vec![Var(u32::MAX); t.num_vars()];
    for v in t.body_vars() {
        var_map[v.index()] = rep[h[v.index()] as usize];
    }
    let ar = p.max_arity() as u32;
    let mut f = h.clone();
    for (i, &z) in t.existentials().iter().enumerate() {
        var_map[z.index()] = Var(names.len() as u32);
        names.push(t.var_name(z));
        f[z.index()] = ar + 1 + i as u32;
    }
    let alphas: Vec<LAtom> = t.head().iter().map(|a| map_atom(a, &f)).collect();
    let comp: Vec<LAtom> = sat
        .complete(alphas.iter().cloned().chain(ty.atoms().cloned()))?
        .into_iter()
        .collect();
    let cindex = TypeIndex::new(&comp);
    let mut children = Vec::with_capacity(alphas.len());
    let mut head = Vec::with_capacity(alphas.len());
    for (a, alpha) in t.head().iter().zip(&alphas) {
        let child = cindex.type_of(alpha)?;
        let mapped: Vec<Var> = a.args.iter().map(|v| var_map[v.index()]).collect();
        head.push(Atom {
            pred: child.name(),
            args: unique_and_id(&mapped).0,
        });
        children.push(child);
    }
    let body = vec![Atom {
        pred: ty.name(),
        args: (0..k as u32).map(Var).collect(),
    }];
    let tgd = Tgd::new(id, names, body, head)?.with_origin(Origin {
        source: index,
        var_map,
    });
    Ok(Some((tgd, children)))
}

pub fn linearize_program(db: &Database, p: &Program, opts: LinOptions) -> Result<Linearized> {
    let class = p.classify();
    if class > Class::Guarded {
        return Err(Error::WrongClass {
            expected: Class::Guarded,
            found: class,
        });
    }
    let mut sat = Saturator::new(p, opts.table_budget)?;
    let mut types: BTreeMap<Symbol, SigmaType> = BTreeMap::new();
    let mut out_db = Database::new();
    let mut queue: VecDeque<SigmaType> = VecDeque::new();
    let mut seen: HashSet<SigmaType> = HashSet::new();
    for (f, ty) in database_types(db, p, &mut sat)? {
        match ty {
            Some(ty) => {
                out_db.insert(Atom {
                    pred: ty.name(),
                    args: unique_and_id(&f.args).0,
                });
                types.insert(ty.name(), ty.clone());
                if seen.insert(ty.clone()) {
                    queue.push_back(ty);
                }
            }
            None => {
                out_db.insert(f);
            }
        }
    }
    if opts.full_type_enum {
        queue = all_guard_types(p, opts.type_budget)?.into();
    }
    let expand = !opts.full_type_enum;
    let mut counters = vec![0usize; p.len()];
    let mut tgds = Vec::new();
    while let Some(ty) = queue.pop_front() {
        types.insert(ty.name(), ty.clone());
        for (i, counter) in counters.iter_mut().enumerate() {
            let id = Symbol::new(&format!("{}@{}", p.tgd(i).id(), *counter + 1));
            let Some((tgd, children)) = linearize_tgd(p, i, &ty, &mut sat, id)? else {
                continue;
            };
            *counter += 1;
            tgds.push(tgd);
            for c in children {
                types.insert(c.name(), c.clone());
                if expand && seen.insert(c.clone()) {
                    if seen.len() > opts.type_budget {
                        return Err(Error::BudgetExceeded {
                            what: "type enumeration",
                            budget: opts.type_budget,
                        });
                    }
                    queue.push_back(c);
                }
            }
        }
    }
    Ok(Linearized {
        db: out_db,
        program: Program::new(tgds)?,
        types,
    })
}

/// Every type whose guard predicate is the guard predicate of some TGD.
fn all_guard_types(p: &Program, budget: usize) -> Result<Vec<SigmaType>> {
    let guard_preds: BTreeSet<Symbol> = p
        .tgds()
        .iter()
        .filter_map(|t| t.guard_atom())
        .map(|g| g.pred)
        .collect();
    let over = || Error::BudgetExceeded {
        what: "type enumeration",
        budget,
    };
    let mut out = Vec::new();
    for r in guard_preds {
        let n = p.schema()[&r];
        for shape in specializations(n, n.max(1))? {
            let ints = unique_and_id(&shape).1;
            let guard = Atom {
                pred: r,
                args: ints,
            };
            let k = guard.args.iter().copied().max().unwrap_or(0);
            let mut base = Vec::new();
            for (&q, &m) in p.schema() {
                let total = (k as usize).checked_pow(m as u32).ok_or_else(over)?;
                if total > budget {
                    return Err(over());
                }
                for mut code in 0..total {
                    let mut args = Vec::with_capacity(m);
                    for _ in 0..m {
                        args.push((code % k as usize) as u32 + 1);
                        code /= k as usize;
                    }
                    let a = Atom { pred: q, args };
                    if a != guard {
                        base.push(a);
                    }
                }
            }
            if base.len() >= 63 || out.len() + (1usize << base.len()) > budget {
                return Err(over());
            }
            for mask in 0u64..(1u64 << base.len()) {
                let side = base
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| mask >> i & 1 == 1)
                    .map(|(_, a)| a.clone())
                    .collect();
                out.push(SigmaType {
                    guard: guard.clone(),
                    side,
                });
            }
        }
    }
    Ok(out)
}

/// Runs both chases and checks the equivalence-up-to-linearization classes.
pub fn el_partition(
    db: &Database,
    p: &Program,
    opts: ChaseOptions,
    lin_opts: LinOptions,
) -> Result<PartitionReport> {
    let lin = linearize_program(db, p, lin_opts)?;
    let left = run_chase(db, p, opts)?;
    if !left.finished() {
        return Err(Error::ChaseCapExceeded("original"));
    }
    let right = run_chase(&lin.db, &lin.program, opts)?;
    if !right.finished() {
        return Err(Error::ChaseCapExceeded("linearized"));
    }
    let atoms: Vec<Atom<TermId>> = left
        .instance
        .atoms()
        .iter()
        .map(|a| Atom {
            pred: a.pred,
            args: a.args.to_vec(),
        })
        .collect();
    let own: Vec<Atom<TermId>> = atoms
        .iter()
        .filter(|a| p.arity(a.pred).is_some())
        .cloned()
        .collect();
    let index = TypeIndex::new(&own);
    let classes = {
        let mut ctx = EquivCtx {
            left: &left.instance,
            right: &right.instance,
            lp: p,
            rp: &lin.program,
            memo: HashMap::new(),
        };
        let mut classes: Vec<Vec<AtomId>> = Vec::with_capacity(atoms.len());
        for a in &atoms {
            let (name, args) = if p.arity(a.pred).is_some() {
                (index.type_of(a)?.name(), unique_and_id(&a.args).0)
            } else {
                (a.pred, a.args.clone())
            };
            let mut class = Vec::new();
            for &b in right.instance.with_pred(name) {
                let bargs = &right.instance.atom(b).args;
                let shape_ok =
                    p.arity(a.pred).is_none() || unique_and_id(bargs).0.len() == bargs.len();
                if shape_ok
                    && args.len() == bargs.len()
                    && args
                        .iter()
                        .zip(bargs.iter())
                        .all(|(&t, &u)| ctx.terms(t, u))
                {
                    class.push(b);
                }
            }
            classes.push(class);
        }
        classes
    };
    Ok(PartitionReport::check(left, right, classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fact;
    use crate::text::{parse_program, render_tgd};

    fn ia(p: &str, args: &[u32]) -> LAtom {
        Atom::new(p, args.to_vec())
    }

    fn ty(guard: LAtom, side: &[LAtom]) -> SigmaType {
        SigmaType {
            guard,
            side: side.iter().cloned().collect(),
        }
    }

    const EXAMPLE: &str = "R(a,a,b,c).
        P(X,Y,X,U,W), S(X,U) -> exists Z1,Z2: R(U,Y,X,Z1), T(Z1,Z2,X).
        R(X,X,Y,Z) -> Q(X,Z).";

    #[test]
    fn canonical_relabels_by_first_occurrence() {
        let t = canonical_type(&ia("R", &[2, 2, 4, 1]), []).unwrap();
        assert_eq!(t.guard, ia("R", &[1, 1, 2, 3]));
        let t2 = canonical_type(&t.guard, []).unwrap();
        assert_eq!(t2, t);
        let t3 = canonical_type(&fact("P", &["b", "a", "b"]), [fact("S", &["a"])]).unwrap();
        assert_eq!(t3, ty(ia("P", &[1, 2, 1]), &[ia("S", &[2])]));
        assert!(matches!(
            canonical_type(&fact("P", &["a"]), [fact("S", &["c"])]),
            Err(Error::ForeignTerm(_))
        ));
    }

    #[test]
    fn type_names_are_stable_and_distinct() {
        let a = ty(ia("R", &[1, 1, 2, 3]), &[ia("Q", &[1, 3])]);
        let b = ty(ia("R", &[1, 1, 2, 3]), &[]);
        assert_eq!(a.name(), a.clone().name());
        assert_ne!(a.name(), b.name());
        assert!(a.name().as_str().starts_with("[tau#"));
        assert_eq!(a.render(), "(R(1,1,2,3), {Q(1,3)})");
        assert_eq!(
            a.instantiate(&["a", "b", "c"]),
            vec![
                Atom::new("R", vec!["a", "a", "b", "c"]),
                Atom::new("Q", vec!["a", "c"])
            ]
        );
    }

    #[test]
    fn completion_of_example_database() {
        let sp = parse_program(EXAMPLE).unwrap();
        for budget in [0, 100] {
            let opts = ChaseOptions::new(budget.max(1));
            let (c, _) = completion(&sp.db, &sp.program, opts, 1000).unwrap();
            let got: BTreeSet<Fact> = c.facts().cloned().collect();
            assert_eq!(
                got,
                BTreeSet::from([fact("R", &["a", "a", "b", "c"]), fact("Q", &["a", "c"])])
            );
        }
    }

    #[test]
    fn completion_through_a_null() {
        let sp = parse_program("R(a). R(X) -> exists Z: P(X,Z). P(X,Z) -> Q(X).").unwrap();
        let (a, ea) = completion(&sp.db, &sp.program, ChaseOptions::new(100), 1000).unwrap();
        assert_eq!(ea, CompletionEngine::Chase);
        let b = completion_by_saturation(&sp.db, &sp.program, 1000).unwrap();
        let want = BTreeSet::from([fact("R", &["a"]), fact("Q", &["a"])]);
        assert_eq!(a.facts().cloned().collect::<BTreeSet<_>>(), want);
        assert_eq!(b.facts().cloned().collect::<BTreeSet<_>>(), want);
    }

    #[test]
    fn saturation_handles_infinite_chase() {
        // The chase is infinite; the atom over the database terms appears two levels down.
        let sp = parse_program(
            "E(a). E(X) -> exists Y: F(X,Y). F(X,Y) -> exists Z: F(Y,Z). F(X,Y) -> K(X). F(X,Y), K(Y) -> H(X).",
        )
        .unwrap();
        let (c, e) = completion(&sp.db, &sp.program, ChaseOptions::new(50), 1000).unwrap();
        assert_eq!(e, CompletionEngine::Saturation);
        assert_eq!(
            c.facts().cloned().collect::<BTreeSet<_>>(),
            BTreeSet::from([fact("E", &["a"]), fact("K", &["a"]), fact("H", &["a"])])
        );
    }

    #[test]
    fn saturation_budget() {
        let sp = parse_program("E(a). E(X) -> exists Y: E(Y), F(X,Y).").unwrap();
        let err = completion_by_saturation(&sp.db, &sp.program, 0).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn linearized_example_database() {
        let sp = parse_program(EXAMPLE).unwrap();
        let lin = linearize_program(&sp.db, &sp.program, LinOptions::default()).unwrap();
        let tau = ty(ia("R", &[1, 1, 2, 3]), &[ia("Q", &[1, 3])]);
        let facts: Vec<Fact> = lin.db.facts().cloned().collect();
        assert_eq!(
            facts,
            vec![Atom {
                pred: tau.name(),
                args: fact("X", &["a", "b", "c"]).args
            }]
        );
        assert_eq!(lin.types[&tau.name()], tau);
    }

    #[test]
    fn linearized_example_tgd() {
        let sp = parse_program(EXAMPLE).unwrap();
        let mut sat = Saturator::new(&sp.program, 1000).unwrap();
        let tau = ty(
            ia("P", &[1, 2, 1, 2, 3]),
            &[ia("S", &[1, 2]), ia("S", &[1, 1])],
        );
        let (tgd, children) = linearize_tgd(&sp.program, 0, &tau, &mut sat, Symbol::new("s"))
            .unwrap()
            .unwrap();
        let tau1 = ty(
            ia("R", &[1, 1, 2, 3]),
            &[ia("S", &[2, 1]), ia("S", &[2, 2]), ia("Q", &[1, 3])],
        );
        // S(1,1) lies over the terms of the second head atom, so it stays in its type.
        let tau2 = ty(ia("T", &[1, 2, 3]), &[ia("S", &[3, 3])]);
        assert_eq!(children, vec![tau1.clone(), tau2.clone()]);
        let want = format!(
            "'{}'(X,Y,W) -> exists Z1,Z2: '{}'(Y,X,Z1), '{}'(Z1,Z2,X).",
            tau.name(),
            tau1.name(),
            tau2.name()
        );
        assert_eq!(render_tgd(&tgd), want);
        assert_eq!(tgd.origin().unwrap().source, 0);
        assert!(
            linearize_tgd(&sp.program, 1, &tau, &mut sat, Symbol::new("s"))
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn linearize_without_rules() {
        let sp = parse_program("R(a,b). S(a).").unwrap();
        let lin = linearize_program(&sp.db, &sp.program, LinOptions::default()).unwrap();
        assert!(lin.program.is_empty());
        // Without rules the schema is empty, so every fact is carried through.
        assert_eq!(lin.db, sp.db);
        let r = el_partition(
            &sp.db,
            &sp.program,
            ChaseOptions::new(10),
            LinOptions::default(),
        )
        .unwrap();
        assert!(r.verified());
    }

    #[test]
    fn el_partition_single_null() {
        let sp = parse_program("R(a). R(X) -> exists Z: P(X,Z).").unwrap();
        let r = el_partition(
            &sp.db,
            &sp.program,
            ChaseOptions::new(100),
            LinOptions::default(),
        )
        .unwrap();
        assert_eq!(r.left.len(), 2);
        assert!(r.verified(), "{r:?}");
        assert_eq!(r.left.instance.atom_depth(1), 1);
        assert_eq!(r.right.instance.atom_depth(r.classes[1][0]), 1);
    }

    #[test]
    fn el_partition_example() {
        let src = format!("{EXAMPLE} P(a,b,a,b,c). S(a,b). S(a,a).");
        let sp = parse_program(&src).unwrap();
        let r = el_partition(
            &sp.db,
            &sp.program,
            ChaseOptions::new(100),
            LinOptions::default(),
        )
        .unwrap();
        assert!(r.verified(), "{r:?}");
        assert_eq!(r.left.max_depth(), 1);
        assert_eq!(r.right.max_depth(), 1);
    }

    #[test]
    fn linear_output() {
        let sp = parse_program("R(a,b). R(X,Y), S(Y) -> exists Z: R(Y,Z), S(Z). R(X,Y) -> S(Y).")
            .unwrap();
        let lin = linearize_program(&sp.db, &sp.program, LinOptions::default()).unwrap();
        assert!(lin.program.classify() <= Class::Linear);
        let a = run_chase(&sp.db, &sp.program, ChaseOptions::new(200)).unwrap();
        let b = run_chase(&lin.db, &lin.program, ChaseOptions::new(200)).unwrap();
        assert_eq!(a.finished(), b.finished());
    }

    #[test]
    fn full_enumeration_budget() {
        let sp = parse_program("R(a). R(X) -> S(X).").unwrap();
        let opts = LinOptions {
            full_type_enum: true,
            ..LinOptions::default()
        };
        let lin = linearize_program(&sp.db, &sp.program, opts).unwrap();
        // Guard R(1) with side atoms from {S(1)}: two types, one rule each.
        assert_eq!(lin.program.len(), 2);
        let tight = LinOptions {
            full_type_enum: true,
            type_budget: 1,
            ..LinOptions::default()
        };
        assert!(matches!(
            linearize_program(&sp.db, &sp.program, tight),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
