//! The semi-oblivious chase.
//!
//! Nulls are interned structurally: the null invented for an existential
//! variable depends only on the TGD, the frontier binding and the variable, so
//! two triggers that agree on the frontier produce the same result.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Atom, Class, Database, Fact, NullTerm, Program, Term, Tgd, Var};
use crate::symbol::Symbol;
use crate::text::{render_atom_with, render_const};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub u32);

const UNBOUND: TermId = TermId(u32::MAX);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TermData {
    Const(Symbol),
    Null {
        tgd: u32,
        binding: Box<[TermId]>,
        var: Var,
    },
}

/// Hash-consed storage for the constants and nulls of one chase run.
#[derive(Clone, Debug, Default)]
pub struct TermArena {
    data: Vec<TermData>,
    depth: Vec<u32>,
    null_seq: Vec<u32>,
    map: HashMap<TermData, TermId>,
    nulls: u32,
}

impl TermArena {
    pub fn constant(&mut self, c: Symbol) -> TermId {
        self.intern(TermData::Const(c))
    }

    pub fn null(&mut self, tgd: u32, binding: Box<[TermId]>, var: Var) -> TermId {
        self.intern(TermData::Null { tgd, binding, var })
    }

    fn intern(&mut self, d: TermData) -> TermId {
        if let Some(&id) = self.map.get(&d) {
            return id;
        }
        let (depth, seq) = match &d {
            TermData::Const(_) => (0, 0),
            TermData::Null { binding, .. } => {
                self.nulls += 1;
                (
                    1 + binding
                        .iter()
                        .map(|t| self.depth[t.0 as usize])
                        .max()
                        .unwrap_or(0),
                    self.nulls,
                )
            }
        };
        let id = TermId(self.data.len() as u32);
        self.data.push(d.clone());
        self.depth.push(depth);
        self.null_seq.push(seq);
        self.map.insert(d, id);
        id
    }

    pub fn find(&self, d: &TermData) -> Option<TermId> {
        self.map.get(d).copied()
    }

    pub fn find_constant(&self, c: Symbol) -> Option<TermId> {
        self.find(&TermData::Const(c))
    }

    pub fn get(&self, id: TermId) -> &TermData {
        &self.data[id.0 as usize]
    }

    pub fn depth(&self, id: TermId) -> u32 {
        self.depth[id.0 as usize]
    }

    pub fn is_null(&self, id: TermId) -> bool {
        matches!(self.get(id), TermData::Null { .. })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Constants render in rule syntax; nulls as `_:n<k>` numbered by creation.
    pub fn label(&self, id: TermId) -> String {
        match self.get(id) {
            TermData::Const(c) => render_const(*c),
            TermData::Null { .. } => format!("_:n{}", self.null_seq[id.0 as usize]),
        }
    }

    /// Fully structured value of a term.
    pub fn to_term(&self, id: TermId, p: &Program) -> Term {
        let mut memo = HashMap::new();
        self.to_term_memo(id, p, &mut memo)
    }

    fn to_term_memo(&self, id: TermId, p: &Program, memo: &mut HashMap<TermId, Term>) -> Term {
        if let Some(t) = memo.get(&id) {
            return t.clone();
        }
        let t = match self.get(id) {
            TermData::Const(c) => Term::Constant(*c),
            TermData::Null { tgd, binding, var } => {
                let tgd = p.tgd(*tgd as usize);
                let binding = tgd
                    .frontier()
                    .iter()
                    .zip(binding.iter())
                    .map(|(&x, &u)| (tgd.var_name(x), self.to_term_memo(u, p, memo)))
                    .collect();
                Term::Null(Arc::new(NullTerm {
                    tgd: tgd.id(),
                    binding,
                    var: tgd.var_name(*var),
                }))
            }
        };
        memo.insert(id, t.clone());
        t
    }
}

pub type AtomId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundAtom {
    pub pred: Symbol,
    pub args: Box<[TermId]>,
}

/// A set of ground atoms in insertion order with join indexes.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    arena: TermArena,
    atoms: Vec<GroundAtom>,
    depth: Vec<u32>,
    index: HashMap<GroundAtom, AtomId>,
    by_pred: HashMap<Symbol, Vec<AtomId>>,
    by_pos: HashMap<(Symbol, u32, TermId), Vec<AtomId>>,
    max_depth: u32,
}

impl Instance {
    pub fn from_database(db: &Database) -> Instance {
        let mut inst = Instance::default();
        for f in db.facts() {
            let args = f.args.iter().map(|&c| inst.arena.constant(c)).collect();
            inst.insert(GroundAtom { pred: f.pred, args });
        }
        inst
    }

    /// Adds an atom; returns its id, or None when it was already present.
    pub fn insert(&mut self, a: GroundAtom) -> Option<AtomId> {
        if self.index.contains_key(&a) {
            return None;
        }
        let id = self.atoms.len() as AtomId;
        let d = a
            .args
            .iter()
            .map(|&t| self.arena.depth(t))
            .max()
            .unwrap_or(0);
        self.max_depth = self.max_depth.max(d);
        self.by_pred.entry(a.pred).or_default().push(id);
        for (i, &t) in a.args.iter().enumerate() {
            self.by_pos
                .entry((a.pred, i as u32, t))
                .or_default()
                .push(id);
        }
        self.depth.push(d);
        self.index.insert(a.clone(), id);
        self.atoms.push(a);
        Some(id)
    }

    pub fn arena(&self) -> &TermArena {
        &self.arena
    }
    pub fn arena_mut(&mut self) -> &mut TermArena {
        &mut self.arena
    }
    pub fn len(&self) -> usize {
        self.atoms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }
    pub fn atom(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id as usize]
    }
    pub fn id_of(&self, a: &GroundAtom) -> Option<AtomId> {
        self.index.get(a).copied()
    }
    pub fn contains(&self, a: &GroundAtom) -> bool {
        self.index.contains_key(a)
    }
    pub fn atom_depth(&self, id: AtomId) -> u32 {
        self.depth[id as usize]
    }
    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }
    pub fn with_pred(&self, pred: Symbol) -> &[AtomId] {
        self.by_pred.get(&pred).map(Vec::as_slice).unwrap_or(&[])
    }
    pub fn with_term_at(&self, pred: Symbol, pos: usize, t: TermId) -> &[AtomId] {
        self.by_pos
            .get(&(pred, pos as u32, t))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Looks up a fact of the database this instance was built from.
    pub fn fact_id(&self, f: &Fact) -> Option<AtomId> {
        let args = f
            .args
            .iter()
            .map(|&c| self.arena.find_constant(c))
            .collect::<Option<Box<[_]>>>()?;
        self.id_of(&GroundAtom { pred: f.pred, args })
    }

    pub fn render_atom(&self, id: AtomId) -> String {
        let a = self.atom(id);
        render_atom_with(a.pred, a.args.iter().map(|&t| self.arena.label(t)))
    }

    /// The atoms as structured values, comparable across runs.
    pub fn structural_atoms(&self, p: &Program) -> HashSet<Atom<Term>> {
        let mut memo = HashMap::new();
        self.atoms
            .iter()
            .map(|a| Atom {
                pred: a.pred,
                args: a
                    .args
                    .iter()
                    .map(|&t| self.arena.to_term_memo(t, p, &mut memo))
                    .collect(),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Fifo,
    Lifo,
    Random(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    pub max_atoms: usize,
    pub max_steps: usize,
    /// Stop as soon as an atom deeper than this appears.
    pub max_depth: Option<u32>,
}

impl Caps {
    /// Caps with the default step budget of ten steps per atom.
    pub fn atoms(max_atoms: usize) -> Caps {
        Caps {
            max_atoms,
            max_steps: max_atoms.saturating_mul(10),
            max_depth: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChaseOptions {
    pub caps: Caps,
    pub strategy: Strategy,
    pub keep_log: bool,
    /// Record the guarded chase forest (ignored for non-guarded programs).
    pub forest: bool,
}

impl ChaseOptions {
    pub fn new(max_atoms: usize) -> ChaseOptions {
        ChaseOptions {
            caps: Caps::atoms(max_atoms),
            strategy: Strategy::Fifo,
            keep_log: false,
            forest: false,
        }
    }
    pub fn strategy(mut self, s: Strategy) -> Self {
        self.strategy = s;
        self
    }
    pub fn with_log(mut self) -> Self {
        self.keep_log = true;
        self
    }
    pub fn with_forest(mut self) -> Self {
        self.forest = true;
        self
    }
    pub fn max_steps(mut self, n: usize) -> Self {
        self.caps.max_steps = n;
        self
    }
    pub fn max_depth(mut self, d: u32) -> Self {
        self.caps.max_depth = Some(d);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapKind {
    Atoms,
    Steps,
    Depth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChaseStatus {
    Finished,
    CapExceeded { which: CapKind, caps: Caps },
}

/// A TGD index with the images of its variables (existential slots unbound).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trigger {
    pub tgd: usize,
    pub hom: Box<[TermId]>,
}

impl Trigger {
    pub fn image(&self, v: Var) -> TermId {
        self.hom[v.index()]
    }
}

#[derive(Clone, Debug)]
pub struct ChaseOutcome {
    pub status: ChaseStatus,
    pub instance: Instance,
    pub steps: usize,
    pub db_len: usize,
    pub log: Vec<Trigger>,
    /// Producing atom (guard image) for every atom; None for database atoms.
    pub parent: Option<Vec<Option<AtomId>>>,
}

impl ChaseOutcome {
    pub fn finished(&self) -> bool {
        self.status == ChaseStatus::Finished
    }
    pub fn max_depth(&self) -> u32 {
        self.instance.max_depth()
    }
    pub fn len(&self) -> usize {
        self.instance.len()
    }
    pub fn is_empty(&self) -> bool {
        self.instance.is_empty()
    }
}

/// Computes result(σ,h): frontier images through h, existentials to their nulls.
pub fn result_of_trigger(arena: &mut TermArena, p: &Program, t: &Trigger) -> Vec<GroundAtom> {
    let tgd = p.tgd(t.tgd);
    let binding: Box<[TermId]> = tgd.frontier().iter().map(|&v| t.image(v)).collect();
    let mut img = t.hom.to_vec();
    img.resize(tgd.num_vars(), UNBOUND);
    for &z in tgd.existentials() {
        img[z.index()] = arena.null(t.tgd as u32, binding.clone(), z);
    }
    tgd.head()
        .iter()
        .map(|a| GroundAtom {
            pred: a.pred,
            args: a.args.iter().map(|v| img[v.index()]).collect(),
        })
        .collect()
}

/// True iff some atom of result(σ,h) is missing from the instance.
fn is_active(inst: &Instance, p: &Program, t: &Trigger) -> bool {
    let tgd = p.tgd(t.tgd);
    let binding: Box<[TermId]> = tgd.frontier().iter().map(|&v| t.image(v)).collect();
    let mut img = t.hom.to_vec();
    img.resize(tgd.num_vars(), UNBOUND);
    for &z in tgd.existentials() {
        match inst.arena.find(&TermData::Null {
            tgd: t.tgd as u32,
            binding: binding.clone(),
            var: z,
        }) {
            Some(n) => img[z.index()] = n,
            None => return true,
        }
    }
    tgd.head().iter().any(|a| {
        !inst.contains(&GroundAtom {
            pred: a.pred,
            args: a.args.iter().map(|v| img[v.index()]).collect(),
        })
    })
}

/// Join order for the body atoms other than `k`: greedily the atom with the
/// most already-bound variables, the guard winning ties.
fn plan(tgd: &Tgd, k: usize) -> Vec<usize> {
    let mut bound: HashSet<Var> = tgd.body()[k].args.iter().copied().collect();
    let mut rest: Vec<usize> = (0..tgd.body().len()).filter(|&j| j != k).collect();
    let mut order = Vec::new();
    while !rest.is_empty() {
        let score = |j: usize| {
            let a = &tgd.body()[j];
            let b = a.args.iter().filter(|v| bound.contains(v)).count();
            (b, tgd.guard() == Some(j), std::cmp::Reverse(j))
        };
        let best = *rest.iter().max_by_key(|&&j| score(j)).unwrap();
        rest.retain(|&j| j != best);
        bound.extend(tgd.body()[best].args.iter().copied());
        order.push(best);
    }
    order
}

fn unify(pattern: &[Var], args: &[TermId], binding: &mut [TermId], trail: &mut Vec<usize>) -> bool {
    let mark = trail.len();
    for (v, &t) in pattern.iter().zip(args) {
        let slot = &mut binding[v.index()];
        if *slot == UNBOUND {
            *slot = t;
            trail.push(v.index());
        } else if *slot != t {
            for &i in &trail[mark..] {
                binding[i] = UNBOUND;
            }
            trail.truncate(mark);
            return false;
        }
    }
    true
}

struct Search<'a> {
    inst: &'a Instance,
    tgd: &'a Tgd,
    k: usize,
    delta: AtomId,
    order: &'a [usize],
    out: &'a mut Vec<Box<[TermId]>>,
}

impl Search<'_> {
    fn run(&mut self, pos: usize, binding: &mut Vec<TermId>, trail: &mut Vec<usize>) {
        if pos == self.order.len() {
            self.out.push(binding.clone().into_boxed_slice());
            return;
        }
        let j = self.order[pos];
        let pat = &self.tgd.body()[j];
        let limit = if j < self.k {
            self.delta
        } else {
            self.delta + 1
        };
        let mut cands = self.inst.with_pred(pat.pred);
        for (i, v) in pat.args.iter().enumerate() {
            let t = binding[v.index()];
            if t != UNBOUND {
                let l = self.inst.with_term_at(pat.pred, i, t);
                if l.len() < cands.len() {
                    cands = l;
                }
            }
        }
        let end = cands.partition_point(|&id| id < limit);
        for &id in &cands[..end] {
            let mark = trail.len();
            if unify(&pat.args, &self.inst.atom(id).args, binding, trail) {
                self.run(pos + 1, binding, trail);
                for &i in &trail[mark..] {
                    binding[i] = UNBOUND;
                }
                trail.truncate(mark);
            }
        }
    }
}

enum Pending {
    Queue(VecDeque<Trigger>),
    Random(Vec<Trigger>, Box<ChaCha8Rng>),
}

impl Pending {
    fn push(&mut self, t: Trigger) {
        match self {
            Pending::Queue(q) => q.push_back(t),
            Pending::Random(v, _) => v.push(t),
        }
    }
    fn pop(&mut self, s: Strategy) -> Option<Trigger> {
        match self {
            Pending::Queue(q) if s == Strategy::Lifo => q.pop_back(),
            Pending::Queue(q) => q.pop_front(),
            Pending::Random(v, rng) => {
                if v.is_empty() {
                    None
                } else {
                    let i = rng.gen_range(0..v.len());
                    Some(v.swap_remove(i))
                }
            }
        }
    }
}

struct Engine<'p> {
    p: &'p Program,
    plans: Vec<Vec<Vec<usize>>>,
    by_pred: HashMap<Symbol, Vec<(usize, usize)>>,
    inst: Instance,
    pending: Pending,
    seen: HashSet<(u32, Box<[TermId]>)>,
    found: Vec<Box<[TermId]>>,
}

impl<'p> Engine<'p> {
    fn new(p: &'p Program, inst: Instance, strategy: Strategy) -> Self {
        let mut by_pred: HashMap<Symbol, Vec<(usize, usize)>> = HashMap::new();
        let mut plans = Vec::new();
        for (i, t) in p.tgds().iter().enumerate() {
            plans.push((0..t.body().len()).map(|k| plan(t, k)).collect());
            for (k, a) in t.body().iter().enumerate() {
                by_pred.entry(a.pred).or_default().push((i, k));
            }
        }
        let pending = match strategy {
            Strategy::Random(seed) => {
                Pending::Random(Vec::new(), Box::new(ChaCha8Rng::seed_from_u64(seed)))
            }
            _ => Pending::Queue(VecDeque::new()),
        };
        Engine {
            p,
            plans,
            by_pred,
            inst,
            pending,
            seen: HashSet::new(),
            found: Vec::new(),
        }
    }

    /// Queues every new trigger whose latest body atom is `delta`.
    fn scan(&mut self, delta: AtomId) {
        let pred = self.inst.atom(delta).pred;
        let Some(entries) = self.by_pred.get(&pred) else {
            return;
        };
        for &(ti, k) in entries {
            let tgd = self.p.tgd(ti);
            let mut binding = vec![UNBOUND; tgd.num_vars()];
            let mut trail = Vec::new();
            if !unify(
                &tgd.body()[k].args,
                &self.inst.atom(delta).args,
                &mut binding,
                &mut trail,
            ) {
                continue;
            }
            let mut found = std::mem::take(&mut self.found);
            Search {
                inst: &self.inst,
                tgd,
                k,
                delta,
                order: &self.plans[ti][k],
                out: &mut found,
            }
            .run(0, &mut binding, &mut trail);
            for hom in found.drain(..) {
                let key: Box<[TermId]> = tgd.frontier().iter().map(|v| hom[v.index()]).collect();
                if self.seen.insert((ti as u32, key)) {
                    self.pending.push(Trigger { tgd: ti, hom });
                }
            }
            self.found = found;
        }
    }
}

pub fn run_chase(db: &Database, p: &Program, opts: ChaseOptions) -> Result<ChaseOutcome> {
    run_chase_on(Instance::from_database(db), p, opts)
}

/// Runs the chase starting from an arbitrary instance.
pub fn run_chase_on(start: Instance, p: &Program, opts: ChaseOptions) -> Result<ChaseOutcome> {
    let caps = opts.caps;
    if caps.max_atoms == 0 || caps.max_steps == 0 {
        return Err(Error::ZeroCap);
    }
    let forest = opts.forest && p.classify() <= Class::Guarded;
    let db_len = start.len();
    let mut eng = Engine::new(p, start, opts.strategy);
    let mut parent: Option<Vec<Option<AtomId>>> = forest.then(|| vec![None; db_len]);
    let mut log = Vec::new();
    let mut steps = 0;
    let exceeded = |which| ChaseStatus::CapExceeded { which, caps };
    let mut status = ChaseStatus::Finished;
    if caps.max_depth.is_some_and(|d| eng.inst.max_depth() > d) {
        status = exceeded(CapKind::Depth);
    }
    if db_len > caps.max_atoms {
        status = exceeded(CapKind::Atoms);
    }
    if status == ChaseStatus::Finished {
        for id in 0..db_len as AtomId {
            eng.scan(id);
        }
    }
    'outer: while status == ChaseStatus::Finished {
        let Some(trigger) = eng.pending.pop(opts.strategy) else {
            break;
        };
        if !is_active(&eng.inst, p, &trigger) {
            continue;
        }
        if steps == caps.max_steps {
            status = exceeded(CapKind::Steps);
            break;
        }
        steps += 1;
        let result = result_of_trigger(&mut eng.inst.arena, p, &trigger);
        let guard_id = parent.as_ref().map(|_| {
            let tgd = p.tgd(trigger.tgd);
            let g = tgd.guard_atom().expect("guarded program");
            let img = GroundAtom {
                pred: g.pred,
                args: g.args.iter().map(|&v| trigger.image(v)).collect(),
            };
            eng.inst
                .id_of(&img)
                .expect("guard image is in the instance")
        });
        for a in result {
            if let Some(id) = eng.inst.insert(a) {
                if let Some(par) = parent.as_mut() {
                    par.push(guard_id);
                }
                eng.scan(id);
                if caps.max_depth.is_some_and(|d| eng.inst.atom_depth(id) > d) {
                    status = exceeded(CapKind::Depth);
                }
            }
        }
        if opts.keep_log {
            log.push(trigger);
        }
        if eng.inst.len() > caps.max_atoms {
            status = exceeded(CapKind::Atoms);
            break 'outer;
        }
    }
    Ok(ChaseOutcome {
        status,
        instance: eng.inst,
        steps,
        db_len,
        log,
        parent,
    })
}

/// Enumerates every homomorphism naively and returns an active trigger if one
/// exists. Independent of the engine's indexes; used to audit finished runs.
pub fn find_active_trigger(inst: &Instance, p: &Program) -> Option<Trigger> {
    fn go(
        inst: &Instance,
        tgd: &Tgd,
        j: usize,
        binding: &mut Vec<TermId>,
        out: &mut Vec<Box<[TermId]>>,
    ) {
        if j == tgd.body().len() {
            out.push(binding.clone().into_boxed_slice());
            return;
        }
        let pat = &tgd.body()[j];
        for a in inst.atoms() {
            if a.pred != pat.pred {
                continue;
            }
            let saved = binding.clone();
            if pat.args.iter().zip(a.args.iter()).all(|(v, &t)| {
                let s = &mut binding[v.index()];
                if *s == UNBOUND {
                    *s = t;
                    true
                } else {
                    *s == t
                }
            }) {
                go(inst, tgd, j + 1, binding, out);
            }
            *binding = saved;
        }
    }
    for (i, tgd) in p.tgds().iter().enumerate() {
        let mut homs = Vec::new();
        go(inst, tgd, 0, &mut vec![UNBOUND; tgd.num_vars()], &mut homs);
        for hom in homs {
            let t = Trigger { tgd: i, hom };
            if is_active(inst, p, &t) {
                return Some(t);
            }
        }
    }
    None
}

/// Edges (parent, child) of the guarded chase forest.
pub fn forest_edges(outcome: &ChaseOutcome) -> Option<Vec<(AtomId, AtomId)>> {
    let parent = outcome.parent.as_ref()?;
    Some(
        parent
            .iter()
            .enumerate()
            .filter_map(|(child, p)| p.map(|p| (p, child as AtomId)))
            .collect(),
    )
}

/// Root database atom of every atom's tree.
pub fn forest_roots(outcome: &ChaseOutcome) -> Option<Vec<AtomId>> {
    let parent = outcome.parent.as_ref()?;
    let mut root = Vec::with_capacity(parent.len());
    for (i, p) in parent.iter().enumerate() {
        let r = match p {
            Some(p) => root[*p as usize],
            None => i as AtomId,
        };
        root.push(r);
    }
    Some(root)
}

/// |gtree^i| for the tree rooted at `root`, keyed by atom depth i.
pub fn forest_level_counts(
    outcome: &ChaseOutcome,
    p: &Program,
    root: &Fact,
) -> Result<BTreeMap<u32, usize>> {
    let class = p.classify();
    if class > Class::Guarded {
        return Err(Error::WrongClass {
            expected: Class::Guarded,
            found: class,
        });
    }
    let not_in_db = || Error::RootNotInDatabase(crate::text::render_fact(root));
    let rid = outcome.instance.fact_id(root).ok_or_else(not_in_db)?;
    if rid as usize >= outcome.db_len {
        return Err(not_in_db());
    }
    let roots = forest_roots(outcome).ok_or(Error::WrongClass {
        expected: Class::Guarded,
        found: class,
    })?;
    let mut counts = BTreeMap::new();
    for (id, &r) in roots.iter().enumerate() {
        if r == rid {
            *counts
                .entry(outcome.instance.atom_depth(id as AtomId))
                .or_insert(0) += 1;
        }
    }
    Ok(counts)
}
