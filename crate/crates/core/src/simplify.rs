//! Simplification of linear TGDs into simple-linear ones.
//!
//! An atom `R(t1..tn)` becomes `R_{(l1..ln)}(unique(t))` where the `l` tuple
//! records which argument positions hold equal terms.

use std::collections::{BTreeMap, HashMap};

use crate::chase::{run_chase, AtomId, ChaseOptions, ChaseOutcome, Instance, TermData, TermId};
use crate::error::{Error, Result};
use crate::model::{Atom, Class, Database, Fact, Origin, Program, Tgd, Var};
use crate::symbol::Symbol;

pub const DEFAULT_ARITY_CAP: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimplifiedPredicate {
    pub base: Symbol,
    pub ids: Vec<u32>,
}

impl SimplifiedPredicate {
    /// Canonical name `R_{(1,2,1)}`.
    pub fn name(&self) -> Symbol {
        let ids: Vec<String> = self.ids.iter().map(u32::to_string).collect();
        Symbol::new(&format!("{}_{{({})}}", self.base, ids.join(",")))
    }

    /// Inverse of [`SimplifiedPredicate::name`].
    pub fn parse(name: Symbol) -> Option<SimplifiedPredicate> {
        let s = name.as_str();
        let body = s.strip_suffix(")}")?;
        let cut = body.rfind("_{(")?;
        let ids = body[cut + 3..]
            .split(',')
            .map(|x| x.parse().ok())
            .collect::<Option<Vec<u32>>>()?;
        let sp = SimplifiedPredicate {
            base: Symbol::new(&body[..cut]),
            ids,
        };
        sp.is_valid().then_some(sp)
    }

    /// First entry is 1 and each entry is at most one more than the previous maximum.
    pub fn is_valid(&self) -> bool {
        let mut max = 0;
        for &l in &self.ids {
            if l == 0 || l > max + 1 {
                return false;
            }
            max = max.max(l);
        }
        !self.ids.is_empty()
    }

    /// Arity of the simplified atom: the number of distinct entries.
    pub fn arity(&self) -> usize {
        self.ids.iter().copied().max().unwrap_or(0) as usize
    }
}

/// unique(t) keeps the first occurrence of each term; id(t) numbers the
/// position of each term's first occurrence among the unique terms.
pub fn unique_and_id<T: PartialEq + Clone>(args: &[T]) -> (Vec<T>, Vec<u32>) {
    let mut uniq: Vec<T> = Vec::new();
    let mut ids = Vec::with_capacity(args.len());
    for a in args {
        match uniq.iter().position(|u| u == a) {
            Some(i) => ids.push(i as u32 + 1),
            None => {
                uniq.push(a.clone());
                ids.push(uniq.len() as u32);
            }
        }
    }
    (uniq, ids)
}

pub fn simplify_atom<T: PartialEq + Clone>(a: &Atom<T>) -> (Atom<T>, SimplifiedPredicate) {
    let (uniq, ids) = unique_and_id(&a.args);
    let sp = SimplifiedPredicate { base: a.pred, ids };
    (
        Atom {
            pred: sp.name(),
            args: uniq,
        },
        sp,
    )
}

/// All specializations of n distinct variables. Entry i is the index of the
/// variable that x_i is mapped to; the count is the Bell number B(n).
pub fn specializations(n: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    if n > cap {
        return Err(Error::ArityCapExceeded { arity: n, cap });
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        let mut choices: Vec<usize> = cur.clone();
        choices.sort_unstable();
        choices.dedup();
        choices.push(i);
        for c in choices {
            cur.push(c);
            go(i + 1, n, cur, out);
            cur.pop();
        }
    }
    go(0, n, &mut cur, &mut out);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Simplified {
    pub db: Database,
    pub program: Program,
    /// Every simplified predicate name that occurs, with its structure.
    pub preds: BTreeMap<Symbol, SimplifiedPredicate>,
}

pub fn simplify_database(db: &Database) -> Database {
    db.facts().map(|f| simplify_atom(f).0).collect()
}

pub fn simplify_program(db: &Database, p: &Program, arity_cap: usize) -> Result<Simplified> {
    let class = p.classify();
    if class > Class::Linear {
        return Err(Error::WrongClass {
            expected: Class::Linear,
            found: class,
        });
    }
    let mut preds = BTreeMap::new();
    let mut out_db = Database::new();
    for f in db.facts() {
        let (a, sp) = simplify_atom(f);
        preds.insert(a.pred, sp);
        out_db.insert(a);
    }
    let mut tgds = Vec::new();
    for (si, t) in p.tgds().iter().enumerate() {
        let vars = t.body_vars();
        for (k, f) in specializations(vars.len(), arity_cap)?
            .into_iter()
            .enumerate()
        {
            let mut names = Vec::new();
            let mut var_map = vec![Var(u32::MAX); t.num_vars()];
            let mut rep_var = vec![Var(u32::MAX); vars.len()];
            for (i, &r) in f.iter().enumerate() {
                if r == i {
                    rep_var[i] = Var(names.len() as u32);
                    names.push(t.var_name(vars[i]));
                }
            }
            for (i, &v) in vars.iter().enumerate() {
                var_map[v.index()] = rep_var[f[i]];
            }
            for &z in t.existentials() {
                var_map[z.index()] = Var(names.len() as u32);
                names.push(t.var_name(z));
            }
            let mut simp = |a: &Atom<Var>| {
                let mapped = Atom {
                    pred: a.pred,
                    args: a.args.iter().map(|v| var_map[v.index()]).collect(),
                };
                let (s, sp) = simplify_atom(&mapped);
                preds.insert(s.pred, sp);
                s
            };
            let body = vec![simp(&t.body()[0])];
            let head = t.head().iter().map(&mut simp).collect();
            let id = Symbol::new(&format!("{}#{}", t.id(), k + 1));
            tgds.push(Tgd::new(id, names, body, head)?.with_origin(Origin {
                source: si,
                var_map,
            }));
        }
    }
    Ok(Simplified {
        db: out_db,
        program: Program::new(tgds)?,
        preds,
    })
}

/// Result of checking that one chase partitions another atom by atom.
#[derive(Clone, Debug)]
pub struct PartitionReport {
    pub left: ChaseOutcome,
    pub right: ChaseOutcome,
    /// For every atom of the left chase, the equivalent atoms of the right chase.
    pub classes: Vec<Vec<AtomId>>,
    pub nonempty: bool,
    pub disjoint: bool,
    pub covers: bool,
    pub depths_match: bool,
}

impl PartitionReport {
    pub(crate) fn check(
        left: ChaseOutcome,
        right: ChaseOutcome,
        classes: Vec<Vec<AtomId>>,
    ) -> PartitionReport {
        let nonempty = classes.iter().all(|c| !c.is_empty());
        let mut owner = vec![0usize; right.len()];
        for c in &classes {
            for &b in c {
                owner[b as usize] += 1;
            }
        }
        let disjoint = owner.iter().all(|&n| n <= 1);
        let covers = owner.iter().all(|&n| n >= 1);
        let depths_match = classes.iter().enumerate().all(|(a, c)| {
            c.iter()
                .all(|&b| left.instance.atom_depth(a as AtomId) == right.instance.atom_depth(b))
        });
        PartitionReport {
            left,
            right,
            classes,
            nonempty,
            disjoint,
            covers,
            depths_match,
        }
    }

    pub fn verified(&self) -> bool {
        self.nonempty && self.disjoint && self.covers && self.depths_match
    }
}

/// Term equivalence up to simplification, memoized.
pub(crate) struct EquivCtx<'a> {
    pub left: &'a Instance,
    pub right: &'a Instance,
    pub lp: &'a Program,
    pub rp: &'a Program,
    pub memo: HashMap<(TermId, TermId), bool>,
}

impl EquivCtx<'_> {
    pub fn terms(&mut self, t: TermId, u: TermId) -> bool {
        if let Some(&r) = self.memo.get(&(t, u)) {
            return r;
        }
        let r = match (self.left.arena().get(t), self.right.arena().get(u)) {
            (TermData::Const(a), TermData::Const(b)) => a == b,
            (
                TermData::Null {
                    tgd: s,
                    binding: h,
                    var: z,
                },
                TermData::Null {
                    tgd: s2,
                    binding: h2,
                    var: z2,
                },
            ) => {
                let (s, s2) = (*s as usize, *s2 as usize);
                let (h, h2, z, z2) = (h.clone(), h2.clone(), *z, *z2);
                self.nulls(s, &h, z, s2, &h2, z2)
            }
            _ => false,
        };
        self.memo.insert((t, u), r);
        r
    }

    fn nulls(&mut self, s: usize, h: &[TermId], z: Var, s2: usize, h2: &[TermId], z2: Var) -> bool {
        let (sigma, sigma2) = (self.lp.tgd(s), self.rp.tgd(s2));
        let Some(origin) = sigma2.origin() else {
            return false;
        };
        if origin.source != s || origin.var_map[z.index()] != z2 {
            return false;
        }
        // g = { f(x) -> h(x) : x in fr(sigma) } must be a function.
        let mut g: HashMap<Var, TermId> = HashMap::new();
        for (&x, &hx) in sigma.frontier().iter().zip(h) {
            let fx = origin.var_map[x.index()];
            if *g.entry(fx).or_insert(hx) != hx {
                return false;
            }
        }
        for (&y, &h2y) in sigma2.frontier().iter().zip(h2) {
            match g.get(&y) {
                Some(&gy) if self.terms(gy, h2y) => {}
                _ => return false,
            }
        }
        true
    }
}

/// Runs both chases and checks the equivalence-up-to-simplification classes.
pub fn es_partition(db: &Database, p: &Program, opts: ChaseOptions) -> Result<PartitionReport> {
    let s = simplify_program(db, p, DEFAULT_ARITY_CAP)?;
    let left = run_chase(db, p, opts)?;
    if !left.finished() {
        return Err(Error::ChaseCapExceeded("original"));
    }
    let right = run_chase(&s.db, &s.program, opts)?;
    if !right.finished() {
        return Err(Error::ChaseCapExceeded("simplified"));
    }
    let classes = {
        let mut ctx = EquivCtx {
            left: &left.instance,
            right: &right.instance,
            lp: p,
            rp: &s.program,
            memo: HashMap::new(),
        };
        let mut classes = Vec::with_capacity(left.len());
        for a in left.instance.atoms() {
            let (uniq, ids) = unique_and_id(&a.args);
            let name = SimplifiedPredicate { base: a.pred, ids }.name();
            let mut class = Vec::new();
            for &b in right.instance.with_pred(name) {
                let bargs = &right.instance.atom(b).args;
                let distinct = unique_and_id(bargs).0.len() == bargs.len();
                if distinct
                    && uniq.len() == bargs.len()
                    && uniq
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

pub fn simplify_fact(f: &Fact) -> Fact {
    simplify_atom(f).0
}
