//! Instance families with known chase behavior, the Turing machine encoding,
//! and a seeded random generator.
//!
//! Every generator writes program text and parses it, so its output always
//! round-trips through the parser.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Class, Database, Program};
use crate::text::{parse_program, render_const};

fn parse(text: &str) -> Result<(Database, Program)> {
    let sp = parse_program(text)?;
    Ok((sp.db, sp.program))
}

fn atom(pred: &str, args: &[String]) -> String {
    format!("{pred}({})", args.join(","))
}

fn vars(name: &str, range: impl IntoIterator<Item = usize>) -> Vec<String> {
    range.into_iter().map(|i| format!("{name}{i}")).collect()
}

fn rep(v: &str, k: usize) -> Vec<String> {
    vec![v.to_owned(); k]
}

fn rule(out: &mut String, body: &[String], exists: &[String], head: &[String]) {
    let ex = if exists.is_empty() {
        String::new()
    } else {
        format!("exists {}: ", exists.join(","))
    };
    writeln!(out, "{} -> {ex}{}.", body.join(", "), head.join(", ")).unwrap();
}

fn positive(params: &[(&str, usize)]) -> Result<()> {
    match params.iter().find(|(_, v)| *v == 0) {
        Some((name, _)) => Err(Error::Generator(format!("{name} must be at least 1"))),
        None => Ok(()),
    }
}

/// Simple-linear family whose chase from each of the `l` roots has m^(i·m)
/// atoms over `R_i`.
pub fn gen_sl_lower(l: usize, n: usize, m: usize) -> Result<(Database, Program)> {
    positive(&[("l", l), ("n", n), ("m", m)])?;
    let mut out = String::new();
    for c in 1..=l {
        writeln!(out, "R0(c{c}).").unwrap();
    }
    let ys = vars("Y", 1..=m);
    rule(
        &mut out,
        &[atom("R0", &["X".into()])],
        &ys,
        &[atom("R0", &["X".into()]), atom("R1", &ys)],
    );
    let xs = vars("X", 1..=m);
    for i in 1..=n {
        let r = format!("R{i}");
        for j in 0..m {
            let mut swapped = xs.clone();
            swapped.swap(0, j);
            rule(&mut out, &[atom(&r, &xs)], &[], &[atom(&r, &swapped)]);
            let mut collapsed = xs.clone();
            collapsed[0] = xs[j].clone();
            rule(&mut out, &[atom(&r, &xs)], &[], &[atom(&r, &collapsed)]);
        }
        if i < n {
            let zs = vars("Z", 1..=m);
            rule(
                &mut out,
                &[atom(&r, &xs)],
                &zs,
                &[atom(&r, &xs), atom(&format!("R{}", i + 1), &zs)],
            );
        }
    }
    parse(&out)
}

/// Linear family of arity m+3 whose chase from each root builds, per level
/// `i`, a binary tree with 2^(2^m−1) leaves.
pub fn gen_linear_lower(l: usize, n: usize, m: usize) -> Result<(Database, Program)> {
    positive(&[("l", l), ("n", n), ("m", m)])?;
    let mut out = String::new();
    for c in 1..=l {
        writeln!(out, "R0(c{c}).").unwrap();
    }
    let s = |v: &str| v.to_owned();
    let start = [rep("Y", m), vec![s("Y"), s("Z"), s("Y")]].concat();
    rule(
        &mut out,
        &[atom("R0", &[s("X")])],
        &[s("Y"), s("Z")],
        &[atom("R0", &[s("X")]), atom("R1", &start)],
    );
    for i in 1..=n {
        let r = format!("R{i}");
        for j in 0..m {
            let xs = vars("X", 1..=m - j - 1);
            let body = [
                xs.clone(),
                vec![s("Y")],
                rep("Z", j),
                vec![s("Y"), s("Z"), s("U")],
            ]
            .concat();
            let child = |last: &str| {
                [
                    xs.clone(),
                    vec![s("Z")],
                    rep("Y", j),
                    vec![s("Y"), s("Z"), s(last)],
                ]
                .concat()
            };
            rule(
                &mut out,
                &[atom(&r, &body)],
                &[s("V"), s("W")],
                &[
                    atom(&r, &body),
                    atom(&r, &child("V")),
                    atom(&r, &child("W")),
                ],
            );
        }
        if i < n {
            let body = [rep("X", m), vec![s("Y"), s("X"), s("Z")]].concat();
            let next = [rep("V", m), vec![s("V"), s("W"), s("V")]].concat();
            rule(
                &mut out,
                &[atom(&r, &body)],
                &[s("V"), s("W")],
                &[atom(&r, &body), atom(&format!("R{}", i + 1), &next)],
            );
        }
    }
    parse(&out)
}

/// Default guard on the parameters of [`gen_guarded_lower`].
pub const GUARDED_PARAM_LIMIT: usize = 2;

/// Guarded family building 2^n strata of full binary trees of depth
/// 2^(2^m)−1, with a stratum counter over n bits and a depth counter over
/// 2^m bits.
///
/// Three rules bind the bit constants through a `Did` atom, and the
/// stratum-increment rules range over every stratum bit, so that the counters
/// only see the constants 0 and 1 and the top stratum bit is incremented too.
pub fn gen_guarded_lower(
    l: usize,
    n: usize,
    m: usize,
    limit: usize,
) -> Result<(Database, Program)> {
    positive(&[("l", l), ("n", n), ("m", m)])?;
    if n > limit || m > limit {
        return Err(Error::Generator(format!(
            "n and m must be at most {limit}; the chase grows triple-exponentially"
        )));
    }
    let s = |v: &str| v.to_owned();
    let node = |a: &str, b: &str| atom("Node", &[s(a), s(b), s("Z"), s("O")]);
    let mut out = String::new();
    for c in 1..=l {
        writeln!(out, "Node(c{c},c{c},0,1).").unwrap();
    }
    let ws = vars("W", 1..=m);
    let vs = vars("V", 1..=m);
    let did = |x: &str, y: &str, w: &[String]| {
        atom(
            "Did",
            &[vec![s(x), s(y), s("Z"), s("O")], w.to_vec()].concat(),
        )
    };
    let depth = |y: &str, w: &[String], b: &str| {
        atom("Depth", &[vec![s(y)], w.to_vec(), vec![s(b)]].concat())
    };
    let pair = |p: &str, y: &str, w: &[String]| atom(p, &[vec![s(y)], w.to_vec()].concat());
    let si = |i: usize, y: &str, b: &str| atom(&format!("S{i}"), &[s(y), s(b)]);
    let unary = |p: String, y: &str| atom(&p, &[s(y)]);

    // Roots of stratum zero.
    let mut head = vec![unary("Root".into(), "X")];
    head.extend((1..=n).map(|i| si(i, "X", "Z")));
    rule(
        &mut out,
        &[atom("Node", &[s("X"), s("X"), s("Z"), s("O")])],
        &[],
        &head,
    );
    // Digit ids.
    rule(
        &mut out,
        &[node("X", "Y")],
        &[],
        &[did("X", "Y", &rep("Z", m))],
    );
    for i in 0..m {
        let mut from = ws.clone();
        from[i] = s("Z");
        let mut to = ws.clone();
        to[i] = s("O");
        rule(
            &mut out,
            &[did("X", "Y", &from)],
            &[],
            &[did("X", "Y", &to)],
        );
    }
    rule(
        &mut out,
        &[did("X", "Y", &ws), unary("Root".into(), "Y")],
        &[],
        &[depth("Y", &ws, "Z")],
    );
    // Successor over digit ids.
    for i in 1..=m {
        let prefix = vars("W", 1..i);
        let cur = [prefix.clone(), vec![s("Z")], rep("O", m - i)].concat();
        let next = [prefix, vec![s("O")], rep("Z", m - i)].concat();
        let succ = atom(
            "Succ",
            &[vec![s("X"), s("Y"), s("Z"), s("O")], cur.clone(), next].concat(),
        );
        rule(&mut out, &[did("X", "Y", &cur)], &[], &[succ]);
    }
    // Not in the last stratum / not at maximal depth.
    for i in 1..=n {
        rule(
            &mut out,
            &[node("X", "Y"), si(i, "Y", "Z")],
            &[],
            &[unary("NonMaxStratum".into(), "Y")],
        );
    }
    rule(
        &mut out,
        &[did("U", "X", &ws), depth("X", &ws, "Z")],
        &[],
        &[unary("NonMaxDepth".into(), "X")],
    );
    // Children.
    rule(
        &mut out,
        &[node("X", "Y"), unary("NonMaxDepth".into(), "Y")],
        &[s("W"), s("Wp")],
        &[
            node("Y", "W"),
            unary("NonRoot".into(), "W"),
            node("Y", "Wp"),
            unary("NonRoot".into(), "Wp"),
        ],
    );
    for i in 1..=n {
        for b in ["Z", "O"] {
            rule(
                &mut out,
                &[node("X", "Y"), unary("NonRoot".into(), "Y"), si(i, "X", b)],
                &[],
                &[si(i, "Y", b)],
            );
        }
    }
    // Depth increment: classify digits, then copy them to the children.
    let ones = rep("O", m);
    rule(
        &mut out,
        &[did("X", "Y", &ones), depth("Y", &ones, "Z")],
        &[],
        &[pair("DPivot", "Y", &ones)],
    );
    rule(
        &mut out,
        &[did("X", "Y", &ones), depth("Y", &ones, "O")],
        &[],
        &[pair("DChange", "Y", &ones)],
    );
    let succ = atom(
        "Succ",
        &[vec![s("X"), s("Y"), s("Z"), s("O")], ws.clone(), vs.clone()].concat(),
    );
    rule(
        &mut out,
        &[
            succ.clone(),
            pair("DChange", "Y", &vs),
            depth("Y", &ws, "Z"),
        ],
        &[],
        &[pair("DPivot", "Y", &ws)],
    );
    rule(
        &mut out,
        &[
            succ.clone(),
            pair("DChange", "Y", &vs),
            depth("Y", &ws, "O"),
        ],
        &[],
        &[pair("DChange", "Y", &ws)],
    );
    rule(
        &mut out,
        &[succ.clone(), pair("DPivot", "Y", &vs)],
        &[],
        &[pair("DCopy", "Y", &ws)],
    );
    rule(
        &mut out,
        &[succ, pair("DCopy", "Y", &vs)],
        &[],
        &[pair("DCopy", "Y", &ws)],
    );
    let child = |extra: Vec<String>, b: &str| {
        let mut body = vec![did("X", "Y", &ws), unary("NonRoot".into(), "Y")];
        body.extend(extra);
        (body, depth("Y", &ws, b))
    };
    for (body, head) in [
        child(vec![pair("DChange", "X", &ws)], "Z"),
        child(vec![pair("DPivot", "X", &ws)], "O"),
        child(vec![pair("DCopy", "X", &ws), depth("X", &ws, "Z")], "Z"),
        child(vec![pair("DCopy", "X", &ws), depth("X", &ws, "O")], "O"),
    ] {
        rule(&mut out, &body, &[], &[head]);
    }
    // New strata.
    rule(
        &mut out,
        &[node("X", "Y"), unary("NonMaxStratum".into(), "Y")],
        &[s("W")],
        &[node("Y", "W"), unary("NewRoot".into(), "W")],
    );
    rule(
        &mut out,
        &[unary("NewRoot".into(), "X")],
        &[],
        &[unary("Root".into(), "X")],
    );
    let sp = |k: &str, i: usize| format!("S{k}{i}");
    rule(
        &mut out,
        &[node("X", "Y"), si(n, "Y", "Z")],
        &[],
        &[unary(sp("Pivot", n), "Y")],
    );
    rule(
        &mut out,
        &[node("X", "Y"), si(n, "Y", "O")],
        &[],
        &[unary(sp("Change", n), "Y")],
    );
    for i in 2..=n {
        let change = unary(sp("Change", i), "Y");
        rule(
            &mut out,
            &[node("X", "Y"), change.clone(), si(i - 1, "Y", "Z")],
            &[],
            &[unary(sp("Pivot", i - 1), "Y")],
        );
        rule(
            &mut out,
            &[node("X", "Y"), change, si(i - 1, "Y", "O")],
            &[],
            &[unary(sp("Change", i - 1), "Y")],
        );
        rule(
            &mut out,
            &[node("X", "Y"), unary(sp("Pivot", i), "Y")],
            &[],
            &[unary(sp("Copy", i - 1), "Y")],
        );
        rule(
            &mut out,
            &[node("X", "Y"), unary(sp("Copy", i), "Y")],
            &[],
            &[unary(sp("Copy", i - 1), "Y")],
        );
    }
    for i in 1..=n {
        let base = || vec![node("X", "Y"), unary("NewRoot".into(), "Y")];
        rule(
            &mut out,
            &[base(), vec![unary(sp("Change", i), "X")]].concat(),
            &[],
            &[si(i, "Y", "Z")],
        );
        rule(
            &mut out,
            &[base(), vec![unary(sp("Pivot", i), "X")]].concat(),
            &[],
            &[si(i, "Y", "O")],
        );
        for b in ["Z", "O"] {
            let body = [base(), vec![unary(sp("Copy", i), "X"), si(i, "X", b)]].concat();
            rule(&mut out, &body, &[], &[si(i, "Y", b)]);
        }
    }
    parse(&out)
}

/// A chain of `n` constants and a single rule whose chase reaches depth n−1.
pub fn gen_depth_family(n: usize) -> Result<(Database, Program)> {
    if n < 2 {
        return Err(Error::Generator("n must be at least 2".into()));
    }
    let mut out = String::from("P(a1,b,b).\n");
    for i in 1..n {
        writeln!(out, "R(a{i},a{}).", i + 1).unwrap();
    }
    out.push_str("R(X,Y), P(X,Z,V) -> exists W: P(Y,W,Z).\n");
    parse(&out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    Left,
    Stay,
    Right,
}

/// A deterministic Turing machine. Tape symbols are names; the blank and
/// the two end markers are implicit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TmSpec {
    pub states: Vec<String>,
    pub alphabet: Vec<String>,
    pub start: String,
    /// (state, read) → (state, write, direction).
    pub transitions: BTreeMap<(String, String), (String, String, Dir)>,
}

pub const BLANK: &str = "_";
pub const LEFT_END: &str = ">";
pub const RIGHT_END: &str = "<";

fn tm_symbol_constant(a: &str) -> String {
    match a {
        BLANK => "'⊔'".into(),
        LEFT_END => "'▷'".into(),
        RIGHT_END => "'◁'".into(),
        other => render_const(other.into()),
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && s != BLANK
}

impl TmSpec {
    /// Parses the line format:
    ///
    /// ```text
    /// states s0 s1
    /// alphabet a b
    /// start s0
    /// s0 _ -> s1 a R
    /// ```
    pub fn parse(text: &str) -> Result<TmSpec> {
        let err = |line: usize, msg: String| Error::TmSpec(format!("line {line}: {msg}"));
        let mut states = None;
        let mut alphabet = None;
        let mut start = None;
        let mut rules = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('%').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            match words[0] {
                "states" => {
                    states = Some(words[1..].iter().map(|w| w.to_string()).collect::<Vec<_>>())
                }
                "alphabet" => {
                    alphabet = Some(words[1..].iter().map(|w| w.to_string()).collect::<Vec<_>>())
                }
                "start" if words.len() == 2 => start = Some(words[1].to_string()),
                _ if words.len() == 6 && words[2] == "->" => rules.push((line, words)),
                _ => return Err(err(line, format!("cannot parse `{content}`"))),
            }
        }
        let states = states.ok_or_else(|| Error::TmSpec("missing `states` line".into()))?;
        let alphabet = alphabet.ok_or_else(|| Error::TmSpec("missing `alphabet` line".into()))?;
        let start = start.ok_or_else(|| Error::TmSpec("missing `start` line".into()))?;
        for name in states.iter().chain(&alphabet) {
            if !is_name(name) {
                return Err(Error::TmSpec(format!(
                    "`{name}` is not a valid state or symbol name"
                )));
            }
        }
        let state_set: BTreeSet<&str> = states.iter().map(String::as_str).collect();
        let mut symbols: BTreeSet<&str> = alphabet.iter().map(String::as_str).collect();
        symbols.extend([BLANK, LEFT_END, RIGHT_END]);
        if !state_set.contains(start.as_str()) {
            return Err(Error::TmSpec(format!(
                "start state `{start}` is not declared"
            )));
        }
        let mut transitions = BTreeMap::new();
        for (line, w) in rules {
            let (s, a, s2, a2, d) = (w[0], w[1], w[3], w[4], w[5]);
            for st in [s, s2] {
                if !state_set.contains(st) {
                    return Err(err(line, format!("undeclared state `{st}`")));
                }
            }
            for sym in [a, a2] {
                if !symbols.contains(sym) {
                    return Err(err(line, format!("undeclared symbol `{sym}`")));
                }
            }
            let dir = match d {
                "L" => Dir::Left,
                "S" => Dir::Stay,
                "R" => Dir::Right,
                other => {
                    return Err(err(
                        line,
                        format!("direction must be L, S or R, found `{other}`"),
                    ))
                }
            };
            let key = (s.to_string(), a.to_string());
            if transitions
                .insert(key, (s2.to_string(), a2.to_string(), dir))
                .is_some()
            {
                return Err(err(
                    line,
                    format!("second transition for ({s}, {a}): the machine must be deterministic"),
                ));
            }
        }
        Ok(TmSpec {
            states,
            alphabet,
            start,
            transitions,
        })
    }
}

/// The fixed rule set simulating a Turing machine given as a database.
pub const TM_RULES: &str = "\
Trans(X1,X2,X3,X4,X5), RDir(X5), NormSymb(W), Head(X,X1,Y), Tape(X,X2,Y), Tape(Y,W,Z) -> exists Xp,Yp,Zp: L(X,Xp), R(Y,Yp), R(Z,Zp), Tape(Xp,X4,Yp), Head(Yp,X3,Zp), Tape(Yp,W,Zp).
Trans(X1,X2,X3,X4,X5), RDir(X5), Blank(U), End(W), Head(X,X1,Y), Tape(X,X2,Y), Tape(Y,W,Z) -> exists Xp,Yp,Zp,Wp: L(X,Xp), R(Y,Yp), R(Z,Zp), Tape(Xp,X4,Yp), Head(Yp,X3,Zp), Tape(Yp,U,Zp), Tape(Zp,W,Wp).
Trans(X1,X2,X3,X4,X5), LDir(X5), Tape(X,W,Y), Head(Y,X1,Z), Tape(Y,X2,Z) -> exists Xp,Yp,Zp: R(X,Xp), R(Y,Yp), L(Z,Zp), Head(Xp,X3,Yp), Tape(Xp,W,Yp), Tape(Yp,X4,Zp).
Trans(X1,X2,X3,X4,X5), SDir(X5), Head(X,X1,Y), Tape(X,X2,Y) -> exists Xp,Yp: L(X,Xp), R(Y,Yp), Head(Xp,X3,Yp), Tape(Xp,X4,Yp).
Tape(X,Z,Y), L(Y,Yp) -> exists Xp: L(X,Xp), Tape(Xp,Z,Yp).
Tape(X,Z,Y), R(X,Xp) -> exists Yp: Tape(Xp,Z,Yp), R(Y,Yp).
";

/// The database of a machine together with [`TM_RULES`]. The chase is finite
/// iff the machine halts on the empty input, assuming the machine never moves
/// left of the first cell.
pub fn gen_tm(spec: &TmSpec) -> Result<(Database, Program)> {
    let st = |s: &str| render_const(s.into());
    let mut out = String::new();
    for ((s, a), (s2, a2, d)) in &spec.transitions {
        let dir = match d {
            Dir::Left => "'←'",
            Dir::Stay => "'−'",
            Dir::Right => "'→'",
        };
        writeln!(
            out,
            "Trans({},{},{},{},{dir}).",
            st(s),
            tm_symbol_constant(a),
            st(s2),
            tm_symbol_constant(a2)
        )
        .unwrap();
    }
    let start = st(&spec.start);
    writeln!(
        out,
        "Tape(c0,'▷',c1). Tape(c1,'⊔',c2). Head(c1,{start},c2). Tape(c2,'◁',c3)."
    )
    .unwrap();
    writeln!(
        out,
        "LDir('←'). SDir('−'). RDir('→'). Blank('⊔'). End('◁')."
    )
    .unwrap();
    for a in std::iter::once(BLANK).chain(spec.alphabet.iter().map(String::as_str)) {
        writeln!(out, "NormSymb({}).", tm_symbol_constant(a)).unwrap();
    }
    out.push_str(TM_RULES);
    parse(&out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomParams {
    pub class: Class,
    pub preds: usize,
    pub max_arity: usize,
    pub tgds: usize,
    pub facts: usize,
    /// Force (or forbid) an acyclic orientation of all edges; None picks one
    /// from the seed.
    pub acyclic: Option<bool>,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            class: Class::SimpleLinear,
            preds: 3,
            max_arity: 2,
            tgds: 3,
            facts: 3,
            acyclic: None,
        }
    }
}

/// Whether [`gen_random`] with these parameters and seed uses acyclic mode.
pub fn random_is_acyclic(params: &RandomParams, seed: u64) -> bool {
    params
        .acyclic
        .unwrap_or_else(|| ChaCha8Rng::seed_from_u64(seed).gen_bool(0.5))
}

/// A random program of the requested class. In acyclic mode every position
/// gets a rank, normal edges never decrease it and special edges always
/// increase it, so no cycle goes through a special edge.
pub fn gen_random(params: &RandomParams, seed: u64) -> Result<(Database, Program)> {
    if params.class == Class::General {
        return Err(Error::Generator("class must be sl, l or g".into()));
    }
    positive(&[
        ("preds", params.preds),
        ("max-arity", params.max_arity),
        ("tgds", params.tgds),
    ])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acyclic = params.acyclic.unwrap_or_else(|| rng.gen_bool(0.5));
    let arity: Vec<usize> = (0..params.preds)
        .map(|_| rng.gen_range(1..=params.max_arity))
        .collect();
    let ranks: Vec<Vec<usize>> = arity
        .iter()
        .map(|&a| {
            (0..a)
                .map(|_| rng.gen_range(0..params.preds * params.max_arity))
                .collect()
        })
        .collect();
    let pred = |i: usize| format!("P{i}");
    let mut out = String::new();
    let constants = (params.facts / 2).max(2);
    for _ in 0..params.facts {
        let p = rng.gen_range(0..params.preds);
        let args: Vec<String> = (0..arity[p])
            .map(|_| format!("c{}", rng.gen_range(1..=constants)))
            .collect();
        writeln!(out, "{}.", atom(&pred(p), &args)).unwrap();
    }
    for k in 0..params.tgds {
        let mut made = None;
        for _ in 0..20 {
            let r = random_rule(&mut rng, params.class, &arity, k == 0);
            if !acyclic || rule_respects_ranks(&r, &ranks) {
                made = Some(r);
                break;
            }
        }
        let r = made.unwrap_or_else(|| {
            let p = rng.gen_range(0..params.preds);
            let xs: Vec<usize> = (0..arity[p]).collect();
            RandomRule {
                body: vec![(p, xs.clone())],
                head: vec![(p, xs)],
                body_vars: arity[p],
            }
        });
        let name = |v: usize| {
            if v < r.body_vars {
                format!("X{v}")
            } else {
                format!("Z{v}")
            }
        };
        let render = |atoms: &[(usize, Vec<usize>)]| -> Vec<String> {
            atoms
                .iter()
                .map(|(p, args)| {
                    atom(
                        &pred(*p),
                        &args.iter().map(|&v| name(v)).collect::<Vec<_>>(),
                    )
                })
                .collect()
        };
        let exists: BTreeSet<usize> = r
            .head
            .iter()
            .flat_map(|(_, a)| a.iter().copied())
            .filter(|&v| v >= r.body_vars)
            .collect();
        let exists: Vec<String> = exists.into_iter().map(name).collect();
        rule(&mut out, &render(&r.body), &exists, &render(&r.head));
    }
    parse(&out)
}

struct RandomRule {
    body: Vec<(usize, Vec<usize>)>,
    head: Vec<(usize, Vec<usize>)>,
    /// Variables below this index are body variables, the rest existential.
    body_vars: usize,
}

fn random_rule(rng: &mut ChaCha8Rng, class: Class, arity: &[usize], first: bool) -> RandomRule {
    let g = rng.gen_range(0..arity.len());
    let mut guard_args = Vec::with_capacity(arity[g]);
    let mut nvars = 0;
    for i in 0..arity[g] {
        // Force a repeated variable in the first rule so that the class is strict where possible.
        let repeat = class != Class::SimpleLinear
            && i > 0
            && (rng.gen_bool(0.3) || (first && i == arity[g] - 1));
        if repeat {
            guard_args.push(rng.gen_range(0..nvars));
        } else {
            guard_args.push(nvars);
            nvars += 1;
        }
    }
    let mut body = vec![(g, guard_args)];
    if class == Class::Guarded {
        let extra = if first { 1 } else { rng.gen_range(0..=2) };
        for _ in 0..extra {
            let p = rng.gen_range(0..arity.len());
            body.push((p, (0..arity[p]).map(|_| rng.gen_range(0..nvars)).collect()));
        }
    }
    let mut head = Vec::new();
    let mut next_ex = nvars;
    for _ in 0..rng.gen_range(1..=2) {
        let p = rng.gen_range(0..arity.len());
        let args = (0..arity[p])
            .map(|_| {
                if rng.gen_bool(0.3) {
                    if next_ex > nvars && rng.gen_bool(0.5) {
                        rng.gen_range(nvars..next_ex)
                    } else {
                        next_ex += 1;
                        next_ex - 1
                    }
                } else {
                    *(0..nvars).collect::<Vec<_>>().choose(rng).unwrap()
                }
            })
            .collect();
        head.push((p, args));
    }
    RandomRule {
        body,
        head,
        body_vars: nvars,
    }
}

fn rule_respects_ranks(r: &RandomRule, ranks: &[Vec<usize>]) -> bool {
    let positions = |atoms: &[(usize, Vec<usize>)], v: usize| -> Vec<usize> {
        atoms
            .iter()
            .flat_map(|(p, args)| {
                args.iter()
                    .enumerate()
                    .filter(move |&(_, &a)| a == v)
                    .map(move |(i, _)| ranks[*p][i])
            })
            .collect()
    };
    let frontier: Vec<usize> = (0..r.body_vars)
        .filter(|&v| !positions(&r.head, v).is_empty())
        .collect();
    let max_frontier = frontier.iter().flat_map(|&v| positions(&r.body, v)).max();
    for v in &frontier {
        let lo = positions(&r.body, *v).into_iter().max().unwrap_or(0);
        if positions(&r.head, *v).into_iter().any(|h| h < lo) {
            return false;
        }
    }
    let existential_ranks = r.head.iter().flat_map(|(p, args)| {
        args.iter()
            .enumerate()
            .filter(|&(_, &a)| a >= r.body_vars)
            .map(move |(i, _)| ranks[*p][i])
    });
    match max_frontier {
        Some(m) => existential_ranks.into_iter().all(|q| q > m),
        None => true,
    }
}
