//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chasegate::analysis::{build_ucq, eval_ucq, is_d_weakly_acyclic, UcqVariant};
use chasegate::bounds::{bounds, size_bound, Big};
use chasegate::chase::{forest_level_counts, run_chase, ChaseOptions, ChaseOutcome, Strategy};
use chasegate::generators::{
    gen_depth_family, gen_guarded_lower, gen_linear_lower, gen_random, gen_sl_lower, gen_tm,
    RandomParams, TmSpec, GUARDED_PARAM_LIMIT,
};
use chasegate::linearize::{
    el_partition, linearize_program, linearize_tgd, LinOptions, Saturator, SigmaType,
};
use chasegate::simplify::{es_partition, simplify_program, DEFAULT_ARITY_CAP};
use chasegate::termination::{cross_validate, decide, decide_by_bound, Answer, DecideOptions};
use chasegate::text::parse_program;
use chasegate::{Atom, Class, Database, Program, Symbol};

/// Ceiling for the bound method in the agreement criteria.
const CEILING: u64 = 1_000_000;
/// Atom cap for the capped chases in the metatheorem criteria.
const CAP: usize = 20_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn prog(src: &str) -> (Database, Program) {
    let sp = parse_program(src).expect("fixture parses");
    (sp.db, sp.program)
}

fn ia(p: &str, args: &[u32]) -> Atom<u32> {
    Atom::new(p, args.to_vec())
}

fn count(out: &ChaseOutcome, pred: &str) -> usize {
    out.instance.with_pred(Symbol::new(pred)).len()
}

const LIN_EXAMPLE: &str = "R(a,a,b,c).
    P(X,Y,X,U,W), S(X,U) -> exists Z1,Z2: R(U,Y,X,Z1), T(Z1,Z2,X).
    R(X,X,Y,Z) -> Q(X,Z).";

fn worked_examples() -> Outcome {
    let mut failures = Vec::new();

    let (db, p) = prog("R(a,b). R(X,Y) -> exists Z: R(Y,Z).");
    let char = decide(&db, &p, &DecideOptions::default()).unwrap().answer;
    let bound = decide_by_bound(&db, &p, None, CEILING).unwrap().answer;
    let ucq = eval_ucq(&build_ucq(&p, UcqVariant::SimpleLinear).unwrap(), &db);
    let capped = run_chase(&db, &p, ChaseOptions::new(100))
        .unwrap()
        .finished();
    if char != Answer::Diverges || bound != Answer::Diverges || !ucq || capped {
        failures.push(format!(
            "successor rule: characterization={char} bound={bound} ucq={ucq} finished={capped}"
        ));
    }

    let (db, p) = prog("R(a,b). R(X,X) -> exists Z: R(Z,X).");
    let v = decide(&db, &p, &DecideOptions::default()).unwrap().answer;
    let out = run_chase(&db, &p, ChaseOptions::new(100)).unwrap();
    let plain_wa = is_d_weakly_acyclic(&db, &p);
    if v != Answer::Terminates || !out.finished() || out.len() != 1 || plain_wa.is_acyclic() {
        failures.push(format!(
            "repeated-variable rule: decide={v} chase size={} plain WA acyclic={}",
            out.len(),
            plain_wa.is_acyclic()
        ));
    }

    let (db, p) = prog(LIN_EXAMPLE);
    let lin = linearize_program(&db, &p, LinOptions::default()).unwrap();
    let tau = SigmaType {
        guard: ia("R", &[1, 1, 2, 3]),
        side: BTreeSet::from([ia("Q", &[1, 3])]),
    };
    let facts: Vec<_> = lin.db.facts().cloned().collect();
    let want = vec![Atom::new(
        tau.name(),
        ["a", "b", "c"].map(Symbol::new).to_vec(),
    )];
    if facts != want || lin.types.get(&tau.name()) != Some(&tau) {
        failures.push(format!("lin(D) = {facts:?}"));
    }
    let mut sat = Saturator::new(&p, 1000).unwrap();
    let src = SigmaType {
        guard: ia("P", &[1, 2, 1, 2, 3]),
        side: BTreeSet::from([ia("S", &[1, 2]), ia("S", &[1, 1])]),
    };
    let (_, children) = linearize_tgd(&p, 0, &src, &mut sat, Symbol::new("s"))
        .unwrap()
        .unwrap();
    let tau1 = SigmaType {
        guard: ia("R", &[1, 1, 2, 3]),
        side: BTreeSet::from([ia("S", &[2, 1]), ia("S", &[2, 2]), ia("Q", &[1, 3])]),
    };
    if children.first() != Some(&tau1) {
        failures.push(format!("tau1 = {}", children[0].render()));
    }
    let tau2_expected = SigmaType {
        guard: ia("T", &[1, 2, 3]),
        side: BTreeSet::new(),
    };
    if children.get(1) != Some(&tau2_expected) {
        failures.push(format!(
            "tau2 = {} where {} was expected; the type definition keeps S(1,1), whose terms lie inside T(z1,z2,x)",
            children[1].render(),
            tau2_expected.render()
        ));
    }
    if failures.is_empty() {
        check(true, "successor rule diverges three ways; repeated-variable rule terminates with chase = D; lin(D) and tau1 match")
    } else {
        check(
            false,
            format!("{}; every other check passes", failures.join("; ")),
        )
    }
}

fn sl_lower_bound() -> Outcome {
    let (db, p) = gen_sl_lower(2, 2, 2).unwrap();
    let out = run_chase(&db, &p, ChaseOptions::new(1_000_000)).unwrap();
    let r2 = count(&out, "R2");
    check(
        out.finished() && r2 == 32 && out.len() >= 32,
        format!("R2 = {r2} (want 32), |chase| = {}", out.len()),
    )
}

fn linear_lower_bound() -> Outcome {
    let (db, p) = gen_linear_lower(1, 1, 2).unwrap();
    let out = run_chase(&db, &p, ChaseOptions::new(1_000_000)).unwrap();
    let r1 = count(&out, "R1");
    check(out.finished() && r1 >= 8, format!("R1 = {r1} (want >= 8)"))
}

fn guarded_lower_bound() -> Outcome {
    let (db, p) = gen_guarded_lower(1, 1, 1, GUARDED_PARAM_LIMIT).unwrap();
    let out = run_chase(&db, &p, ChaseOptions::new(1_000_000)).unwrap();
    check(
        out.finished() && out.len() >= 64,
        format!(
            "|chase| = {} (want >= 64), finished = {}",
            out.len(),
            out.finished()
        ),
    )
}

fn depth_family() -> Outcome {
    let mut bad = Vec::new();
    for n in 2..=10 {
        let (db, p) = gen_depth_family(n).unwrap();
        let out = run_chase(&db, &p, ChaseOptions::new(10_000)).unwrap();
        if !out.finished() || out.max_depth() as usize != n - 1 {
            bad.push(format!("n={n}: maxdepth {}", out.max_depth()));
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            "maxdepth = n-1 for n in 2..=10".into()
        } else {
            bad.join(", ")
        },
    )
}

/// Parameters for the i-th random instance: |D| <= 20, arity <= 3, <= 5 rules.
fn small_params(class: Class, i: u64) -> RandomParams {
    RandomParams {
        class,
        preds: 1 + (i % 4) as usize,
        max_arity: 1 + (i / 4 % 3) as usize,
        tgds: 1 + (i / 12 % 5) as usize,
        facts: 1 + (i * 7 % 20) as usize,
        acyclic: None,
    }
}

fn agreement(class: Class, want: usize) -> Outcome {
    let mut diverging = 0;
    let mut total = 0;
    let mut disagree = Vec::new();
    let mut seed = 0;
    while total < want {
        let (db, p) = gen_random(&small_params(class, seed), seed).unwrap();
        seed += 1;
        // Programs that happen to fall into a smaller class are skipped.
        if p.classify() != class {
            continue;
        }
        total += 1;
        match cross_validate(&db, &p, CEILING) {
            Ok(r) if r.agree() => diverging += usize::from(r.characterization == Answer::Diverges),
            Ok(r) => disagree.push(format!("seed {}: {r:?}", seed - 1)),
            Err(e) => disagree.push(format!("seed {}: {e}", seed - 1)),
        }
    }
    let mixed = diverging > 0 && diverging < total;
    check(
        disagree.is_empty() && mixed,
        format!(
            "{}/{total} agree, {diverging} diverging{}",
            total - disagree.len(),
            first(&disagree)
        ),
    )
}

fn simplification() -> Outcome {
    let mut bad = Vec::new();
    let mut finished = 0;
    let mut tried = 0;
    let mut seed = 0;
    while tried < 100 {
        let params = small_params(Class::Linear, seed);
        let (db, p) = gen_random(&params, seed).unwrap();
        seed += 1;
        if p.classify() != Class::Linear {
            continue;
        }
        tried += 1;
        let s = simplify_program(&db, &p, DEFAULT_ARITY_CAP).unwrap();
        let left = run_chase(&db, &p, ChaseOptions::new(CAP)).unwrap();
        let right = run_chase(&s.db, &s.program, ChaseOptions::new(CAP)).unwrap();
        if left.finished() != right.finished() {
            bad.push(format!(
                "seed {}: finished {} vs {}",
                seed - 1,
                left.finished(),
                right.finished()
            ));
            continue;
        }
        if left.finished() {
            finished += 1;
            let r = es_partition(&db, &p, ChaseOptions::new(CAP)).unwrap();
            if left.max_depth() != right.max_depth() || !r.verified() {
                bad.push(format!(
                    "seed {}: depth {} vs {}, partition {}",
                    seed - 1,
                    left.max_depth(),
                    right.max_depth(),
                    r.verified()
                ));
            }
        }
    }
    check(
        bad.is_empty(),
        format!(
            "{tried} linear instances, {finished} finished, {} failures{}",
            bad.len(),
            first(&bad)
        ),
    )
}

fn first(v: &[String]) -> String {
    v.first()
        .map(|d| format!("; first: {d}"))
        .unwrap_or_default()
}

fn linearization() -> Outcome {
    let mut bad = Vec::new();
    let mut finished = 0;
    let mut tried = 0;
    let mut seed = 0;
    while tried < 30 {
        let params = RandomParams {
            class: Class::Guarded,
            preds: 1 + (seed % 3) as usize,
            max_arity: 1 + (seed / 3 % 3) as usize,
            tgds: 1 + (seed / 9 % 3) as usize,
            facts: 1 + (seed % 5) as usize,
            acyclic: None,
        };
        let (db, p) = gen_random(&params, seed).unwrap();
        seed += 1;
        if p.classify() != Class::Guarded {
            continue;
        }
        tried += 1;
        let lin = match linearize_program(&db, &p, LinOptions::default()) {
            Ok(l) => l,
            Err(e) => {
                bad.push(format!("seed {}: {e}", seed - 1));
                continue;
            }
        };
        let left = run_chase(&db, &p, ChaseOptions::new(CAP)).unwrap();
        let right = run_chase(&lin.db, &lin.program, ChaseOptions::new(CAP)).unwrap();
        if left.finished() != right.finished() {
            bad.push(format!(
                "seed {}: finished {} vs {}",
                seed - 1,
                left.finished(),
                right.finished()
            ));
            continue;
        }
        if left.finished() {
            finished += 1;
            let r = el_partition(&db, &p, ChaseOptions::new(CAP), LinOptions::default()).unwrap();
            if left.max_depth() != right.max_depth() || !r.verified() {
                bad.push(format!(
                    "seed {}: depth {} vs {}, partition {}",
                    seed - 1,
                    left.max_depth(),
                    right.max_depth(),
                    r.verified()
                ));
            }
        }
    }
    check(
        bad.is_empty(),
        format!(
            "{tried} guarded instances, {finished} finished, {} failures{}",
            bad.len(),
            first(&bad)
        ),
    )
}

/// Random instances of every class plus the small families.
fn corpus() -> Vec<(String, Database, Program)> {
    let mut out = Vec::new();
    for class in [Class::SimpleLinear, Class::Linear, Class::Guarded] {
        for seed in 0..60 {
            let (db, p) = gen_random(&small_params(class, seed), seed).unwrap();
            out.push((format!("random {} seed {seed}", class.short()), db, p));
        }
    }
    let families = [
        ("sl-lb 2,2,2", gen_sl_lower(2, 2, 2)),
        ("lin-lb 1,1,2", gen_linear_lower(1, 1, 2)),
        (
            "g-lb 1,1,1",
            gen_guarded_lower(1, 1, 1, GUARDED_PARAM_LIMIT),
        ),
        ("depth 6", gen_depth_family(6)),
    ];
    for (name, g) in families {
        let (db, p) = g.unwrap();
        out.push((name.to_owned(), db, p));
    }
    out
}

fn at_least(b: &Big, n: u64) -> bool {
    n == 0 || b.exceeds(n - 1)
}

fn bound_inequalities() -> Outcome {
    let mut bad = Vec::new();
    let mut runs = 0;
    for (name, db, p) in corpus() {
        let class = p.classify();
        // The depth family is not guarded; no bound applies.
        if class == Class::General {
            continue;
        }
        let out = run_chase(&db, &p, ChaseOptions::new(CAP).with_forest()).unwrap();
        if !out.finished() {
            continue;
        }
        runs += 1;
        let b = bounds(&p, class).unwrap();
        if !at_least(&size_bound(db.len(), &b), out.len() as u64) {
            bad.push(format!("{name}: size {} above |D|*f", out.len()));
        }
        if !at_least(&b.d, u64::from(out.max_depth())) {
            bad.push(format!(
                "{name}: depth {} above d = {}",
                out.max_depth(),
                b.d.short()
            ));
        }
        let norm = Big::new(p.norm());
        for f in db.facts() {
            for (level, n) in forest_level_counts(&out, &p, f).unwrap() {
                let cap = norm.pow(&Big::new(2 * p.max_arity() as u64 * (u64::from(level) + 1)));
                if !at_least(&cap, n as u64) {
                    bad.push(format!("{name}: level {level} has {n} atoms"));
                }
            }
        }
    }
    check(
        bad.is_empty() && runs > 0,
        format!(
            "{runs} finished runs, {} violations{}",
            bad.len(),
            first(&bad)
        ),
    )
}

fn order_invariance() -> Outcome {
    let mut bad = Vec::new();
    let mut runs = 0;
    for (name, db, p) in corpus() {
        if runs == 50 {
            break;
        }
        let base = run_chase(&db, &p, ChaseOptions::new(CAP)).unwrap();
        if !base.finished() || base.len() == db.len() {
            continue;
        }
        runs += 1;
        let want = base.instance.structural_atoms(&p);
        for s in [
            Strategy::Lifo,
            Strategy::Random(1),
            Strategy::Random(2),
            Strategy::Random(3),
        ] {
            let out = run_chase(&db, &p, ChaseOptions::new(CAP).strategy(s)).unwrap();
            if !out.finished() || out.instance.structural_atoms(&p) != want {
                bad.push(format!("{name} under {s:?}"));
            }
        }
    }
    check(
        bad.is_empty() && runs == 50,
        format!(
            "{runs} instances x 5 strategies, {} mismatches{}",
            bad.len(),
            first(&bad)
        ),
    )
}

fn turing_machines() -> Outcome {
    let halt =
        TmSpec::parse("states s0 s1\nalphabet a\nstart s0\ns0 _ -> s1 a R\ns1 a -> s1 a S\n")
            .unwrap();
    // The second transition never fires: the head ends on a blank cell.
    let (db, p) = gen_tm(&halt).unwrap();
    let h = run_chase(&db, &p, ChaseOptions::new(10_000)).unwrap();
    let looping = TmSpec::parse("states s0 s1\nalphabet\nstart s0\ns0 _ -> s0 _ S\n").unwrap();
    let (db, p) = gen_tm(&looping).unwrap();
    let l = run_chase(&db, &p, ChaseOptions::new(10_000)).unwrap();
    check(
        h.finished() && !l.finished(),
        format!(
            "halting: finished={} ({} atoms); looping: finished={} ({} atoms)",
            h.finished(),
            h.len(),
            l.finished(),
            l.len()
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("worked examples", Duration::from_secs(1), worked_examples),
        (
            "simple-linear lower bound",
            Duration::from_secs(5),
            sl_lower_bound,
        ),
        (
            "linear lower bound",
            Duration::from_secs(5),
            linear_lower_bound,
        ),
        (
            "guarded lower bound",
            Duration::from_secs(60),
            guarded_lower_bound,
        ),
        ("depth family", Duration::from_secs(5), depth_family),
        (
            "three-way agreement, simple-linear",
            Duration::from_secs(120),
            || agreement(Class::SimpleLinear, 200),
        ),
        (
            "three-way agreement, linear",
            Duration::from_secs(300),
            || agreement(Class::Linear, 100),
        ),
        (
            "simplification preserves termination",
            Duration::from_secs(300),
            simplification,
        ),
        (
            "linearization preserves termination",
            Duration::from_secs(300),
            linearization,
        ),
        (
            "bound inequalities",
            Duration::from_secs(300),
            bound_inequalities,
        ),
        (
            "derivation-order invariance",
            Duration::from_secs(300),
            order_invariance,
        ),
        (
            "turing machine encoding",
            Duration::from_secs(30),
            turing_machines,
        ),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut o = f();
        let took = start.elapsed();
        if took > *limit {
            o.pass = false;
            o.detail
                .push_str(&format!("; took {took:.1?}, limit {limit:?}"));
        }
        failed += usize::from(!o.pass);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name} [{took:.2?}]: {}", i + 1, o.detail);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
