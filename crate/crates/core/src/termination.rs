//! Non-uniform termination deciders.

use std::fmt;

use serde_json::{json, Value};

use crate::analysis::{
    build_ucq, eval_ucq, is_d_weakly_acyclic, UcqVariant, WeakAcyclicity, Witness,
};
use crate::bounds::{bounds, size_bound, Bounds};
use crate::chase::{run_chase, CapKind, ChaseOptions, ChaseOutcome, ChaseStatus, Strategy};
use crate::error::{Error, Result};
use crate::linearize::{linearize_program, LinOptions};
use crate::model::{Class, Database, Program};
use crate::simplify::{simplify_program, DEFAULT_ARITY_CAP};

pub const DEFAULT_CEILING: u64 = 1_000_000_000;
pub const DEFAULT_CHASE_CAP: usize = 100_000;
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    Terminates,
    Diverges,
    Unknown,
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Terminates => "terminates",
            Answer::Diverges => "diverges",
            Answer::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Characterization,
    Bound,
    CappedChase,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Characterization => "characterization",
            Method::Bound => "bound",
            Method::CappedChase => "capped-chase",
        }
    }
}

/// Program on which a weak-acyclicity check was run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Original,
    Simplified,
    LinearizedSimplified,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Original => "original",
            Stage::Simplified => "simplified",
            Stage::LinearizedSimplified => "linearized+simplified",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChaseStats {
    pub atoms: usize,
    pub max_depth: u32,
    pub steps: usize,
}

impl ChaseStats {
    pub fn of(out: &ChaseOutcome) -> ChaseStats {
        ChaseStats {
            atoms: out.len(),
            max_depth: out.max_depth(),
            steps: out.steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Evidence {
    Acyclic {
        stage: Stage,
    },
    Cycle {
        stage: Stage,
        witness: Witness,
    },
    Chase {
        stats: ChaseStats,
        cap: Option<CapKind>,
    },
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub answer: Answer,
    pub method: Method,
    pub class: Class,
    pub evidence: Evidence,
    pub bounds: Option<Bounds>,
    pub warnings: Vec<String>,
}

impl Verdict {
    pub fn stats(&self) -> Option<ChaseStats> {
        match &self.evidence {
            Evidence::Chase { stats, .. } => Some(*stats),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.evidence {
            Evidence::Cycle { witness, .. } => Some(witness),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let stats = self
            .stats()
            .map(|s| json!({ "atoms": s.atoms, "maxdepth": s.max_depth, "steps": s.steps }));
        let witness = match &self.evidence {
            Evidence::Cycle { stage, witness } => json!({
                "program": stage.as_str(),
                "special_edge": [witness.special.0.to_string(), witness.special.1.to_string()],
                "cycle": witness.cycle.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "support": witness.support.as_str(),
            }),
            _ => Value::Null,
        };
        let cap = match &self.evidence {
            Evidence::Chase { cap: Some(k), .. } => json!(cap_name(*k)),
            _ => Value::Null,
        };
        let bounds = self
            .bounds
            .as_ref()
            .map(|b| json!({ "d": b.d.to_string(), "f": b.f.to_string() }));
        json!({
            "version": REPORT_VERSION,
            "verdict": self.answer.as_str(),
            "class": self.class.short(),
            "method": self.method.as_str(),
            "stats": stats,
            "witness": witness,
            "cap": cap,
            "bounds": bounds,
            "warnings": self.warnings,
        })
    }
}

pub fn cap_name(k: CapKind) -> &'static str {
    match k {
        CapKind::Atoms => "atoms",
        CapKind::Steps => "steps",
        CapKind::Depth => "depth",
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DecideOptions {
    /// Class to decide as; must not be more specific than the program's class.
    pub class: Option<Class>,
    /// Atom cap for the semi-decision on general programs.
    pub chase_cap: usize,
    /// Ceiling for the bound-based fallback.
    pub ceiling: u64,
    pub lin: LinOptions,
    pub arity_cap: usize,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            class: None,
            chase_cap: DEFAULT_CHASE_CAP,
            ceiling: DEFAULT_CEILING,
            lin: LinOptions::default(),
            arity_cap: DEFAULT_ARITY_CAP,
        }
    }
}

/// The class to decide `p` as: `requested`, if the program belongs to it.
pub fn effective_class(p: &Program, requested: Option<Class>) -> Result<Class> {
    let actual = p.classify();
    match requested {
        None => Ok(actual),
        Some(c) if c >= actual => Ok(c),
        Some(c) => Err(Error::WrongClass {
            expected: c,
            found: actual,
        }),
    }
}

/// Weak acyclicity of the transformed program that characterizes termination for `class`.
pub fn characterize(
    db: &Database,
    p: &Program,
    class: Class,
    opts: &DecideOptions,
) -> Result<(WeakAcyclicity, Stage)> {
    match class {
        Class::SimpleLinear => Ok((is_d_weakly_acyclic(db, p), Stage::Original)),
        Class::Linear => {
            let s = simplify_program(db, p, opts.arity_cap)?;
            Ok((is_d_weakly_acyclic(&s.db, &s.program), Stage::Simplified))
        }
        Class::Guarded => {
            let lin = linearize_program(db, p, opts.lin)?;
            let s = simplify_program(&lin.db, &lin.program, opts.arity_cap)?;
            Ok((
                is_d_weakly_acyclic(&s.db, &s.program),
                Stage::LinearizedSimplified,
            ))
        }
        Class::General => Err(Error::WrongClass {
            expected: Class::Guarded,
            found: Class::General,
        }),
    }
}

pub fn decide(db: &Database, p: &Program, opts: &DecideOptions) -> Result<Verdict> {
    db.check_arities(p)?;
    let class = effective_class(p, opts.class)?;
    if class == Class::General {
        let out = run_chase(db, p, ChaseOptions::new(opts.chase_cap))?;
        let (answer, cap) = match out.status {
            ChaseStatus::Finished => (Answer::Terminates, None),
            ChaseStatus::CapExceeded { which, .. } => (Answer::Unknown, Some(which)),
        };
        return Ok(Verdict {
            answer,
            method: Method::CappedChase,
            class,
            evidence: Evidence::Chase {
                stats: ChaseStats::of(&out),
                cap,
            },
            bounds: None,
            warnings: Vec::new(),
        });
    }
    match characterize(db, p, class, opts) {
        Ok((wa, stage)) => {
            let (answer, evidence) = match wa {
                WeakAcyclicity::Acyclic => (Answer::Terminates, Evidence::Acyclic { stage }),
                WeakAcyclicity::Cyclic(witness) => {
                    (Answer::Diverges, Evidence::Cycle { stage, witness })
                }
            };
            Ok(Verdict {
                answer,
                method: Method::Characterization,
                class,
                evidence,
                bounds: Some(bounds(p, class)?),
                warnings: Vec::new(),
            })
        }
        Err(e @ (Error::BudgetExceeded { .. } | Error::ArityCapExceeded { .. })) => {
            let mut v = decide_by_bound(db, p, Some(class), opts.ceiling)?;
            v.warnings
                .push(format!("{e}; fell back to the bound method"));
            Ok(v)
        }
        Err(e) => Err(e),
    }
}

/// Runs the chase up to |D|·f_C(Σ) atoms. Depth beyond d_C(Σ) also certifies
/// divergence. When |D|·f_C(Σ) is above `ceiling` the chase is capped at the
/// ceiling and fails unless it finishes or the depth certificate fires first.
pub fn decide_by_bound(
    db: &Database,
    p: &Program,
    class: Option<Class>,
    ceiling: u64,
) -> Result<Verdict> {
    db.check_arities(p)?;
    let class = effective_class(p, class)?;
    let b = bounds(p, class)?;
    let size = size_bound(db.len(), &b);
    let (cap, certified) = match size.to_u64() {
        Some(s) if s <= ceiling => (s, true),
        _ => (ceiling, false),
    };
    let cap = usize::try_from(cap).unwrap_or(usize::MAX).max(1);
    let mut opts = ChaseOptions::new(cap)
        .strategy(Strategy::Lifo)
        .max_steps(cap.saturating_add(1));
    if let Some(d) = b.d.to_u64().and_then(|d| u32::try_from(d).ok()) {
        opts = opts.max_depth(d);
    }
    let out = run_chase(db, p, opts)?;
    let stats = ChaseStats::of(&out);
    let (answer, cap_hit) = match out.status {
        ChaseStatus::Finished => (Answer::Terminates, None),
        ChaseStatus::CapExceeded {
            which: CapKind::Depth,
            ..
        } => (Answer::Diverges, Some(CapKind::Depth)),
        ChaseStatus::CapExceeded { which, .. } if certified => (Answer::Diverges, Some(which)),
        ChaseStatus::CapExceeded { .. } => {
            return Err(Error::CeilingExceeded {
                needed: size.to_string(),
                ceiling,
            });
        }
    };
    Ok(Verdict {
        answer,
        method: Method::Bound,
        class,
        evidence: Evidence::Chase {
            stats,
            cap: cap_hit,
        },
        bounds: Some(b),
        warnings: Vec::new(),
    })
}

#[derive(Clone, Debug)]
pub struct CrossReport {
    pub characterization: Answer,
    pub bound: Answer,
    pub ucq: bool,
}

impl CrossReport {
    pub fn agree(&self) -> bool {
        self.characterization == self.bound
            && self.ucq == (self.characterization == Answer::Diverges)
    }
}

/// Decides a simple-linear or linear program three ways.
pub fn cross_validate(db: &Database, p: &Program, ceiling: u64) -> Result<CrossReport> {
    let class = p.classify();
    let variant = match class {
        Class::SimpleLinear => UcqVariant::SimpleLinear,
        Class::Linear => UcqVariant::LinearSimplified,
        _ => {
            return Err(Error::WrongClass {
                expected: Class::Linear,
                found: class,
            })
        }
    };
    let characterization = decide(db, p, &DecideOptions::default())?.answer;
    let bound = decide_by_bound(db, p, None, ceiling)?.answer;
    let ucq = eval_ucq(&build_ucq(p, variant)?, db);
    Ok(CrossReport {
        characterization,
        bound,
        ucq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    fn run(src: &str) -> Verdict {
        let sp = parse_program(src).unwrap();
        decide(&sp.db, &sp.program, &DecideOptions::default()).unwrap()
    }

    #[test]
    fn sl_divergent() {
        let v = run("R(a,b). R(X,Y) -> exists Z: R(Y,Z).");
        assert_eq!(v.answer, Answer::Diverges);
        assert_eq!(v.class, Class::SimpleLinear);
        assert!(v.witness().is_some());
    }

    #[test]
    fn linear_needs_simplification() {
        let sp = parse_program("R(a,b). R(X,X) -> exists Z: R(Z,X).").unwrap();
        assert!(!is_d_weakly_acyclic(&sp.db, &sp.program).is_acyclic());
        let v = decide(&sp.db, &sp.program, &DecideOptions::default()).unwrap();
        assert_eq!(v.answer, Answer::Terminates);
        assert_eq!(
            v.evidence,
            Evidence::Acyclic {
                stage: Stage::Simplified
            }
        );
    }

    #[test]
    fn forced_class() {
        let sp = parse_program("R(a,b). R(X,Y) -> exists Z: R(Y,Z).").unwrap();
        for c in [Class::Linear, Class::Guarded] {
            let opts = DecideOptions {
                class: Some(c),
                ..DecideOptions::default()
            };
            assert_eq!(
                decide(&sp.db, &sp.program, &opts).unwrap().answer,
                Answer::Diverges
            );
        }
        let sp = parse_program("R(X,Y), S(Y) -> P(X).").unwrap();
        let opts = DecideOptions {
            class: Some(Class::Linear),
            ..DecideOptions::default()
        };
        assert!(matches!(
            decide(&sp.db, &sp.program, &opts),
            Err(Error::WrongClass { .. })
        ));
    }

    #[test]
    fn general_is_semi_decided() {
        let v = run("E(a,b). E(X,Y), E(Y,Z) -> E(X,Z).");
        assert_eq!(
            (v.answer, v.method),
            (Answer::Terminates, Method::CappedChase)
        );
        let sp = parse_program("E(a,b). E(b,a). E(X,Y), E(Y,Z) -> exists W: E(Z,W).").unwrap();
        let opts = DecideOptions {
            chase_cap: 50,
            ..DecideOptions::default()
        };
        let v = decide(&sp.db, &sp.program, &opts).unwrap();
        assert_eq!(v.answer, Answer::Unknown);
        assert!(v.bounds.is_none());
    }

    #[test]
    fn bound_no_trigger() {
        let sp = parse_program("R(a,b). R(X,X) -> exists Z: R(Z,X).").unwrap();
        let v = decide_by_bound(&sp.db, &sp.program, None, DEFAULT_CEILING).unwrap();
        assert_eq!(v.answer, Answer::Terminates);
        assert_eq!(v.stats().unwrap().steps, 0);
    }

    #[test]
    fn bound_one_step() {
        let sp = parse_program("R(a). R(X) -> exists Z: P(X,Z).").unwrap();
        let v = decide_by_bound(&sp.db, &sp.program, None, DEFAULT_CEILING).unwrap();
        assert_eq!(v.answer, Answer::Terminates);
        assert_eq!(v.stats().unwrap().atoms, 2);
    }

    #[test]
    fn bound_depth_certificate_and_ceiling() {
        let sp = parse_program("R(a,b). R(X,Y) -> exists Z: R(Y,Z).").unwrap();
        let v = decide_by_bound(&sp.db, &sp.program, None, DEFAULT_CEILING).unwrap();
        assert_eq!(v.answer, Answer::Diverges);
        assert_eq!(
            v.evidence,
            Evidence::Chase {
                stats: v.stats().unwrap(),
                cap: Some(CapKind::Depth)
            }
        );
        // Depth 3 needs 4 atoms; a smaller ceiling stops before the certificate.
        let e = decide_by_bound(&sp.db, &sp.program, None, 3).unwrap_err();
        assert!(
            matches!(e, Error::CeilingExceeded { ceiling: 3, .. }),
            "{e}"
        );
    }

    #[test]
    fn cross_validation_agrees() {
        for src in [
            "R(a,b). R(X,Y) -> exists Z: R(Y,Z).",
            "R(a,b). R(X,Y) -> exists Z: P(Y,Z).",
            "R(a,b). R(X,X) -> exists Z: R(X,Z). R(X,Y) -> R(Y,Y).",
            "R(a,a). R(X,X) -> exists Z: R(X,Z). R(X,Y) -> R(Y,Y).",
            "R(a,b). R(X,X) -> exists Z: R(Z,X).",
            "R(a,a). R(X,X) -> exists Z: R(Z,X).",
        ] {
            let sp = parse_program(src).unwrap();
            let r = cross_validate(&sp.db, &sp.program, DEFAULT_CEILING).unwrap();
            assert!(r.agree(), "{src}: {r:?}");
        }
    }

    #[test]
    fn json_shape() {
        let v = run("R(a,b). R(X,Y) -> exists Z: R(Y,Z).");
        let j = v.to_json();
        assert_eq!(j["verdict"], "diverges");
        assert_eq!(j["class"], "sl");
        assert_eq!(j["bounds"]["f"], "50331648");
        assert_eq!(j["witness"]["cycle"], json!(["(R,2)", "(R,2)"]));
        assert!(j["stats"].is_null());
    }
}
