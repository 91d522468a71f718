//! Parser and renderer for the rule language (see `docs/grammar.md`).

use std::collections::HashMap;
use std::fmt::Write;

use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::model::{Atom, Database, Fact, Program, RuleAtom, Tgd, Var};
use crate::symbol::Symbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatementKind {
    Fact,
    Rule,
}

/// Source location of a statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
    pub kind: StatementKind,
    /// Index into the database facts or the program rules.
    pub index: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SourceProgram {
    pub db: Database,
    pub program: Program,
    pub spans: Vec<Span>,
}

impl PartialEq for SourceProgram {
    fn eq(&self, other: &Self) -> bool {
        self.db == other.db && self.program == other.program
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Arrow,
    Colon,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        kind: ParseErrorKind::Syntax(msg.into()),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let tok = match c {
            '(' => {
                bump!();
                Tok::LParen
            }
            ')' => {
                bump!();
                Tok::RParen
            }
            ',' => {
                bump!();
                Tok::Comma
            }
            '.' => {
                bump!();
                Tok::Dot
            }
            ':' => {
                bump!();
                Tok::Colon
            }
            '-' => {
                bump!();
                if i < chars.len() && chars[i] == '>' {
                    bump!();
                    Tok::Arrow
                } else {
                    return Err(syntax(tl, tc, "expected `->`"));
                }
            }
            '\'' => {
                bump!();
                let mut s = String::new();
                loop {
                    if i >= chars.len() {
                        return Err(syntax(tl, tc, "unterminated quoted name"));
                    }
                    match chars[i] {
                        '\'' => {
                            bump!();
                            break;
                        }
                        '\\' => {
                            bump!();
                            if i >= chars.len() {
                                return Err(syntax(tl, tc, "unterminated quoted name"));
                            }
                            s.push(chars[i]);
                            bump!();
                        }
                        '\n' => return Err(syntax(line, col, "newline in quoted name")),
                        ch => {
                            s.push(ch);
                            bump!();
                        }
                    }
                }
                Tok::Quoted(s)
            }
            c if c.is_ascii_alphanumeric() => {
                let mut s = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    s.push(chars[i]);
                    bump!();
                }
                if s.starts_with(|c: char| c.is_ascii_digit())
                    && !s.chars().all(|c| c.is_ascii_digit())
                {
                    return Err(syntax(tl, tc, format!("malformed number `{s}`")));
                }
                Tok::Ident(s)
            }
            other => return Err(syntax(tl, tc, format!("unexpected character `{other}`"))),
        };
        out.push(Token {
            tok,
            line: tl,
            col: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[derive(Clone, Debug)]
struct RawTerm {
    name: String,
    is_var: bool,
    line: usize,
    col: usize,
}

#[derive(Clone, Debug)]
struct RawAtom {
    pred: String,
    args: Vec<RawTerm>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }
    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }
    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(syntax(
                t.line,
                t.col,
                format!("expected {what}, found {}", describe(&t.tok)),
            ))
        }
    }

    fn atom(&mut self) -> Result<RawAtom, ParseError> {
        let t = self.next();
        let pred = match t.tok {
            Tok::Ident(s) if !s.starts_with(|c: char| c.is_ascii_digit()) => s,
            Tok::Quoted(s) => s,
            other => {
                return Err(syntax(
                    t.line,
                    t.col,
                    format!("expected predicate, found {}", describe(&other)),
                ))
            }
        };
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek().tok == Tok::RParen {
            self.next();
            return Ok(RawAtom { pred, args });
        }
        loop {
            let t = self.next();
            let term = match t.tok {
                Tok::Ident(s) => {
                    let is_var = s.starts_with(|c: char| c.is_ascii_uppercase());
                    RawTerm {
                        name: s,
                        is_var,
                        line: t.line,
                        col: t.col,
                    }
                }
                Tok::Quoted(s) => RawTerm {
                    name: s,
                    is_var: false,
                    line: t.line,
                    col: t.col,
                },
                other => {
                    return Err(syntax(
                        t.line,
                        t.col,
                        format!("expected term, found {}", describe(&other)),
                    ))
                }
            };
            args.push(term);
            let t = self.next();
            match t.tok {
                Tok::Comma => continue,
                Tok::RParen => break,
                other => {
                    return Err(syntax(
                        t.line,
                        t.col,
                        format!("expected `,` or `)`, found {}", describe(&other)),
                    ))
                }
            }
        }
        Ok(RawAtom { pred, args })
    }

    fn atoms(&mut self) -> Result<Vec<RawAtom>, ParseError> {
        let mut v = vec![self.atom()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            v.push(self.atom()?);
        }
        Ok(v)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Quoted(s) => format!("'{s}'"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Arrow => "`->`".into(),
        Tok::Colon => "`:`".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_program(text: &str) -> Result<SourceProgram> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let mut db = Database::new();
    let mut tgds = Vec::new();
    let mut spans = Vec::new();
    let mut arities: HashMap<String, usize> = HashMap::new();
    let mut check_arity = |a: &RawAtom| -> Result<()> {
        let n = a.args.len();
        match arities.get(&a.pred) {
            Some(&m) if m != n => Err(Error::ArityConflict {
                pred: Symbol::new(&a.pred),
                first: m,
                second: n,
            }),
            _ => {
                arities.insert(a.pred.clone(), n);
                Ok(())
            }
        }
    };
    while p.peek().tok != Tok::Eof {
        let start = p.peek().clone();
        let body = p.atoms()?;
        let t = p.next();
        match t.tok {
            Tok::Dot => {
                if body.len() != 1 {
                    return Err(
                        syntax(start.line, start.col, "a fact must be a single atom").into(),
                    );
                }
                let a = &body[0];
                check_arity(a)?;
                let mut args = Vec::new();
                for term in &a.args {
                    if term.is_var {
                        return Err(ParseError {
                            line: term.line,
                            col: term.col,
                            kind: ParseErrorKind::VariableInFact(term.name.clone()),
                        }
                        .into());
                    }
                    args.push(Symbol::new(&term.name));
                }
                let f = Atom::new(a.pred.as_str(), args);
                if db.insert(f) {
                    spans.push(Span {
                        line: start.line,
                        col: start.col,
                        kind: StatementKind::Fact,
                        index: db.len() - 1,
                    });
                }
            }
            Tok::Arrow => {
                let mut declared: Vec<(String, usize, usize)> = Vec::new();
                let is_quant = matches!(&p.peek().tok, Tok::Ident(s) if s == "exists")
                    && matches!(p.peek2(), Tok::Ident(s) if s.starts_with(|c: char| c.is_ascii_uppercase()));
                if is_quant {
                    p.next();
                    loop {
                        let t = p.next();
                        match t.tok {
                            Tok::Ident(s) if s.starts_with(|c: char| c.is_ascii_uppercase()) => {
                                if declared.iter().any(|(d, _, _)| *d == s) {
                                    return Err(ParseError {
                                        line: t.line,
                                        col: t.col,
                                        kind: ParseErrorKind::DuplicateExistential(s),
                                    }
                                    .into());
                                }
                                declared.push((s, t.line, t.col));
                            }
                            other => {
                                return Err(syntax(
                                    t.line,
                                    t.col,
                                    format!("expected variable, found {}", describe(&other)),
                                )
                                .into())
                            }
                        }
                        let t = p.next();
                        match t.tok {
                            Tok::Comma => continue,
                            Tok::Colon => break,
                            other => {
                                return Err(syntax(
                                    t.line,
                                    t.col,
                                    format!("expected `,` or `:`, found {}", describe(&other)),
                                )
                                .into())
                            }
                        }
                    }
                }
                let head = p.atoms()?;
                p.expect(Tok::Dot, "`.`")?;
                for a in body.iter().chain(&head) {
                    check_arity(a)?;
                }
                let tgd = build_tgd(tgds.len() + 1, &body, &head, &declared)?;
                spans.push(Span {
                    line: start.line,
                    col: start.col,
                    kind: StatementKind::Rule,
                    index: tgds.len(),
                });
                tgds.push(tgd);
            }
            other => {
                return Err(syntax(
                    t.line,
                    t.col,
                    format!("expected `.` or `->`, found {}", describe(&other)),
                )
                .into())
            }
        }
    }
    let program = Program::new(tgds)?;
    Ok(SourceProgram { db, program, spans })
}

fn build_tgd(
    number: usize,
    body: &[RawAtom],
    head: &[RawAtom],
    declared: &[(String, usize, usize)],
) -> Result<Tgd> {
    let mut names: Vec<Symbol> = Vec::new();
    let mut index: HashMap<String, Var> = HashMap::new();
    let mut var_of = |t: &RawTerm, names: &mut Vec<Symbol>| -> Result<Var> {
        if !t.is_var {
            return Err(ParseError {
                line: t.line,
                col: t.col,
                kind: ParseErrorKind::ConstantInRule(t.name.clone()),
            }
            .into());
        }
        Ok(*index.entry(t.name.clone()).or_insert_with(|| {
            names.push(Symbol::new(&t.name));
            Var(names.len() as u32 - 1)
        }))
    };
    let mut b = Vec::new();
    for a in body {
        let args = a
            .args
            .iter()
            .map(|t| var_of(t, &mut names))
            .collect::<Result<Vec<_>>>()?;
        b.push(Atom::new(a.pred.as_str(), args));
    }
    let body_count = names.len();
    for (d, line, col) in declared {
        if names.iter().take(body_count).any(|n| n.as_str() == d) {
            return Err(ParseError {
                line: *line,
                col: *col,
                kind: ParseErrorKind::ExistentialInBody(d.clone()),
            }
            .into());
        }
    }
    let mut h = Vec::new();
    for a in head {
        let mut args = Vec::new();
        for t in &a.args {
            let v = var_of(t, &mut names)?;
            if v.index() >= body_count && !declared.iter().any(|(d, _, _)| *d == t.name) {
                return Err(ParseError {
                    line: t.line,
                    col: t.col,
                    kind: ParseErrorKind::UndeclaredHeadVariable(t.name.clone()),
                }
                .into());
            }
            args.push(v);
        }
        h.push(Atom::new(a.pred.as_str(), args));
    }
    for (d, line, col) in declared {
        if !names.iter().any(|n| n.as_str() == d) {
            return Err(syntax(
                *line,
                *col,
                format!("existential variable `{d}` does not occur in the head"),
            )
            .into());
        }
    }
    Tgd::new(Symbol::new(&format!("r{number}")), names, b, h)
}

fn is_plain_pred(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_alphabetic())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_plain_const(s: &str) -> bool {
    (s.starts_with(|c: char| c.is_ascii_lowercase())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
        || (!s.is_empty() && s.chars().all(|c| c.is_ascii_digit()))
}

fn is_plain_var(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

pub fn render_pred(p: Symbol) -> String {
    let s = p.as_str();
    if is_plain_pred(s) {
        s.to_owned()
    } else {
        quote(s)
    }
}

pub fn render_const(c: Symbol) -> String {
    let s = c.as_str();
    if is_plain_const(s) {
        s.to_owned()
    } else {
        quote(s)
    }
}

/// Renders `pred(a1,…,an)` from already rendered arguments.
pub fn render_atom_with<I, S>(pred: Symbol, args: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = render_pred(pred);
    out.push('(');
    for (i, a) in args.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(a.as_ref());
    }
    out.push(')');
    out
}

pub fn render_fact(f: &Fact) -> String {
    render_atom_with(f.pred, f.args.iter().map(|&c| render_const(c))) + "."
}

/// Display names for the variables of a TGD that are valid variable tokens and distinct.
pub fn variable_names(t: &Tgd) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let ok = t
        .var_names()
        .iter()
        .all(|n| is_plain_var(n.as_str()) && seen.insert(*n));
    if ok {
        t.var_names()
            .iter()
            .map(|n| n.as_str().to_owned())
            .collect()
    } else {
        (0..t.num_vars()).map(|i| format!("V{}", i + 1)).collect()
    }
}

pub fn render_tgd(t: &Tgd) -> String {
    let names = variable_names(t);
    let atom =
        |a: &RuleAtom| render_atom_with(a.pred, a.args.iter().map(|v| names[v.index()].as_str()));
    let mut out = t.body().iter().map(atom).collect::<Vec<_>>().join(", ");
    out.push_str(" -> ");
    if !t.existentials().is_empty() {
        out.push_str("exists ");
        out.push_str(
            &t.existentials()
                .iter()
                .map(|v| names[v.index()].as_str())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push_str(": ");
    }
    out.push_str(&t.head().iter().map(atom).collect::<Vec<_>>().join(", "));
    out.push('.');
    out
}

/// Facts first (in database order), then rules (in program order), one per line.
pub fn render_program(db: &Database, p: &Program) -> String {
    let mut out = String::new();
    for f in db.facts() {
        writeln!(out, "{}", render_fact(f)).unwrap();
    }
    for t in p.tgds() {
        writeln!(out, "{}", render_tgd(t)).unwrap();
    }
    out
}

pub fn render_source(sp: &SourceProgram) -> String {
    render_program(&sp.db, &sp.program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Class;

    fn kind(text: &str) -> ParseErrorKind {
        match parse_program(text) {
            Err(Error::Parse(e)) => e.kind,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_fact() {
        let sp = parse_program("R(a,b).").unwrap();
        assert_eq!(sp.db.len(), 1);
        assert!(sp.db.contains(&crate::model::fact("R", &["a", "b"])));
    }

    #[test]
    fn parses_rule() {
        let sp = parse_program("R(X,Y) -> exists Z: R(Y,Z).").unwrap();
        let t = sp.program.tgd(0);
        assert_eq!(
            t.frontier()
                .iter()
                .map(|&v| t.var_name(v).as_str())
                .collect::<Vec<_>>(),
            ["Y"]
        );
        assert_eq!(
            t.existentials()
                .iter()
                .map(|&v| t.var_name(v).as_str())
                .collect::<Vec<_>>(),
            ["Z"]
        );
    }

    #[test]
    fn linear_non_simple() {
        let sp = parse_program("R(X,X) -> exists Z: R(Z,X).").unwrap();
        assert_eq!(sp.program.classify(), Class::Linear);
    }

    #[test]
    fn errors_carry_position() {
        match parse_program("R(a,b).\nR(a b).") {
            Err(Error::Parse(e)) => assert_eq!((e.line, e.col), (2, 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(kind("R(a,X)."), ParseErrorKind::VariableInFact(v) if v == "X"));
        assert!(matches!(kind("R(X,a) -> S(X)."), ParseErrorKind::ConstantInRule(c) if c == "a"));
        assert!(
            matches!(kind("R(X,Y) -> exists Y: S(Y)."), ParseErrorKind::ExistentialInBody(v) if v == "Y")
        );
        assert!(
            matches!(kind("R(X,Y) -> S(Z)."), ParseErrorKind::UndeclaredHeadVariable(v) if v == "Z")
        );
        assert!(matches!(
            kind("R(X) -> exists Z,Z: S(Z)."),
            ParseErrorKind::DuplicateExistential(_)
        ));
        assert!(matches!(kind("R(a"), ParseErrorKind::Syntax(_)));
        assert!(matches!(
            parse_program("R(a,b). R(a)."),
            Err(Error::ArityConflict { .. })
        ));
    }

    #[test]
    fn comments_and_duplicates() {
        let sp = parse_program("% header\nR(a,b). % trailing\nR(a,b).\n").unwrap();
        assert_eq!(sp.db.len(), 1);
    }

    #[test]
    fn quoted_names_round_trip() {
        let text = "'R_{(1,1)}'(a, 'b c', 12).\n'[tau#3]'(X) -> exists Y: 'R_{(1,1)}'(X, Y, X).";
        let sp = parse_program(text).unwrap();
        let rendered = render_source(&sp);
        assert!(rendered.contains("'R_{(1,1)}'(a,'b c',12)."));
        assert_eq!(parse_program(&rendered).unwrap(), sp);
    }

    #[test]
    fn round_trip_two_rules() {
        let text = "R(X,Y) -> exists Z: R(Y,Z).\nR(X,Y) -> P(X,Y).";
        let sp = parse_program(text).unwrap();
        let out = render_source(&sp);
        assert_eq!(out, "R(X,Y) -> exists Z: R(Y,Z).\nR(X,Y) -> P(X,Y).\n");
        assert_eq!(parse_program(&out).unwrap(), sp);
    }

    #[test]
    fn empty_program_renders_empty() {
        let sp = parse_program("  % nothing\n").unwrap();
        assert_eq!(render_source(&sp), "");
    }

    #[test]
    fn exists_as_predicate_name() {
        let sp = parse_program("R(X) -> exists(X).").unwrap();
        assert_eq!(sp.program.tgd(0).head()[0].pred.as_str(), "exists");
        let out = render_source(&sp);
        assert_eq!(parse_program(&out).unwrap(), sp);
    }
}
