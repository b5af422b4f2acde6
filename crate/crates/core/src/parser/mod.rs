//! Front end: tokenizer, s-expression parser, desugaring.

mod ast;
mod desugar;
mod lexer;

use std::collections::BTreeMap;
use std::fmt;

pub use ast::{CoreDist, DistCall, DistName, Expr, PrimOp, Sugar};
pub use desugar::{desugar, desugar_with_constants};
pub use lexer::{tokenize, Position, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    Unsupported,
    Validation,
    UnboundVariable,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub position: Option<Position>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Unsupported => "unsupported feature",
            ParseErrorKind::Validation => "invalid program",
            ParseErrorKind::UnboundVariable => return write!(f, "{}", self.message),
        };
        match self.position {
            Some(p) => write!(f, "{p}: {kind}: {}", self.message),
            None => write!(f, "{kind}: {}", self.message),
        }
    }
}

impl ParseError {
    pub(crate) fn lexical(message: String, position: Position) -> Self {
        Self { kind: ParseErrorKind::Lexical, message, position: Some(position) }
    }

    pub(crate) fn syntax(message: impl Into<String>, position: Option<Position>) -> Self {
        Self { kind: ParseErrorKind::Syntax, message: message.into(), position }
    }

    pub(crate) fn unsupported(message: impl Into<String>) -> Self {
        Self { kind: ParseErrorKind::Unsupported, message: message.into(), position: None }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Self { kind: ParseErrorKind::Validation, message: message.into(), position: None }
    }
}

/// Operator names that are sugar over the core forms.
const SUGAR_OPS: &[&str] = &["max", "min", "abs", "nth", "vector", "<", ">", "<=", ">="];
const RESERVED: &[&str] = &["if", "let", "sample", "observe"];

enum SExp {
    Atom(Token),
    List(Vec<SExp>, Position),
    Vector(Vec<SExp>, Position),
}

impl SExp {
    fn position(&self) -> Position {
        match self {
            SExp::Atom(t) => t.position,
            SExp::List(_, p) | SExp::Vector(_, p) => *p,
        }
    }
}

fn read_sexps(tokens: &[Token]) -> Result<Vec<SExp>, ParseError> {
    let mut stack: Vec<(TokenKind, Position, Vec<SExp>)> = Vec::new();
    let mut top = Vec::new();
    for tok in tokens {
        match tok.kind {
            TokenKind::OpenParen | TokenKind::OpenBracket => {
                stack.push((tok.kind, tok.position, Vec::new()));
            }
            TokenKind::CloseParen | TokenKind::CloseBracket => {
                let Some((open, pos, items)) = stack.pop() else {
                    return Err(ParseError::syntax(
                        format!("unbalanced '{}'", tok.text),
                        Some(tok.position),
                    ));
                };
                let node = match (open, tok.kind) {
                    (TokenKind::OpenParen, TokenKind::CloseParen) => SExp::List(items, pos),
                    (TokenKind::OpenBracket, TokenKind::CloseBracket) => SExp::Vector(items, pos),
                    _ => {
                        return Err(ParseError::syntax(
                            format!("mismatched '{}'", tok.text),
                            Some(tok.position),
                        ))
                    }
                };
                match stack.last_mut() {
                    Some((_, _, parent)) => parent.push(node),
                    None => top.push(node),
                }
            }
            TokenKind::Symbol | TokenKind::Number => match stack.last_mut() {
                Some((_, _, parent)) => parent.push(SExp::Atom(tok.clone())),
                None => top.push(SExp::Atom(tok.clone())),
            },
        }
    }
    if let Some((_, pos, _)) = stack.pop() {
        return Err(ParseError::syntax("unclosed delimiter", Some(pos)));
    }
    Ok(top)
}

fn symbol_of(s: &SExp) -> Option<&str> {
    match s {
        SExp::Atom(t) if t.kind == TokenKind::Symbol => Some(t.text.as_str()),
        _ => None,
    }
}

fn convert(s: &SExp) -> Result<Sugar, ParseError> {
    match s {
        SExp::Atom(t) => match t.kind {
            TokenKind::Number => Ok(Sugar::Const(t.number().expect("lexer validated number"))),
            _ => {
                if RESERVED.contains(&t.text.as_str()) {
                    return Err(ParseError::syntax(
                        format!("reserved word '{}' used as a variable", t.text),
                        Some(t.position),
                    ));
                }
                Ok(Sugar::Var(t.text.clone()))
            }
        },
        SExp::Vector(items, _) => Ok(Sugar::Vector(items.iter().map(convert).collect::<Result<_, _>>()?)),
        SExp::List(items, pos) => convert_list(items, *pos),
    }
}

fn arity_error(form: &str, expected: &str, pos: Position) -> ParseError {
    ParseError::syntax(format!("'{form}' expects {expected}"), Some(pos))
}

fn convert_dist(s: &SExp, under_observe: bool) -> Result<DistCall, ParseError> {
    let pos = s.position();
    let SExp::List(items, _) = s else {
        return Err(ParseError::syntax("expected a distribution object like (normal 0 1)", Some(pos)));
    };
    let head = items.first().and_then(symbol_of).ok_or_else(|| {
        ParseError::syntax("expected a distribution constructor", Some(pos))
    })?;
    let name = DistName::from_symbol(head)
        .ok_or_else(|| ParseError::syntax(format!("unknown distribution '{head}'"), Some(pos)))?;
    if name == DistName::Factor && !under_observe {
        return Err(ParseError::syntax("factor only valid under observe", Some(pos)));
    }
    let args = items[1..].iter().map(convert).collect::<Result<Vec<_>, _>>()?;
    if args.len() != name.arity() {
        return Err(arity_error(head, &format!("{} argument(s)", name.arity()), pos));
    }
    Ok(DistCall { name, args })
}

fn convert_list(items: &[SExp], pos: Position) -> Result<Sugar, ParseError> {
    let Some(head) = items.first() else {
        return Err(ParseError::syntax("empty application '()'", Some(pos)));
    };
    let Some(head) = symbol_of(head) else {
        return Err(ParseError::syntax("application head must be an operator symbol", Some(pos)));
    };
    let rest = &items[1..];
    match head {
        "if" => {
            if rest.len() != 3 {
                return Err(arity_error("if", "a predicate and two branches", pos));
            }
            Ok(Sugar::If {
                pred: Box::new(convert(&rest[0])?),
                then: Box::new(convert(&rest[1])?),
                otherwise: Box::new(convert(&rest[2])?),
            })
        }
        "let" => {
            let Some(SExp::Vector(binds, bpos)) = rest.first() else {
                return Err(arity_error("let", "a binding vector [x e ...]", pos));
            };
            if binds.is_empty() || binds.len() % 2 != 0 {
                return Err(arity_error("let", "name/value pairs in its binding vector", *bpos));
            }
            if rest.len() < 2 {
                return Err(arity_error("let", "at least one body expression", pos));
            }
            let mut bindings = Vec::new();
            for pair in binds.chunks(2) {
                let name = symbol_of(&pair[0]).ok_or_else(|| {
                    ParseError::syntax("let binder must be a symbol", Some(pair[0].position()))
                })?;
                if RESERVED.contains(&name) {
                    return Err(ParseError::syntax(
                        format!("reserved word '{name}' used as a binder"),
                        Some(pair[0].position()),
                    ));
                }
                bindings.push((name.to_string(), convert(&pair[1])?));
            }
            let body = rest[1..].iter().map(convert).collect::<Result<_, _>>()?;
            Ok(Sugar::Let { bindings, body })
        }
        "sample" => {
            if rest.len() != 1 {
                return Err(arity_error("sample", "one distribution object", pos));
            }
            Ok(Sugar::Sample(convert_dist(&rest[0], false)?))
        }
        "observe" => {
            if rest.len() != 2 {
                return Err(arity_error("observe", "a distribution object and an observed value", pos));
            }
            Ok(Sugar::Observe {
                dist: convert_dist(&rest[0], true)?,
                observed: Box::new(convert(&rest[1])?),
            })
        }
        op => {
            if let Some(prim) = PrimOp::from_symbol(op) {
                let (lo, hi) = prim.arity();
                if rest.len() < lo || hi.is_some_and(|hi| rest.len() > hi) {
                    let expected = match hi {
                        Some(hi) if hi == lo => format!("{lo} argument(s)"),
                        _ => format!("at least {lo} argument(s)"),
                    };
                    return Err(arity_error(op, &expected, pos));
                }
            } else if SUGAR_OPS.contains(&op) {
                let ok = match op {
                    "abs" => rest.len() == 1,
                    "vector" => true,
                    _ => rest.len() == 2,
                };
                if !ok {
                    return Err(arity_error(op, "a different number of arguments", pos));
                }
            } else if DistName::from_symbol(op).is_some() {
                return Err(ParseError::syntax(
                    format!("distribution '{op}' used outside sample/observe"),
                    Some(pos),
                ));
            } else {
                return Err(ParseError::syntax(format!("unknown operator '{op}'"), Some(pos)));
            }
            let args = rest.iter().map(convert).collect::<Result<_, _>>()?;
            Ok(Sugar::Call { op: op.to_string(), args })
        }
    }
}

/// Parse a token stream holding exactly one program expression.
pub fn parse(tokens: &[Token]) -> Result<Sugar, ParseError> {
    let sexps = read_sexps(tokens)?;
    match sexps.as_slice() {
        [] => Err(ParseError::syntax("empty program", None)),
        [one] => convert(one),
        [_, second, ..] => Err(ParseError::syntax(
            "expected a single top-level expression",
            Some(second.position()),
        )),
    }
}

/// Tokenize and parse.
pub fn parse_str(source: &str) -> Result<Sugar, ParseError> {
    parse(&tokenize(source)?)
}

/// A closed, desugared program.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub root: Expr,
    pub source_name: String,
}

impl Program {
    pub fn new(root: Expr, source_name: impl Into<String>) -> Result<Self, ParseError> {
        if let Some(v) = root.free_vars().into_iter().next() {
            return Err(ParseError {
                kind: ParseErrorKind::UnboundVariable,
                message: format!("unbound variable '{v}'"),
                position: None,
            });
        }
        Ok(Self { root, source_name: source_name.into() })
    }

    /// Full front end: tokenize, parse, desugar (substituting `constants`
    /// for free identifiers) and check closedness.
    pub fn from_source(
        source: &str,
        source_name: impl Into<String>,
        constants: &BTreeMap<String, f64>,
    ) -> Result<Self, ParseError> {
        let sugared = parse_str(source)?;
        if let Some(v) = sugared.free_vars().into_iter().find(|v| !constants.contains_key(v)) {
            return Err(ParseError {
                kind: ParseErrorKind::UnboundVariable,
                message: format!("unbound variable '{v}'"),
                position: None,
            });
        }
        let core = desugar_with_constants(&sugared, constants)?;
        Self::new(core, source_name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIG1: &str = "(let [x (sample (uniform 0 1))]
        (if (< (- q x) 0)
            (observe (normal 1 1) y)
            (observe (normal 0 1) y))
        (< (- q x) 0))";

    #[test]
    fn parses_fig1_shape() {
        let s = parse_str(FIG1).unwrap();
        let Sugar::Let { bindings, body } = s else { panic!("expected let") };
        assert_eq!(bindings.len(), 1);
        assert!(matches!(bindings[0].1, Sugar::Sample(DistCall { name: DistName::Uniform, .. })));
        assert_eq!(body.len(), 2);
        let Sugar::If { then, otherwise, .. } = &body[0] else { panic!("expected if") };
        assert!(matches!(**then, Sugar::Observe { .. }));
        assert!(matches!(**otherwise, Sugar::Observe { .. }));
    }

    #[test]
    fn factor_under_sample_rejected() {
        let err = parse_str("(sample (factor 1))").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert!(err.message.contains("factor only valid under observe"), "{err}");
    }

    #[test]
    fn observe_normal() {
        let s = parse_str("(observe (normal 0 1) 2.5)").unwrap();
        assert_eq!(
            s,
            Sugar::Observe {
                dist: DistCall { name: DistName::Normal, args: vec![Sugar::Const(0.0), Sugar::Const(1.0)] },
                observed: Box::new(Sugar::Const(2.5)),
            }
        );
    }

    #[test]
    fn structural_errors() {
        for bad in [
            "(+ 1 2",
            "(+ 1 2))",
            "(let [x 1)",
            "(if (< x 0) 1)",
            "(let [x] x)",
            "(let [x 1])",
            "(sample (normal 0))",
            "(observe (normal 0 1))",
            "(foo 1 2)",
            "(normal 0 1)",
            "()",
            "(1 2)",
            "(exp 1 2)",
            "(sample (poisson 3))",
            "1 2",
            "",
        ] {
            assert!(parse_str(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn error_carries_position() {
        let err = parse_str("(let [x 1]\n  (frob x))").unwrap_err();
        assert_eq!(err.position, Some(Position { line: 2, column: 3 }));
        assert!(err.to_string().starts_with("2:3:"));
    }

    #[test]
    fn closedness_check() {
        let consts = BTreeMap::new();
        let err = Program::from_source(FIG1, "fig1", &consts).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnboundVariable);
        assert!(err.message.contains("unbound variable 'q'"), "{err}");
        let consts = BTreeMap::from([("q".to_string(), 0.5), ("y".to_string(), 1.0)]);
        assert!(Program::from_source(FIG1, "fig1", &consts).is_ok());
    }
}
