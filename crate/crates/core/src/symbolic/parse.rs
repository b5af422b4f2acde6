use super::{Op, SymExpr};
use crate::parser::{tokenize, ParseError, Token, TokenKind};

/// Read a symbolic expression in the printed form produced by `Display`.
pub fn parse_sym(source: &str) -> Result<SymExpr, ParseError> {
    let tokens = tokenize(source)?;
    let mut pos = 0;
    let e = read(&tokens, &mut pos)?;
    if let Some(t) = tokens.get(pos) {
        return Err(ParseError::syntax("trailing input", Some(t.position)));
    }
    Ok(e)
}

fn expect(tokens: &[Token], pos: &mut usize, kind: TokenKind, text: Option<&str>) -> Result<(), ParseError> {
    match tokens.get(*pos) {
        Some(t) if t.kind == kind && text.is_none_or(|s| s == t.text) => {
            *pos += 1;
            Ok(())
        }
        Some(t) => Err(ParseError::syntax(format!("unexpected '{}'", t.text), Some(t.position))),
        None => Err(ParseError::syntax("unexpected end of input", None)),
    }
}

fn read(tokens: &[Token], pos: &mut usize) -> Result<SymExpr, ParseError> {
    let t = tokens.get(*pos).ok_or_else(|| ParseError::syntax("unexpected end of input", None))?;
    *pos += 1;
    match t.kind {
        TokenKind::Number => Ok(SymExpr::Lit(t.number().expect("lexer validated number"))),
        TokenKind::Symbol => Ok(match t.text.as_str() {
            "inf" => SymExpr::Lit(f64::INFINITY),
            "-inf" => SymExpr::Lit(f64::NEG_INFINITY),
            "NaN" => SymExpr::Lit(f64::NAN),
            name => SymExpr::Var(name.to_string()),
        }),
        TokenKind::OpenParen => {
            let head = tokens.get(*pos).ok_or_else(|| ParseError::syntax("unexpected end of input", None))?;
            *pos += 1;
            if head.text == "if" {
                expect(tokens, pos, TokenKind::OpenParen, None)?;
                expect(tokens, pos, TokenKind::Symbol, Some("<"))?;
                let guard = read(tokens, pos)?;
                expect(tokens, pos, TokenKind::Number, Some("0"))?;
                expect(tokens, pos, TokenKind::CloseParen, None)?;
                let then = read(tokens, pos)?;
                let otherwise = read(tokens, pos)?;
                expect(tokens, pos, TokenKind::CloseParen, None)?;
                return Ok(SymExpr::Piecewise {
                    guard: Box::new(guard),
                    then: Box::new(then),
                    otherwise: Box::new(otherwise),
                });
            }
            let mut args = Vec::new();
            while tokens.get(*pos).is_some_and(|t| t.kind != TokenKind::CloseParen) {
                args.push(read(tokens, pos)?);
            }
            expect(tokens, pos, TokenKind::CloseParen, None)?;
            let op = match (head.text.as_str(), args.len()) {
                ("+", _) => Op::Add,
                ("*", _) => Op::Mul,
                ("-", 1) => Op::Neg,
                ("-", 2) => Op::Sub,
                ("/", 2) => Op::Div,
                ("exp", 1) => Op::Exp,
                ("log", 1) => Op::Log,
                ("sqrt", 1) => Op::Sqrt,
                ("normal-pdf", 3) => Op::NormalPdf,
                ("uniform-pdf", 3) => Op::UniformPdf,
                (other, n) => {
                    return Err(ParseError::syntax(
                        format!("unknown operator '{other}' with {n} arguments"),
                        Some(head.position),
                    ))
                }
            };
            Ok(SymExpr::Apply(op, args))
        }
        _ => Err(ParseError::syntax(format!("unexpected '{}'", t.text), Some(t.position))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trip() {
        for src in [
            "(* (uniform-pdf z 0 1) (normal-pdf y 1 1))",
            "(if (< (- q z) 0) 1 0)",
            "(- (exp x))",
            "(+ a -inf)",
        ] {
            let e = parse_sym(src).unwrap();
            assert_eq!(e.to_string(), src);
            assert_eq!(parse_sym(&e.to_string()).unwrap(), e);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_sym("(foo 1)").is_err());
        assert!(parse_sym("(+ 1").is_err());
        assert!(parse_sym("1 2").is_err());
    }
}
