use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    OpenParen,
    CloseParen,
    OpenBracket,
    CloseBracket,
    Symbol,
    Number,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub position: Position,
}

impl Token {
    /// Numeric value of a `Number` token.
    pub fn number(&self) -> Option<f64> {
        match self.kind {
            TokenKind::Number => self.text.parse().ok(),
            _ => None,
        }
    }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | ';')
}

fn is_invalid(c: char) -> bool {
    c.is_control() && !c.is_whitespace() || matches!(c, '{' | '}' | '"' | '\'' | '`' | '\\')
}

fn looks_numeric(text: &str) -> bool {
    let body = text.strip_prefix(['-', '+']).unwrap_or(text);
    let mut chars = body.chars();
    match chars.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some('.') => chars.next().is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    }
}

/// Split program text into tokens. `;` starts a comment running to the end
/// of the line. Paren balance is left to the parser.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    while let Some(&c) = chars.peek() {
        let position = Position { line, column };
        if c == '\n' {
            chars.next();
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            column += 1;
            continue;
        }
        if c == ';' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        let single = match c {
            '(' => Some(TokenKind::OpenParen),
            ')' => Some(TokenKind::CloseParen),
            '[' => Some(TokenKind::OpenBracket),
            ']' => Some(TokenKind::CloseBracket),
            _ => None,
        };
        if let Some(kind) = single {
            chars.next();
            column += 1;
            tokens.push(Token { kind, text: c.to_string(), position });
            continue;
        }
        if is_invalid(c) {
            return Err(ParseError::lexical(format!("invalid character {c:?}"), position));
        }

        let mut text = String::new();
        while let Some(&c) = chars.peek() {
            if is_delimiter(c) {
                break;
            }
            if is_invalid(c) {
                let at = Position { line, column };
                return Err(ParseError::lexical(format!("invalid character {c:?}"), at));
            }
            text.push(c);
            chars.next();
            column += 1;
        }
        let kind = if looks_numeric(&text) {
            if text.parse::<f64>().is_err() {
                return Err(ParseError::lexical(format!("malformed number {text:?}"), position));
            }
            TokenKind::Number
        } else if text.starts_with(|c: char| c.is_ascii_digit()) {
            return Err(ParseError::lexical(
                format!("identifier {text:?} may not start with a digit"),
                position,
            ));
        } else {
            TokenKind::Symbol
        };
        tokens.push(Token { kind, text, position });
    }
    Ok(tokens)
}
