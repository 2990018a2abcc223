//! Minimal s-expression reader shared by the tree and proof formats.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom { text: String, pos: usize },
    List { items: Vec<SExpr>, pos: usize },
}

impl SExpr {
    pub fn pos(&self) -> usize {
        match self {
            SExpr::Atom { pos, .. } | SExpr::List { pos, .. } => *pos,
        }
    }
}

pub(crate) fn parse_error(pos: usize, msg: impl Into<String>) -> Error {
    Error::Parse { pos, msg: msg.into() }
}

fn is_token_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// Parses exactly one s-expression; trailing non-whitespace is an error.
/// Atoms are `[A-Za-z0-9_]+`.
pub fn parse(text: &str) -> Result<SExpr> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let expr = parse_at(bytes, &mut pos)?;
    skip_ws(bytes, &mut pos);
    if pos != bytes.len() {
        return Err(parse_error(pos, "trailing input after expression"));
    }
    Ok(expr)
}

fn skip_ws(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
}

fn parse_at(bytes: &[u8], pos: &mut usize) -> Result<SExpr> {
    skip_ws(bytes, pos);
    let start = *pos;
    match bytes.get(start) {
        None => Err(parse_error(start, "unexpected end of input")),
        Some(b'(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(bytes, pos);
                match bytes.get(*pos) {
                    None => return Err(parse_error(*pos, "unclosed '('")),
                    Some(b')') => {
                        *pos += 1;
                        return Ok(SExpr::List { items, pos: start });
                    }
                    Some(_) => items.push(parse_at(bytes, pos)?),
                }
            }
        }
        Some(b')') => Err(parse_error(start, "unexpected ')'")),
        Some(&c) if is_token_char(c) => {
            while *pos < bytes.len() && is_token_char(bytes[*pos]) {
                *pos += 1;
            }
            let text = String::from_utf8_lossy(&bytes[start..*pos]).into_owned();
            Ok(SExpr::Atom { text, pos: start })
        }
        Some(&c) => Err(parse_error(start, format!("unexpected character {:?}", c as char))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_and_positions() {
        let e = parse(" (a () (b_1 () ()))").unwrap();
        let SExpr::List { items, pos } = e else {
            panic!("expected list")
        };
        assert_eq!(pos, 1);
        assert_eq!(items.len(), 3);
        assert_eq!(
            items[0],
            SExpr::Atom {
                text: "a".into(),
                pos: 2
            }
        );
    }

    #[test]
    fn errors_carry_position() {
        assert_eq!(
            parse("(a ()"),
            Err(Error::Parse {
                pos: 5,
                msg: "unclosed '('".into()
            })
        );
        assert!(matches!(parse("() x"), Err(Error::Parse { pos: 3, .. })));
        assert!(matches!(parse("(a -)"), Err(Error::Parse { pos: 3, .. })));
        assert!(matches!(parse(")"), Err(Error::Parse { pos: 0, .. })));
    }
}
