use super::ast::Pos;
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const SYMBOLS: [&str; 15] = ["<=", ">=", "{", "}", "[", "]", "(", ")", ",", ";", ":", "=", "+", "-", "*"];
const MORE_SYMBOLS: [&str; 3] = ["/", "<", ">"];

pub fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            let digits = |i: &mut usize, line: &mut u32, col: &mut u32| {
                let s = *i;
                while *i < chars.len() && chars[*i].is_ascii_digit() {
                    advance(i, line, col, 1);
                }
                *i > s
            };
            digits(&mut i, &mut line, &mut col);
            if i < chars.len() && chars[i] == '.' {
                advance(&mut i, &mut line, &mut col, 1);
                digits(&mut i, &mut line, &mut col);
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                advance(&mut i, &mut line, &mut col, 1);
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    advance(&mut i, &mut line, &mut col, 1);
                }
                if !digits(&mut i, &mut line, &mut col) {
                    return Err(DslError::Lex {
                        pos,
                        message: "exponent has no digits".into(),
                    });
                }
            }
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                return Err(DslError::Lex {
                    pos,
                    message: "identifier cannot start with a digit".into(),
                });
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| DslError::Lex {
                pos,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token { tok: Tok::Num(value), pos });
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, 1);
            let start = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(DslError::Lex {
                    pos,
                    message: "unterminated string".into(),
                });
            }
            let text = chars[start..i].iter().collect();
            advance(&mut i, &mut line, &mut col, 1);
            out.push(Token { tok: Tok::Str(text), pos });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match SYMBOLS.iter().chain(&MORE_SYMBOLS).find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                advance(&mut i, &mut line, &mut col, sym.chars().count());
                out.push(Token { tok: Tok::Sym(sym), pos });
            }
            None => {
                return Err(DslError::Lex {
                    pos,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_positions() {
        let toks = lex("leaf a { # note\n  u = [1.5e-1, x0];\n}").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(kinds[0], Tok::Ident("leaf".into()));
        assert_eq!(kinds[5], Tok::Sym("["));
        assert_eq!(kinds[6], Tok::Num(0.15));
        assert_eq!(toks[3].pos, Pos { line: 2, col: 3 });
        assert_eq!(toks.last().unwrap().tok, Tok::Eof);
        let cmp: Vec<_> = lex("a<=b>c").unwrap().into_iter().map(|t| t.tok).collect();
        assert_eq!(cmp[1], Tok::Sym("<="));
        assert_eq!(cmp[3], Tok::Sym(">"));
    }

    #[test]
    fn lex_errors() {
        assert!(matches!(lex("a $ b"), Err(DslError::Lex { pos: Pos { line: 1, col: 3 }, .. })));
        assert!(matches!(lex("\n 1e+"), Err(DslError::Lex { pos: Pos { line: 2, col: 2 }, .. })));
        assert!(matches!(lex("\"abc"), Err(DslError::Lex { .. })));
        assert!(matches!(lex("3x"), Err(DslError::Lex { .. })));
    }
}
