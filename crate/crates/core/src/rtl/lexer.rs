//! Tokenizer shared by the Verilog and assertion parsers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Ident,
    /// `$name`
    SysIdent,
    /// `` `name `` macro reference
    Macro,
    Number,
    Str,
    Op,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    pub col: usize,
    pub offset: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        matches!(self.kind, TokenKind::Op | TokenKind::Ident) && self.text == text
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub offset: usize,
    pub message: String,
}

const OPS: &[&str] = &[
    "<<<=", ">>>=", "===", "!==", "<<<", ">>>", "|->", "|=>", "==", "!=", "<=", ">=", "&&",
    "||", "<<", ">>", "**", "~&", "~|", "~^", "^~", "->", "+:", "-:", "::", "##", "+=", "-=",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, f: impl Fn(char) -> bool) {
        while self.peek().is_some_and(&f) {
            self.bump();
        }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

fn is_based_digit(c: char) -> bool {
    c.is_ascii_hexdigit() || matches!(c, 'x' | 'X' | 'z' | 'Z' | '?' | '_')
}

/// Consumes `'[s]<base><digits>` if present at the cursor.
fn based_tail(cur: &mut Cursor) -> bool {
    let mut n = 1;
    if matches!(cur.peek_at(n), Some('s' | 'S')) {
        n += 1;
    }
    if !matches!(
        cur.peek_at(n),
        Some('h' | 'H' | 'd' | 'D' | 'o' | 'O' | 'b' | 'B')
    ) {
        return false;
    }
    for _ in 0..=n {
        cur.bump();
    }
    cur.eat_while(char::is_whitespace);
    cur.eat_while(is_based_digit);
    true
}

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        cur.eat_while(char::is_whitespace);
        if cur.rest().starts_with("//") {
            cur.eat_while(|c| c != '\n');
            continue;
        }
        if cur.rest().starts_with("/*") {
            let (line, col, offset) = (cur.line, cur.col, cur.pos);
            cur.bump();
            cur.bump();
            while !cur.rest().starts_with("*/") {
                if cur.bump().is_none() {
                    return Err(LexError {
                        line,
                        col,
                        offset,
                        message: "unterminated block comment".into(),
                    });
                }
            }
            cur.bump();
            cur.bump();
            continue;
        }
        let (line, col, start) = (cur.line, cur.col, cur.pos);
        let Some(c) = cur.peek() else {
            out.push(Token {
                kind: TokenKind::Eof,
                text: String::new(),
                line,
                col,
                offset: start,
            });
            return Ok(out);
        };
        let err = |message: &str| LexError {
            line,
            col,
            offset: start,
            message: message.into(),
        };
        let kind = if is_ident_start(c) {
            cur.eat_while(is_ident_char);
            TokenKind::Ident
        } else if c == '$' {
            cur.bump();
            cur.eat_while(is_ident_char);
            TokenKind::SysIdent
        } else if c == '`' {
            cur.bump();
            cur.eat_while(is_ident_char);
            TokenKind::Macro
        } else if c.is_ascii_digit() {
            cur.eat_while(|c| c.is_ascii_digit() || c == '_');
            if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit()) {
                cur.bump();
                cur.eat_while(|c| c.is_ascii_digit() || c == '_');
            }
            if matches!(cur.peek(), Some('e' | 'E'))
                && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit() || d == '-' || d == '+')
            {
                cur.bump();
                cur.bump();
                cur.eat_while(|c| c.is_ascii_digit());
            }
            // a size followed by a based literal, possibly after spaces
            let save = (cur.pos, cur.line, cur.col);
            cur.eat_while(|c| c == ' ' || c == '\t');
            if !(cur.peek() == Some('\'') && based_tail(&mut cur)) {
                (cur.pos, cur.line, cur.col) = save;
            }
            TokenKind::Number
        } else if c == '\'' {
            if based_tail(&mut cur) {
                TokenKind::Number
            } else if matches!(cur.peek_at(1), Some('0' | '1' | 'x' | 'X' | 'z' | 'Z')) {
                cur.bump();
                cur.bump();
                TokenKind::Number
            } else {
                cur.bump();
                TokenKind::Op
            }
        } else if c == '"' {
            cur.bump();
            loop {
                match cur.bump() {
                    Some('\\') => {
                        cur.bump();
                    }
                    Some('"') => break,
                    Some('\n') | None => return Err(err("unterminated string literal")),
                    _ => {}
                }
            }
            TokenKind::Str
        } else if c == '\\' {
            return Err(err("escaped identifiers are not supported"));
        } else if c.is_ascii_punctuation() {
            let op = OPS.iter().find(|op| cur.rest().starts_with(*op));
            let n = op.map_or(1, |o| o.len());
            for _ in 0..n {
                cur.bump();
            }
            TokenKind::Op
        } else {
            return Err(err(&format!("unexpected character {c:?}")));
        };
        out.push(Token {
            kind,
            text: src[start..cur.pos].to_string(),
            line,
            col,
            offset: start,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        lex(src)
            .unwrap()
            .into_iter()
            .filter(|t| t.kind != TokenKind::Eof)
            .map(|t| t.text)
            .collect()
    }

    #[test]
    fn numbers_and_operators() {
        assert_eq!(
            texts("assign z = data[3:0] + 4'hA; // c\n q <= 8 'b1010_1x0z;"),
            ["assign", "z", "=", "data", "[", "3", ":", "0", "]", "+", "4'hA", ";", "q", "<=", "8 'b1010_1x0z", ";"]
        );
        assert_eq!(texts("a |-> ##1 b |=> c"), ["a", "|->", "##", "1", "b", "|=>", "c"]);
        assert_eq!(texts("x === 'hX !== '0"), ["x", "===", "'hX", "!==", "'0"]);
    }

    #[test]
    fn comments_and_positions() {
        let toks = lex("/* a\n b */ wire\n  x;").unwrap();
        assert_eq!((toks[0].text.as_str(), toks[0].line, toks[0].col), ("wire", 2, 7));
        assert_eq!((toks[1].line, toks[1].col), (3, 3));
    }

    #[test]
    fn system_and_macro_tokens() {
        let toks = lex("$rose(a) `W").unwrap();
        assert_eq!(toks[0].kind, TokenKind::SysIdent);
        assert_eq!(toks[4].kind, TokenKind::Macro);
    }

    #[test]
    fn errors_are_positioned() {
        let e = lex("a /* open").unwrap_err();
        assert_eq!((e.line, e.col), (1, 3));
        assert!(lex("\\esc ").is_err());
    }
}
