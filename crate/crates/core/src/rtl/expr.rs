//! Expression trees for Verilog right-hand sides, conditions and constant
//! ranges; also the boolean layer of the assertion parser.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lexer::{Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    /// Plain or hierarchical (`a.b`) name.
    Ident(String),
    Number(String),
    Str(String),
    Macro(String),
    Unary(String, Box<Expr>),
    Binary(String, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    /// `base[a:b]`, `base[a+:b]`, `base[a-:b]`
    Slice(Box<Expr>, String, Box<Expr>, Box<Expr>),
    Concat(Vec<Expr>),
    Replicate(Box<Expr>, Vec<Expr>),
    /// Function or system call; system names keep their `$`.
    Call(String, Vec<Expr>),
}

/// Token cursor shared by the Verilog and assertion parsers.
pub struct TokStream<'a> {
    toks: &'a [Token],
    pub pos: usize,
}

/// Offending token plus a message.
pub type SyntaxError = (Token, String);

impl<'a> TokStream<'a> {
    /// `toks` must end with an `Eof` token.
    pub fn new(toks: &'a [Token]) -> Self {
        assert!(toks.last().is_some_and(|t| t.kind == TokenKind::Eof));
        TokStream { toks, pos: 0 }
    }

    pub fn peek(&self) -> &'a Token {
        self.peek_n(0)
    }

    pub fn peek_n(&self, n: usize) -> &'a Token {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i]
    }

    pub fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    pub fn next(&mut self) -> &'a Token {
        let t = self.peek();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    pub fn check(&self, text: &str) -> bool {
        self.peek().is(text)
    }

    pub fn eat(&mut self, text: &str) -> bool {
        if self.check(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, text: &str) -> Result<&'a Token, SyntaxError> {
        if self.check(text) {
            Ok(self.next())
        } else {
            Err(self.error(&format!("expected '{text}'")))
        }
    }

    pub fn expect_ident(&mut self) -> Result<&'a Token, SyntaxError> {
        if self.peek().is_ident() {
            Ok(self.next())
        } else {
            Err(self.error("expected identifier"))
        }
    }

    pub fn error(&self, message: &str) -> SyntaxError {
        (self.peek().clone(), message.to_string())
    }

    /// Skips a balanced group starting at the current open bracket.
    pub fn skip_group(&mut self) -> Result<(), SyntaxError> {
        let mut depth = 0usize;
        loop {
            let t = self.next();
            if t.kind == TokenKind::Eof {
                return Err((t.clone(), "unbalanced brackets".into()));
            }
            if t.kind == TokenKind::Op {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        depth = depth.saturating_sub(1);
                        if depth == 0 {
                            return Ok(());
                        }
                    }
                    _ => {}
                }
            }
        }
    }
}

/// Binary operator precedence (higher binds tighter).
fn precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 2,
        "&&" => 3,
        "|" => 4,
        "^" | "^~" | "~^" => 5,
        "&" => 6,
        "==" | "!=" | "===" | "!==" => 7,
        "<" | "<=" | ">" | ">=" => 8,
        "<<" | ">>" | "<<<" | ">>>" => 9,
        "+" | "-" => 10,
        "*" | "/" | "%" => 11,
        "**" => 12,
        _ => return None,
    })
}

const UNARY: &[&str] = &["!", "~", "-", "+", "&", "|", "^", "~&", "~|", "~^", "^~"];

/// Words that cannot start an operand.
const RESERVED: &[&str] = &[
    "begin", "end", "if", "else", "case", "casez", "casex", "endcase", "default", "always",
    "assign", "module", "endmodule", "input", "output", "inout", "wire", "reg", "posedge",
    "negedge", "or", "iff", "disable", "property", "endproperty", "assert", "for", "while",
];

pub fn parse_expr(ts: &mut TokStream) -> Result<Expr, SyntaxError> {
    let cond = parse_binary(ts, 2)?;
    if ts.eat("?") {
        let a = parse_expr(ts)?;
        ts.expect(":")?;
        let b = parse_expr(ts)?;
        return Ok(Expr::Ternary(Box::new(cond), Box::new(a), Box::new(b)));
    }
    Ok(cond)
}

fn parse_binary(ts: &mut TokStream, min: u8) -> Result<Expr, SyntaxError> {
    let mut lhs = parse_unary(ts)?;
    loop {
        let t = ts.peek();
        if t.kind != TokenKind::Op {
            break;
        }
        let Some(p) = precedence(&t.text) else { break };
        if p < min {
            break;
        }
        let op = ts.next().text.clone();
        // `**` is right-associative
        let next_min = if op == "**" { p } else { p + 1 };
        let rhs = parse_binary(ts, next_min)?;
        lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_unary(ts: &mut TokStream) -> Result<Expr, SyntaxError> {
    let t = ts.peek();
    if t.kind == TokenKind::Op && UNARY.contains(&t.text.as_str()) {
        let op = ts.next().text.clone();
        let e = parse_unary(ts)?;
        return Ok(Expr::Unary(op, Box::new(e)));
    }
    parse_postfix(ts)
}

fn parse_args(ts: &mut TokStream) -> Result<Vec<Expr>, SyntaxError> {
    ts.expect("(")?;
    let mut args = Vec::new();
    if ts.eat(")") {
        return Ok(args);
    }
    loop {
        args.push(parse_expr(ts)?);
        if ts.eat(")") {
            return Ok(args);
        }
        ts.expect(",")?;
    }
}

/// An assignment target: a name with optional selects, or a concatenation.
pub fn parse_lvalue(ts: &mut TokStream) -> Result<Expr, SyntaxError> {
    parse_postfix(ts)
}

fn parse_postfix(ts: &mut TokStream) -> Result<Expr, SyntaxError> {
    let mut e = parse_primary(ts)?;
    while ts.check("[") {
        ts.next();
        let a = parse_expr(ts)?;
        let op = ts.peek().text.clone();
        if matches!(op.as_str(), ":" | "+:" | "-:") {
            ts.next();
            let b = parse_expr(ts)?;
            ts.expect("]")?;
            e = Expr::Slice(Box::new(e), op, Box::new(a), Box::new(b));
        } else {
            ts.expect("]")?;
            e = Expr::Index(Box::new(e), Box::new(a));
        }
    }
    Ok(e)
}

fn parse_primary(ts: &mut TokStream) -> Result<Expr, SyntaxError> {
    let t = ts.peek();
    match t.kind {
        TokenKind::Number => Ok(Expr::Number(ts.next().text.clone())),
        TokenKind::Str => Ok(Expr::Str(ts.next().text.clone())),
        TokenKind::Macro => {
            let name = ts.next().text.clone();
            if ts.check("(") {
                let args = parse_args(ts)?;
                return Ok(Expr::Call(name, args));
            }
            Ok(Expr::Macro(name))
        }
        TokenKind::SysIdent => {
            let name = ts.next().text.clone();
            let args = if ts.check("(") { parse_args(ts)? } else { Vec::new() };
            Ok(Expr::Call(name, args))
        }
        TokenKind::Ident if !RESERVED.contains(&t.text.as_str()) => {
            let mut name = ts.next().text.clone();
            while ts.check(".") && ts.peek_n(1).is_ident() {
                ts.next();
                name.push('.');
                name.push_str(&ts.next().text);
            }
            if ts.check("(") {
                let args = parse_args(ts)?;
                return Ok(Expr::Call(name, args));
            }
            Ok(Expr::Ident(name))
        }
        TokenKind::Op if t.text == "(" => {
            ts.next();
            let e = parse_expr(ts)?;
            ts.expect(")")?;
            Ok(e)
        }
        TokenKind::Op if t.text == "{" => {
            ts.next();
            let first = parse_expr(ts)?;
            if ts.check("{") {
                ts.next();
                let mut items = vec![parse_expr(ts)?];
                while ts.eat(",") {
                    items.push(parse_expr(ts)?);
                }
                ts.expect("}")?;
                ts.expect("}")?;
                return Ok(Expr::Replicate(Box::new(first), items));
            }
            let mut items = vec![first];
            while ts.eat(",") {
                items.push(parse_expr(ts)?);
            }
            ts.expect("}")?;
            Ok(Expr::Concat(items))
        }
        _ => Err(ts.error("expected expression")),
    }
}

impl Expr {
    /// Names read by the expression. Selects contribute their base name
    /// and any names used as indices; call names and literals are skipped.
    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_idents(&mut out);
        out
    }

    fn collect_idents(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Ident(n) => {
                out.insert(n.clone());
            }
            Expr::Number(_) | Expr::Str(_) | Expr::Macro(_) => {}
            Expr::Unary(_, e) => e.collect_idents(out),
            Expr::Binary(_, a, b) | Expr::Index(a, b) => {
                a.collect_idents(out);
                b.collect_idents(out);
            }
            Expr::Ternary(a, b, c) | Expr::Slice(a, _, b, c) => {
                a.collect_idents(out);
                b.collect_idents(out);
                c.collect_idents(out);
            }
            Expr::Concat(items) | Expr::Call(_, items) => {
                items.iter().for_each(|e| e.collect_idents(out))
            }
            Expr::Replicate(n, items) => {
                n.collect_idents(out);
                items.iter().for_each(|e| e.collect_idents(out));
            }
        }
    }

    /// Base names written when the expression is used as an assignment
    /// target; index expressions are not targets.
    pub fn lvalue_names(&self) -> Vec<String> {
        match self {
            Expr::Ident(n) => vec![n.clone()],
            Expr::Index(b, _) | Expr::Slice(b, _, _, _) => b.lvalue_names(),
            Expr::Concat(items) => items.iter().flat_map(Expr::lvalue_names).collect(),
            _ => Vec::new(),
        }
    }

    /// Evaluates a constant integer expression. Parameters map to their
    /// values when known.
    pub fn eval_const(&self, params: &BTreeMap<String, Option<i64>>) -> Option<i64> {
        match self {
            Expr::Number(s) => parse_number(s),
            Expr::Ident(n) => params.get(n).copied().flatten(),
            Expr::Unary(op, e) => {
                let v = e.eval_const(params)?;
                match op.as_str() {
                    "-" => v.checked_neg(),
                    "+" => Some(v),
                    "!" => Some((v == 0) as i64),
                    "~" => Some(!v),
                    _ => None,
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval_const(params)?, b.eval_const(params)?);
                match op.as_str() {
                    "+" => a.checked_add(b),
                    "-" => a.checked_sub(b),
                    "*" => a.checked_mul(b),
                    "/" => a.checked_div(b),
                    "%" => a.checked_rem(b),
                    "<<" | "<<<" => a.checked_shl(u32::try_from(b).ok()?),
                    ">>" | ">>>" => a.checked_shr(u32::try_from(b).ok()?),
                    "**" => a.checked_pow(u32::try_from(b).ok()?),
                    "==" => Some((a == b) as i64),
                    "!=" => Some((a != b) as i64),
                    "<" => Some((a < b) as i64),
                    ">" => Some((a > b) as i64),
                    "<=" => Some((a <= b) as i64),
                    ">=" => Some((a >= b) as i64),
                    "&" => Some(a & b),
                    "|" => Some(a | b),
                    "^" => Some(a ^ b),
                    "&&" => Some((a != 0 && b != 0) as i64),
                    "||" => Some((a != 0 || b != 0) as i64),
                    _ => None,
                }
            }
            Expr::Ternary(c, a, b) => {
                if c.eval_const(params)? != 0 {
                    a.eval_const(params)
                } else {
                    b.eval_const(params)
                }
            }
            Expr::Call(name, args) if name == "$clog2" && args.len() == 1 => {
                let v = args[0].eval_const(params)?;
                if v <= 0 {
                    return None;
                }
                let mut bits = 0;
                while (1i64 << bits) < v {
                    bits += 1;
                }
                Some(bits)
            }
            _ => None,
        }
    }
}

/// Value of a decimal or based literal without x/z digits.
pub fn parse_number(s: &str) -> Option<i64> {
    let s: String = s.chars().filter(|c| *c != '_' && !c.is_whitespace()).collect();
    match s.find('\'') {
        None => s.parse().ok(),
        Some(q) => {
            let rest = s[q + 1..].trim_start_matches(['s', 'S']);
            let mut chars = rest.chars();
            let radix = match chars.next()? {
                'h' | 'H' => 16,
                'd' | 'D' => 10,
                'o' | 'O' => 8,
                'b' | 'B' => 2,
                // '0 / '1 fill literals
                '0' => return Some(0),
                '1' => return Some(-1),
                _ => return None,
            };
            i64::from_str_radix(chars.as_str(), radix).ok()
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, items: &[Expr]) -> fmt::Result {
            for (i, e) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{e}")?;
            }
            Ok(())
        }
        match self {
            Expr::Ident(s) | Expr::Number(s) | Expr::Str(s) | Expr::Macro(s) => f.write_str(s),
            Expr::Unary(op, e) => write!(f, "{op}({e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {op} {b})"),
            Expr::Ternary(c, a, b) => write!(f, "({c} ? {a} : {b})"),
            Expr::Index(b, i) => write!(f, "{b}[{i}]"),
            Expr::Slice(b, op, x, y) => write!(f, "{b}[{x}{op}{y}]"),
            Expr::Concat(items) => {
                f.write_str("{")?;
                list(f, items)?;
                f.write_str("}")
            }
            Expr::Replicate(n, items) => {
                write!(f, "{{{n}{{")?;
                list(f, items)?;
                f.write_str("}}")
            }
            Expr::Call(name, args) => {
                write!(f, "{name}(")?;
                list(f, args)?;
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtl::lex;

    fn parse(s: &str) -> Expr {
        let toks = lex(s).unwrap();
        let mut ts = TokStream::new(&toks);
        let e = parse_expr(&mut ts).unwrap();
        assert!(ts.at_eof(), "trailing tokens in {s}");
        e
    }

    #[test]
    fn precedence_and_idents() {
        let e = parse("a & b | c == d");
        assert_eq!(e.to_string(), "((a & b) | (c == d))");
        assert_eq!(
            parse("data[3:0] + 4'hA").identifiers(),
            BTreeSet::from(["data".to_string()])
        );
        let ids = parse("sel ? mem[addr] : {2{x}}").identifiers();
        assert_eq!(ids.len(), 4);
        assert!(parse("$rose(a) && f(b)").identifiers().contains("b"));
        assert!(!parse("f(b)").identifiers().contains("f"));
    }

    #[test]
    fn const_eval() {
        let params = BTreeMap::from([("W".to_string(), Some(8))]);
        assert_eq!(parse("W-1").eval_const(&params), Some(7));
        assert_eq!(parse("2**W/4").eval_const(&params), Some(64));
        assert_eq!(parse("$clog2(W)").eval_const(&params), Some(3));
        assert_eq!(parse("N-1").eval_const(&params), None);
        assert_eq!(parse_number("8'hFF"), Some(255));
        assert_eq!(parse_number("4'b1x01"), None);
    }

    #[test]
    fn display_reparses_to_same_tree() {
        for s in ["!a && (b || c)", "x[3:0] == 4'b1010", "$past(q, 2) !== {a, b}", "-a ** 2"] {
            let e = parse(s);
            assert_eq!(parse(&e.to_string()), e, "{s}");
        }
    }
}
