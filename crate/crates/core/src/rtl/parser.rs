use std::collections::{BTreeMap, BTreeSet};

use super::expr::{parse_expr, parse_lvalue, Expr, SyntaxError, TokStream};
use super::lexer::{lex, Token, TokenKind};
use super::preprocess::{LineMap, Preprocessed};
use super::{
    AlwaysFact, AssignmentFact, ControlFlowFact, ControlKind, Diagnostic, Direction, EventFact,
    InstanceFact, ModuleFact, NetKind, ParseOutput, PortDecl, RtlError, SignalDecl,
};

/// Parses plain Verilog text (no include handling) into module facts.
pub fn parse_rtl(text: &str, file: &str) -> Result<ParseOutput, RtlError> {
    parse_preprocessed(&Preprocessed::plain(file, text), file)
}

pub(crate) fn parse_preprocessed(pre: &Preprocessed, file: &str) -> Result<ParseOutput, RtlError> {
    let to_err = |line: usize, column: usize, token: String, message: String| {
        let (f, l) = pre
            .map
            .origin(line)
            .map(|(f, l)| (f.to_string(), l))
            .unwrap_or_else(|| (file.to_string(), line));
        RtlError::Parse {
            file: f,
            line: l,
            column,
            token,
            message,
        }
    };
    let toks = lex(&pre.text).map_err(|e| {
        let tok = pre.text[e.offset..].chars().next().map(String::from).unwrap_or_default();
        to_err(e.line, e.col, tok, e.message)
    })?;
    let mut ts = TokStream::new(&toks);
    let mut out = ParseOutput::default();
    let mut warned_stray = false;
    while !ts.at_eof() {
        if ts.check("module") || ts.check("macromodule") {
            let mut p = ModuleParser::new(&mut ts, &pre.map, file);
            let m = p.module().map_err(|(t, msg)| {
                let shown = if t.kind == TokenKind::Eof { "<eof>".to_string() } else { t.text };
                to_err(t.line, t.col, shown, msg)
            })?;
            out.warnings.append(&mut p.warnings);
            out.modules.push(m);
        } else {
            let t = ts.next();
            if !warned_stray {
                warned_stray = true;
                out.warnings.push(Diagnostic {
                    span: pre.map.span(t.line),
                    message: format!("content outside a module ignored (starting at '{}')", t.text),
                });
            }
        }
    }
    Ok(out)
}

const NET_KEYWORDS: &[&str] = &[
    "wire", "reg", "logic", "tri", "wand", "wor", "supply0", "supply1", "integer", "genvar",
];
const GATES: &[&str] = &[
    "and", "or", "nand", "nor", "xor", "xnor", "not", "buf", "bufif0", "bufif1", "notif0",
    "notif1", "pullup", "pulldown",
];

struct ModuleParser<'t, 'a> {
    ts: &'t mut TokStream<'a>,
    map: &'t LineMap,
    file: &'t str,
    m: ModuleFact,
    /// Header port names in declaration order (non-ANSI style).
    header_ports: Vec<String>,
    /// Start offsets of the recorded control flows; facts are pushed once
    /// their body is parsed, so inner ones come first until sorted.
    cf_offsets: Vec<usize>,
    warnings: Vec<Diagnostic>,
}

#[derive(Default)]
struct BlockCtx {
    record: bool,
    case_subjects: Vec<String>,
}

impl<'t, 'a> ModuleParser<'t, 'a> {
    fn new(ts: &'t mut TokStream<'a>, map: &'t LineMap, file: &'t str) -> Self {
        ModuleParser {
            ts,
            map,
            file,
            m: ModuleFact::default(),
            header_ports: Vec::new(),
            cf_offsets: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn span(&self, t: &Token) -> String {
        self.map.span(t.line)
    }

    fn warn(&mut self, t: &Token, message: String) {
        self.warnings.push(Diagnostic {
            span: self.span(t),
            message,
        });
    }

    fn module(&mut self) -> Result<ModuleFact, SyntaxError> {
        let kw = self.ts.next();
        self.m.source_span = self.span(kw);
        self.m.file = self.file.to_string();
        self.m.name = self.ts.expect_ident()?.text.clone();
        if self.ts.eat("#") {
            self.ts.expect("(")?;
            self.parameter_list()?;
        }
        if self.ts.check("(") {
            self.port_list()?;
        }
        self.ts.expect(";")?;
        while !self.ts.eat("endmodule") {
            if self.ts.at_eof() {
                return Err(self.ts.error("missing endmodule"));
            }
            self.item()?;
        }
        // header ports that were never given a direction
        for name in std::mem::take(&mut self.header_ports) {
            if self.m.port(&name).is_none() {
                let t = self.ts.peek().clone();
                self.warn(&t, format!("port {name} of {} has no direction; assuming inout", self.m.name));
                self.m.ports.push(PortDecl {
                    name,
                    direction: Direction::Inout,
                    msb: None,
                    lsb: None,
                    kind: NetKind::Unspecified,
                    width_unknown: false,
                });
            }
        }
        self.add_implicit_nets();
        let mut m = std::mem::take(&mut self.m);
        let mut order: Vec<(usize, ControlFlowFact)> = std::mem::take(&mut self.cf_offsets).into_iter().zip(m.control_flows).collect();
        order.sort_by_key(|(o, _)| *o);
        m.control_flows = order.into_iter().map(|(_, c)| c).collect();
        m.fsms = super::detect_fsms(&m);
        Ok(m)
    }

    fn add_implicit_nets(&mut self) {
        let mut names: BTreeSet<String> = self.m.assignments.iter().map(|a| a.lhs.clone()).collect();
        for inst in &self.m.instances {
            for actual in inst.connections.values().chain(inst.positional.iter()) {
                names.extend(actual.iter().cloned());
            }
        }
        for n in names {
            if n.contains('.') || self.m.declares(&n) || self.m.parameters.contains_key(&n) {
                continue;
            }
            self.m.internal_signals.push(SignalDecl {
                name: n,
                kind: NetKind::Wire,
                msb: None,
                lsb: None,
                width_unknown: false,
                implicit: true,
            });
        }
    }

    /// `#( parameter A = 1, B = 2 )` after the opening paren.
    fn parameter_list(&mut self) -> Result<(), SyntaxError> {
        if self.ts.eat(")") {
            return Ok(());
        }
        loop {
            self.ts.eat("parameter");
            self.ts.eat("localparam");
            self.param_assignment()?;
            if self.ts.eat(")") {
                return Ok(());
            }
            self.ts.expect(",")?;
        }
    }

    /// `[type] [signed] [range] NAME = expr`
    fn param_assignment(&mut self) -> Result<(), SyntaxError> {
        while ["integer", "signed", "unsigned", "logic", "reg", "bit", "int"]
            .iter()
            .any(|k| self.ts.check(k))
        {
            self.ts.next();
        }
        if self.ts.check("[") {
            self.range()?;
        }
        let name = self.ts.expect_ident()?.text.clone();
        self.ts.expect("=")?;
        let e = parse_expr(self.ts)?;
        let v = e.eval_const(&self.m.parameters);
        self.m.parameters.insert(name, v);
        Ok(())
    }

    /// `[msb:lsb]` → (msb, lsb, unknown)
    fn range(&mut self) -> Result<(Option<i64>, Option<i64>, bool), SyntaxError> {
        self.ts.expect("[")?;
        let a = parse_expr(self.ts)?;
        self.ts.expect(":")?;
        let b = parse_expr(self.ts)?;
        self.ts.expect("]")?;
        match (a.eval_const(&self.m.parameters), b.eval_const(&self.m.parameters)) {
            (Some(x), Some(y)) => Ok((Some(x), Some(y), false)),
            _ => Ok((None, None, true)),
        }
    }

    fn direction(&self) -> Option<Direction> {
        match self.ts.peek().text.as_str() {
            "input" if self.ts.peek().is_ident() => Some(Direction::Input),
            "output" if self.ts.peek().is_ident() => Some(Direction::Output),
            "inout" if self.ts.peek().is_ident() => Some(Direction::Inout),
            _ => None,
        }
    }

    fn net_kind(&mut self) -> Option<NetKind> {
        let k = match self.ts.peek().text.as_str() {
            "wire" | "tri" | "wand" | "wor" | "supply0" | "supply1" => NetKind::Wire,
            "reg" | "integer" => NetKind::Reg,
            "logic" => NetKind::Unspecified,
            _ => return None,
        };
        self.ts.next();
        Some(k)
    }

    fn port_list(&mut self) -> Result<(), SyntaxError> {
        self.ts.expect("(")?;
        if self.ts.eat(")") {
            return Ok(());
        }
        if self.direction().is_none() {
            // non-ANSI: names only
            loop {
                if self.ts.check(".") {
                    let t = self.ts.peek().clone();
                    self.warn(&t, "explicit port expressions are not supported".into());
                    self.ts.next();
                    self.ts.expect_ident()?;
                    self.ts.skip_group()?;
                } else {
                    let name = self.ts.expect_ident()?.text.clone();
                    self.header_ports.push(name);
                }
                if self.ts.eat(")") {
                    return Ok(());
                }
                self.ts.expect(",")?;
            }
        }
        let mut dir = Direction::Input;
        let mut kind = NetKind::Unspecified;
        let mut rng = (None, None, false);
        loop {
            let mut fresh = false;
            if let Some(d) = self.direction() {
                self.ts.next();
                dir = d;
                kind = NetKind::Unspecified;
                rng = (None, None, false);
                fresh = true;
            }
            if let Some(k) = self.net_kind() {
                kind = k;
                fresh = true;
            }
            while self.ts.eat("signed") || self.ts.eat("unsigned") {
                fresh = true;
            }
            if self.ts.check("[") {
                rng = self.range()?;
            } else if fresh {
                rng = (None, None, false);
            }
            let tok = self.ts.expect_ident()?;
            let name = tok.text.clone();
            while self.ts.check("[") {
                self.ts.skip_group()?;
            }
            if self.ts.eat("=") {
                parse_expr(self.ts)?;
            }
            if self.m.port(&name).is_some() {
                return Err((tok.clone(), format!("duplicate port {name}")));
            }
            self.m.ports.push(PortDecl {
                name,
                direction: dir,
                msb: rng.0,
                lsb: rng.1,
                kind,
                width_unknown: rng.2,
            });
            if self.ts.eat(")") {
                return Ok(());
            }
            self.ts.expect(",")?;
        }
    }

    fn skip_to_semicolon(&mut self) -> Result<(), SyntaxError> {
        loop {
            let t = self.ts.peek();
            if t.kind == TokenKind::Eof {
                return Err(self.ts.error("expected ';'"));
            }
            if t.is("endmodule") {
                return Ok(());
            }
            if t.kind == TokenKind::Op && matches!(t.text.as_str(), "(" | "[" | "{") {
                self.ts.skip_group()?;
                continue;
            }
            self.ts.next();
            if t.is(";") {
                return Ok(());
            }
        }
    }

    fn skip_until(&mut self, end: &str) -> Result<(), SyntaxError> {
        loop {
            if self.ts.at_eof() {
                return Err(self.ts.error(&format!("missing {end}")));
            }
            if self.ts.next().is(end) {
                return Ok(());
            }
        }
    }

    fn item(&mut self) -> Result<(), SyntaxError> {
        let t = self.ts.peek().clone();
        if t.kind == TokenKind::Op {
            if t.text == ";" {
                self.ts.next();
                return Ok(());
            }
            return Err(self.ts.error("unexpected token in module body"));
        }
        if t.kind != TokenKind::Ident {
            self.warn(&t, format!("unsupported construct starting at '{}' skipped", t.text));
            return self.skip_to_semicolon();
        }
        match t.text.as_str() {
            "input" | "output" | "inout" => self.port_decl(),
            "parameter" | "localparam" => {
                self.ts.next();
                loop {
                    self.param_assignment()?;
                    if !self.ts.eat(",") {
                        break;
                    }
                }
                self.ts.expect(";")?;
                Ok(())
            }
            k if NET_KEYWORDS.contains(&k) => self.net_decl(),
            "assign" => self.continuous_assign(),
            "always" | "always_ff" | "always_comb" | "always_latch" => self.always(),
            "initial" | "final" => {
                self.ts.next();
                self.warn(&t, format!("{} block skipped", t.text));
                let mut ctx = BlockCtx::default();
                self.statement(&mut ctx)?;
                Ok(())
            }
            "generate" => self.skip_block(&t, "endgenerate"),
            "function" => self.skip_block(&t, "endfunction"),
            "task" => self.skip_block(&t, "endtask"),
            "specify" => self.skip_block(&t, "endspecify"),
            "property" => self.skip_block(&t, "endproperty"),
            "sequence" => self.skip_block(&t, "endsequence"),
            "assert" | "assume" | "cover" | "defparam" => {
                self.warn(&t, format!("{} skipped", t.text));
                self.ts.next();
                self.skip_to_semicolon()
            }
            g if GATES.contains(&g) => {
                self.warn(&t, format!("gate primitive {g} skipped"));
                self.skip_to_semicolon()
            }
            _ if self.ts.peek_n(1).is_ident() || self.ts.peek_n(1).is("#") => self.instance(),
            _ => {
                self.warn(&t, format!("unsupported construct starting at '{}' skipped", t.text));
                self.skip_to_semicolon()
            }
        }
    }

    fn skip_block(&mut self, t: &Token, end: &str) -> Result<(), SyntaxError> {
        self.warn(t, format!("{} block skipped", t.text));
        self.ts.next();
        self.skip_until(end)
    }

    /// Names (with optional initializers) after a declaration prefix.
    fn declared_names(&mut self) -> Result<Vec<(Token, Option<Expr>)>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            let tok = self.ts.expect_ident()?.clone();
            while self.ts.check("[") {
                self.ts.skip_group()?;
            }
            let init = if self.ts.eat("=") { Some(parse_expr(self.ts)?) } else { None };
            out.push((tok, init));
            if !self.ts.eat(",") {
                break;
            }
        }
        self.ts.expect(";")?;
        Ok(out)
    }

    fn port_decl(&mut self) -> Result<(), SyntaxError> {
        let dir = self.direction().expect("caller checked");
        self.ts.next();
        let kind = self.net_kind().unwrap_or(NetKind::Unspecified);
        while self.ts.eat("signed") || self.ts.eat("unsigned") {}
        let rng = if self.ts.check("[") { self.range()? } else { (None, None, false) };
        for (tok, init) in self.declared_names()? {
            let name = tok.text.clone();
            if self.m.port(&name).is_some() {
                return Err((tok, format!("duplicate port {name}")));
            }
            if !self.header_ports.is_empty() && !self.header_ports.contains(&name) {
                self.warn(&tok, format!("{name} declared as port but missing from the port list"));
            }
            self.m.ports.push(PortDecl {
                name: name.clone(),
                direction: dir,
                msb: rng.0,
                lsb: rng.1,
                kind,
                width_unknown: rng.2,
            });
            if let Some(e) = init {
                self.push_assignment(name, &e, false, true, &tok);
            }
        }
        // keep header order for positional connections
        if !self.header_ports.is_empty() {
            let order = &self.header_ports;
            self.m.ports.sort_by_key(|p| order.iter().position(|h| *h == p.name).unwrap_or(usize::MAX));
        }
        Ok(())
    }

    fn net_decl(&mut self) -> Result<(), SyntaxError> {
        let kw = self.ts.peek().text.clone();
        if kw == "genvar" {
            self.ts.next();
            return self.skip_to_semicolon();
        }
        let kind = self.net_kind().expect("caller checked");
        while self.ts.eat("signed") || self.ts.eat("unsigned") {}
        let mut rng = if self.ts.check("[") { self.range()? } else { (None, None, false) };
        if kw == "integer" && rng == (None, None, false) {
            rng = (Some(31), Some(0), false);
        }
        for (tok, init) in self.declared_names()? {
            let name = tok.text.clone();
            if let Some(p) = self.m.ports.iter_mut().find(|p| p.name == name) {
                // `output q; reg [7:0] q;`
                p.kind = kind;
                if p.msb.is_none() && !p.width_unknown {
                    (p.msb, p.lsb, p.width_unknown) = rng;
                }
            } else if self.m.signal(&name).is_some() {
                return Err((tok, format!("duplicate declaration of {name}")));
            } else {
                self.m.internal_signals.push(SignalDecl {
                    name: name.clone(),
                    kind,
                    msb: rng.0,
                    lsb: rng.1,
                    width_unknown: rng.2,
                    implicit: false,
                });
            }
            if let Some(e) = init {
                self.push_assignment(name, &e, false, true, &tok);
            }
        }
        Ok(())
    }

    fn rhs_signals(&self, e: &Expr) -> BTreeSet<String> {
        e.identifiers()
            .into_iter()
            .filter(|n| !self.m.parameters.contains_key(n))
            .collect()
    }

    fn push_assignment(&mut self, lhs: String, rhs: &Expr, blocking: bool, continuous: bool, at: &Token) {
        let rhs_signals = self.rhs_signals(rhs);
        self.m.assignments.push(AssignmentFact {
            lhs,
            rhs_signals,
            blocking: blocking && !continuous,
            continuous,
            in_module: self.m.name.clone(),
            source_span: self.span(at),
        });
    }

    fn continuous_assign(&mut self) -> Result<(), SyntaxError> {
        self.ts.next();
        if self.ts.check("(") {
            // drive strength
            self.ts.skip_group()?;
        }
        if self.ts.eat("#") {
            self.delay_value()?;
        }
        loop {
            let at = self.ts.peek().clone();
            let lv = parse_lvalue(self.ts)?;
            self.ts.expect("=")?;
            let rhs = parse_expr(self.ts)?;
            for name in lv.lvalue_names() {
                self.push_assignment(name, &rhs, false, true, &at);
            }
            if !self.ts.eat(",") {
                break;
            }
        }
        self.ts.expect(";")?;
        Ok(())
    }

    fn delay_value(&mut self) -> Result<(), SyntaxError> {
        if self.ts.check("(") {
            self.ts.skip_group()
        } else {
            self.ts.next();
            Ok(())
        }
    }

    fn event_list(&mut self) -> Result<(Vec<EventFact>, bool), SyntaxError> {
        if self.ts.eat("*") {
            return Ok((Vec::new(), true));
        }
        self.ts.expect("(")?;
        if self.ts.eat("*") {
            self.ts.expect(")")?;
            return Ok((Vec::new(), true));
        }
        let mut events = Vec::new();
        loop {
            let edge = if self.ts.eat("posedge") {
                "posedge"
            } else if self.ts.eat("negedge") {
                "negedge"
            } else {
                ""
            };
            let e = parse_expr(self.ts)?;
            let signal = e.lvalue_names().into_iter().next().unwrap_or_else(|| e.to_string());
            events.push(EventFact {
                edge: edge.to_string(),
                signal,
            });
            if !(self.ts.eat("or") || self.ts.eat(",")) {
                break;
            }
        }
        self.ts.expect(")")?;
        Ok((events, false))
    }

    fn always(&mut self) -> Result<(), SyntaxError> {
        let kw = self.ts.next().clone();
        let (events, star) = if self.ts.eat("@") {
            self.event_list()?
        } else if self.ts.eat("#") {
            self.delay_value()?;
            (Vec::new(), false)
        } else {
            (Vec::new(), kw.text == "always_comb" || kw.text == "always_latch")
        };
        let mut ctx = BlockCtx {
            record: true,
            case_subjects: Vec::new(),
        };
        let assigned = self.statement(&mut ctx)?;
        self.m.always_blocks.push(AlwaysFact {
            events,
            star,
            case_subjects: ctx.case_subjects,
            assigned,
            source_span: self.span(&kw),
        });
        Ok(())
    }

    fn control(&mut self, kind: ControlKind, cond: BTreeSet<String>, governed: &BTreeSet<String>, at: &Token, ctx: &BlockCtx) {
        if !ctx.record || (cond.is_empty() && kind != ControlKind::Loop) {
            return;
        }
        self.cf_offsets.push(at.offset);
        self.m.control_flows.push(ControlFlowFact {
            kind,
            condition_signals: cond,
            governed_lhs: governed.clone(),
            in_module: self.m.name.clone(),
            source_span: self.span(at),
        });
    }

    /// Parses one procedural statement; returns the names it assigns.
    fn statement(&mut self, ctx: &mut BlockCtx) -> Result<BTreeSet<String>, SyntaxError> {
        let t = self.ts.peek().clone();
        let mut assigned = BTreeSet::new();
        if t.kind == TokenKind::Op {
            match t.text.as_str() {
                ";" => {
                    self.ts.next();
                    return Ok(assigned);
                }
                "#" => {
                    self.ts.next();
                    self.delay_value()?;
                    return self.statement(ctx);
                }
                "@" => {
                    self.ts.next();
                    self.event_list()?;
                    return self.statement(ctx);
                }
                "{" => return self.assignment(ctx),
                _ => return Err(self.ts.error("expected statement")),
            }
        }
        if t.kind == TokenKind::SysIdent {
            parse_expr(self.ts)?;
            self.ts.expect(";")?;
            return Ok(assigned);
        }
        match t.text.as_str() {
            "begin" | "fork" => {
                self.ts.next();
                let end = if t.text == "begin" { "end" } else { "join" };
                if self.ts.eat(":") {
                    self.ts.expect_ident()?;
                }
                loop {
                    if self.ts.eat(end) || (end == "join" && (self.ts.eat("join_any") || self.ts.eat("join_none"))) {
                        break;
                    }
                    if self.ts.at_eof() || self.ts.check("endmodule") {
                        return Err(self.ts.error(&format!("expected '{end}'")));
                    }
                    // block-local declarations
                    if NET_KEYWORDS.contains(&self.ts.peek().text.as_str()) && self.ts.peek().is_ident() {
                        self.skip_to_semicolon()?;
                        continue;
                    }
                    assigned.extend(self.statement(ctx)?);
                }
                if self.ts.eat(":") {
                    self.ts.expect_ident()?;
                }
            }
            "if" => {
                self.ts.next();
                self.ts.expect("(")?;
                let cond = parse_expr(self.ts)?;
                self.ts.expect(")")?;
                assigned.extend(self.statement(ctx)?);
                if self.ts.eat("else") {
                    assigned.extend(self.statement(ctx)?);
                }
                let cs = self.rhs_signals(&cond);
                self.control(ControlKind::IfElse, cs, &assigned, &t, ctx);
            }
            "unique" | "priority" | "unique0" => {
                self.ts.next();
                return self.statement(ctx);
            }
            "case" | "casez" | "casex" => {
                self.ts.next();
                self.ts.expect("(")?;
                let subject = parse_expr(self.ts)?;
                self.ts.expect(")")?;
                if let Expr::Ident(s) = &subject {
                    ctx.case_subjects.push(s.clone());
                }
                let mut cond = self.rhs_signals(&subject);
                while !self.ts.eat("endcase") {
                    if self.ts.at_eof() || self.ts.check("endmodule") {
                        return Err(self.ts.error("expected 'endcase'"));
                    }
                    if self.ts.eat("default") {
                        self.ts.eat(":");
                    } else {
                        loop {
                            let label = parse_expr(self.ts)?;
                            cond.extend(self.rhs_signals(&label));
                            if !self.ts.eat(",") {
                                break;
                            }
                        }
                        self.ts.expect(":")?;
                    }
                    assigned.extend(self.statement(ctx)?);
                }
                self.control(ControlKind::Case, cond, &assigned, &t, ctx);
            }
            "for" => {
                self.ts.next();
                self.ts.expect("(")?;
                self.skip_clause(";")?;
                let cond = if self.ts.check(";") { None } else { Some(parse_expr(self.ts)?) };
                self.ts.expect(";")?;
                self.skip_clause(")")?;
                assigned.extend(self.statement(ctx)?);
                let cs = cond.map(|c| self.rhs_signals(&c)).unwrap_or_default();
                self.control(ControlKind::Loop, cs, &assigned, &t, ctx);
            }
            "while" | "repeat" | "wait" => {
                self.ts.next();
                self.ts.expect("(")?;
                let cond = parse_expr(self.ts)?;
                self.ts.expect(")")?;
                assigned.extend(self.statement(ctx)?);
                if t.text != "wait" {
                    let cs = self.rhs_signals(&cond);
                    self.control(ControlKind::Loop, cs, &assigned, &t, ctx);
                }
            }
            "forever" => {
                self.ts.next();
                assigned.extend(self.statement(ctx)?);
                self.control(ControlKind::Loop, BTreeSet::new(), &assigned, &t, ctx);
            }
            "disable" => {
                self.ts.next();
                self.skip_to_semicolon()?;
            }
            "assign" | "force" => {
                self.ts.next();
                return self.assignment(ctx);
            }
            "deassign" | "release" => {
                self.ts.next();
                self.skip_to_semicolon()?;
            }
            _ if self.ts.peek_n(1).is(";") || self.ts.peek_n(1).is("(") => {
                // task enable
                self.skip_to_semicolon()?;
            }
            _ => return self.assignment(ctx),
        }
        Ok(assigned)
    }

    /// Skips a `for` header clause up to (and including) `end`.
    fn skip_clause(&mut self, end: &str) -> Result<(), SyntaxError> {
        loop {
            let t = self.ts.peek();
            if t.kind == TokenKind::Eof {
                return Err(self.ts.error(&format!("expected '{end}'")));
            }
            if t.is(end) {
                self.ts.next();
                return Ok(());
            }
            if t.is("(") || t.is("[") || t.is("{") {
                self.ts.skip_group()?;
            } else {
                self.ts.next();
            }
        }
    }

    fn assignment(&mut self, ctx: &mut BlockCtx) -> Result<BTreeSet<String>, SyntaxError> {
        let at = self.ts.peek().clone();
        let lv = parse_lvalue(self.ts)?;
        let op = self.ts.peek().clone();
        let blocking = match op.text.as_str() {
            "=" | "+=" | "-=" => true,
            "<=" => false,
            _ => return Err(self.ts.error("expected '=' or '<='")),
        };
        self.ts.next();
        if self.ts.eat("#") {
            self.delay_value()?;
        } else if self.ts.eat("@") {
            self.event_list()?;
        }
        let rhs = parse_expr(self.ts)?;
        self.ts.expect(";")?;
        let names = lv.lvalue_names();
        if names.is_empty() {
            return Err((at, "invalid assignment target".into()));
        }
        if ctx.record {
            for n in &names {
                self.push_assignment(n.clone(), &rhs, blocking, false, &at);
            }
        }
        Ok(names.into_iter().collect())
    }

    fn instance(&mut self) -> Result<(), SyntaxError> {
        let module_name = self.ts.next().text.clone();
        if self.ts.eat("#") {
            if self.ts.check("(") {
                self.ts.skip_group()?;
            } else {
                self.ts.next();
            }
        }
        loop {
            let tok = self.ts.expect_ident()?.clone();
            let name = tok.text.clone();
            while self.ts.check("[") {
                self.ts.skip_group()?;
            }
            if self.m.instance(&name).is_some() {
                return Err((tok, format!("duplicate instance {name}")));
            }
            self.ts.expect("(")?;
            let mut connections = BTreeMap::new();
            let mut positional = Vec::new();
            if !self.ts.eat(")") {
                loop {
                    if self.ts.eat(".") {
                        if self.ts.eat("*") {
                            self.warn(&tok, "wildcard .* connection not expanded".into());
                        } else {
                            let formal = self.ts.expect_ident()?.text.clone();
                            let actual = if self.ts.eat("(") {
                                if self.ts.eat(")") {
                                    BTreeSet::new()
                                } else {
                                    let e = parse_expr(self.ts)?;
                                    self.ts.expect(")")?;
                                    self.rhs_signals(&e)
                                }
                            } else {
                                BTreeSet::from([formal.clone()])
                            };
                            connections.insert(formal, actual);
                        }
                    } else if self.ts.check(",") || self.ts.check(")") {
                        positional.push(BTreeSet::new());
                    } else {
                        let e = parse_expr(self.ts)?;
                        positional.push(self.rhs_signals(&e));
                    }
                    if self.ts.eat(")") {
                        break;
                    }
                    self.ts.expect(",")?;
                }
            }
            self.m.instances.push(InstanceFact {
                name,
                module_name: module_name.clone(),
                connections,
                positional,
                source_span: self.span(&tok),
            });
            if !self.ts.eat(",") {
                break;
            }
        }
        self.ts.expect(";")?;
        Ok(())
    }
}
