use super::{ClockEvent, Diagnostic, Edge, ImplOp, SeqStep, Sequence, SvaAst};
use crate::rtl::expr::{parse_expr, parse_lvalue, SyntaxError, TokStream};
use crate::rtl::{lex, TokenKind};

fn diag((tok, msg): SyntaxError) -> Diagnostic {
    let message = if tok.kind == TokenKind::Eof {
        format!("{msg}, found end of input")
    } else {
        format!("{msg}, found '{}'", tok.text)
    };
    Diagnostic {
        line: tok.line,
        col: tok.col,
        offset: tok.offset,
        message,
    }
}

/// Parses one assertion. Errors carry the position of the offending
/// token and what was expected there.
pub fn parse_sva(text: &str) -> Result<SvaAst, Diagnostic> {
    let toks = lex(text).map_err(|e| Diagnostic {
        line: e.line,
        col: e.col,
        offset: e.offset,
        message: e.message,
    })?;
    let mut ts = TokStream::new(&toks);
    let mut ast = parse_body(&mut ts).map_err(diag)?;
    ast.derive_signals();
    Ok(ast)
}

fn parse_body(ts: &mut TokStream) -> Result<SvaAst, SyntaxError> {
    if ts.at_eof() {
        return Err(ts.error("expected '@' clocking event"));
    }
    let name = if ts.eat("property") {
        let n = ts.expect_ident()?.text.clone();
        ts.eat(";");
        Some(n)
    } else {
        None
    };
    let clocking = parse_clocking(ts)?;
    let disable_iff = if ts.eat("disable") {
        ts.expect("iff")?;
        ts.expect("(")?;
        let e = parse_expr(ts)?;
        ts.expect(")")?;
        Some(e)
    } else {
        None
    };
    let (antecedent, operator, consequent) = parse_property(ts)?;
    ts.eat(";");
    if name.is_some() {
        ts.expect("endproperty")?;
        ts.eat(";");
    }
    if !ts.at_eof() {
        return Err(ts.error("expected end of assertion"));
    }
    Ok(SvaAst {
        name,
        clocking,
        disable_iff,
        antecedent,
        operator,
        consequent,
        referenced_signals: Default::default(),
    })
}

fn parse_clocking(ts: &mut TokStream) -> Result<Vec<ClockEvent>, SyntaxError> {
    ts.expect("@")?;
    ts.expect("(")?;
    let mut events = Vec::new();
    loop {
        let edge = if ts.eat("posedge") {
            Some(Edge::Posedge)
        } else if ts.eat("negedge") {
            Some(Edge::Negedge)
        } else {
            None
        };
        if !ts.peek().is_ident() {
            return Err(ts.error("expected clock signal"));
        }
        events.push(ClockEvent {
            edge,
            signal: parse_lvalue(ts)?,
        });
        if ts.eat(")") {
            return Ok(events);
        }
        if !ts.eat("or") && !ts.eat(",") {
            return Err(ts.error("expected 'or' or ')' in clocking event"));
        }
    }
}

/// True when the group opening at the cursor holds an implication at its
/// own nesting level, i.e. it wraps a whole property.
fn wraps_property(ts: &TokStream) -> bool {
    let mut depth = 0usize;
    for n in 0.. {
        let t = ts.peek_n(n);
        if t.kind == TokenKind::Eof {
            return false;
        }
        if t.kind != TokenKind::Op {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth -= 1;
                if depth == 0 {
                    return false;
                }
            }
            "|->" | "|=>" if depth == 1 => return true,
            _ => {}
        }
    }
    unreachable!()
}

fn parse_property(ts: &mut TokStream) -> Result<(Sequence, ImplOp, Option<Sequence>), SyntaxError> {
    if ts.check("(") && wraps_property(ts) {
        ts.next();
        let p = parse_property(ts)?;
        ts.expect(")")?;
        return Ok(p);
    }
    let antecedent = parse_sequence(ts)?;
    let op = if ts.eat("|->") {
        ImplOp::Overlap
    } else if ts.eat("|=>") {
        ImplOp::NonOverlap
    } else {
        return Ok((antecedent, ImplOp::None, None));
    };
    Ok((antecedent, op, Some(parse_sequence(ts)?)))
}

fn parse_sequence(ts: &mut TokStream) -> Result<Sequence, SyntaxError> {
    let mut steps = Vec::new();
    loop {
        let delay = if ts.eat("##") {
            let t = ts.peek();
            let n = (t.kind == TokenKind::Number).then(|| t.text.parse::<u32>().ok()).flatten();
            match n {
                Some(n) => {
                    ts.next();
                    Some(n)
                }
                None => return Err(ts.error("expected cycle count after '##'")),
            }
        } else {
            None
        };
        steps.push(SeqStep {
            delay,
            expr: parse_expr(ts)?,
        });
        if !ts.check("##") {
            return Ok(Sequence(steps));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ethernet_assertion() {
        let a = parse_sva("@(posedge MTxClk) (ResetByteCnt == 1 && TxReset == 1) |-> (ByteCnt == 0 && TxFlow == 0);").unwrap();
        assert_eq!(a.referenced_signals, set(&["MTxClk", "ResetByteCnt", "TxReset", "ByteCnt", "TxFlow"]));
        assert_eq!(a.operator, ImplOp::Overlap);
        assert_eq!(a.clocking[0].edge, Some(Edge::Posedge));
    }

    #[test]
    fn nonoverlap_and_delay() {
        let a = parse_sva("@(posedge PCLK) TX_EMPTY |=> INT_TX").unwrap();
        assert_eq!(a.operator, ImplOp::NonOverlap);
        let b = parse_sva("@(posedge clock) (!tx_busy && new_tx_data) |-> ##1 tx_busy").unwrap();
        assert_eq!(b.consequent.unwrap().0[0].delay, Some(1));
    }

    #[test]
    fn wrapped_property_and_or_clock() {
        let a = parse_sva("@(posedge smclk or aclk)\n((smclk_en && !aclk_en) |-> (aclk == smclk));").unwrap();
        assert_eq!(a.clocking.len(), 2);
        assert_eq!(a.clocking[1].edge, None);
        assert_eq!(a.operator, ImplOp::Overlap);
        let b = parse_sva("property p1; @(negedge clk) disable iff (rst) a ##2 b; endproperty").unwrap();
        assert_eq!(b.name.as_deref(), Some("p1"));
        assert_eq!(b.operator, ImplOp::None);
        assert!(b.consequent.is_none());
        assert_eq!(b.referenced_signals, set(&["a", "b", "clk", "rst"]));
    }

    #[test]
    fn double_operator_is_positioned() {
        let e = parse_sva("@(posedge clk) a |-> |-> b").unwrap_err();
        assert_eq!((e.line, e.col), (1, 22));
        assert!(e.message.contains("expected expression"), "{}", e.message);
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "@(posedge mclk) disable iff (puc_rst) $rose(nmi) |-> $rose(cpu.NMI_handler)",
            "@(posedge mclk) (dma_en && dma_we) |-> (dma_din !== 'hX);",
            "property q; @(posedge c or negedge r) a ##1 b |=> ##2 c[3:0] == 4'b1010; endproperty",
        ] {
            let a = parse_sva(s).unwrap();
            assert_eq!(parse_sva(&a.to_string()).unwrap(), a, "{s}");
        }
    }
}
