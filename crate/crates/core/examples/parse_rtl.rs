//! Parses the uart RTL and prints the facts recorded per module.

use std::path::Path;

use kgsva::rtl::parse_sources;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rtl = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/uart/rtl");
    let mut files = Vec::new();
    for name in ["uart_top.v", "uart_tx.v", "uart_rx.v", "baud_gen.v"] {
        files.push((name.to_string(), std::fs::read_to_string(rtl.join(name))?));
    }
    let sources: Vec<(&str, &str)> = files.iter().map(|(n, s)| (n.as_str(), s.as_str())).collect();
    let (design, warnings) = parse_sources(&sources, Some("uart_top"))?;

    for m in design.modules.values() {
        println!("module {}", m.name);
        for p in &m.ports {
            println!("  port   {:?} {} [{}]", p.direction, p.name, p.width().map_or("?".into(), |w| w.to_string()));
        }
        for i in &m.instances {
            println!("  inst   {} : {}", i.name, i.module_name);
        }
        for f in &m.fsms {
            println!("  fsm    state {} clock {}", f.state_signal, f.clock_signal);
        }
        println!("  {} assignments, {} control flows", m.assignments.len(), m.control_flows.len());
    }
    for w in warnings {
        println!("warning: {w}");
    }
    Ok(())
}
