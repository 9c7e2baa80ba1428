use super::{Cfg, EdgeLabel, NodeKind};
use std::fmt::Write;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering. Decisions are diamonds labelled with their guard;
/// synthetic copies are marked with `*`.
pub fn to_dot(cfg: &Cfg) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(&cfg.name));
    out.push_str("  node [fontname=\"monospace\"];\n");
    for n in &cfg.nodes {
        let (shape, label) = match &n.kind {
            NodeKind::Entry => ("ellipse", "entry".to_string()),
            NodeKind::Exit => ("ellipse", format!("exit\\nreturn {}", escape(&cfg.result.to_string()))),
            NodeKind::Block(items) => {
                let lines: Vec<String> = items
                    .iter()
                    .map(|a| {
                        let mark = if a.synthetic { " *" } else { "" };
                        escape(&format!("{} = {}  (line {}){mark}", a.target, a.rhs, a.loc.line))
                    })
                    .collect();
                ("box", lines.join("\\l") + if lines.is_empty() { "" } else { "\\l" })
            }
            NodeKind::Decision { guard, loc } => ("diamond", escape(&format!("{guard}\\n(line {})", loc.line))),
        };
        let _ = writeln!(out, "  {} [shape={shape}, label=\"{label}\"];", n.id);
    }
    for e in &cfg.edges {
        let attr = match e.label {
            EdgeLabel::Next => String::new(),
            EdgeLabel::Then => " [label=\"then\"]".into(),
            EdgeLabel::Else => " [label=\"else\"]".into(),
        };
        let _ = writeln!(out, "  {} -> {}{attr};", e.from, e.to);
    }
    out.push_str("}\n");
    out
}
