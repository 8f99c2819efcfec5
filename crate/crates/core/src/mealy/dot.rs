use std::fmt::Write;

use super::MealyMachine;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(super) fn render(m: &MealyMachine) -> String {
    let mut out = String::new();
    out.push_str("digraph mealy {\n");
    out.push_str("    rankdir=LR;\n");
    out.push_str("    __start [shape=point];\n");
    for (s, name) in m.state_names().iter().enumerate() {
        let shape = if s == m.initial() { "doublecircle" } else { "circle" };
        let _ = writeln!(out, "    {} [shape={}];", quote(name), shape);
    }
    let _ = writeln!(out, "    __start -> {};", quote(m.state_name(m.initial())));
    for s in 0..m.num_states() {
        for (i, input) in m.alphabet().iter().enumerate() {
            let t = m.transition(s, i);
            let label = format!("{input}/{}", t.output);
            let _ = write!(
                out,
                "    {} -> {} [label={}",
                quote(m.state_name(s)),
                quote(m.state_name(t.next)),
                quote(&label)
            );
            if m.is_hidden(s, i) {
                out.push_str(", style=dashed");
            }
            out.push_str("];\n");
        }
    }
    out.push_str("}\n");
    out
}
