use std::fmt::Write;

use super::{State, StateChart, SCXML_NAMESPACE};

/// Deterministic serialization: attributes sorted by name, two-space
/// indentation, transitions before child states, states in document order.
pub fn to_canonical_xml(chart: &StateChart) -> String {
    let mut out = String::new();
    let mut attrs: Vec<(&str, &str)> = vec![("version", "1.0"), ("xmlns", SCXML_NAMESPACE)];
    if let Some(initial) = &chart.initial {
        attrs.push(("initial", initial));
    }
    if let Some(name) = &chart.name {
        attrs.push(("name", name));
    }
    open(&mut out, 0, "scxml", &mut attrs, chart.states.is_empty());
    if !chart.states.is_empty() {
        for s in &chart.states {
            write_state(&mut out, 1, s);
        }
        out.push_str("</scxml>\n");
    }
    out
}

fn write_state(out: &mut String, depth: usize, state: &State) {
    let tag = if state.is_final { "final" } else { "state" };
    let mut attrs = vec![("id", state.id.as_str())];
    if let Some(initial) = &state.initial {
        attrs.push(("initial", initial));
    }
    let empty = state.transitions.is_empty() && state.children.is_empty();
    open(out, depth, tag, &mut attrs, empty);
    if empty {
        return;
    }
    for t in &state.transitions {
        let mut attrs = vec![("target", t.target.as_str())];
        if let Some(e) = &t.event {
            attrs.push(("event", e));
        }
        if let Some(c) = &t.cond {
            attrs.push(("cond", c));
        }
        open(out, depth + 1, "transition", &mut attrs, true);
    }
    for child in &state.children {
        write_state(out, depth + 1, child);
    }
    indent(out, depth);
    let _ = writeln!(out, "</{tag}>");
}

fn open(out: &mut String, depth: usize, tag: &str, attrs: &mut [(&str, &str)], self_closing: bool) {
    attrs.sort_by(|a, b| a.0.cmp(b.0));
    indent(out, depth);
    out.push('<');
    out.push_str(tag);
    for (k, v) in attrs.iter() {
        let _ = write!(out, " {k}=\"{}\"", escape_attr(v));
    }
    out.push_str(if self_closing { "/>\n" } else { ">\n" });
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn escape_attr(value: &str) -> String {
    let mut s = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => s.push_str("&amp;"),
            '<' => s.push_str("&lt;"),
            '>' => s.push_str("&gt;"),
            '"' => s.push_str("&quot;"),
            '\n' => s.push_str("&#10;"),
            '\r' => s.push_str("&#13;"),
            '\t' => s.push_str("&#9;"),
            c => s.push(c),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scxml::parse_scxml;

    const GOLDEN_MINIMAL: &str = "<scxml initial=\"a\" version=\"1.0\" xmlns=\"http://www.w3.org/2005/07/scxml\">\n  <state id=\"a\"/>\n</scxml>\n";

    #[test]
    fn minimal_golden() {
        let chart = parse_scxml(r#"<scxml initial="a"><state id="a"/></scxml>"#).unwrap();
        assert_eq!(to_canonical_xml(&chart), GOLDEN_MINIMAL);
    }

    #[test]
    fn attribute_order_is_irrelevant() {
        let a = parse_scxml(
            r#"<scxml initial="a" version="1.0"><state id="a"><transition target="a" event="e" cond="x &lt; 1"/></state></scxml>"#,
        )
        .unwrap();
        let b = parse_scxml(
            r#"<scxml version="1.0" initial="a"><state id="a"><transition cond="x &lt; 1" event="e" target="a"/></state></scxml>"#,
        )
        .unwrap();
        assert_eq!(to_canonical_xml(&a), to_canonical_xml(&b));
    }

    #[test]
    fn escapes_survive_round_trip() {
        let mut chart = StateChart::new(Some("s"), vec![State::atomic("s").on(Some("e\"v&<t>"), "s")]);
        chart.states[0].transitions[0].cond = Some("a\n\tb".into());
        chart.name = Some("n".into());
        let text = to_canonical_xml(&chart);
        assert_eq!(parse_scxml(&text).unwrap(), chart);
    }

    #[test]
    fn nested_layout() {
        let mut p = State::atomic("p").on(Some("x"), "f");
        p.initial = Some("c".into());
        p.children = vec![State::atomic("c")];
        let chart = StateChart::new(Some("p"), vec![p, State::final_state("f")]);
        let expected = "<scxml initial=\"p\" version=\"1.0\" xmlns=\"http://www.w3.org/2005/07/scxml\">\n  <state id=\"p\" initial=\"c\">\n    <transition event=\"x\" target=\"f\"/>\n    <state id=\"c\"/>\n  </state>\n  <final id=\"f\"/>\n</scxml>\n";
        assert_eq!(to_canonical_xml(&chart), expected);
    }
}
