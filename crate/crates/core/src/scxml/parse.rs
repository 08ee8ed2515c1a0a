use std::fmt;

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use super::{Finding, FindingKind, Severity, State, StateChart, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    XmlMalformed,
    WrongRootElement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    pub(crate) fn into_finding(self) -> Finding {
        let kind = match self.kind {
            ParseErrorKind::XmlMalformed => FindingKind::XmlMalformed,
            ParseErrorKind::WrongRootElement => FindingKind::WrongRootElement,
        };
        Finding {
            kind,
            severity: Severity::Error,
            subject: None,
            message: self.message,
            line: Some(self.line),
            column: Some(self.column),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ParseErrorKind::XmlMalformed => "XmlMalformed",
            ParseErrorKind::WrongRootElement => "WrongRootElement",
        };
        write!(f, "{kind} at {}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

/// A parsed chart plus warnings for constructs outside the supported subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedChart {
    pub chart: StateChart,
    pub unsupported: Vec<Finding>,
}

pub fn parse_scxml(text: &str) -> Result<StateChart, Vec<ParseError>> {
    parse_scxml_detailed(text).map(|p| p.chart)
}

pub fn parse_scxml_detailed(text: &str) -> Result<ParsedChart, Vec<ParseError>> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        vec![ParseError {
            kind: ParseErrorKind::XmlMalformed,
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }]
    })?;

    let root = doc.root_element();
    if root.tag_name().name() != "scxml" {
        let pos = doc.text_pos_at(root.range().start);
        return Err(vec![ParseError {
            kind: ParseErrorKind::WrongRootElement,
            line: pos.row,
            column: pos.col,
            message: format!("root element is <{}>, expected <scxml>", root.tag_name().name()),
        }]);
    }

    let mut cx = Cx {
        doc: &doc,
        unsupported: Vec::new(),
    };
    let (states, _) = cx.children(root);
    let chart = StateChart {
        name: root.attribute("name").map(str::to_string),
        initial: root.attribute("initial").map(str::to_string),
        states,
    };
    Ok(ParsedChart {
        chart,
        unsupported: cx.unsupported,
    })
}

struct Cx<'d, 'input> {
    doc: &'d Document<'input>,
    unsupported: Vec<Finding>,
}

impl Cx<'_, '_> {
    fn warn(&mut self, node: Node, subject: &str, message: String) {
        let pos = self.doc.text_pos_at(node.range().start);
        self.unsupported.push(Finding {
            kind: FindingKind::Unsupported,
            severity: Severity::Warning,
            subject: Some(subject.to_string()),
            message,
            line: Some(pos.row),
            column: Some(pos.col),
        });
    }

    /// Child states and transitions of a container element.
    fn children(&mut self, parent: Node) -> (Vec<State>, Vec<Transition>) {
        let mut states = Vec::new();
        let mut transitions = Vec::new();
        let container = parent.tag_name().name();
        for node in parent.children().filter(Node::is_element) {
            match node.tag_name().name() {
                "state" => states.push(self.state(node, false)),
                "final" => states.push(self.state(node, true)),
                "parallel" => {
                    self.warn(
                        node,
                        "parallel",
                        "<parallel> is simulated as a compound state entering its first child".into(),
                    );
                    states.push(self.state(node, false));
                }
                "transition" if container != "scxml" => {
                    if let Some(t) = self.transition(node, transitions.len()) {
                        transitions.push(t);
                    }
                }
                other => {
                    let msg = format!("<{other}> inside <{container}> is not interpreted");
                    self.warn(node, other, msg);
                }
            }
        }
        (states, transitions)
    }

    fn state(&mut self, node: Node, is_final: bool) -> State {
        let (children, transitions) = self.children(node);
        State {
            id: node.attribute("id").unwrap_or_default().to_string(),
            is_final,
            initial: node.attribute("initial").map(str::to_string),
            children,
            transitions,
        }
    }

    fn transition(&mut self, node: Node, index: usize) -> Option<Transition> {
        for child in node.children().filter(Node::is_element) {
            let name = child.tag_name().name();
            self.warn(child, name, format!("executable content <{name}> is not interpreted"));
        }
        let Some(raw_target) = node.attribute("target") else {
            self.warn(node, "transition", "targetless transition ignored".into());
            return None;
        };
        let mut targets = raw_target.split_whitespace();
        let Some(target) = targets.next() else {
            self.warn(node, "transition", "targetless transition ignored".into());
            return None;
        };
        if targets.next().is_some() {
            self.warn(
                node,
                "transition",
                format!("multi-target transition `{raw_target}` reduced to `{target}`"),
            );
        }
        Some(Transition {
            event: node.attribute("event").map(str::to_string),
            cond: node.attribute("cond").map(str::to_string),
            target: target.to_string(),
            document_index: index,
        })
    }
}
