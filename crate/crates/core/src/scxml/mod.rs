//! A deterministic SCXML subset: parser, static validator, simulator and
//! canonical serializer.
//!
//! Supported elements are `scxml`, `state`, `final` and `transition`, with the
//! `initial` attribute on `scxml` and compound states, and the `event`, `cond`
//! and `target` attributes on transitions. Everything else (`parallel`,
//! `datamodel`, executable content, `<initial>` elements, multi-target or
//! targetless transitions) is accepted by the parser and reported as an
//! `Unsupported` warning.

mod canonical;
mod parse;
mod simulate;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::artifact::Severity;
pub use canonical::to_canonical_xml;
pub use parse::{parse_scxml, parse_scxml_detailed, ParseError, ParseErrorKind, ParsedChart};
pub use simulate::{simulate, SimError, SimStep, SimTrace};
pub use validate::validate;

pub const SCXML_NAMESPACE: &str = "http://www.w3.org/2005/07/scxml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateChart {
    pub name: Option<String>,
    /// The declared `initial` attribute. When absent the first top-level
    /// state is entered.
    pub initial: Option<String>,
    pub states: Vec<State>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub id: String,
    pub is_final: bool,
    /// Declared initial child of a compound state.
    pub initial: Option<String>,
    pub children: Vec<State>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub event: Option<String>,
    /// Opaque; treated as true during simulation.
    pub cond: Option<String>,
    pub target: String,
    /// Position among the enclosing state's transitions.
    pub document_index: usize,
}

impl State {
    pub fn atomic(id: impl Into<String>) -> Self {
        State {
            id: id.into(),
            is_final: false,
            initial: None,
            children: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn final_state(id: impl Into<String>) -> Self {
        State {
            is_final: true,
            ..State::atomic(id)
        }
    }

    /// Appends a transition, assigning the next document index.
    pub fn on(mut self, event: Option<&str>, target: &str) -> Self {
        let document_index = self.transitions.len();
        self.transitions.push(Transition {
            event: event.map(str::to_string),
            cond: None,
            target: target.to_string(),
            document_index,
        });
        self
    }

    pub fn is_compound(&self) -> bool {
        !self.children.is_empty()
    }
}

impl StateChart {
    pub fn new(initial: Option<&str>, states: Vec<State>) -> Self {
        StateChart {
            name: None,
            initial: initial.map(str::to_string),
            states,
        }
    }

    /// Every state id in document order, duplicates included.
    pub fn state_ids(&self) -> Vec<&str> {
        fn walk<'a>(states: &'a [State], out: &mut Vec<&'a str>) {
            for s in states {
                out.push(&s.id);
                walk(&s.children, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.states, &mut out);
        out
    }

    pub fn all_ids(&self) -> BTreeSet<&str> {
        self.state_ids().into_iter().collect()
    }

    pub fn effective_initial(&self) -> Option<&str> {
        self.initial
            .as_deref()
            .or_else(|| self.states.first().map(|s| s.id.as_str()))
    }

    pub fn transition_count(&self) -> usize {
        fn walk(states: &[State]) -> usize {
            states.iter().map(|s| s.transitions.len() + walk(&s.children)).sum()
        }
        walk(&self.states)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    XmlMalformed,
    WrongRootElement,
    MissingInitial,
    MissingStateId,
    DanglingTarget,
    DuplicateStateId,
    UnreachableState,
    EmptyEventName,
    FinalHasTransition,
    Unsupported,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::XmlMalformed => "XmlMalformed",
            FindingKind::WrongRootElement => "WrongRootElement",
            FindingKind::MissingInitial => "MissingInitial",
            FindingKind::MissingStateId => "MissingStateId",
            FindingKind::DanglingTarget => "DanglingTarget",
            FindingKind::DuplicateStateId => "DuplicateStateId",
            FindingKind::UnreachableState => "UnreachableState",
            FindingKind::EmptyEventName => "EmptyEventName",
            FindingKind::FinalHasTransition => "FinalHasTransition",
            FindingKind::Unsupported => "Unsupported",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub severity: Severity,
    /// State id, target id or element name the finding is about.
    pub subject: Option<String>,
    pub message: String,
    pub line: Option<u32>,
    pub column: Option<u32>,
}

impl Finding {
    pub(crate) fn new(kind: FindingKind, severity: Severity, subject: Option<&str>, message: String) -> Self {
        Finding {
            kind,
            severity,
            subject: subject.map(str::to_string),
            message,
            line: None,
            column: None,
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}", self.kind.as_str())?;
        if let Some(subject) = &self.subject {
            write!(f, "({subject})")?;
        }
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, " at {l}:{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScxmlReport {
    pub findings: Vec<Finding>,
}

impl ScxmlReport {
    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn parse_errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| matches!(f.kind, FindingKind::XmlMalformed | FindingKind::WrongRootElement))
    }

    pub fn kinds(&self) -> BTreeSet<FindingKind> {
        self.findings.iter().map(|f| f.kind).collect()
    }
}

/// Parses and validates `text`, folding parse errors and unsupported-feature
/// warnings into one report.
pub fn check(text: &str) -> ScxmlReport {
    match parse_scxml_detailed(text) {
        Err(errors) => ScxmlReport {
            findings: errors.into_iter().map(ParseError::into_finding).collect(),
        },
        Ok(parsed) => {
            let mut findings = parsed.unsupported;
            findings.extend(validate(&parsed.chart).findings);
            ScxmlReport { findings }
        }
    }
}
