use std::collections::{BTreeSet, HashMap, VecDeque};

use super::{Finding, FindingKind, ScxmlReport, Severity, State, StateChart, Transition};

/// Flattened view of a chart: states in document order with parent links.
pub(super) struct Flat<'a> {
    pub nodes: Vec<FlatState<'a>>,
    /// First occurrence of each id.
    pub by_id: HashMap<&'a str, usize>,
    pub top: Vec<usize>,
}

pub(super) struct FlatState<'a> {
    pub state: &'a State,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl<'a> Flat<'a> {
    pub fn new(chart: &'a StateChart) -> Self {
        let mut flat = Flat {
            nodes: Vec::new(),
            by_id: HashMap::new(),
            top: Vec::new(),
        };
        for s in &chart.states {
            let idx = flat.push(s, None);
            flat.top.push(idx);
        }
        flat
    }

    fn push(&mut self, state: &'a State, parent: Option<usize>) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(FlatState {
            state,
            parent,
            children: Vec::new(),
        });
        self.by_id.entry(state.id.as_str()).or_insert(idx);
        for child in &state.children {
            let c = self.push(child, Some(idx));
            self.nodes[idx].children.push(c);
        }
        idx
    }

    pub fn id(&self, idx: usize) -> &'a str {
        &self.nodes[idx].state.id
    }

    /// Descends from `idx` through initial children to an atomic state.
    /// Returns `None` when a declared initial child cannot be resolved.
    pub fn enter(&self, mut idx: usize) -> Option<usize> {
        loop {
            let node = &self.nodes[idx];
            if node.children.is_empty() {
                return Some(idx);
            }
            idx = match node.state.initial.as_deref() {
                Some(init) => {
                    let target = *self.by_id.get(init)?;
                    if !self.is_descendant(target, idx) {
                        return None;
                    }
                    target
                }
                None => node.children[0],
            };
        }
    }

    pub fn is_descendant(&self, node: usize, ancestor: usize) -> bool {
        let mut cur = self.nodes[node].parent;
        while let Some(p) = cur {
            if p == ancestor {
                return true;
            }
            cur = self.nodes[p].parent;
        }
        false
    }

    /// `idx` followed by its ancestors, innermost first.
    pub fn lineage(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(idx), move |&i| self.nodes[i].parent)
    }

    pub fn initial_leaf(&self, chart: &StateChart) -> Option<usize> {
        let start = match chart.initial.as_deref() {
            Some(id) => *self.by_id.get(id)?,
            None => *self.top.first()?,
        };
        self.enter(start)
    }

    pub fn transitions_from(&self, leaf: usize) -> impl Iterator<Item = &'a Transition> + '_ {
        self.lineage(leaf)
            .flat_map(move |i| self.nodes[i].state.transitions.iter())
    }
}

/// Static rule checks. Findings are data: an empty report means the chart is
/// within the simulatable subset.
pub fn validate(chart: &StateChart) -> ScxmlReport {
    let flat = Flat::new(chart);
    let mut findings = Vec::new();
    let ids = chart.all_ids();

    // Duplicates and missing ids, reported once per id in document order.
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for id in chart.state_ids() {
        *counts.entry(id).or_default() += 1;
    }
    let mut reported = BTreeSet::new();
    for node in &flat.nodes {
        let id = node.state.id.as_str();
        if id.trim().is_empty() {
            findings.push(Finding::new(
                FindingKind::MissingStateId,
                Severity::Error,
                None,
                "state without an id".into(),
            ));
        } else if counts[id] > 1 && reported.insert(id) {
            findings.push(Finding::new(
                FindingKind::DuplicateStateId,
                Severity::Error,
                Some(id),
                format!("state id `{id}` is declared {} times", counts[id]),
            ));
        }
    }

    match chart.initial.as_deref() {
        None if chart.states.is_empty() => findings.push(Finding::new(
            FindingKind::MissingInitial,
            Severity::Error,
            None,
            "chart declares no states".into(),
        )),
        None => findings.push(Finding::new(
            FindingKind::MissingInitial,
            Severity::Warning,
            None,
            format!("no initial attribute; defaults to first state `{}`", chart.states[0].id),
        )),
        Some(init) if !ids.contains(init) => findings.push(Finding::new(
            FindingKind::MissingInitial,
            Severity::Error,
            Some(init),
            format!("initial state `{init}` does not exist"),
        )),
        Some(_) => {}
    }

    for (idx, node) in flat.nodes.iter().enumerate() {
        let state = node.state;
        if let Some(init) = state.initial.as_deref() {
            let ok = flat.by_id.get(init).is_some_and(|&t| flat.is_descendant(t, idx));
            if !ok {
                findings.push(Finding::new(
                    FindingKind::MissingInitial,
                    Severity::Error,
                    Some(init),
                    format!("initial `{init}` of state `{}` is not one of its descendants", state.id),
                ));
            }
        }
        if state.is_final && !state.transitions.is_empty() {
            findings.push(Finding::new(
                FindingKind::FinalHasTransition,
                Severity::Error,
                Some(&state.id),
                format!(
                    "final state `{}` has {} outgoing transition(s)",
                    state.id,
                    state.transitions.len()
                ),
            ));
        }
        for t in &state.transitions {
            if !ids.contains(t.target.as_str()) {
                findings.push(Finding::new(
                    FindingKind::DanglingTarget,
                    Severity::Error,
                    Some(&t.target),
                    format!("transition in `{}` targets unknown state `{}`", state.id, t.target),
                ));
            }
            if t.event.as_deref().is_some_and(|e| e.trim().is_empty()) {
                findings.push(Finding::new(
                    FindingKind::EmptyEventName,
                    Severity::Error,
                    Some(&state.id),
                    format!("transition in `{}` has an empty event attribute", state.id),
                ));
            }
        }
    }

    if let Some(start) = flat.initial_leaf(chart) {
        let reached = reachable(&flat, start);
        let mut seen = BTreeSet::new();
        for (idx, node) in flat.nodes.iter().enumerate() {
            let id = node.state.id.as_str();
            if !reached[idx] && !id.is_empty() && seen.insert(id) {
                // A duplicated id counts as reached if any copy is.
                if flat
                    .nodes
                    .iter()
                    .enumerate()
                    .any(|(j, n)| n.state.id == id && reached[j])
                {
                    continue;
                }
                findings.push(Finding::new(
                    FindingKind::UnreachableState,
                    Severity::Warning,
                    Some(id),
                    format!("state `{id}` is not reachable from the initial configuration"),
                ));
            }
        }
    }

    ScxmlReport { findings }
}

/// Breadth-first search over atomic configurations; a state is reached when
/// it is active (itself or as an ancestor) in some reachable configuration.
fn reachable(flat: &Flat, start: usize) -> Vec<bool> {
    let mut reached = vec![false; flat.nodes.len()];
    let mut visited = vec![false; flat.nodes.len()];
    let mut queue = VecDeque::from([start]);
    visited[start] = true;
    while let Some(leaf) = queue.pop_front() {
        for i in flat.lineage(leaf) {
            reached[i] = true;
        }
        for t in flat.transitions_from(leaf) {
            let Some(&target) = flat.by_id.get(t.target.as_str()) else {
                continue;
            };
            match flat.enter(target) {
                Some(next) if !visited[next] => {
                    visited[next] = true;
                    queue.push_back(next);
                }
                Some(_) => {}
                // Unresolvable compound initial: the target itself is still
                // entered.
                None => reached[target] = true,
            }
        }
    }
    reached
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scxml::parse_scxml;

    fn kinds(chart: &StateChart) -> Vec<(FindingKind, Option<String>)> {
        validate(chart)
            .findings
            .into_iter()
            .map(|f| (f.kind, f.subject))
            .collect()
    }

    #[test]
    fn minimal_chart_is_clean() {
        let chart = parse_scxml(r#"<scxml initial="a"><state id="a"/></scxml>"#).unwrap();
        assert!(validate(&chart).findings.is_empty());
    }

    #[test]
    fn dangling_target() {
        let chart = StateChart::new(Some("a"), vec![State::atomic("a").on(Some("go"), "zz")]);
        assert_eq!(kinds(&chart), vec![(FindingKind::DanglingTarget, Some("zz".into()))]);
    }

    #[test]
    fn isolated_state_is_unreachable() {
        // a -> b, c isolated; BFS from a visits {a, b}.
        let chart = StateChart::new(
            Some("a"),
            vec![
                State::atomic("a").on(Some("go"), "b"),
                State::atomic("b"),
                State::atomic("c"),
            ],
        );
        assert_eq!(kinds(&chart), vec![(FindingKind::UnreachableState, Some("c".into()))]);
    }

    #[test]
    fn compound_states_reach_through_initial_and_ancestor_transitions() {
        let mut parent = State::atomic("p").on(Some("leave"), "out");
        parent.initial = Some("p2".into());
        parent.children = vec![State::atomic("p1"), State::atomic("p2").on(Some("x"), "p1")];
        let chart = StateChart::new(Some("p"), vec![parent, State::final_state("out")]);
        assert!(kinds(&chart).is_empty(), "{:?}", kinds(&chart));
    }

    #[test]
    fn compound_initial_must_be_descendant() {
        let mut parent = State::atomic("p");
        parent.initial = Some("q".into());
        parent.children = vec![State::atomic("p1")];
        let chart = StateChart::new(Some("p"), vec![parent, State::atomic("q")]);
        let got = kinds(&chart);
        assert!(got.contains(&(FindingKind::MissingInitial, Some("q".into()))));
    }

    #[test]
    fn absent_initial_is_a_warning() {
        let chart = StateChart::new(None, vec![State::atomic("a")]);
        let report = validate(&chart);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].kind, FindingKind::MissingInitial);
        assert!(!report.has_errors());
        assert!(validate(&StateChart::new(None, vec![])).has_errors());
    }

    #[test]
    fn dangling_iff_target_unknown_exhaustive() {
        // Every single-transition mutation of a 3-state chart: targets drawn
        // from known and unknown ids.
        let ids = ["a", "b", "c"];
        for from in 0..3 {
            for target in ["a", "b", "c", "x", ""] {
                let states: Vec<State> = ids
                    .iter()
                    .enumerate()
                    .map(|(i, id)| {
                        let s = State::atomic(*id);
                        if i == from {
                            s.on(Some("e"), target)
                        } else {
                            s
                        }
                    })
                    .collect();
                let chart = StateChart::new(Some("a"), states);
                let dangling = validate(&chart)
                    .findings
                    .iter()
                    .any(|f| f.kind == FindingKind::DanglingTarget);
                assert_eq!(dangling, !ids.contains(&target), "from {from} target {target:?}");
            }
        }
    }
}
