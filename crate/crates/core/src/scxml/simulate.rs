use serde::{Deserialize, Serialize};

use super::validate::Flat;
use super::{validate, Finding, StateChart};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStep {
    pub event: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub steps: Vec<SimStep>,
    /// Active atomic state after the last step.
    pub final_configuration: String,
    pub reached_final: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("chart has validation errors: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidChart(Vec<Finding>),
    #[error("step limit of {limit} reached with {remaining} event(s) left")]
    StepLimitExceeded {
        limit: usize,
        remaining: usize,
        trace: SimTrace,
    },
}

/// True when an SCXML event descriptor list matches `event`: `*` matches
/// everything and `a.b` matches `a.b` and `a.b.c`.
fn descriptor_matches(descriptors: &str, event: &str) -> bool {
    descriptors.split_whitespace().any(|d| {
        if d == "*" {
            return true;
        }
        let d = d.trim_end_matches(".*").trim_end_matches('.');
        event == d || (event.starts_with(d) && event[d.len()..].starts_with('.'))
    })
}

/// Runs `events` against the chart. For each event the first matching
/// transition in document order is taken, looking at the active atomic state
/// first and then its ancestors; unmatched events are dropped. `cond` is
/// always true. Stops on entering a top-level final state.
pub fn simulate(chart: &StateChart, events: &[String], max_steps: usize) -> Result<SimTrace, SimError> {
    let report = validate(chart);
    if report.has_errors() {
        return Err(SimError::InvalidChart(report.errors().cloned().collect()));
    }
    let flat = Flat::new(chart);
    let mut current = flat
        .initial_leaf(chart)
        .expect("validated chart has a resolvable initial state");

    let mut steps = Vec::new();
    let is_top_final = |idx: usize| flat.nodes[idx].state.is_final && flat.nodes[idx].parent.is_none();
    let mut reached_final = is_top_final(current);

    for (i, event) in events.iter().enumerate() {
        if reached_final {
            break;
        }
        if steps.len() >= max_steps {
            return Err(SimError::StepLimitExceeded {
                limit: max_steps,
                remaining: events.len() - i,
                trace: SimTrace {
                    steps,
                    final_configuration: flat.id(current).to_string(),
                    reached_final,
                },
            });
        }
        let taken = flat
            .transitions_from(current)
            .find(|t| t.event.as_deref().is_some_and(|d| descriptor_matches(d, event)));
        let Some(t) = taken else { continue };
        let target = flat.by_id[t.target.as_str()];
        let next = flat.enter(target).expect("validated chart resolves compound initials");
        steps.push(SimStep {
            event: event.clone(),
            from: flat.id(current).to_string(),
            to: flat.id(next).to_string(),
        });
        current = next;
        reached_final = is_top_final(current);
    }

    Ok(SimTrace {
        steps,
        final_configuration: flat.id(current).to_string(),
        reached_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scxml::State;

    fn ev(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn go_chart() -> StateChart {
        StateChart::new(
            Some("a"),
            vec![State::atomic("a").on(Some("go"), "b"), State::final_state("b")],
        )
    }

    #[test]
    fn reaches_final() {
        let trace = simulate(&go_chart(), &ev(&["go"]), 10).unwrap();
        assert_eq!(
            trace.steps,
            vec![SimStep {
                event: "go".into(),
                from: "a".into(),
                to: "b".into()
            }]
        );
        assert!(trace.reached_final);
        assert_eq!(trace.final_configuration, "b");
    }

    #[test]
    fn unmatched_event_dropped() {
        let trace = simulate(&go_chart(), &ev(&["stop"]), 10).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(trace.final_configuration, "a");
        assert!(!trace.reached_final);
    }

    #[test]
    fn three_cycle_four_ticks_ends_in_b() {
        // a -> b -> c -> a -> b
        let chart = StateChart::new(
            Some("a"),
            vec![
                State::atomic("a").on(Some("tick"), "b"),
                State::atomic("b").on(Some("tick"), "c"),
                State::atomic("c").on(Some("tick"), "a"),
            ],
        );
        let trace = simulate(&chart, &ev(&["tick"; 4]), 10).unwrap();
        assert_eq!(trace.final_configuration, "b");
        assert_eq!(trace.steps.len(), 4);
        for w in trace.steps.windows(2) {
            assert_eq!(w[0].to, w[1].from);
        }
    }

    #[test]
    fn step_limit() {
        let chart = StateChart::new(Some("a"), vec![State::atomic("a").on(Some("t"), "a")]);
        match simulate(&chart, &ev(&["t", "t", "t"]), 2) {
            Err(SimError::StepLimitExceeded { remaining, trace, .. }) => {
                assert_eq!(remaining, 1);
                assert_eq!(trace.steps.len(), 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(simulate(&chart, &ev(&["t", "t"]), 2).is_ok());
    }

    #[test]
    fn innermost_first_then_document_order() {
        let mut p = State::atomic("p").on(Some("e"), "out");
        p.children = vec![
            State::atomic("p1").on(Some("e"), "p2").on(Some("e"), "out"),
            State::atomic("p2"),
        ];
        let chart = StateChart::new(Some("p"), vec![p, State::atomic("out")]);
        let trace = simulate(&chart, &ev(&["e", "e"]), 10).unwrap();
        assert_eq!(trace.steps[0].to, "p2");
        // p2 has no own transition, so the parent's fires.
        assert_eq!(trace.steps[1].from, "p2");
        assert_eq!(trace.steps[1].to, "out");
    }

    #[test]
    fn descriptors() {
        assert!(descriptor_matches("error", "error.send"));
        assert!(descriptor_matches("error.*", "error.send"));
        assert!(!descriptor_matches("err", "error"));
        assert!(descriptor_matches("a b", "b"));
        assert!(descriptor_matches("*", "anything"));
    }

    #[test]
    fn invalid_chart_refused() {
        let chart = StateChart::new(Some("a"), vec![State::atomic("a").on(Some("go"), "zz")]);
        assert!(matches!(simulate(&chart, &[], 1), Err(SimError::InvalidChart(_))));
    }
}
