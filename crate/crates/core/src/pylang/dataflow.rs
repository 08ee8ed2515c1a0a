//! Def-use items in the style of CodeBLEU's data-flow match.
//!
//! Each item says a variable occurrence either *comes from* an earlier
//! definition of itself or is *computed from* a list of names. Variable names
//! are normalized to `var_0`, `var_1`, ... in order of first appearance so
//! that consistent renaming does not change the item set.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::SyntaxNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    ComesFrom,
    ComputedFrom,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DataflowItem {
    pub var: String,
    pub relation: Relation,
    pub sources: Vec<String>,
}

struct RawItem {
    pos: (u32, u32),
    var: String,
    relation: Relation,
    sources: Vec<String>,
}

#[derive(Default)]
struct Extractor {
    scopes: Vec<HashSet<String>>,
    items: Vec<RawItem>,
}

pub fn dataflow_items(module: &SyntaxNode) -> Vec<DataflowItem> {
    let mut ex = Extractor {
        scopes: vec![HashSet::new()],
        items: Vec::new(),
    };
    ex.statements(&module.children);
    let mut raw = ex.items;
    raw.sort_by_key(|i| i.pos);

    let mut names: HashMap<String, String> = HashMap::new();
    let mut norm = |n: &str| -> String {
        let next = names.len();
        names
            .entry(n.to_string())
            .or_insert_with(|| format!("var_{next}"))
            .clone()
    };
    raw.into_iter()
        .map(|r| DataflowItem {
            var: norm(&r.var),
            relation: r.relation,
            sources: r.sources.iter().map(|s| norm(s)).collect(),
        })
        .collect()
}

fn unique(names: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    names.into_iter().filter(|n| seen.insert(n.clone())).collect()
}

impl Extractor {
    fn is_defined(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }

    fn define(&mut self, name: &str) {
        self.scopes
            .last_mut()
            .expect("scope stack never empty")
            .insert(name.to_string());
    }

    fn statements(&mut self, nodes: &[SyntaxNode]) {
        for n in nodes {
            self.statement(n);
        }
    }

    fn with_scope(&mut self, f: impl FnOnce(&mut Self)) {
        self.scopes.push(HashSet::new());
        f(self);
        self.scopes.pop();
    }

    /// Binds every name in `target` as computed from `sources`.
    fn bind(&mut self, target: &SyntaxNode, sources: &[String]) {
        let mut defs = Vec::new();
        self.target_names(target, &mut defs);
        for (name, pos) in defs {
            if !sources.is_empty() {
                self.items.push(RawItem {
                    pos,
                    var: name.clone(),
                    relation: Relation::ComputedFrom,
                    sources: sources.to_vec(),
                });
            }
            self.define(&name);
        }
    }

    /// Collects names bound by a target; object expressions of attribute and
    /// subscript targets are uses, not bindings.
    fn target_names(&mut self, target: &SyntaxNode, out: &mut Vec<(String, (u32, u32))>) {
        match target.kind {
            "identifier" => out.push((target.text.clone().unwrap_or_default(), (target.line, target.column))),
            "attribute" | "subscript" => {
                self.expr(target);
            }
            _ => {
                for c in &target.children {
                    self.target_names(c, out);
                }
            }
        }
    }

    fn statement(&mut self, n: &SyntaxNode) {
        match n.kind {
            "assignment" => {
                let (targets, value) = n.children.split_at(n.children.len() - 1);
                let loads = self.expr(&value[0]);
                let loads = unique(loads);
                for t in targets {
                    self.bind(t, &loads);
                }
            }
            "augmented_assignment" => {
                let target = &n.children[0];
                let mut loads = self.expr(target);
                loads.extend(self.expr(&n.children[2]));
                let loads = unique(loads);
                self.bind(target, &loads);
            }
            "annotated_assignment" => {
                if let Some(value) = n.children.get(2) {
                    let loads = unique(self.expr(value));
                    self.bind(&n.children[0], &loads);
                } else {
                    let mut defs = Vec::new();
                    self.target_names(&n.children[0], &mut defs);
                    for (name, _) in defs {
                        self.define(&name);
                    }
                }
            }
            "for_statement" => {
                let loads = unique(self.expr(&n.children[1]));
                self.bind(&n.children[0], &loads);
                self.statements(&n.children[2..]);
            }
            "with_statement" => {
                for item in &n.children {
                    if item.kind == "with_item" {
                        let loads = unique(self.expr(&item.children[0]));
                        if let Some(target) = item.children.get(1) {
                            self.bind(&target.children[0], &loads);
                        }
                    } else {
                        self.statement(item);
                    }
                }
            }
            "function_definition" => {
                let name = &n.children[0];
                self.define(name.text.as_deref().unwrap_or_default());
                let params = &n.children[1];
                for p in &params.children {
                    for c in p.children.iter().skip(1) {
                        self.expr(c);
                    }
                }
                self.with_scope(|ex| {
                    ex.define_params(params);
                    ex.statements(&n.children[2..]);
                });
            }
            "class_definition" => {
                let name = &n.children[0];
                self.define(name.text.as_deref().unwrap_or_default());
                for c in &n.children[1..n.children.len() - 1] {
                    self.expr(c);
                }
                let body = n.children.last().expect("class has a body");
                self.with_scope(|ex| ex.statement(body));
            }
            "decorated_definition" => {
                for c in &n.children {
                    if c.kind == "decorator" {
                        self.expr(&c.children[0]);
                    } else {
                        self.statement(c);
                    }
                }
            }
            "import_statement" | "import_from_statement" => {
                let items = if n.kind == "import_from_statement" {
                    &n.children[1..]
                } else {
                    &n.children[..]
                };
                for item in items {
                    let bound = match item.kind {
                        "aliased_import" => item.children[1].children.first(),
                        "dotted_name" => item.children.first(),
                        _ => None,
                    };
                    if let Some(b) = bound.and_then(|b| b.text.as_deref()) {
                        self.define(b);
                    }
                }
            }
            "except_clause" => {
                for c in &n.children {
                    match c.kind {
                        "as_target" => {
                            if let Some(name) = c.children[0].text.as_deref() {
                                self.define(name);
                            }
                        }
                        "block" => self.statement(c),
                        _ => {
                            self.expr(c);
                        }
                    }
                }
            }
            "global_statement" | "nonlocal_statement" | "pass_statement" | "break_statement" | "continue_statement" => {
            }
            "block" | "module" | "if_statement" | "elif_clause" | "else_clause" | "while_statement"
            | "try_statement" | "finally_clause" => {
                for c in &n.children {
                    if is_statement_like(c.kind) {
                        self.statement(c);
                    } else {
                        self.expr(c);
                    }
                }
            }
            _ => {
                self.expr(n);
            }
        }
    }

    fn define_params(&mut self, params: &SyntaxNode) {
        for p in &params.children {
            let name = match p.kind {
                "identifier" => p.text.as_deref(),
                "typed_parameter"
                | "default_parameter"
                | "typed_default_parameter"
                | "list_splat_pattern"
                | "dictionary_splat_pattern" => p.children[0].text.as_deref(),
                _ => None,
            };
            if let Some(name) = name {
                self.define(name);
            }
        }
    }

    /// Visits an expression, recording uses; returns every identifier read,
    /// in source order.
    fn expr(&mut self, n: &SyntaxNode) -> Vec<String> {
        let mut loads = Vec::new();
        self.expr_into(n, &mut loads);
        loads
    }

    fn expr_into(&mut self, n: &SyntaxNode, loads: &mut Vec<String>) {
        match n.kind {
            "identifier" => {
                let name = n.text.clone().unwrap_or_default();
                if self.is_defined(&name) {
                    self.items.push(RawItem {
                        pos: (n.line, n.column),
                        var: name.clone(),
                        relation: Relation::ComesFrom,
                        sources: vec![name.clone()],
                    });
                }
                loads.push(name);
            }
            "keyword_argument" => self.expr_into(&n.children[1], loads),
            "attribute" => self.expr_into(&n.children[0], loads),
            "named_expression" => {
                let value = self.expr(&n.children[1]);
                loads.extend(value.iter().cloned());
                let sources = unique(value);
                self.bind(&n.children[0].children[0], &sources);
            }
            "lambda" => {
                let (params, body) = match n.children.as_slice() {
                    [p, b] => (Some(p), b),
                    [b] => (None, b),
                    _ => return,
                };
                if let Some(p) = params {
                    for c in &p.children {
                        for d in c.children.iter().skip(1) {
                            self.expr_into(d, loads);
                        }
                    }
                }
                self.with_scope(|ex| {
                    if let Some(p) = params {
                        ex.define_params(p);
                    }
                    ex.expr_into(body, loads);
                });
            }
            "list_comprehension" | "set_comprehension" | "dictionary_comprehension" | "generator_expression" => {
                self.with_scope(|ex| {
                    for clause in &n.children[1..] {
                        match clause.kind {
                            "for_in_clause" => {
                                let it = ex.expr(&clause.children[1]);
                                loads.extend(it.iter().cloned());
                                let sources = unique(it);
                                ex.bind(&clause.children[0], &sources);
                            }
                            _ => ex.expr_into(&clause.children[0], loads),
                        }
                    }
                    ex.expr_into(&n.children[0], loads);
                });
            }
            _ => {
                for c in &n.children {
                    self.expr_into(c, loads);
                }
            }
        }
    }
}

fn is_statement_like(kind: &str) -> bool {
    kind.ends_with("_statement")
        || kind.ends_with("_clause")
        || matches!(
            kind,
            "block"
                | "assignment"
                | "augmented_assignment"
                | "annotated_assignment"
                | "function_definition"
                | "class_definition"
                | "decorated_definition"
        )
}
