//! A small Python front end: tokenizer, parser to a generic syntax tree, and
//! the def-use extraction used by the code metrics.

mod dataflow;
mod lexer;
mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use dataflow::{dataflow_items, DataflowItem, Relation};
pub use lexer::{is_keyword, tokenize, Token, TokenKind, KEYWORDS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for SyntaxError {}

/// A node of the syntax tree. Leaves carry their source text; interior nodes
/// carry children only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxNode {
    pub kind: &'static str,
    pub text: Option<String>,
    pub children: Vec<SyntaxNode>,
    pub line: u32,
    pub column: u32,
}

impl SyntaxNode {
    pub(crate) fn leaf(kind: &'static str, tok: &Token) -> Self {
        Self::leaf_text(kind, tok, tok.text.clone())
    }

    pub(crate) fn leaf_text(kind: &'static str, tok: &Token, text: String) -> Self {
        SyntaxNode {
            kind,
            text: Some(text),
            children: Vec::new(),
            line: tok.line,
            column: tok.column,
        }
    }

    pub(crate) fn node(kind: &'static str, start: &Token, children: Vec<SyntaxNode>) -> Self {
        SyntaxNode {
            kind,
            text: None,
            children,
            line: start.line,
            column: start.column,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.text.is_some()
    }

    /// Pre-order traversal.
    pub fn walk(&self) -> Vec<&SyntaxNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// S-expression rendering, mainly for tests and debugging.
    pub fn to_sexp(&self) -> String {
        match &self.text {
            Some(t) => format!("{}:{t}", self.kind),
            None => {
                let inner: Vec<String> = self.children.iter().map(|c| c.to_sexp()).collect();
                if inner.is_empty() {
                    format!("({})", self.kind)
                } else {
                    format!("({} {})", self.kind, inner.join(" "))
                }
            }
        }
    }
}

pub fn parse_module(src: &str) -> Result<SyntaxNode, SyntaxError> {
    let tokens = tokenize(src)?;
    parser::Parser::new(tokens).module()
}

/// Lexical tokens of `src` without layout tokens.
pub fn code_tokens(src: &str) -> Result<Vec<String>, SyntaxError> {
    Ok(tokenize(src)?
        .into_iter()
        .filter(Token::is_lexical)
        .map(|t| t.text)
        .collect())
}

/// Like [`code_tokens`], but falls back to a whitespace split when the text
/// does not tokenize.
pub fn code_tokens_lossy(src: &str) -> Vec<String> {
    code_tokens(src).unwrap_or_else(|_| src.split_whitespace().map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sexp(src: &str) -> String {
        parse_module(src).unwrap().to_sexp()
    }

    #[test]
    fn assignment_and_binary() {
        assert_eq!(
            sexp("y = x + 1\n"),
            "(module (assignment identifier:y (binary_operator identifier:x operator:+ integer:1)))"
        );
    }

    #[test]
    fn precedence() {
        assert_eq!(
            sexp("a + b * c ** -d\n"),
            "(module (expression_statement (binary_operator identifier:a operator:+ \
             (binary_operator identifier:b operator:* (binary_operator identifier:c operator:** \
             (unary_operator operator:- identifier:d))))))"
        );
        assert_eq!(
            sexp("not a or b and c\n"),
            "(module (expression_statement (boolean_operator (not_operator identifier:a) operator:or \
             (boolean_operator identifier:b operator:and identifier:c))))"
        );
    }

    #[test]
    fn compound_statements() {
        let src = "\
class Light:
    def __init__(self, state='off'):
        self.state = state

    @property
    def on(self) -> bool:
        return self.state == 'on'

for i, x in enumerate(xs):
    if x > 0:
        pass
    elif x is not None:
        continue
    else:
        break
while True:
    try:
        f(*a, **k, key=1)
    except ValueError as e:
        raise RuntimeError() from e
    finally:
        done = [v for v in range(3) if v]
with open(p) as fh, lock:
    data = {k: v for k, v in fh}
";
        let tree = parse_module(src).unwrap();
        let kinds: Vec<&str> = tree.walk().iter().map(|n| n.kind).collect();
        for k in [
            "class_definition",
            "function_definition",
            "decorated_definition",
            "default_parameter",
            "for_statement",
            "pattern_list",
            "elif_clause",
            "else_clause",
            "comparison_operator",
            "try_statement",
            "except_clause",
            "as_target",
            "finally_clause",
            "list_comprehension",
            "with_statement",
            "dictionary_comprehension",
            "keyword_argument",
            "dictionary_splat",
            "list_splat",
        ] {
            assert!(kinds.contains(&k), "missing {k}");
        }
    }

    #[test]
    fn misc_expressions() {
        for src in [
            "x = a if b else c\n",
            "f = lambda a, *b, c=1, **d: a\n",
            "s = x[1:2], x[::3], x[a, b:]\n",
            "import os.path as p, sys\n",
            "from . import a\nfrom ..m import (b as c, d,)\n",
            "t = (), (1,), (yield)\n",
            "if (n := len(a)) > 10: pass\n",
            "x: int = 5\n",
            "def f(a: int, b: str = '') -> None: pass\n",
            "x += 1; y -= 2\n",
            "async def f():\n    await g()\n",
            "assert x, 'msg'\ndel a[0], b\nglobal q\n",
            "print(*args, sep='')\n",
            "v = {1, 2}; w = {**a, 'k': 1}\n",
            "s = 'a' 'b'\n",
            "g = sum(x for x in y)\n",
        ] {
            parse_module(src).unwrap_or_else(|e| panic!("{src:?}: {e}"));
        }
    }

    #[test]
    fn syntax_errors_have_positions() {
        for (src, line) in [
            ("def f(:\n    pass\n", 1),
            ("x = 1\n  y = 2\n", 2),
            ("if x\n    y\n", 1),
            ("1 = x\n", 1),
            ("x = (1,\n", 1),
            ("for in x:\n    pass\n", 1),
            ("try:\n    a\nb = 1\n", 3),
        ] {
            let err = parse_module(src).unwrap_err();
            assert_eq!(err.line, line, "{src:?}: {err}");
        }
    }

    #[test]
    fn tokens_exclude_layout() {
        assert_eq!(
            code_tokens("if a:\n    b = 1\n").unwrap(),
            vec!["if", "a", ":", "b", "=", "1"]
        );
        assert_eq!(code_tokens_lossy("x = 'open"), vec!["x", "=", "'open"]);
    }
}
