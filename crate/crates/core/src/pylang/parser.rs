//! Recursive-descent parser for a practical Python 3 subset, producing a
//! generic syntax tree with tree-sitter style node kinds.

use super::lexer::{Token, TokenKind};
use super::{SyntaxError, SyntaxNode};

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

const AUG_OPS: [&str; 13] = [
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@=",
];

const COMPOUND_KWS: [&str; 8] = ["if", "while", "for", "try", "with", "def", "class", "async"];

impl Parser {
    pub fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn tok(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn nth(&self, k: usize) -> &Token {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let t = self.tok().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_op(&self, op: &str) -> bool {
        self.tok().is_op(op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.tok().is_kw(kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = self.tok();
        let found = match t.kind {
            TokenKind::Newline => "newline".to_string(),
            TokenKind::Indent => "indent".to_string(),
            TokenKind::Dedent => "dedent".to_string(),
            TokenKind::EndMarker => "end of input".to_string(),
            _ => format!("'{}'", t.text),
        };
        Err(SyntaxError {
            line: t.line,
            column: t.column,
            message: format!("{}, found {found}", message.into()),
        })
    }

    fn expect_op(&mut self, op: &str) -> PResult<Token> {
        if self.at_op(op) {
            Ok(self.advance())
        } else {
            self.error(format!("expected '{op}'"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Token> {
        if self.at_kw(kw) {
            Ok(self.advance())
        } else {
            self.error(format!("expected '{kw}'"))
        }
    }

    fn expect_kind(&mut self, kind: TokenKind, what: &str) -> PResult<Token> {
        if self.tok().kind == kind {
            Ok(self.advance())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn name(&mut self, kind: &'static str) -> PResult<SyntaxNode> {
        let t = self.expect_kind(TokenKind::Name, "identifier")?;
        Ok(SyntaxNode::leaf(kind, &t))
    }

    fn op_leaf(t: &Token) -> SyntaxNode {
        SyntaxNode::leaf("operator", t)
    }

    // ---- statements ------------------------------------------------------

    pub fn module(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let mut body = Vec::new();
        loop {
            match self.tok().kind {
                TokenKind::EndMarker => break,
                TokenKind::Newline => {
                    self.advance();
                }
                TokenKind::Indent => return self.error("unexpected indent"),
                _ => body.extend(self.statement()?),
            }
        }
        Ok(SyntaxNode::node("module", &start, body))
    }

    fn statement(&mut self) -> PResult<Vec<SyntaxNode>> {
        let t = self.tok();
        if t.kind == TokenKind::Keyword && COMPOUND_KWS.contains(&t.text.as_str()) {
            if t.text == "async" && !(self.nth(1).is_kw("def") || self.nth(1).is_kw("for") || self.nth(1).is_kw("with"))
            {
                return self.error("expected 'def', 'for' or 'with' after 'async'");
            }
            return Ok(vec![self.compound()?]);
        }
        if self.at_op("@") {
            return Ok(vec![self.decorated()?]);
        }
        self.simple_statements()
    }

    fn simple_statements(&mut self) -> PResult<Vec<SyntaxNode>> {
        let mut out = vec![self.small_statement()?];
        while self.eat_op(";") {
            if self.tok().kind == TokenKind::Newline {
                break;
            }
            out.push(self.small_statement()?);
        }
        if self.tok().kind == TokenKind::EndMarker {
            return Ok(out);
        }
        self.expect_kind(TokenKind::Newline, "end of statement")?;
        Ok(out)
    }

    fn small_statement(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        if start.kind == TokenKind::Keyword {
            match start.text.as_str() {
                "pass" => {
                    self.advance();
                    return Ok(SyntaxNode::node("pass_statement", &start, vec![]));
                }
                "break" => {
                    self.advance();
                    return Ok(SyntaxNode::node("break_statement", &start, vec![]));
                }
                "continue" => {
                    self.advance();
                    return Ok(SyntaxNode::node("continue_statement", &start, vec![]));
                }
                "return" => {
                    self.advance();
                    let mut children = Vec::new();
                    if !self.at_statement_end() {
                        children.push(self.star_expressions()?);
                    }
                    return Ok(SyntaxNode::node("return_statement", &start, children));
                }
                "raise" => {
                    self.advance();
                    let mut children = Vec::new();
                    if !self.at_statement_end() {
                        children.push(self.expression()?);
                        if self.eat_kw("from") {
                            children.push(self.expression()?);
                        }
                    }
                    return Ok(SyntaxNode::node("raise_statement", &start, children));
                }
                "global" | "nonlocal" => {
                    self.advance();
                    let mut names = vec![self.name("identifier")?];
                    while self.eat_op(",") {
                        names.push(self.name("identifier")?);
                    }
                    let kind = if start.text == "global" {
                        "global_statement"
                    } else {
                        "nonlocal_statement"
                    };
                    return Ok(SyntaxNode::node(kind, &start, names));
                }
                "del" => {
                    self.advance();
                    let targets = self.target_list()?;
                    return Ok(SyntaxNode::node("delete_statement", &start, vec![targets]));
                }
                "assert" => {
                    self.advance();
                    let mut children = vec![self.expression()?];
                    if self.eat_op(",") {
                        children.push(self.expression()?);
                    }
                    return Ok(SyntaxNode::node("assert_statement", &start, children));
                }
                "import" => return self.import_statement(),
                "from" => return self.import_from(),
                _ => {}
            }
        }
        self.expression_statement()
    }

    fn at_statement_end(&self) -> bool {
        matches!(self.tok().kind, TokenKind::Newline | TokenKind::EndMarker) || self.at_op(";")
    }

    fn dotted_name(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let mut parts = vec![self.name("identifier")?];
        while self.eat_op(".") {
            parts.push(self.name("identifier")?);
        }
        Ok(SyntaxNode::node("dotted_name", &start, parts))
    }

    fn import_statement(&mut self) -> PResult<SyntaxNode> {
        let start = self.expect_kw("import")?;
        let mut names = Vec::new();
        loop {
            let item_start = self.tok().clone();
            let dotted = self.dotted_name()?;
            if self.eat_kw("as") {
                let alias = self.name("identifier")?;
                names.push(SyntaxNode::node(
                    "aliased_import",
                    &item_start,
                    vec![dotted, SyntaxNode::node("as_target", &item_start, vec![alias])],
                ));
            } else {
                names.push(dotted);
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(SyntaxNode::node("import_statement", &start, names))
    }

    fn import_from(&mut self) -> PResult<SyntaxNode> {
        let start = self.expect_kw("from")?;
        let module_start = self.tok().clone();
        let mut dots = String::new();
        while self.at_op(".") || self.at_op("...") {
            dots.push_str(&self.advance().text);
        }
        let module = if dots.is_empty() {
            self.dotted_name()?
        } else {
            let mut children = vec![SyntaxNode::leaf_text("import_prefix", &module_start, dots)];
            if self.tok().kind == TokenKind::Name {
                children.push(self.dotted_name()?);
            }
            SyntaxNode::node("relative_import", &module_start, children)
        };
        self.expect_kw("import")?;
        let mut children = vec![module];
        if self.at_op("*") {
            let t = self.advance();
            children.push(SyntaxNode::leaf("wildcard_import", &t));
            return Ok(SyntaxNode::node("import_from_statement", &start, children));
        }
        let parens = self.eat_op("(");
        loop {
            let item_start = self.tok().clone();
            let name = self.name("identifier")?;
            if self.eat_kw("as") {
                let alias = self.name("identifier")?;
                children.push(SyntaxNode::node(
                    "aliased_import",
                    &item_start,
                    vec![
                        SyntaxNode::node("dotted_name", &item_start, vec![name]),
                        SyntaxNode::node("as_target", &item_start, vec![alias]),
                    ],
                ));
            } else {
                children.push(SyntaxNode::node("dotted_name", &item_start, vec![name]));
            }
            if !self.eat_op(",") {
                break;
            }
            if parens && self.at_op(")") {
                break;
            }
        }
        if parens {
            self.expect_op(")")?;
        }
        Ok(SyntaxNode::node("import_from_statement", &start, children))
    }

    fn expression_statement(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let first = self.star_expressions_or_yield()?;

        if self.at_op("=") {
            let mut parts = vec![first];
            while self.eat_op("=") {
                parts.push(self.star_expressions_or_yield()?);
            }
            for target in &parts[..parts.len() - 1] {
                check_target(target)?;
            }
            return Ok(SyntaxNode::node("assignment", &start, parts));
        }
        if AUG_OPS.iter().any(|op| self.at_op(op)) {
            check_target(&first)?;
            let op = self.advance();
            let value = self.star_expressions_or_yield()?;
            return Ok(SyntaxNode::node(
                "augmented_assignment",
                &start,
                vec![first, Self::op_leaf(&op), value],
            ));
        }
        if self.at_op(":") {
            check_target(&first)?;
            let colon = self.advance();
            let ty = self.expression()?;
            let mut children = vec![first, SyntaxNode::node("type", &colon, vec![ty])];
            if self.eat_op("=") {
                children.push(self.star_expressions_or_yield()?);
            }
            return Ok(SyntaxNode::node("annotated_assignment", &start, children));
        }
        Ok(SyntaxNode::node("expression_statement", &start, vec![first]))
    }

    fn block(&mut self) -> PResult<SyntaxNode> {
        let colon = self.expect_op(":")?;
        if self.tok().kind != TokenKind::Newline {
            let body = self.simple_statements()?;
            return Ok(SyntaxNode::node("block", &colon, body));
        }
        self.advance();
        self.expect_kind(TokenKind::Indent, "an indented block")?;
        let mut body = Vec::new();
        while !matches!(self.tok().kind, TokenKind::Dedent | TokenKind::EndMarker) {
            if self.tok().kind == TokenKind::Newline {
                self.advance();
                continue;
            }
            body.extend(self.statement()?);
        }
        if self.tok().kind == TokenKind::Dedent {
            self.advance();
        }
        Ok(SyntaxNode::node("block", &colon, body))
    }

    fn compound(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        if self.eat_kw("async") {
            // `async` forms share the shape of their synchronous versions.
            return self.compound();
        }
        match start.text.as_str() {
            "if" => {
                self.advance();
                let cond = self.named_expression()?;
                let body = self.block()?;
                let mut children = vec![cond, body];
                while self.at_kw("elif") {
                    let t = self.advance();
                    let c = self.named_expression()?;
                    let b = self.block()?;
                    children.push(SyntaxNode::node("elif_clause", &t, vec![c, b]));
                }
                if let Some(e) = self.else_clause()? {
                    children.push(e);
                }
                Ok(SyntaxNode::node("if_statement", &start, children))
            }
            "while" => {
                self.advance();
                let cond = self.named_expression()?;
                let body = self.block()?;
                let mut children = vec![cond, body];
                if let Some(e) = self.else_clause()? {
                    children.push(e);
                }
                Ok(SyntaxNode::node("while_statement", &start, children))
            }
            "for" => {
                self.advance();
                let target = self.target_list()?;
                self.expect_kw("in")?;
                let iter = self.star_expressions()?;
                let body = self.block()?;
                let mut children = vec![target, iter, body];
                if let Some(e) = self.else_clause()? {
                    children.push(e);
                }
                Ok(SyntaxNode::node("for_statement", &start, children))
            }
            "try" => {
                self.advance();
                let mut children = vec![self.block()?];
                while self.at_kw("except") {
                    let t = self.advance();
                    let mut clause = Vec::new();
                    self.eat_op("*");
                    if !self.at_op(":") {
                        let ty = self.expression()?;
                        if self.eat_kw("as") {
                            let name = self.name("identifier")?;
                            clause.push(ty);
                            clause.push(SyntaxNode::node("as_target", &t, vec![name]));
                        } else if self.eat_op(",") {
                            // Python 2 form; accepted as a tuple of types.
                            let second = self.expression()?;
                            clause.push(SyntaxNode::node("tuple", &t, vec![ty, second]));
                        } else {
                            clause.push(ty);
                        }
                    }
                    clause.push(self.block()?);
                    children.push(SyntaxNode::node("except_clause", &t, clause));
                }
                if let Some(e) = self.else_clause()? {
                    children.push(e);
                }
                if self.at_kw("finally") {
                    let t = self.advance();
                    let b = self.block()?;
                    children.push(SyntaxNode::node("finally_clause", &t, vec![b]));
                }
                if children.len() == 1 {
                    return self.error("expected 'except' or 'finally'");
                }
                Ok(SyntaxNode::node("try_statement", &start, children))
            }
            "with" => {
                self.advance();
                let mut children = Vec::new();
                loop {
                    let item_start = self.tok().clone();
                    let ctx = self.expression()?;
                    let mut item = vec![ctx];
                    if self.eat_kw("as") {
                        let target = self.target()?;
                        item.push(SyntaxNode::node("as_target", &item_start, vec![target]));
                    }
                    children.push(SyntaxNode::node("with_item", &item_start, item));
                    if !self.eat_op(",") {
                        break;
                    }
                }
                children.push(self.block()?);
                Ok(SyntaxNode::node("with_statement", &start, children))
            }
            "def" => self.function_definition(),
            "class" => {
                self.advance();
                let name = self.name("identifier")?;
                let mut children = vec![name];
                if self.at_op("(") {
                    children.push(self.argument_list()?);
                }
                children.push(self.block()?);
                Ok(SyntaxNode::node("class_definition", &start, children))
            }
            _ => self.error("expected a compound statement"),
        }
    }

    fn else_clause(&mut self) -> PResult<Option<SyntaxNode>> {
        if self.at_kw("else") {
            let t = self.advance();
            let b = self.block()?;
            Ok(Some(SyntaxNode::node("else_clause", &t, vec![b])))
        } else {
            Ok(None)
        }
    }

    fn decorated(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let mut children = Vec::new();
        while self.at_op("@") {
            let t = self.advance();
            let e = self.named_expression()?;
            self.expect_kind(TokenKind::Newline, "newline after decorator")?;
            children.push(SyntaxNode::node("decorator", &t, vec![e]));
        }
        self.eat_kw("async");
        if self.at_kw("def") {
            children.push(self.function_definition()?);
        } else if self.at_kw("class") {
            children.push(self.compound()?);
        } else {
            return self.error("expected 'def' or 'class' after decorator");
        }
        Ok(SyntaxNode::node("decorated_definition", &start, children))
    }

    fn function_definition(&mut self) -> PResult<SyntaxNode> {
        let start = self.expect_kw("def")?;
        let name = self.name("identifier")?;
        let params = self.parameters("(", ")", true)?;
        let mut children = vec![name, params];
        if self.at_op("->") {
            let t = self.advance();
            let ty = self.expression()?;
            children.push(SyntaxNode::node("type", &t, vec![ty]));
        }
        children.push(self.block()?);
        Ok(SyntaxNode::node("function_definition", &start, children))
    }

    /// Parameter list for `def` (parenthesized, annotations allowed) and
    /// `lambda` (closed by ':', no annotations).
    fn parameters(&mut self, open: &str, close: &str, annotations: bool) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        if !open.is_empty() {
            self.expect_op(open)?;
        }
        let kind = if annotations { "parameters" } else { "lambda_parameters" };
        let mut params = Vec::new();
        while !self.at_op(close) {
            let pstart = self.tok().clone();
            let param = if self.at_op("/") {
                SyntaxNode::leaf("positional_separator", &self.advance())
            } else if self.at_op("*") || self.at_op("**") {
                let star = self.advance();
                if star.text == "*" && (self.at_op(",") || self.at_op(close)) {
                    SyntaxNode::leaf("keyword_separator", &star)
                } else {
                    let name = self.name("identifier")?;
                    let mut inner = vec![name];
                    if annotations && self.at_op(":") {
                        let t = self.advance();
                        let ty = self.expression()?;
                        inner.push(SyntaxNode::node("type", &t, vec![ty]));
                    }
                    let k = if star.text == "*" {
                        "list_splat_pattern"
                    } else {
                        "dictionary_splat_pattern"
                    };
                    SyntaxNode::node(k, &star, inner)
                }
            } else {
                let name = self.name("identifier")?;
                let mut ty = None;
                if annotations && self.at_op(":") {
                    let t = self.advance();
                    let e = self.expression()?;
                    ty = Some(SyntaxNode::node("type", &t, vec![e]));
                }
                let default = if self.eat_op("=") {
                    Some(self.expression()?)
                } else {
                    None
                };
                match (ty, default) {
                    (None, None) => name,
                    (Some(t), None) => SyntaxNode::node("typed_parameter", &pstart, vec![name, t]),
                    (None, Some(d)) => SyntaxNode::node("default_parameter", &pstart, vec![name, d]),
                    (Some(t), Some(d)) => SyntaxNode::node("typed_default_parameter", &pstart, vec![name, t, d]),
                }
            };
            params.push(param);
            if !self.eat_op(",") {
                break;
            }
        }
        if annotations {
            self.expect_op(close)?;
        }
        Ok(SyntaxNode::node(kind, &start, params))
    }

    // ---- targets ---------------------------------------------------------

    /// Assignment-style target without consuming `in`.
    fn target(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        if self.eat_op("*") {
            let inner = self.target()?;
            return Ok(SyntaxNode::node("list_splat_pattern", &start, vec![inner]));
        }
        let t = self.bitwise_or()?;
        check_target(&t)?;
        Ok(t)
    }

    fn target_list(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let first = self.target()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_kw("in") || self.at_op("=") || self.at_statement_end() {
                break;
            }
            items.push(self.target()?);
        }
        Ok(SyntaxNode::node("pattern_list", &start, items))
    }

    // ---- expressions -----------------------------------------------------

    fn star_expressions_or_yield(&mut self) -> PResult<SyntaxNode> {
        if self.at_kw("yield") {
            self.yield_expression()
        } else {
            self.star_expressions()
        }
    }

    fn yield_expression(&mut self) -> PResult<SyntaxNode> {
        let start = self.expect_kw("yield")?;
        let mut children = Vec::new();
        if self.eat_kw("from") {
            children.push(self.expression()?);
        } else if !self.at_statement_end() && !self.at_op(")") && !self.at_op("=") {
            children.push(self.star_expressions()?);
        }
        Ok(SyntaxNode::node("yield", &start, children))
    }

    /// Comma-separated expressions; a bare tuple becomes `expression_list`.
    fn star_expressions(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let first = self.star_expression()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expression_end() {
                break;
            }
            items.push(self.star_expression()?);
        }
        Ok(SyntaxNode::node("expression_list", &start, items))
    }

    fn at_expression_end(&self) -> bool {
        self.at_statement_end()
            || [")", "]", "}", "=", ":"].iter().any(|op| self.at_op(op))
            || AUG_OPS.iter().any(|op| self.at_op(op))
            || self.at_kw("in")
    }

    fn star_expression(&mut self) -> PResult<SyntaxNode> {
        if self.at_op("*") {
            let t = self.advance();
            let e = self.bitwise_or()?;
            return Ok(SyntaxNode::node("list_splat", &t, vec![e]));
        }
        self.named_expression()
    }

    fn named_expression(&mut self) -> PResult<SyntaxNode> {
        if self.tok().kind == TokenKind::Name && self.nth(1).is_op(":=") {
            let start = self.tok().clone();
            let name = self.name("identifier")?;
            self.advance();
            let value = self.expression()?;
            return Ok(SyntaxNode::node(
                "named_expression",
                &start,
                vec![SyntaxNode::node("as_target", &start, vec![name]), value],
            ));
        }
        self.expression()
    }

    fn expression(&mut self) -> PResult<SyntaxNode> {
        if self.at_kw("lambda") {
            return self.lambda();
        }
        let start = self.tok().clone();
        let body = self.disjunction()?;
        if self.at_kw("if") && !self.nth(1).is_op(":") {
            self.advance();
            let cond = self.disjunction()?;
            self.expect_kw("else")?;
            let orelse = self.expression()?;
            return Ok(SyntaxNode::node(
                "conditional_expression",
                &start,
                vec![body, cond, orelse],
            ));
        }
        Ok(body)
    }

    fn lambda(&mut self) -> PResult<SyntaxNode> {
        let start = self.expect_kw("lambda")?;
        let mut children = Vec::new();
        if !self.at_op(":") {
            children.push(self.parameters("", ":", false)?);
        }
        self.expect_op(":")?;
        children.push(self.expression()?);
        Ok(SyntaxNode::node("lambda", &start, children))
    }

    fn disjunction(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let mut left = self.conjunction()?;
        while self.at_kw("or") {
            let op = self.advance();
            let right = self.conjunction()?;
            left = SyntaxNode::node("boolean_operator", &start, vec![left, Self::op_leaf(&op), right]);
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let mut left = self.inversion()?;
        while self.at_kw("and") {
            let op = self.advance();
            let right = self.inversion()?;
            left = SyntaxNode::node("boolean_operator", &start, vec![left, Self::op_leaf(&op), right]);
        }
        Ok(left)
    }

    fn inversion(&mut self) -> PResult<SyntaxNode> {
        if self.at_kw("not") {
            let t = self.advance();
            let e = self.inversion()?;
            return Ok(SyntaxNode::node("not_operator", &t, vec![e]));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let first = self.bitwise_or()?;
        let mut children = vec![first];
        loop {
            let t = self.tok().clone();
            let op = if ["<", ">", "==", ">=", "<=", "!="].iter().any(|o| t.is_op(o)) || t.is_kw("in") {
                self.advance();
                t.text.clone()
            } else if t.is_kw("not") && self.nth(1).is_kw("in") {
                self.advance();
                self.advance();
                "not in".to_string()
            } else if t.is_kw("is") {
                self.advance();
                if self.eat_kw("not") {
                    "is not".to_string()
                } else {
                    "is".to_string()
                }
            } else {
                break;
            };
            children.push(SyntaxNode::leaf_text("operator", &t, op));
            children.push(self.bitwise_or()?);
        }
        if children.len() == 1 {
            Ok(children.pop().expect("one child"))
        } else {
            Ok(SyntaxNode::node("comparison_operator", &start, children))
        }
    }

    fn binary_level(&mut self, level: usize) -> PResult<SyntaxNode> {
        const LEVELS: [&[&str]; 6] = [
            &["|"],
            &["^"],
            &["&"],
            &["<<", ">>"],
            &["+", "-"],
            &["*", "/", "//", "%", "@"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let start = self.tok().clone();
        let mut left = self.binary_level(level + 1)?;
        while LEVELS[level].iter().any(|op| self.at_op(op)) {
            let op = self.advance();
            let right = self.binary_level(level + 1)?;
            left = SyntaxNode::node("binary_operator", &start, vec![left, Self::op_leaf(&op), right]);
        }
        Ok(left)
    }

    fn bitwise_or(&mut self) -> PResult<SyntaxNode> {
        self.binary_level(0)
    }

    fn unary(&mut self) -> PResult<SyntaxNode> {
        if self.at_op("-") || self.at_op("+") || self.at_op("~") {
            let op = self.advance();
            let e = self.unary()?;
            return Ok(SyntaxNode::node("unary_operator", &op, vec![Self::op_leaf(&op), e]));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let base = if self.at_kw("await") {
            let t = self.advance();
            let e = self.primary()?;
            SyntaxNode::node("await", &t, vec![e])
        } else {
            self.primary()?
        };
        if self.at_op("**") {
            let op = self.advance();
            let exp = self.unary()?;
            return Ok(SyntaxNode::node(
                "binary_operator",
                &start,
                vec![base, Self::op_leaf(&op), exp],
            ));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let mut node = self.atom()?;
        loop {
            if self.at_op(".") {
                self.advance();
                let attr = self.name("field")?;
                node = SyntaxNode::node("attribute", &start, vec![node, attr]);
            } else if self.at_op("(") {
                let args = self.argument_list()?;
                node = SyntaxNode::node("call", &start, vec![node, args]);
            } else if self.at_op("[") {
                let t = self.advance();
                let mut children = vec![node];
                loop {
                    children.push(self.slice()?);
                    if !self.eat_op(",") || self.at_op("]") {
                        break;
                    }
                }
                self.expect_op("]")?;
                node = SyntaxNode::node("subscript", &t, children);
            } else {
                return Ok(node);
            }
        }
    }

    fn slice(&mut self) -> PResult<SyntaxNode> {
        let start = self.tok().clone();
        let lower = if self.at_op(":") {
            None
        } else {
            Some(self.star_expression()?)
        };
        if !self.at_op(":") {
            return lower.ok_or_else(|| unreachable_err(&start));
        }
        let mut children: Vec<SyntaxNode> = lower.into_iter().collect();
        self.advance();
        if !self.at_op(":") && !self.at_op("]") && !self.at_op(",") {
            children.push(self.expression()?);
        }
        if self.eat_op(":") && !self.at_op("]") && !self.at_op(",") {
            children.push(self.expression()?);
        }
        Ok(SyntaxNode::node("slice", &start, children))
    }

    fn argument_list(&mut self) -> PResult<SyntaxNode> {
        let start = self.expect_op("(")?;
        let mut args = Vec::new();
        while !self.at_op(")") {
            let t = self.tok().clone();
            let arg = if self.at_op("*") {
                self.advance();
                let e = self.expression()?;
                SyntaxNode::node("list_splat", &t, vec![e])
            } else if self.at_op("**") {
                self.advance();
                let e = self.expression()?;
                SyntaxNode::node("dictionary_splat", &t, vec![e])
            } else if t.kind == TokenKind::Name && self.nth(1).is_op("=") {
                let name = self.name("field")?;
                self.advance();
                let value = self.expression()?;
                SyntaxNode::node("keyword_argument", &t, vec![name, value])
            } else {
                let e = self.named_expression()?;
                if self.at_kw("for") || (self.at_kw("async") && self.nth(1).is_kw("for")) {
                    let clauses = self.comprehension_clauses()?;
                    let mut children = vec![e];
                    children.extend(clauses);
                    SyntaxNode::node("generator_expression", &t, children)
                } else {
                    e
                }
            };
            args.push(arg);
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok(SyntaxNode::node("argument_list", &start, args))
    }

    fn comprehension_clauses(&mut self) -> PResult<Vec<SyntaxNode>> {
        let mut clauses = Vec::new();
        loop {
            let t = self.tok().clone();
            if self.eat_kw("async") || self.at_kw("for") {
                self.expect_kw("for")?;
                let target = self.target_list()?;
                self.expect_kw("in")?;
                let iter = self.disjunction()?;
                clauses.push(SyntaxNode::node("for_in_clause", &t, vec![target, iter]));
            } else if self.at_kw("if") {
                self.advance();
                let cond = self.disjunction()?;
                clauses.push(SyntaxNode::node("if_clause", &t, vec![cond]));
            } else {
                return Ok(clauses);
            }
        }
    }

    fn atom(&mut self) -> PResult<SyntaxNode> {
        let t = self.tok().clone();
        match t.kind {
            TokenKind::Name => {
                self.advance();
                Ok(SyntaxNode::leaf("identifier", &t))
            }
            TokenKind::Number => {
                self.advance();
                let is_float = !t.text.starts_with("0x")
                    && !t.text.starts_with("0X")
                    && (t.text.contains('.') || t.text.contains(['e', 'E', 'j', 'J']));
                Ok(SyntaxNode::leaf(if is_float { "float" } else { "integer" }, &t))
            }
            TokenKind::String => {
                let mut parts = vec![SyntaxNode::leaf("string", &self.advance())];
                while self.tok().kind == TokenKind::String {
                    parts.push(SyntaxNode::leaf("string", &self.advance()));
                }
                if parts.len() == 1 {
                    Ok(parts.pop().expect("one part"))
                } else {
                    Ok(SyntaxNode::node("concatenated_string", &t, parts))
                }
            }
            TokenKind::Keyword => match t.text.as_str() {
                "True" => {
                    self.advance();
                    Ok(SyntaxNode::leaf("true", &t))
                }
                "False" => {
                    self.advance();
                    Ok(SyntaxNode::leaf("false", &t))
                }
                "None" => {
                    self.advance();
                    Ok(SyntaxNode::leaf("none", &t))
                }
                _ => self.error("expected an expression"),
            },
            TokenKind::Op => match t.text.as_str() {
                "..." => {
                    self.advance();
                    Ok(SyntaxNode::leaf("ellipsis", &t))
                }
                "(" => self.paren(),
                "[" => self.list(),
                "{" => self.brace(),
                _ => self.error("expected an expression"),
            },
            _ => self.error("expected an expression"),
        }
    }

    fn paren(&mut self) -> PResult<SyntaxNode> {
        let start = self.expect_op("(")?;
        if self.eat_op(")") {
            return Ok(SyntaxNode::node("tuple", &start, vec![]));
        }
        if self.at_kw("yield") {
            let y = self.yield_expression()?;
            self.expect_op(")")?;
            return Ok(SyntaxNode::node("parenthesized_expression", &start, vec![y]));
        }
        let first = self.star_expression()?;
        if self.at_kw("for") || (self.at_kw("async") && self.nth(1).is_kw("for")) {
            let mut children = vec![first];
            children.extend(self.comprehension_clauses()?);
            self.expect_op(")")?;
            return Ok(SyntaxNode::node("generator_expression", &start, children));
        }
        if self.eat_op(")") {
            return Ok(SyntaxNode::node("parenthesized_expression", &start, vec![first]));
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op(")") {
                break;
            }
            items.push(self.star_expression()?);
        }
        self.expect_op(")")?;
        Ok(SyntaxNode::node("tuple", &start, items))
    }

    fn list(&mut self) -> PResult<SyntaxNode> {
        let start = self.expect_op("[")?;
        if self.eat_op("]") {
            return Ok(SyntaxNode::node("list", &start, vec![]));
        }
        let first = self.star_expression()?;
        if self.at_kw("for") || (self.at_kw("async") && self.nth(1).is_kw("for")) {
            let mut children = vec![first];
            children.extend(self.comprehension_clauses()?);
            self.expect_op("]")?;
            return Ok(SyntaxNode::node("list_comprehension", &start, children));
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op("]") {
                break;
            }
            items.push(self.star_expression()?);
        }
        self.expect_op("]")?;
        Ok(SyntaxNode::node("list", &start, items))
    }

    fn brace(&mut self) -> PResult<SyntaxNode> {
        let start = self.expect_op("{")?;
        if self.eat_op("}") {
            return Ok(SyntaxNode::node("dictionary", &start, vec![]));
        }
        let first = self.dict_or_set_item()?;
        let is_dict = matches!(first.kind, "pair" | "dictionary_splat");
        if self.at_kw("for") || (self.at_kw("async") && self.nth(1).is_kw("for")) {
            let mut children = vec![first];
            children.extend(self.comprehension_clauses()?);
            self.expect_op("}")?;
            let kind = if is_dict {
                "dictionary_comprehension"
            } else {
                "set_comprehension"
            };
            return Ok(SyntaxNode::node(kind, &start, children));
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op("}") {
                break;
            }
            let item = self.dict_or_set_item()?;
            if matches!(item.kind, "pair" | "dictionary_splat") != is_dict {
                return self.error("mixed dictionary and set items");
            }
            items.push(item);
        }
        self.expect_op("}")?;
        Ok(SyntaxNode::node(
            if is_dict { "dictionary" } else { "set" },
            &start,
            items,
        ))
    }

    fn dict_or_set_item(&mut self) -> PResult<SyntaxNode> {
        let t = self.tok().clone();
        if self.eat_op("**") {
            let e = self.bitwise_or()?;
            return Ok(SyntaxNode::node("dictionary_splat", &t, vec![e]));
        }
        let key = self.star_expression()?;
        if self.eat_op(":") {
            let value = self.expression()?;
            return Ok(SyntaxNode::node("pair", &t, vec![key, value]));
        }
        Ok(key)
    }
}

fn unreachable_err(t: &Token) -> SyntaxError {
    SyntaxError {
        line: t.line,
        column: t.column,
        message: "expected a slice".into(),
    }
}

/// Rejects assignment to literals, calls and operators.
fn check_target(node: &SyntaxNode) -> PResult<()> {
    match node.kind {
        "identifier" | "attribute" | "subscript" => Ok(()),
        "expression_list" | "pattern_list" | "tuple" | "list" | "parenthesized_expression" => {
            node.children.iter().try_for_each(check_target)
        }
        "list_splat" | "list_splat_pattern" => node.children.iter().try_for_each(check_target),
        _ => Err(SyntaxError {
            line: node.line,
            column: node.column,
            message: format!("cannot assign to {}", node.kind.replace('_', " ")),
        }),
    }
}
