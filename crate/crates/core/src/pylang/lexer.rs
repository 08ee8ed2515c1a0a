//! Python tokenizer with indentation tracking.

use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Name,
    Keyword,
    Number,
    String,
    Op,
    Newline,
    Indent,
    Dedent,
    EndMarker,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub column: u32,
}

impl Token {
    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text == op
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == kw
    }

    /// Tokens that carry source text (everything except layout tokens).
    pub fn is_lexical(&self) -> bool {
        !matches!(
            self.kind,
            TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent | TokenKind::EndMarker
        )
    }
}

pub const KEYWORDS: [&str; 35] = [
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
    "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

const OPERATORS: [&str; 47] = [
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">", "(", ")", "[", "]",
    "{", "}", ",", ":", ".", ";", "=",
];

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    indents: Vec<usize>,
    depth: usize,
    open_brackets: Vec<(u32, u32)>,
    line_start: bool,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        tokens: Vec::new(),
        indents: vec![0],
        depth: 0,
        open_brackets: Vec::new(),
        line_start: true,
    };
    lx.run()?;
    Ok(lx.tokens)
}

impl Lexer {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: u32, column: u32, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line,
            column,
            message: message.into(),
        }
    }

    fn push(&mut self, kind: TokenKind, text: String, line: u32, column: u32) {
        self.tokens.push(Token {
            kind,
            text,
            line,
            column,
        });
    }

    fn at_logical_line_start(&self) -> bool {
        matches!(
            self.tokens.last().map(|t| t.kind),
            None | Some(TokenKind::Newline) | Some(TokenKind::Indent) | Some(TokenKind::Dedent)
        )
    }

    fn run(&mut self) -> Result<(), SyntaxError> {
        loop {
            if self.line_start {
                self.line_start = false;
                if !self.indentation()? {
                    break;
                }
            }
            let Some(c) = self.peek(0) else { break };
            let (line, col) = (self.line, self.col);
            match c {
                ' ' | '\t' | '\x0c' => {
                    self.bump();
                }
                '#' => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                '\\' if matches!(self.peek(1), Some('\n')) => {
                    self.bump();
                    self.bump();
                }
                '\\' if self.peek(1) == Some('\r') && self.peek(2) == Some('\n') => {
                    self.bump();
                    self.bump();
                    self.bump();
                }
                '\r' => {
                    self.bump();
                }
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.push(TokenKind::Newline, String::new(), line, col);
                        self.line_start = true;
                    }
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    let text = self.number();
                    self.push(TokenKind::Number, text, line, col);
                }
                c if c == '_' || c.is_alphabetic() => {
                    let mut word = String::new();
                    while let Some(c) = self.peek(0).filter(|c| *c == '_' || c.is_alphanumeric()) {
                        word.push(c);
                        self.bump();
                    }
                    if matches!(self.peek(0), Some('\'' | '"')) && is_string_prefix(&word) {
                        let text = self.string(word, line, col)?;
                        self.push(TokenKind::String, text, line, col);
                    } else {
                        let kind = if is_keyword(&word) {
                            TokenKind::Keyword
                        } else {
                            TokenKind::Name
                        };
                        self.push(kind, word, line, col);
                    }
                }
                '\'' | '"' => {
                    let text = self.string(String::new(), line, col)?;
                    self.push(TokenKind::String, text, line, col);
                }
                _ => {
                    let op = OPERATORS
                        .iter()
                        .find(|op| op.chars().enumerate().all(|(i, oc)| self.peek(i) == Some(oc)))
                        .ok_or_else(|| self.err(line, col, format!("unexpected character {c:?}")))?;
                    for _ in 0..op.chars().count() {
                        self.bump();
                    }
                    match *op {
                        "(" | "[" | "{" => {
                            self.depth += 1;
                            self.open_brackets.push((line, col));
                        }
                        ")" | "]" | "}" => {
                            self.depth = self
                                .depth
                                .checked_sub(1)
                                .ok_or_else(|| self.err(line, col, format!("unmatched '{op}'")))?;
                            self.open_brackets.pop();
                        }
                        _ => {}
                    }
                    self.push(TokenKind::Op, op.to_string(), line, col);
                }
            }
        }
        if let Some(&(line, col)) = self.open_brackets.last() {
            return Err(self.err(line, col, "bracket is never closed"));
        }
        let (line, col) = (self.line, self.col);
        if !self.at_logical_line_start() {
            self.push(TokenKind::Newline, String::new(), line, col);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokenKind::Dedent, String::new(), line, col);
        }
        self.push(TokenKind::EndMarker, String::new(), line, col);
        Ok(())
    }

    /// Consumes blank lines and leading whitespace of the next logical line,
    /// emitting INDENT/DEDENT. Returns false at end of input.
    fn indentation(&mut self) -> Result<bool, SyntaxError> {
        loop {
            let mut width = 0;
            while let Some(c) = self.peek(0) {
                match c {
                    ' ' => width += 1,
                    '\t' => width = (width / 8 + 1) * 8,
                    '\x0c' => width = 0,
                    _ => break,
                }
                self.bump();
            }
            match self.peek(0) {
                None => return Ok(false),
                Some('\n') | Some('\r') => {
                    self.bump();
                    continue;
                }
                Some('#') => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                    continue;
                }
                Some(_) => {
                    let (line, col) = (self.line, self.col);
                    let current = *self.indents.last().expect("indent stack never empty");
                    if width > current {
                        self.indents.push(width);
                        self.push(TokenKind::Indent, String::new(), line, col);
                    } else {
                        while width < *self.indents.last().expect("indent stack never empty") {
                            self.indents.pop();
                            self.push(TokenKind::Dedent, String::new(), line, col);
                        }
                        if width != *self.indents.last().expect("indent stack never empty") {
                            return Err(self.err(line, col, "unindent does not match any outer indentation level"));
                        }
                    }
                    return Ok(true);
                }
            }
        }
    }

    fn number(&mut self) -> String {
        let mut text = String::new();
        while let Some(c) = self.peek(0) {
            let exp_sign = matches!(c, '+' | '-')
                && matches!(text.chars().last(), Some('e' | 'E'))
                && !text.starts_with("0x")
                && !text.starts_with("0X");
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' || exp_sign {
                if c == '.' && self.peek(1) == Some('.') {
                    break;
                }
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        text
    }

    fn string(&mut self, prefix: String, line: u32, col: u32) -> Result<String, SyntaxError> {
        let quote = self.bump().expect("caller checked quote");
        let triple = self.peek(0) == Some(quote) && self.peek(1) == Some(quote);
        let mut text = prefix;
        text.push(quote);
        if triple {
            text.push(quote);
            text.push(quote);
            self.bump();
            self.bump();
        }
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err(line, col, "unterminated string literal"));
            };
            text.push(c);
            match c {
                '\\' => {
                    if let Some(next) = self.bump() {
                        text.push(next);
                    }
                }
                '\n' if !triple => return Err(self.err(line, col, "unterminated string literal")),
                c if c == quote => {
                    if !triple {
                        return Ok(text);
                    }
                    if self.peek(0) == Some(quote) && self.peek(1) == Some(quote) {
                        text.push(quote);
                        text.push(quote);
                        self.bump();
                        self.bump();
                        return Ok(text);
                    }
                }
                _ => {}
            }
        }
    }
}

fn is_string_prefix(word: &str) -> bool {
    matches!(
        word.to_ascii_lowercase().as_str(),
        "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn indentation_tokens() {
        use TokenKind::*;
        let got: Vec<_> = kinds("if x:\n    y = 1\nz\n").into_iter().map(|(k, _)| k).collect();
        assert_eq!(
            got,
            vec![Keyword, Name, Op, Newline, Indent, Name, Op, Number, Newline, Dedent, Name, Newline, EndMarker]
        );
    }

    #[test]
    fn brackets_join_lines_and_comments_vanish() {
        let toks = kinds("f(a,  # c\n  b)\n");
        assert!(!toks.iter().any(|(k, _)| *k == TokenKind::Indent));
        assert_eq!(toks.iter().filter(|(k, _)| *k == TokenKind::Newline).count(), 1);
    }

    #[test]
    fn strings_and_numbers() {
        let toks = kinds("s = f'{x}' + r\"\\\"\" + '''a\nb''' + 1.5e-3 + 0xFF\n");
        let texts: Vec<_> = toks
            .iter()
            .filter(|(k, _)| matches!(k, TokenKind::String | TokenKind::Number))
            .map(|(_, t)| t.as_str())
            .collect();
        assert_eq!(texts, vec!["f'{x}'", "r\"\\\"\"", "'''a\nb'''", "1.5e-3", "0xFF"]);
    }

    #[test]
    fn errors() {
        assert!(tokenize("x = 'abc\n").is_err());
        assert!(tokenize("f(\n").is_err());
        assert!(tokenize("if a:\n    b\n  c\n").is_err());
        assert!(tokenize("x = $\n").is_err());
    }
}
