//! Line-oriented tokenizer.
//!
//! Comments (`!` to end of line) are dropped except for `!$OFP` directives,
//! which become a single [`TokenKind::Directive`] token carrying the rest of
//! the line. A trailing `&` joins a line with the next one; an optional
//! leading `&` on the continuation line is skipped too.

use std::fmt;

use thiserror::Error;

pub const DIRECTIVE_PREFIX: &str = "!$OFP";

const KEYWORDS: &[&str] = &[
    "subroutine",
    "function",
    "end",
    "pure",
    "elemental",
    "real",
    "integer",
    "dimension",
    "intent",
    "contiguous",
    "target",
    "allocatable",
    "pointer",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Identifier,
    RealLiteral,
    IntegerLiteral,
    Operator,
    Punctuation,
    Directive,
    EndOfLine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text as written (case preserved).
    pub lexeme: String,
    pub line: usize,
    pub column: usize,
}

impl Token {
    /// Lowercased lexeme, the form used for names and keywords.
    pub fn normalized(&self) -> String {
        self.lexeme.to_ascii_lowercase()
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.lexeme.eq_ignore_ascii_case(kw)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punctuation && self.lexeme == p
    }

    pub fn is_op(&self, p: &str) -> bool {
        self.kind == TokenKind::Operator && self.lexeme == p
    }

    pub fn is_eol(&self) -> bool {
        self.kind == TokenKind::EndOfLine
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::EndOfLine => f.write_str("end of line"),
            _ => write!(f, "`{}`", self.lexeme),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct LexError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(word))
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let lines: Vec<&str> = source.lines().collect();
    let mut tokens = Vec::new();
    let mut continuing = false;

    for (idx, raw) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut pos = 0;

        if continuing {
            while pos < chars.len() && chars[pos].is_whitespace() {
                pos += 1;
            }
            if pos < chars.len() && chars[pos] == '&' {
                pos += 1;
            }
        }
        continuing = false;

        while pos < chars.len() {
            let c = chars[pos];
            let column = pos + 1;
            let push = |tokens: &mut Vec<Token>, kind, lexeme: String| {
                tokens.push(Token {
                    kind,
                    lexeme,
                    line: line_no,
                    column,
                });
            };

            if c.is_whitespace() {
                pos += 1;
                continue;
            }
            if c == '!' {
                let rest: String = chars[pos..].iter().collect();
                if rest.starts_with(DIRECTIVE_PREFIX) {
                    push(&mut tokens, TokenKind::Directive, rest.trim_end().to_string());
                }
                break;
            }
            if c == '&' {
                let rest: String = chars[pos + 1..].iter().collect();
                let rest = rest.trim_start();
                if rest.is_empty() || rest.starts_with('!') {
                    continuing = true;
                    break;
                }
                return Err(LexError {
                    line: line_no,
                    column,
                    message: "`&` is only allowed at the end of a line".into(),
                });
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = pos;
                while pos < chars.len() && (chars[pos].is_ascii_alphanumeric() || chars[pos] == '_') {
                    pos += 1;
                }
                let word: String = chars[start..pos].iter().collect();
                let kind = if is_keyword(&word) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                };
                push(&mut tokens, kind, word);
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && chars.get(pos + 1).is_some_and(|d| d.is_ascii_digit())) {
                let (lexeme, is_real) = lex_number(&chars, &mut pos);
                let kind = if is_real {
                    TokenKind::RealLiteral
                } else {
                    TokenKind::IntegerLiteral
                };
                push(&mut tokens, kind, lexeme);
                continue;
            }
            match c {
                '+' | '-' | '*' | '/' | '=' => {
                    push(&mut tokens, TokenKind::Operator, c.to_string());
                    pos += 1;
                }
                ':' => {
                    if chars.get(pos + 1) == Some(&':') {
                        push(&mut tokens, TokenKind::Punctuation, "::".into());
                        pos += 2;
                    } else {
                        push(&mut tokens, TokenKind::Punctuation, ":".into());
                        pos += 1;
                    }
                }
                '(' | ')' | ',' | '[' | ']' | ';' => {
                    push(&mut tokens, TokenKind::Punctuation, c.to_string());
                    pos += 1;
                }
                _ => {
                    return Err(LexError {
                        line: line_no,
                        column,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            }
        }

        if !continuing {
            tokens.push(Token {
                kind: TokenKind::EndOfLine,
                lexeme: String::new(),
                line: line_no,
                column: chars.len() + 1,
            });
        }
    }
    Ok(tokens)
}

fn lex_number(chars: &[char], pos: &mut usize) -> (String, bool) {
    let start = *pos;
    let mut is_real = false;
    while *pos < chars.len() && chars[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos < chars.len() && chars[*pos] == '.' {
        is_real = true;
        *pos += 1;
        while *pos < chars.len() && chars[*pos].is_ascii_digit() {
            *pos += 1;
        }
    }
    if *pos < chars.len() && matches!(chars[*pos], 'e' | 'E' | 'd' | 'D') {
        let mut look = *pos + 1;
        if look < chars.len() && matches!(chars[look], '+' | '-') {
            look += 1;
        }
        if look < chars.len() && chars[look].is_ascii_digit() {
            is_real = true;
            *pos = look;
            while *pos < chars.len() && chars[*pos].is_ascii_digit() {
                *pos += 1;
            }
        }
    }
    (chars[start..*pos].iter().collect(), is_real)
}

/// Numeric value of a real or integer literal lexeme (`d` exponents allowed).
pub fn literal_value(lexeme: &str) -> Option<f64> {
    let normalized: String = lexeme
        .chars()
        .map(|c| if c == 'd' || c == 'D' { 'e' } else { c })
        .collect();
    let normalized = if normalized.ends_with('.') {
        format!("{normalized}0")
    } else {
        normalized
    };
    normalized.parse().ok()
}
