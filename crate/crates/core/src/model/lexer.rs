//! Tokenizer for the supported Java subset.
//!
//! Comments and whitespace are dropped; every token keeps its byte span so
//! the parser can hand out exact offsets into the original text.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Str,
    Char,
    Number,
    /// Single punctuation character, or one of the combined operators below.
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Range<usize>,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.clone()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

// Longest first. `>>` and `<<` are deliberately absent so generic closers
// stay single tokens.
const OPERATORS: &[&str] = &[
    "->", "::", "...", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(LexError {
                        offset: start,
                        message: "unterminated block comment".into(),
                    });
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        let start = i;
        if b == b'"' {
            if src[i..].starts_with("\"\"\"") {
                i += 3;
                match src[i..].find("\"\"\"") {
                    Some(end) => i += end + 3,
                    None => {
                        return Err(LexError {
                            offset: start,
                            message: "unterminated text block".into(),
                        })
                    }
                }
            } else {
                i = scan_quoted(bytes, i, b'"').map_err(|message| LexError {
                    offset: start,
                    message,
                })?;
            }
            out.push(Token {
                kind: TokenKind::Str,
                span: start..i,
            });
            continue;
        }
        if b == b'\'' {
            i = scan_quoted(bytes, i, b'\'').map_err(|message| LexError {
                offset: start,
                message,
            })?;
            out.push(Token {
                kind: TokenKind::Char,
                span: start..i,
            });
            continue;
        }
        if is_ident_start(b) {
            while i < bytes.len() && is_ident_continue(bytes[i]) {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident,
                span: start..i,
            });
            continue;
        }
        if b.is_ascii_digit() || (b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
            {
                // exponent sign, e.g. 1e-5
                if (bytes[i] == b'e' || bytes[i] == b'E')
                    && matches!(bytes.get(i + 1), Some(b'+') | Some(b'-'))
                    && !src[start..i].starts_with("0x")
                {
                    i += 1;
                }
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Number,
                span: start..i,
            });
            continue;
        }
        if !b.is_ascii() {
            let ch = src[i..].chars().next().unwrap_or('\u{fffd}');
            if ch.is_alphabetic() {
                while i < bytes.len() {
                    let c = src[i..].chars().next().unwrap();
                    if c.is_alphanumeric() || c == '_' || c == '$' {
                        i += c.len_utf8();
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    kind: TokenKind::Ident,
                    span: start..i,
                });
                continue;
            }
            return Err(LexError {
                offset: i,
                message: format!("unexpected character {ch:?}"),
            });
        }
        let op = OPERATORS.iter().find(|op| src[i..].starts_with(**op));
        let len = op.map_or(1, |op| op.len());
        i += len;
        out.push(Token {
            kind: TokenKind::Punct,
            span: start..i,
        });
    }
    Ok(out)
}

fn scan_quoted(bytes: &[u8], mut i: usize, quote: u8) -> Result<usize, String> {
    i += 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' => return Err("unterminated literal".into()),
            c if c == quote => return Ok(i + 1),
            _ => i += 1,
        }
    }
    Err("unterminated literal".into())
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b == b'$'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}
