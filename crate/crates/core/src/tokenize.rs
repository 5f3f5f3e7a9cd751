//! Identifier-aware source tokenization.
//!
//! The default tokenizer splits on whitespace and punctuation, and additionally
//! emits the camelCase / snake_case pieces of every identifier right after the
//! identifier itself. Those pieces are marked [`TokenKind::Subword`] so that
//! [`detokenize`] can skip them when rebuilding text.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    /// A maximal run of alphanumerics and underscores.
    Word,
    /// A camelCase or snake_case piece of the preceding word.
    Subword,
    /// A single non-alphanumeric, non-whitespace character.
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Whether whitespace separated this token from the previous surface token.
    pub space_before: bool,
}

impl Token {
    fn new(text: impl Into<String>, kind: TokenKind, space_before: bool) -> Self {
        Token {
            text: text.into(),
            kind,
            space_before,
        }
    }
}

/// Pluggable tokenizer interface used by the indexer and the test embedder.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<Token>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    #[default]
    Identifier,
    Whitespace,
}

impl TokenizerKind {
    pub fn build(self) -> Box<dyn Tokenizer> {
        match self {
            TokenizerKind::Identifier => Box::new(IdentifierTokenizer),
            TokenizerKind::Whitespace => Box::new(WhitespaceTokenizer),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentifierTokenizer;

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for IdentifierTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        tokenize(text)
    }
}

impl Tokenizer for WhitespaceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        text.split_whitespace()
            .enumerate()
            .map(|(i, w)| Token::new(w, TokenKind::Word, i > 0))
            .collect()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Tokenize `text` with the default identifier-aware rules.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut space_before = false;
    let mut emitted_any = false;

    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            space_before = emitted_any;
            continue;
        }
        if is_word_char(c) {
            let mut end = start;
            while let Some(&(i, c)) = chars.peek() {
                if !is_word_char(c) {
                    break;
                }
                end = i + c.len_utf8();
                chars.next();
            }
            let word = &text[start..end];
            tokens.push(Token::new(word, TokenKind::Word, space_before));
            let parts = split_identifier(word);
            if parts.len() > 1 {
                tokens.extend(
                    parts
                        .into_iter()
                        .map(|p| Token::new(p, TokenKind::Subword, false)),
                );
            }
        } else {
            chars.next();
            tokens.push(Token::new(c, TokenKind::Punct, space_before));
        }
        space_before = false;
        emitted_any = true;
    }
    tokens
}

/// Split an identifier into its snake_case and camelCase pieces.
///
/// `HTTPServer` splits as `HTTP`, `Server`; digits stay attached to the
/// piece they follow.
pub fn split_identifier(word: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    for piece in word.split('_').filter(|p| !p.is_empty()) {
        let chars: Vec<(usize, char)> = piece.char_indices().collect();
        let mut begin = 0;
        for i in 1..chars.len() {
            let prev = chars[i - 1].1;
            let cur = chars[i].1;
            let next = chars.get(i + 1).map(|&(_, c)| c);
            let lower_to_upper = (prev.is_lowercase() || prev.is_numeric()) && cur.is_uppercase();
            let acronym_end =
                prev.is_uppercase() && cur.is_uppercase() && next.is_some_and(|n| n.is_lowercase());
            if lower_to_upper || acronym_end {
                let at = chars[i].0;
                parts.push(&piece[begin..at]);
                begin = at;
            }
        }
        parts.push(&piece[begin..]);
    }
    parts
}

/// Rebuild surface text from tokens, skipping subword pieces.
///
/// Subwords at the very start of the slice (pieces whose word was cut off by a
/// segment boundary) are rendered glued together so no content is lost.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut leading = true;
    for tok in tokens {
        match tok.kind {
            TokenKind::Subword if leading => out.push_str(&tok.text),
            TokenKind::Subword => {}
            TokenKind::Word | TokenKind::Punct => {
                if tok.space_before && !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&tok.text);
                leading = false;
            }
        }
    }
    out
}

/// Collapse whitespace runs to single spaces and trim the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
