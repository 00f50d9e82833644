//! Token-set matching: decide whether a record's text contains at least
//! one token from a named set.
//!
//! Text and tokens are canonically composed (NFC) and, by default,
//! lowercased before comparison. In word mode a hit must be delimited on
//! both sides by a character that is neither a Unicode letter nor a digit
//! (or by the string boundary); in substring mode plain containment is
//! enough. Unless a set pins a mode, tokens of one character match as
//! substrings (single letters occur inside words) and longer tokens match
//! as words.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Tweet;
use crate::error::{Error, Result};

/// How a token must occur in the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Delimited by non-letter/non-digit characters or string boundaries.
    Word,
    /// Plain containment anywhere in the text.
    Substring,
}

/// A named set of tokens selecting one record subset.
#[derive(Debug, Clone, Deserialize)]
pub struct TokenSet {
    pub name: String,
    pub tokens: Vec<String>,
    /// Forced mode for every token; per-token length default when absent.
    #[serde(default)]
    pub mode: Option<MatchMode>,
    /// Per-set override of the config's casefold default.
    #[serde(default)]
    pub casefold: Option<bool>,
}

impl TokenSet {
    pub fn new(name: impl Into<String>, tokens: Vec<String>) -> Result<Self> {
        let set = TokenSet { name: name.into(), tokens, mode: None, casefold: None };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::invalid("token set", format!("set `{}` has no tokens", self.name)));
        }
        if self.tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::invalid("token set", format!("set `{}` contains an empty token", self.name)));
        }
        Ok(())
    }
}

/// Normalization settings applied before matching.
#[derive(Debug, Clone, Copy)]
pub struct MatchConfig {
    /// Lowercase text and tokens before comparison. Sets may override.
    pub casefold: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { casefold: true }
    }
}

/// Canonically compose `text` (NFC), lowercasing first when enabled.
///
/// Lowercasing precedes composition so the result is idempotent:
/// composing can only pair lowercase base characters with combining
/// marks, which lowercasing then leaves untouched.
pub fn normalize_text(text: &str, config: &MatchConfig) -> String {
    if config.casefold {
        text.to_lowercase().nfc().collect()
    } else {
        text.nfc().collect()
    }
}

/// Default mode for a token when its set does not pin one: single
/// characters count occurrences inside words, anything longer matches as
/// a whole word.
fn default_mode(token: &str) -> MatchMode {
    if token.chars().count() >= 2 {
        MatchMode::Word
    } else {
        MatchMode::Substring
    }
}

/// A token set with its tokens pre-normalized, ready to scan many texts.
struct CompiledSet {
    tokens: Vec<(String, MatchMode)>,
    config: MatchConfig,
}

impl CompiledSet {
    fn new(set: &TokenSet, config: &MatchConfig) -> Self {
        let config = MatchConfig { casefold: set.casefold.unwrap_or(config.casefold) };
        let tokens = set
            .tokens
            .iter()
            .map(|t| {
                let norm = normalize_text(t, &config);
                let mode = set.mode.unwrap_or_else(|| default_mode(&norm));
                (norm, mode)
            })
            .collect();
        CompiledSet { tokens, config }
    }

    fn matches(&self, text: &str) -> bool {
        let text = normalize_text(text, &self.config);
        self.tokens.iter().any(|(tok, mode)| match mode {
            MatchMode::Substring => text.contains(tok.as_str()),
            MatchMode::Word => contains_word(&text, tok),
        })
    }
}

/// Word-delimited containment: some occurrence of `token` has no letter
/// or digit immediately before or after it.
fn contains_word(text: &str, token: &str) -> bool {
    for (start, hit) in text.match_indices(token) {
        let before_ok = text[..start]
            .chars()
            .next_back()
            .map_or(true, |c| !c.is_alphanumeric());
        let after_ok = text[start + hit.len()..]
            .chars()
            .next()
            .map_or(true, |c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
    }
    false
}

/// True iff `text` contains at least one token of `set`.
pub fn matches(text: &str, set: &TokenSet, config: &MatchConfig) -> bool {
    CompiledSet::new(set, config).matches(text)
}

/// The subsequence of `tweets` matching `set`, in input order.
///
/// Selections are independent: a record matching both a target and a
/// reference set appears in both.
pub fn select(tweets: &[Tweet], set: &TokenSet, config: &MatchConfig) -> Vec<Tweet> {
    let compiled = CompiledSet::new(set, config);
    tweets.iter().filter(|t| compiled.matches(&t.text)).cloned().collect()
}

// ---------------------------------------------------------------------------
// Token-set config files
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct TokenSetFile {
    #[serde(rename = "set")]
    sets: Vec<TokenSet>,
}

/// Load token sets from a TOML file of `[[set]]` tables with keys `name`,
/// `tokens`, and optional `mode` / `casefold`.
pub fn load_token_sets<P: AsRef<Path>>(path: P) -> Result<Vec<TokenSet>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_token_sets(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_token_sets(toml_text: &str) -> Result<Vec<TokenSet>> {
    let file: TokenSetFile = toml::from_str(toml_text).map_err(|e| Error::Config(e.to_string()))?;
    if file.sets.is_empty() {
        return Err(Error::Config("no [[set]] tables".into()));
    }
    for set in &file.sets {
        set.validate()?;
    }
    let mut names: Vec<&str> = file.sets.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("duplicate set names".into()));
    }
    Ok(file.sets)
}
