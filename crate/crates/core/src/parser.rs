//! Structured decisions and bias labels out of free-text replies.

use std::fmt;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dataset::{McqItem, OptionLabel, ABSTENTION_LABEL};
use crate::prompt::DecisionMode;
use crate::taxonomy::{normalize_key, BiasLabel, BiasTaxonomy};

/// The two wordings of the abstention option seen in replies.
const ABSTENTION_TEXTS: [&str; 2] = [
    "i am not sure which choice is the best to select",
    "i am not sure which option is the best to select",
];

/// Longest bare reply still treated as a label when nothing else matches.
const BARE_LABEL_MAX_WORDS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ParsedChoice {
    Decisive(OptionLabel),
    Abstain,
    Unparseable(String),
}

impl ParsedChoice {
    pub fn is_abstain(&self) -> bool {
        matches!(self, ParsedChoice::Abstain)
    }

    pub fn is_unparseable(&self) -> bool {
        matches!(self, ParsedChoice::Unparseable(_))
    }

    pub fn label(&self) -> Option<OptionLabel> {
        match self {
            ParsedChoice::Decisive(l) => Some(*l),
            _ => None,
        }
    }
}

impl fmt::Display for ParsedChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParsedChoice::Decisive(l) => write!(f, "{l}"),
            ParsedChoice::Abstain => f.write_str("abstain"),
            ParsedChoice::Unparseable(reason) => write!(f, "unparseable ({reason})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedBias {
    pub raw_text: String,
    pub label: BiasLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchClass {
    Direct,
    Indirect,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no bias mention found in reply")]
    NoBiasMention,
}

fn strip_markup(text: &str) -> String {
    text.replace("**", "").replace("__", "").replace('`', "")
}

/// Letter tokens such as `B.`, `E:` or `(C)`: an uppercase letter preceded by
/// start of text, whitespace or an opening mark, and followed by end of line
/// or by `.`, `:` or `)` and then whitespace or end of text.
fn letter_tokens(text: &str) -> Vec<(usize, char)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    for (i, &(off, c)) in chars.iter().enumerate() {
        if !c.is_ascii_uppercase() {
            continue;
        }
        let before_ok = i == 0 || {
            let p = chars[i - 1].1;
            p.is_whitespace() || matches!(p, ':' | '(' | '[' | '"' | '\'' | '\u{201c}')
        };
        let after_ok = match chars.get(i + 1) {
            None => true,
            Some(&(_, '\n')) => true,
            Some(&(_, n)) if matches!(n, '.' | ':' | ')') => {
                chars.get(i + 2).map_or(true, |&(_, m)| m.is_whitespace())
            }
            _ => false,
        };
        if before_ok && after_ok {
            out.push((off, c));
        }
    }
    out
}

static OPTION_PHRASE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i:option)\s+([A-Za-z])\b").expect("valid regex"));

/// Extract the final option choice from a reply.
///
/// Rules in priority order, each taking the last mention in the reply:
/// letter tokens, the phrase "option X", literal option text. The letter E or
/// the abstention option text means [`ParsedChoice::Abstain`] when abstention
/// was offered.
pub fn extract_choice(reply: &str, item: &McqItem, mode: DecisionMode) -> ParsedChoice {
    let text = strip_markup(reply);
    let valid = |c: char| -> Option<ParsedChoice> {
        let label = OptionLabel(c);
        if mode.allows_abstention() && label == ABSTENTION_LABEL {
            Some(ParsedChoice::Abstain)
        } else if item.options.contains(label) {
            Some(ParsedChoice::Decisive(label))
        } else {
            None
        }
    };

    if let Some(choice) = letter_tokens(&text).into_iter().rev().find_map(|(_, c)| valid(c)) {
        return choice;
    }

    let phrase_hit = OPTION_PHRASE
        .captures_iter(&text)
        .filter_map(|cap| cap[1].chars().next())
        .filter_map(|c| valid(c.to_ascii_uppercase()))
        .last();
    if let Some(choice) = phrase_hit {
        return choice;
    }

    // Literal option text: latest occurrence in the normalised reply wins.
    let norm = normalize_key(&text);
    let padded = format!(" {norm} ");
    let mut best: Option<(usize, ParsedChoice)> = None;
    let mut consider = |needle: &str, choice: ParsedChoice| {
        let needle = normalize_key(needle);
        if needle.is_empty() {
            return;
        }
        if let Some(pos) = padded.rfind(&format!(" {needle} ")) {
            if best.as_ref().map_or(true, |(p, _)| pos > *p) {
                best = Some((pos, choice));
            }
        }
    };
    for (label, option_text) in item.options.iter() {
        consider(option_text, ParsedChoice::Decisive(*label));
    }
    if mode.allows_abstention() {
        for t in ABSTENTION_TEXTS {
            consider(t, ParsedChoice::Abstain);
        }
    }
    match best {
        Some((_, choice)) => choice,
        None => ParsedChoice::Unparseable("no option token".into()),
    }
}

static QUOTED: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r#""([^"\n]{1,120})"|\u{201c}([^\u{201d}\n]{1,120})\u{201d}|\*\*([^*\n]{1,120})\*\*"#)
        .expect("valid regex")
});

static MOST_LIKELY: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)most\s+likely").expect("valid regex"));

fn quoted_segments(text: &str) -> Vec<&str> {
    QUOTED
        .captures_iter(text)
        .filter_map(|cap| cap.get(1).or_else(|| cap.get(2)).or_else(|| cap.get(3)))
        .map(|m| m.as_str())
        .collect()
}

/// Extract the bias named by a detection reply.
///
/// Preference order: the first quoted or bold mention after "most likely"
/// that resolves in the taxonomy; the earliest taxonomy mention anywhere; the
/// first quoted mention after "most likely" as a foreign label; a short bare
/// reply as a foreign label. When a reply names several biases the first
/// resolvable one wins.
pub fn extract_bias_label(reply: &str, taxonomy: &BiasTaxonomy) -> Result<DetectedBias, ParseError> {
    let tail = MOST_LIKELY.find(reply).map(|m| &reply[m.end()..]);
    let quoted = tail.map(quoted_segments).unwrap_or_default();

    for seg in &quoted {
        if let Ok(label) = taxonomy.canonicalize(seg) {
            if !label.is_foreign() {
                return Ok(DetectedBias {
                    raw_text: seg.to_string(),
                    label,
                });
            }
        }
    }

    if let Some((span, label)) = taxonomy.find_mentions(reply).into_iter().next() {
        return Ok(DetectedBias {
            raw_text: reply[span].to_string(),
            label: label.clone(),
        });
    }

    for seg in &quoted {
        if let Ok(label) = taxonomy.canonicalize(seg) {
            return Ok(DetectedBias {
                raw_text: seg.to_string(),
                label,
            });
        }
    }

    let bare = strip_markup(reply);
    let bare = bare.trim();
    if !bare.is_empty() && bare.split_whitespace().count() <= BARE_LABEL_MAX_WORDS {
        if let Ok(label) = taxonomy.canonicalize(bare) {
            return Ok(DetectedBias {
                raw_text: bare.to_string(),
                label,
            });
        }
    }
    Err(ParseError::NoBiasMention)
}

/// Compare a detected label with the ground-truth subtype.
///
/// Direct on identity; Indirect when the detected label is the truth's
/// broader concept or its parent-category label (synonyms are resolved by
/// canonicalisation beforehand); Miss otherwise.
pub fn classify_match(detected: &BiasLabel, truth: &BiasLabel, taxonomy: &BiasTaxonomy) -> MatchClass {
    let resolved = if detected.is_foreign() {
        taxonomy.lookup(&detected.canonical_name).unwrap_or(detected)
    } else {
        detected
    };
    if resolved.same_as(truth) {
        return MatchClass::Direct;
    }
    let related = [taxonomy.broader_of(truth), taxonomy.parent_of(truth)];
    if related.iter().flatten().any(|l| l.same_as(resolved)) {
        MatchClass::Indirect
    } else {
        MatchClass::Miss
    }
}
