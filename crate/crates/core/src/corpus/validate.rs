//! Machine-checkable structural rules for instances and pairs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::WinoVisInstance;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// (a) the snippet is not a contiguous part of the statement.
    SnippetNotInStatement,
    /// (b) the pronoun is not a whole word of the snippet.
    PronounNotInSnippet,
    /// (c) an option appears in the snippet.
    OptionInSnippet(usize),
    /// (d) an option does not appear in the statement.
    OptionNotInStatement(usize),
    /// (e) answer is not 0 or 1.
    AnswerOutOfRange(i64),
    /// (f) both options are the same after case folding.
    OptionsNotDistinct,
    /// Both members of a pair resolve to the same referent.
    PairSameAnswer { answer: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SnippetNotInStatement => f.write_str("snippet is not part of the statement"),
            Violation::PronounNotInSnippet => f.write_str("pronoun does not occur in the snippet"),
            Violation::OptionInSnippet(i) => write!(f, "option {i} occurs in the snippet"),
            Violation::OptionNotInStatement(i) => write!(f, "option {i} does not occur in the statement"),
            Violation::AnswerOutOfRange(a) => write!(f, "answer {a} is not 0 or 1"),
            Violation::OptionsNotDistinct => f.write_str("options are not distinct"),
            Violation::PairSameAnswer { answer } => write!(f, "both pair members have answer {answer}"),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Case-insensitive search for `phrase` bounded by non-word characters.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let phrase = phrase.trim().to_lowercase();
    if phrase.is_empty() {
        return false;
    }
    let text = text.to_lowercase();
    text.match_indices(phrase.as_str()).any(|(start, m)| {
        let before = text[..start].chars().next_back();
        let after = text[start + m.len()..].chars().next();
        !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char)
    })
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Every structural rule the instance breaks; empty means valid.
pub fn validate_instance(inst: &WinoVisInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let snippet = fold(&inst.snippet);
    if snippet.is_empty() || !inst.statement.to_lowercase().contains(&snippet) {
        out.push(Violation::SnippetNotInStatement);
    }
    if !contains_phrase(&inst.snippet, &inst.pronoun) {
        out.push(Violation::PronounNotInSnippet);
    }
    for (i, option) in inst.options.iter().enumerate() {
        if contains_phrase(&inst.snippet, option) {
            out.push(Violation::OptionInSnippet(i));
        }
    }
    for (i, option) in inst.options.iter().enumerate() {
        if !contains_phrase(&inst.statement, option) {
            out.push(Violation::OptionNotInStatement(i));
        }
    }
    if !(0..=1).contains(&inst.answer) {
        out.push(Violation::AnswerOutOfRange(inst.answer));
    }
    if fold(&inst.options[0]) == fold(&inst.options[1]) {
        out.push(Violation::OptionsNotDistinct);
    }
    out
}

/// The two halves of a schema pair must resolve to different referents.
pub fn validate_pair(a: &WinoVisInstance, b: &WinoVisInstance) -> Vec<Violation> {
    if a.answer == b.answer {
        alloc::vec![Violation::PairSameAnswer { answer: a.answer }]
    } else {
        Vec::new()
    }
}
