use serde::{Deserialize, Serialize};

use super::{collapse_ws, TextError};

/// A statement and its negation, scored against each other by the matcher.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatementPair {
    pub positive: String,
    pub negative: String,
}

/// `("red", "not red")`.
pub fn attr_pair(attr: &str) -> Result<StatementPair, TextError> {
    let attr = collapse_ws(attr);
    if attr.is_empty() {
        return Err(TextError::Empty("attribute"));
    }
    Ok(StatementPair {
        negative: format!("not {attr}"),
        positive: attr,
    })
}

const COPULAS: &[&str] = &["is", "are", "was", "were"];

/// Words that start a relation phrase needing only a copula in front.
const PREPOSITIONS: &[&str] = &[
    "to", "on", "in", "at", "by", "of", "with", "near", "next", "behind", "above", "below",
    "under", "beneath", "underneath", "over", "inside", "outside", "beside", "between", "along",
    "across", "against", "around", "into", "onto", "from", "off", "atop", "close", "far", "full",
    "part", "made", "worn", "held", "hanging", "filled", "covered", "parked", "attached",
];

/// Turns a bare verb into its `-ing` form (`wear` -> `wearing`, `sit` -> `sitting`).
fn gerund(verb: &str) -> String {
    let v = verb;
    if v.ends_with("ie") {
        return format!("{}ying", &v[..v.len() - 2]);
    }
    if v.ends_with('e') && !v.ends_with("ee") && v.len() > 2 {
        return format!("{}ing", &v[..v.len() - 1]);
    }
    let chars: Vec<char> = v.chars().collect();
    let is_vowel = |c: char| "aeiou".contains(c);
    // Short consonant-vowel-consonant verbs double the final consonant.
    if chars.len() == 3
        && !is_vowel(chars[0])
        && is_vowel(chars[1])
        && !is_vowel(chars[2])
        && !"wxy".contains(chars[2])
    {
        return format!("{v}{}ing", chars[2]);
    }
    format!("{v}ing")
}

/// Puts a relation phrase in `copula rest` form, returning the copula and
/// the remainder separately.
fn split_relation(relation: &str) -> (String, String) {
    let words: Vec<&str> = relation.split_whitespace().collect();
    let first = words[0].to_lowercase();
    let rest = words[1..].join(" ");
    if COPULAS.contains(&first.as_str()) {
        return (words[0].to_string(), rest);
    }
    if first.ends_with("ing") || first.ends_with("ed") || PREPOSITIONS.contains(&first.as_str()) {
        return ("is".to_string(), words.join(" "));
    }
    let head = gerund(&first);
    let phrase = if rest.is_empty() {
        head
    } else {
        format!("{head} {rest}")
    };
    ("is".to_string(), phrase)
}

/// `("the man", "is holding", "the cup")` ->
/// `("the man is holding the cup", "the man is not holding the cup")`.
///
/// A copula is inserted when the relation lacks one; bare verbs become
/// gerunds first. The negation goes right after the copula.
pub fn relation_pair(subject: &str, relation: &str, object: &str) -> Result<StatementPair, TextError> {
    let subject = collapse_ws(subject);
    let relation = collapse_ws(relation);
    let object = collapse_ws(object);
    if subject.is_empty() {
        return Err(TextError::Empty("subject"));
    }
    if relation.is_empty() {
        return Err(TextError::Empty("relation"));
    }
    if object.is_empty() {
        return Err(TextError::Empty("object"));
    }
    let (copula, rest) = split_relation(&relation);
    let join = |neg: bool| {
        let mut parts = vec![subject.as_str(), copula.as_str()];
        if neg {
            parts.push("not");
        }
        if !rest.is_empty() {
            parts.push(rest.as_str());
        }
        parts.push(object.as_str());
        parts.join(" ")
    };
    Ok(StatementPair {
        positive: join(false),
        negative: join(true),
    })
}

/// The relation phrase with a leading copula removed, as used in graph edges.
pub(crate) fn strip_copula(relation: &str) -> String {
    let relation = collapse_ws(relation);
    let mut words = relation.split(' ');
    match words.next() {
        Some(first) if COPULAS.contains(&first.to_lowercase().as_str()) => {
            words.collect::<Vec<_>>().join(" ")
        }
        _ => relation,
    }
}
