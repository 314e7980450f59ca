//! Grounding descriptions synthesized from attention chains.
//!
//! The sentence is always rebuilt from the structured form:
//!
//! * `Find[X]` reads as `X`
//! * `Filter[A](T)` puts `A` in front of the phrase for `T` (after a
//!   leading "the", if there is one)
//! * `Relocate[R](T)` reads as `the object R the <T>`, without doubling an
//!   article that `<T>` already starts with

use serde::{Deserialize, Serialize};

use crate::answer::collapse_ws;
use crate::layout::{LayoutNode, ModuleName};

/// Head noun that matches any object.
pub const ANY_OBJECT: &str = "object";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationLink {
    pub relation: String,
    pub target: StructuredQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuredQuery {
    pub head: String,
    /// In the order they were applied, innermost first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relation_chain: Vec<RelationLink>,
}

impl StructuredQuery {
    pub fn object(head: impl Into<String>) -> StructuredQuery {
        StructuredQuery {
            head: head.into(),
            attributes: Vec::new(),
            relation_chain: Vec::new(),
        }
    }

    /// Natural-language phrase for this description.
    pub fn phrase(&self) -> String {
        let core = if self.relation_chain.is_empty() {
            self.head.clone()
        } else {
            let clauses: Vec<String> = self
                .relation_chain
                .iter()
                .map(|link| format!("{} {}", link.relation, with_article(&link.target.phrase())))
                .collect();
            format!("the {} {}", self.head, clauses.join(" and "))
        };
        if self.attributes.is_empty() {
            return core;
        }
        let adjectives: Vec<&str> = self.attributes.iter().rev().map(String::as_str).collect();
        let adjectives = adjectives.join(" ");
        match core.strip_prefix("the ") {
            Some(rest) => format!("the {adjectives} {rest}"),
            None => format!("{adjectives} {core}"),
        }
    }

    /// Number of modules this description stands for.
    pub fn hops(&self) -> usize {
        1 + self.attributes.len()
            + self
                .relation_chain
                .iter()
                .map(|l| l.target.hops())
                .sum::<usize>()
    }
}

/// Prefixes "the " unless the phrase already starts with it.
pub fn with_article(phrase: &str) -> String {
    if phrase.starts_with("the ") {
        phrase.to_string()
    } else {
        format!("the {phrase}")
    }
}

/// A natural sentence for the grounder plus the structure it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundingQuery {
    pub sentence: String,
    pub structured: StructuredQuery,
}

impl GroundingQuery {
    pub fn new(structured: StructuredQuery) -> GroundingQuery {
        GroundingQuery {
            sentence: collapse_ws(&structured.phrase()),
            structured,
        }
    }

    /// Rebuilds the sentence from the structured form.
    pub fn resynthesized(&self) -> GroundingQuery {
        GroundingQuery::new(self.structured.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{module} does not produce attention; expected Find, Filter or Relocate")]
pub struct NotAttentionSubtree {
    pub module: ModuleName,
}

/// Structured description of what an attention chain locates.
pub fn describe(node: &LayoutNode) -> Result<StructuredQuery, NotAttentionSubtree> {
    let not_attention = || NotAttentionSubtree {
        module: node.module,
    };
    let arg = node.args.first().ok_or_else(not_attention)?;
    match node.module {
        ModuleName::Find => Ok(StructuredQuery::object(arg.clone())),
        ModuleName::Filter => {
            let mut inner = describe(node.children.first().ok_or_else(not_attention)?)?;
            inner.attributes.push(arg.clone());
            Ok(inner)
        }
        ModuleName::Relocate => {
            let target = describe(node.children.first().ok_or_else(not_attention)?)?;
            Ok(StructuredQuery {
                head: ANY_OBJECT.to_string(),
                attributes: Vec::new(),
                relation_chain: vec![RelationLink {
                    relation: arg.clone(),
                    target,
                }],
            })
        }
        _ => Err(not_attention()),
    }
}

/// Counts the modules on the chain from the leaf Find up to `node`.
pub fn attention_path_length(node: &LayoutNode) -> Result<usize, NotAttentionSubtree> {
    match node.module {
        ModuleName::Find if node.children.is_empty() => Ok(1),
        ModuleName::Filter | ModuleName::Relocate if node.children.len() == 1 => {
            Ok(1 + attention_path_length(&node.children[0])?)
        }
        module => Err(NotAttentionSubtree { module }),
    }
}

/// Grounding query for a chain longer than a single Find.
pub fn synthesize_grounding(node: &LayoutNode) -> Result<GroundingQuery, NotAttentionSubtree> {
    if attention_path_length(node)? <= 1 {
        return Err(NotAttentionSubtree {
            module: node.module,
        });
    }
    Ok(GroundingQuery::new(describe(node)?))
}
