//! Module-network layouts: the tree IR that questions are decomposed into.
//!
//! A layout is written in a small bracket DSL,
//!
//! ```text
//! node     := NAME args? children?
//! args     := '[' arg (';' arg)* ']'
//! children := '(' node (',' node)* ')'
//! NAME     := one of Find Relocate Filter Choose Compare Query Count Exist And Or
//! arg      := any text without '[' ']' ';'  (trimmed; must be non-empty)
//! ```
//!
//! so `Query[name](Relocate[to the left of](Find[garbage bin]))` is a three
//! node chain. Whitespace between tokens is ignored. Argument text is kept
//! verbatim apart from trimming, which lets relation phrases carry spaces
//! and commas.

mod parse;
mod postorder;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use parse::{parse_layout, parse_layout_bytes, parse_tree, SyntaxError};
pub use postorder::{
    from_postorder, parse_postorder, print_postorder, to_postorder, PostorderError, PostorderStep,
};
pub use validate::{validate, ValidationReport, Violation, ViolationKind};

/// The closed set of module names a layout may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModuleName {
    Find,
    Relocate,
    Filter,
    Choose,
    Compare,
    Query,
    Count,
    Exist,
    And,
    Or,
}

/// How many arguments a module accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgCount {
    Exactly(usize),
    AtLeast(usize),
}

impl ArgCount {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            ArgCount::Exactly(k) => n == k,
            ArgCount::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for ArgCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgCount::Exactly(k) => write!(f, "{k}"),
            ArgCount::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

impl ModuleName {
    pub const ALL: [ModuleName; 10] = [
        ModuleName::Find,
        ModuleName::Relocate,
        ModuleName::Filter,
        ModuleName::Choose,
        ModuleName::Compare,
        ModuleName::Query,
        ModuleName::Count,
        ModuleName::Exist,
        ModuleName::And,
        ModuleName::Or,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleName::Find => "Find",
            ModuleName::Relocate => "Relocate",
            ModuleName::Filter => "Filter",
            ModuleName::Choose => "Choose",
            ModuleName::Compare => "Compare",
            ModuleName::Query => "Query",
            ModuleName::Count => "Count",
            ModuleName::Exist => "Exist",
            ModuleName::And => "And",
            ModuleName::Or => "Or",
        }
    }

    /// Number of child layouts the module consumes.
    pub fn child_count(self) -> usize {
        match self {
            ModuleName::Find => 0,
            ModuleName::Relocate
            | ModuleName::Filter
            | ModuleName::Query
            | ModuleName::Count
            | ModuleName::Exist => 1,
            ModuleName::Choose | ModuleName::Compare | ModuleName::And | ModuleName::Or => 2,
        }
    }

    pub fn arg_count(self) -> ArgCount {
        match self {
            ModuleName::Find | ModuleName::Relocate | ModuleName::Filter | ModuleName::Query => {
                ArgCount::Exactly(1)
            }
            ModuleName::Choose => ArgCount::Exactly(2),
            ModuleName::Compare => ArgCount::AtLeast(1),
            ModuleName::Count | ModuleName::Exist | ModuleName::And | ModuleName::Or => {
                ArgCount::Exactly(0)
            }
        }
    }

    /// Modules whose output is an attention over image regions.
    pub fn is_attention(self) -> bool {
        matches!(
            self,
            ModuleName::Find | ModuleName::Relocate | ModuleName::Filter
        )
    }

    /// Modules whose output is an answer; only these may be a layout root.
    pub fn is_answer(self) -> bool {
        !self.is_attention()
    }
}

impl fmt::Display for ModuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown module `{0}`")]
pub struct UnknownModule(pub String);

impl FromStr for ModuleName {
    type Err = UnknownModule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModuleName::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownModule(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayoutNode {
    pub module: ModuleName,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<LayoutNode>,
}

impl LayoutNode {
    pub fn new(module: ModuleName, args: Vec<String>, children: Vec<LayoutNode>) -> Self {
        LayoutNode {
            module,
            args,
            children,
        }
    }

    pub fn leaf(module: ModuleName, arg: impl Into<String>) -> Self {
        LayoutNode::new(module, vec![arg.into()], Vec::new())
    }

    pub fn wrap(module: ModuleName, args: Vec<String>, child: LayoutNode) -> Self {
        LayoutNode::new(module, args, vec![child])
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(LayoutNode::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(LayoutNode::depth).max().unwrap_or(0)
    }

    /// Writes the canonical DSL form.
    fn write_canonical(&self, out: &mut String) {
        out.push_str(self.module.as_str());
        if !self.args.is_empty() {
            out.push('[');
            out.push_str(&self.args.join(";"));
            out.push(']');
        }
        if !self.children.is_empty() {
            out.push('(');
            for (i, child) in self.children.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                child.write_canonical(out);
            }
            out.push(')');
        }
    }

    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }
}

impl fmt::Display for LayoutNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

/// Identifier of a layout node: its index in the post-order traversal.
pub type NodeId = usize;

/// A parsed and validated layout. Equality compares trees only; the
/// original source text is kept for reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layout {
    pub root: LayoutNode,
    pub source: String,
}

impl PartialEq for Layout {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Eq for Layout {}

impl Layout {
    /// Wraps a tree, checking every structural invariant.
    pub fn from_root(root: LayoutNode) -> Result<Layout, ValidationReport> {
        let report = validate::validate_node_tree(&root);
        if report.is_valid() {
            let source = root.to_canonical();
            Ok(Layout { root, source })
        } else {
            Err(report)
        }
    }

    pub fn to_canonical(&self) -> String {
        self.root.to_canonical()
    }

    /// Visits nodes in post-order, handing each its [`NodeId`].
    pub fn postorder_nodes(&self) -> Vec<&LayoutNode> {
        fn walk<'a>(node: &'a LayoutNode, out: &mut Vec<&'a LayoutNode>) {
            for child in &node.children {
                walk(child, out);
            }
            out.push(node);
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// Everything that can go wrong turning text into a [`Layout`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayoutError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown module `{name}` at byte {position}")]
    UnknownModule { name: String, position: usize },
    #[error("arity violation: {0}")]
    ArityViolation(String),
    #[error("empty argument: {0}")]
    EmptyArgument(String),
    #[error("invalid root: {0}")]
    InvalidRoot(String),
}
