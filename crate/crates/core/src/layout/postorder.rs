//! Linear post-order encoding of layouts, one module per step.
//!
//! Each step serializes on its own line as `Name[arg1;arg2]`, or just `Name`
//! when the module has no arguments. Decoding replays the steps against an
//! operand stack, popping as many operands as the module has children.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::parse::SyntaxError;
use super::{Layout, LayoutNode, ModuleName, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostorderStep {
    pub module: ModuleName,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
}

impl fmt::Display for PostorderStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.module.as_str())?;
        if !self.args.is_empty() {
            write!(f, "[{}]", self.args.join(";"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PostorderError {
    #[error("step {step} ({module}) needs {needed} operand(s) but only {available} are on the stack")]
    StackUnderflow {
        step: usize,
        module: ModuleName,
        needed: usize,
        available: usize,
    },
    #[error("{count} operands left on the stack after the last step; expected exactly 1")]
    LeftoverOperands { count: usize },
    #[error("empty step list")]
    Empty,
    #[error("line {line}: {source}")]
    Syntax { line: usize, source: SyntaxError },
    #[error("decoded tree is not a valid layout: {0}")]
    Invalid(ValidationReport),
}

pub fn to_postorder(layout: &Layout) -> Vec<PostorderStep> {
    layout
        .postorder_nodes()
        .into_iter()
        .map(|n| PostorderStep {
            module: n.module,
            args: n.args.clone(),
        })
        .collect()
}

pub fn from_postorder(steps: &[PostorderStep]) -> Result<Layout, PostorderError> {
    if steps.is_empty() {
        return Err(PostorderError::Empty);
    }
    let mut stack: Vec<LayoutNode> = Vec::new();
    for (i, step) in steps.iter().enumerate() {
        let needed = step.module.child_count();
        if stack.len() < needed {
            return Err(PostorderError::StackUnderflow {
                step: i,
                module: step.module,
                needed,
                available: stack.len(),
            });
        }
        let children = stack.split_off(stack.len() - needed);
        stack.push(LayoutNode::new(step.module, step.args.clone(), children));
    }
    if stack.len() != 1 {
        return Err(PostorderError::LeftoverOperands { count: stack.len() });
    }
    let root = stack.pop().expect("stack holds exactly one node");
    Layout::from_root(root).map_err(PostorderError::Invalid)
}

pub fn print_postorder(steps: &[PostorderStep]) -> String {
    let mut out = String::new();
    for step in steps {
        out.push_str(&step.to_string());
        out.push('\n');
    }
    out
}

/// Reads the one-step-per-line text form. Blank lines are skipped.
pub fn parse_postorder(text: &str) -> Result<Vec<PostorderStep>, PostorderError> {
    let mut steps = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |position: usize, expected: &str| PostorderError::Syntax {
            line: idx + 1,
            source: SyntaxError {
                position,
                expected: expected.to_string(),
                found: line.get(position..).unwrap_or("").chars().take(16).collect(),
            },
        };
        let (name, args) = match line.find('[') {
            Some(open) => {
                if !line.ends_with(']') {
                    return Err(syntax(line.len(), "`]` at end of line"));
                }
                let inner = &line[open + 1..line.len() - 1];
                if inner.contains('[') || inner.contains(']') {
                    return Err(syntax(open + 1, "argument text without brackets"));
                }
                let args = inner.split(';').map(|a| a.trim().to_string()).collect();
                (line[..open].trim(), args)
            }
            None => (line, Vec::new()),
        };
        let module = name
            .parse::<ModuleName>()
            .map_err(|_| syntax(0, "module name"))?;
        steps.push(PostorderStep { module, args });
    }
    Ok(steps)
}
