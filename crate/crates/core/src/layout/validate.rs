use std::fmt;

use serde::Serialize;

use super::{Layout, LayoutNode, ModuleName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ChildCount,
    ArgCount,
    EmptyArgument,
    /// And/Or operand that is not an Exist.
    LogicOperand,
    /// A module that consumes attention given something else.
    AttentionInput,
    InvalidRoot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Child indices from the root down to the offending node.
    pub path: Vec<usize>,
    pub module: ModuleName,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{} (at root)", self.message)
        } else {
            let path: Vec<String> = self.path.iter().map(usize::to_string).collect();
            write!(f, "{} (at /{})", self.message, path.join("/"))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.message.clone()).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural rule on a layout and reports all violations.
pub fn validate(layout: &Layout) -> ValidationReport {
    validate_node_tree(&layout.root)
}

pub(crate) fn validate_node_tree(root: &LayoutNode) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !root.module.is_answer() {
        report.violations.push(Violation {
            path: Vec::new(),
            module: root.module,
            kind: ViolationKind::InvalidRoot,
            message: format!("{} cannot be the root; a layout must produce an answer", root.module),
        });
    }
    let mut path = Vec::new();
    check_node(root, &mut path, &mut report);
    report
}

fn plural(n: usize, one: &str, many: &str) -> String {
    if n == 1 {
        format!("{n} {one}")
    } else {
        format!("{n} {many}")
    }
}

fn check_node(node: &LayoutNode, path: &mut Vec<usize>, report: &mut ValidationReport) {
    let mut push = |kind: ViolationKind, message: String, path: &[usize]| {
        report.violations.push(Violation {
            path: path.to_vec(),
            module: node.module,
            kind,
            message,
        })
    };

    let want_children = node.module.child_count();
    if node.children.len() != want_children {
        push(
            ViolationKind::ChildCount,
            format!(
                "{} requires {}",
                node.module,
                plural(want_children, "child", "children")
            ),
            path,
        );
    }

    let want_args = node.module.arg_count();
    if !want_args.accepts(node.args.len()) {
        let noun = match want_args {
            super::ArgCount::Exactly(1) | super::ArgCount::AtLeast(1) => "argument",
            _ => "arguments",
        };
        push(
            ViolationKind::ArgCount,
            format!("{} requires {} {}", node.module, want_args, noun),
            path,
        );
    }

    for (i, arg) in node.args.iter().enumerate() {
        if arg.trim().is_empty() {
            push(
                ViolationKind::EmptyArgument,
                format!("{} argument {} is empty", node.module, i + 1),
                path,
            );
        } else if arg.trim() != arg {
            push(
                ViolationKind::EmptyArgument,
                format!("{} argument {} has surrounding whitespace", node.module, i + 1),
                path,
            );
        }
    }

    for child in &node.children {
        match node.module {
            ModuleName::And | ModuleName::Or => {
                if child.module != ModuleName::Exist {
                    push(
                        ViolationKind::LogicOperand,
                        format!(
                            "{} operands must both be Exist, found {}",
                            node.module, child.module
                        ),
                        path,
                    );
                }
            }
            ModuleName::Find => {}
            _ => {
                if !child.module.is_attention() {
                    push(
                        ViolationKind::AttentionInput,
                        format!(
                            "{} takes attention inputs (Find/Filter/Relocate), found {}",
                            node.module, child.module
                        ),
                        path,
                    );
                }
            }
        }
    }

    for (i, child) in node.children.iter().enumerate() {
        path.push(i);
        check_node(child, path, report);
        path.pop();
    }
}
