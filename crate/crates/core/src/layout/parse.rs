use std::fmt;

use super::validate::{validate_node_tree, ViolationKind};
use super::{Layout, LayoutError, LayoutNode, ModuleName};

/// Nesting limit; keeps hostile input from exhausting the stack.
const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct SyntaxError {
    /// Byte offset into the input.
    pub position: usize,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at byte {}: expected {}, found {}",
            self.position, self.expected, self.found
        )
    }
}

/// Parses and validates a layout.
pub fn parse_layout(text: &str) -> Result<Layout, LayoutError> {
    let root = parse_tree(text)?;
    let report = validate_node_tree(&root);
    if let Some(v) = report.violations.first() {
        let msg = v.to_string();
        return Err(match v.kind {
            ViolationKind::EmptyArgument => LayoutError::EmptyArgument(msg),
            ViolationKind::InvalidRoot => LayoutError::InvalidRoot(msg),
            ViolationKind::ChildCount
            | ViolationKind::ArgCount
            | ViolationKind::LogicOperand
            | ViolationKind::AttentionInput => LayoutError::ArityViolation(msg),
        });
    }
    Ok(Layout {
        root,
        source: text.to_string(),
    })
}

/// Like [`parse_layout`], for input that may not be UTF-8.
pub fn parse_layout_bytes(bytes: &[u8]) -> Result<Layout, LayoutError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_layout(text),
        Err(e) => Err(SyntaxError {
            position: e.valid_up_to(),
            expected: "valid UTF-8".into(),
            found: "invalid byte sequence".into(),
        }
        .into()),
    }
}

/// Parses the tree structure only. Arity and argument rules are left to
/// [`super::validate`].
pub fn parse_tree(text: &str) -> Result<LayoutNode, LayoutError> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error("module name").into());
    }
    let node = p.node(0)?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("end of input").into());
    }
    Ok(node)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn error(&self, expected: &str) -> SyntaxError {
        let found = match self.peek() {
            Some(c) => format!("`{c}`"),
            None => "end of input".to_string(),
        };
        SyntaxError {
            position: self.pos,
            expected: expected.to_string(),
            found,
        }
    }

    fn node(&mut self, depth: usize) -> Result<LayoutNode, LayoutError> {
        if depth >= MAX_DEPTH {
            return Err(SyntaxError {
                position: self.pos,
                expected: format!("nesting depth below {MAX_DEPTH}"),
                found: "deeper nesting".into(),
            }
            .into());
        }
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(self.error("module name").into());
        }
        let name = &self.src[start..self.pos];
        let module: ModuleName = name.parse().map_err(|_| LayoutError::UnknownModule {
            name: name.to_string(),
            position: start,
        })?;

        self.skip_ws();
        let args = if self.peek() == Some('[') {
            self.pos += 1;
            self.args()?
        } else {
            Vec::new()
        };

        self.skip_ws();
        let mut children = Vec::new();
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                children.push(self.node(depth + 1)?);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("`,` or `)`").into()),
                }
            }
        }
        Ok(LayoutNode {
            module,
            args,
            children,
        })
    }

    /// Reads `arg (';' arg)* ']'`, the opening bracket already consumed.
    fn args(&mut self) -> Result<Vec<String>, SyntaxError> {
        let mut args = Vec::new();
        let mut start = self.pos;
        loop {
            match self.peek() {
                Some(';') => {
                    args.push(self.src[start..self.pos].trim().to_string());
                    self.pos += 1;
                    start = self.pos;
                }
                Some(']') => {
                    args.push(self.src[start..self.pos].trim().to_string());
                    self.pos += 1;
                    return Ok(args);
                }
                Some('[') | None => return Err(self.error("`;` or `]`")),
                Some(c) => self.pos += c.len_utf8(),
            }
        }
    }
}
