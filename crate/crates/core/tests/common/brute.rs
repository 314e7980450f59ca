//! Direct reading of a layout against a scene graph. Shares nothing with the
//! compiler or the oracle backend beyond the data types.

use std::collections::HashMap;

use modvqa_core::backend::{SceneGraph, SceneObject};
use modvqa_core::layout::{LayoutNode, ModuleName};

pub struct Brute<'a> {
    pub scene: &'a SceneGraph,
    pub aliases: &'a HashMap<String, String>,
    pub vocab: &'a [String],
}

fn norm(s: &str) -> String {
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn rel(s: &str) -> String {
    let n = norm(s);
    for c in ["is ", "are ", "was ", "were "] {
        if let Some(rest) = n.strip_prefix(c) {
            return rest.to_string();
        }
    }
    n
}

fn yn(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

impl Brute<'_> {
    fn canon(&self, s: &str) -> String {
        let n = norm(s);
        self.aliases.get(&n).cloned().unwrap_or(n)
    }

    fn object(&self, id: &str) -> &SceneObject {
        self.scene.objects.iter().find(|o| o.id == id).unwrap()
    }

    pub fn edge(&self, a: &SceneObject, relation: &str, b: &SceneObject) -> bool {
        a.relations
            .iter()
            .any(|r| r.target == b.id && rel(&r.relation) == rel(relation))
    }

    fn has_attr(o: &SceneObject, a: &str) -> bool {
        o.attributes.iter().any(|x| norm(x) == norm(a))
    }

    pub fn satisfies(&self, o: &SceneObject, n: &LayoutNode) -> bool {
        match n.module {
            ModuleName::Find => self.canon(&o.name) == self.canon(&n.args[0]),
            ModuleName::Filter => Self::has_attr(o, &n.args[0]) && self.satisfies(o, &n.children[0]),
            ModuleName::Relocate => self.scene.objects.iter().any(|t| {
                self.edge(o, &n.args[0], t) && self.satisfies(t, &n.children[0])
            }),
            m => panic!("{m:?} is not an attention module"),
        }
    }

    pub fn referent(&self, n: &LayoutNode) -> Option<&SceneObject> {
        self.scene.objects.iter().find(|o| self.satisfies(o, n))
    }

    pub fn exist(&self, n: &LayoutNode) -> bool {
        let child = &n.children[0];
        if child.module == ModuleName::Find {
            return self.referent(child).is_some();
        }
        let mut leaf = child;
        while leaf.module != ModuleName::Find {
            leaf = &leaf.children[0];
        }
        if self.referent(leaf).is_none() {
            return false;
        }
        let mut ok = true;
        let mut cur = child;
        while cur.module != ModuleName::Find {
            if cur.module == ModuleName::Filter {
                let mut attrs = Vec::new();
                while cur.module == ModuleName::Filter {
                    attrs.push(cur.args[0].as_str());
                    cur = &cur.children[0];
                }
                ok &= match self.referent(cur) {
                    Some(x) => attrs.iter().all(|a| Self::has_attr(x, a)),
                    None => false,
                };
            } else {
                let s = self.referent(cur);
                let o = self.referent(&cur.children[0]);
                ok &= matches!((s, o), (Some(s), Some(o)) if self.edge(s, &cur.args[0], o));
                cur = &cur.children[0];
            }
        }
        ok
    }

    fn phrase(n: &LayoutNode) -> String {
        match n.module {
            ModuleName::Find => n.args[0].clone(),
            ModuleName::Filter => {
                let p = Self::phrase(&n.children[0]);
                match p.strip_prefix("the ") {
                    Some(rest) => format!("the {} {rest}", n.args[0]),
                    None => format!("{} {p}", n.args[0]),
                }
            }
            _ => {
                let p = Self::phrase(&n.children[0]);
                let p = if p.starts_with("the ") { p } else { format!("the {p}") };
                format!("the object {} {p}", n.args[0])
            }
        }
    }

    /// `None` when the question has no referent to answer about.
    pub fn answer(&self, root: &LayoutNode) -> Option<String> {
        let kids = &root.children;
        match root.module {
            ModuleName::Exist => Some(yn(self.exist(root))),
            ModuleName::And => Some(yn(self.exist(&kids[0]) && self.exist(&kids[1]))),
            ModuleName::Or => Some(yn(self.exist(&kids[0]) || self.exist(&kids[1]))),
            ModuleName::Count => Some(
                self.scene
                    .objects
                    .iter()
                    .filter(|o| self.satisfies(o, &kids[0]))
                    .count()
                    .to_string(),
            ),
            ModuleName::Query => {
                let x = self.referent(&kids[0])?;
                let aspect = norm(&root.args[0]);
                match aspect.as_str() {
                    "hposition" => Some(if x.bbox.x < 0.5 { "left" } else { "right" }.into()),
                    "vposition" => Some(if x.bbox.y < 0.5 { "top" } else { "bottom" }.into()),
                    "name" => self
                        .vocab
                        .iter()
                        .find(|v| self.canon(v) == self.canon(&x.name))
                        .cloned(),
                    _ => self.vocab.iter().find(|v| Self::has_attr(x, v)).cloned(),
                }
            }
            ModuleName::Choose => {
                let x = self.referent(&kids[0])?;
                let y = self.referent(&kids[1])?;
                let (a, b) = (&root.args[0], &root.args[1]);
                let axes: [(&[&str], &[&str], f64, f64); 2] = [
                    (&["to the left of"], &["to the right of"], x.bbox.x, y.bbox.x),
                    (
                        &["above", "on top of"],
                        &["under", "below", "beneath", "underneath"],
                        x.bbox.y,
                        y.bbox.y,
                    ),
                ];
                for (before, after, xv, yv) in axes {
                    for (p, q) in [(a, b), (b, a)] {
                        if before.contains(&norm(p).as_str()) && after.contains(&norm(q).as_str()) {
                            return Some(if xv < yv { p.clone() } else { q.clone() });
                        }
                    }
                }
                Some(
                    root.args
                        .iter()
                        .find(|c| self.edge(x, c, y))
                        .unwrap_or(&root.args[0])
                        .clone(),
                )
            }
            ModuleName::Compare => {
                let pair = [self.referent(&kids[0])?, self.referent(&kids[1])?];
                let cands: Vec<String> = if root.args.len() == 1 {
                    kids.iter().map(Self::phrase).collect()
                } else {
                    root.args[1..].to_vec()
                };
                let c = &root.args[0];
                for i in 0..2 {
                    let (s, o) = (pair[i], pair[1 - i]);
                    if self.edge(s, &format!("{c} than"), o) || self.edge(s, c, o) {
                        return Some(cands[i].clone());
                    }
                }
                Some(cands[0].clone())
            }
            m => panic!("{m:?} is not an answer module"),
        }
    }

    /// Boxes of the objects a chain points at, in scene order.
    pub fn boxes_for(&self, n: &LayoutNode) -> Vec<&SceneObject> {
        self.scene.objects.iter().filter(|o| self.satisfies(o, n)).collect()
    }

    pub fn by_id(&self, id: &str) -> &SceneObject {
        self.object(id)
    }
}
