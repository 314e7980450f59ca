//! Compilation of layouts into plans over zero-shot capabilities.
//!
//! Attention chains become a detector call when they are a single `Find`
//! and a grounder call otherwise; either is followed by a threshold/top-1
//! selection. Answer modules then become a matcher call over a masked
//! template, a spatial heuristic, a count, an existence check, or a logic
//! combination of existence checks.
//!
//! A plan is a flat list of steps in post-order: every step refers to its
//! inputs by index, and inputs always come first.

mod grounding;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::answer::{relation_pair, MaskedTemplate, StatementPair, TextError, MASK};
use crate::backend::MatchIntent;
use crate::geometry::{Axis, RegionKind, SpatialPair};
use crate::layout::{validate, Layout, LayoutNode, ModuleName, NodeId, ValidationReport};

pub use grounding::{
    attention_path_length, describe, synthesize_grounding, with_article, GroundingQuery,
    NotAttentionSubtree, RelationLink, StructuredQuery, ANY_OBJECT,
};

pub type StepId = usize;

/// Query arguments that ask for a position instead of a matched answer.
pub const HPOSITION: &str = "hposition";
pub const VPOSITION: &str = "vposition";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Detector,
    Grounder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicOp {
    And,
    Or,
}

impl LogicOp {
    pub fn as_str(self) -> &'static str {
        match self {
            LogicOp::And => "and",
            LogicOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidates {
    Fixed(Vec<String>),
    /// The answer vocabulary supplied at execution time.
    Vocabulary,
}

/// How to state, for the oracle, what each candidate text claims.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "claim", rename_all = "snake_case")]
pub enum IntentRule {
    Name,
    Attribute,
    Relation,
    /// Candidate `i` names the object in region box `i`.
    Comparative { comparative: String },
}

impl IntentRule {
    pub fn intent_for(&self, candidate: &str, index: usize) -> MatchIntent {
        match self {
            IntentRule::Name => MatchIntent::Name {
                name: candidate.to_string(),
            },
            IntentRule::Attribute => MatchIntent::Attribute {
                attribute: candidate.to_string(),
                negated: false,
            },
            IntentRule::Relation => MatchIntent::Relation {
                relation: candidate.to_string(),
                negated: false,
            },
            IntentRule::Comparative { comparative } => MatchIntent::Comparative {
                comparative: comparative.clone(),
                subject: index,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanStep {
    Detect {
        object: String,
    },
    Ground {
        query: GroundingQuery,
    },
    /// Keeps boxes at or above the source's threshold and picks the best.
    ThresholdSelect {
        source: Source,
        input: StepId,
    },
    /// Builds a region from the top box of each input selection.
    Region {
        region: RegionKind,
        inputs: Vec<StepId>,
    },
    MatchTexts {
        template: MaskedTemplate,
        candidates: Candidates,
        intent: IntentRule,
        region: StepId,
    },
    #[serde(rename = "spd")]
    SpD {
        axis: Axis,
        input: StepId,
    },
    #[serde(rename = "spc")]
    SpC {
        pair: SpatialPair,
        subject: StepId,
        object: StepId,
    },
    Count {
        input: StepId,
    },
    ExistObject {
        object: String,
    },
    ExistAttr {
        nouns: Vec<String>,
        attributes: Vec<String>,
        target: StepId,
    },
    ExistRela {
        nouns: Vec<String>,
        relation: String,
        statements: StatementPair,
        subject: StepId,
        object: StepId,
    },
    Logic {
        op: LogicOp,
        left: StepId,
        right: StepId,
    },
}

impl PlanStep {
    pub fn kind(&self) -> &'static str {
        match self {
            PlanStep::Detect { .. } => "detect",
            PlanStep::Ground { .. } => "ground",
            PlanStep::ThresholdSelect { .. } => "threshold_select",
            PlanStep::Region { .. } => "region",
            PlanStep::MatchTexts { .. } => "match_texts",
            PlanStep::SpD { .. } => "spd",
            PlanStep::SpC { .. } => "spc",
            PlanStep::Count { .. } => "count",
            PlanStep::ExistObject { .. } => "exist_object",
            PlanStep::ExistAttr { .. } => "exist_attr",
            PlanStep::ExistRela { .. } => "exist_rela",
            PlanStep::Logic { .. } => "logic",
        }
    }

    pub fn inputs(&self) -> Vec<StepId> {
        match self {
            PlanStep::Detect { .. } | PlanStep::Ground { .. } | PlanStep::ExistObject { .. } => {
                Vec::new()
            }
            PlanStep::ThresholdSelect { input, .. }
            | PlanStep::SpD { input, .. }
            | PlanStep::Count { input } => vec![*input],
            PlanStep::Region { inputs, .. } => inputs.clone(),
            PlanStep::MatchTexts { region, .. } => vec![*region],
            PlanStep::ExistAttr { target, .. } => vec![*target],
            PlanStep::SpC {
                subject, object, ..
            }
            | PlanStep::ExistRela {
                subject, object, ..
            } => vec![*subject, *object],
            PlanStep::Logic { left, right, .. } => vec![*left, *right],
        }
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        match self {
            PlanStep::Detect { object } => format!("Detect \"{object}\""),
            PlanStep::Ground { query } => format!("Ground \"{}\"", query.sentence),
            PlanStep::ThresholdSelect { source, input } => {
                format!("ThresholdSelect {} #{input}", json_name(source))
            }
            PlanStep::Region { region, inputs } => format!(
                "Region {} {}",
                json_name(region),
                refs(inputs)
            ),
            PlanStep::MatchTexts {
                template,
                candidates,
                region,
                ..
            } => {
                let c = match candidates {
                    Candidates::Fixed(c) => format!("[{}]", c.join(", ")),
                    Candidates::Vocabulary => "vocabulary".to_string(),
                };
                format!("MatchTexts \"{template}\" over {c} in #{region}")
            }
            PlanStep::SpD { axis, input } => format!("SpD {} #{input}", json_name(axis)),
            PlanStep::SpC {
                pair,
                subject,
                object,
            } => format!(
                "SpC {} [{} | {}] #{subject} #{object}",
                json_name(&pair.axis),
                pair.before,
                pair.after
            ),
            PlanStep::Count { input } => format!("Count #{input}"),
            PlanStep::ExistObject { object } => format!("ExistObject \"{object}\""),
            PlanStep::ExistAttr {
                nouns,
                attributes,
                target,
            } => format!(
                "ExistAttr [{}] verify [{}] #{target}",
                attributes.join(", "),
                nouns.join(", ")
            ),
            PlanStep::ExistRela {
                nouns,
                statements,
                subject,
                object,
                ..
            } => format!(
                "ExistRela \"{}\" verify [{}] #{subject} #{object}",
                statements.positive,
                nouns.join(", ")
            ),
            PlanStep::Logic { op, left, right } => {
                format!("Logic {} #{left} #{right}", op.as_str())
            }
        }
    }
}

fn json_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn refs(ids: &[StepId]) -> String {
    ids.iter()
        .map(|i| format!("#{i}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Which layout nodes a step stands for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub nodes: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZeroShotPlan {
    /// Canonical text of the compiled layout.
    pub layout: String,
    pub steps: Vec<PlanStep>,
    /// Parallel to `steps`.
    pub provenance: Vec<Provenance>,
    pub root: StepId,
}

/// One line of the machine-readable plan listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub id: StepId,
    pub step: PlanStep,
    pub nodes: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ZeroShotPlan {
    pub fn step(&self, id: StepId) -> &PlanStep {
        &self.steps[id]
    }

    /// Layout node ids that no step accounts for.
    pub fn unmapped_nodes(&self, node_count: usize) -> Vec<NodeId> {
        let covered: BTreeSet<NodeId> = self
            .provenance
            .iter()
            .flat_map(|p| p.nodes.iter().copied())
            .collect();
        (0..node_count).filter(|n| !covered.contains(n)).collect()
    }

    /// Steps the given layout node maps to.
    pub fn steps_for_node(&self, node: NodeId) -> Vec<StepId> {
        self.provenance
            .iter()
            .enumerate()
            .filter(|(_, p)| p.nodes.contains(&node))
            .map(|(i, _)| i)
            .collect()
    }

    /// Indented tree rooted at the answer step.
    pub fn to_text(&self) -> String {
        fn walk(plan: &ZeroShotPlan, id: StepId, depth: usize, out: &mut String) {
            let _ = writeln!(
                out,
                "{:indent$}#{id} {}",
                "",
                plan.steps[id].summary(),
                indent = depth * 2
            );
            for input in plan.steps[id].inputs() {
                walk(plan, input, depth + 1, out);
            }
        }
        let mut out = String::new();
        walk(self, self.root, 0, &mut out);
        out
    }

    pub fn records(&self) -> Vec<StepRecord> {
        self.steps
            .iter()
            .zip(&self.provenance)
            .enumerate()
            .map(|(id, (step, p))| StepRecord {
                id,
                step: step.clone(),
                nodes: p.nodes.clone(),
                note: p.note.clone(),
            })
            .collect()
    }

    /// One JSON document per step, in execution order.
    pub fn to_jsonl(&self) -> String {
        self.records()
            .iter()
            .map(|r| serde_json::to_string(r).expect("plan steps always serialize") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("layout is invalid: {0}")]
    Invalid(ValidationReport),
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),
    #[error(transparent)]
    Synthesis(#[from] NotAttentionSubtree),
    #[error("{0} has no candidate answers")]
    MissingCandidates(ModuleName),
    #[error(transparent)]
    Text(#[from] TextError),
}

fn is_position_query(aspect: &str) -> Option<Axis> {
    match aspect.trim().to_lowercase().as_str() {
        HPOSITION => Some(Axis::Horizontal),
        VPOSITION => Some(Axis::Vertical),
        _ => None,
    }
}

fn phrase(node: &LayoutNode) -> Result<String, NotAttentionSubtree> {
    Ok(describe(node)?.phrase())
}

/// Statement template for a Choose or Compare root. `None` for a Choose
/// whose candidates are a spatial pair (those use the heuristic instead).
pub fn make_choose_template(layout: &Layout) -> Result<Option<MaskedTemplate>, CompileError> {
    let root = &layout.root;
    match root.module {
        ModuleName::Choose => {
            let [a, b] = root.args.as_slice() else {
                return Err(CompileError::MissingCandidates(root.module));
            };
            if SpatialPair::from_candidates(a, b).is_some() {
                return Ok(None);
            }
            let [x, y] = root.children.as_slice() else {
                return Err(CompileError::UnsupportedLayout(
                    "Choose needs two attention inputs".into(),
                ));
            };
            Ok(Some(relation_template(x, y)?))
        }
        ModuleName::Compare => {
            let comparative = root
                .args
                .first()
                .ok_or(CompileError::MissingCandidates(root.module))?;
            Ok(Some(comparative_template(comparative)?))
        }
        other => Err(CompileError::UnsupportedLayout(format!(
            "{other} has no statement template"
        ))),
    }
}

fn relation_template(x: &LayoutNode, y: &LayoutNode) -> Result<MaskedTemplate, CompileError> {
    Ok(MaskedTemplate::new(format!(
        "{} is {MASK} {}",
        with_article(&phrase(x)?),
        with_article(&phrase(y)?)
    ))?)
}

fn comparative_template(comparative: &str) -> Result<MaskedTemplate, CompileError> {
    Ok(MaskedTemplate::new(format!("the {MASK} is {comparative}"))?)
}

struct Compiler<'a> {
    ids: HashMap<*const LayoutNode, NodeId>,
    steps: Vec<PlanStep>,
    provenance: Vec<Provenance>,
    /// Selection step already emitted for an attention node.
    located: HashMap<NodeId, StepId>,
    _layout: &'a Layout,
}

impl<'a> Compiler<'a> {
    fn new(layout: &'a Layout) -> Self {
        let ids = layout
            .postorder_nodes()
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n as *const LayoutNode, i))
            .collect();
        Compiler {
            ids,
            steps: Vec::new(),
            provenance: Vec::new(),
            located: HashMap::new(),
            _layout: layout,
        }
    }

    fn id(&self, node: &LayoutNode) -> NodeId {
        self.ids[&(node as *const LayoutNode)]
    }

    fn emit(&mut self, step: PlanStep, nodes: Vec<NodeId>, note: Option<&str>) -> StepId {
        self.steps.push(step);
        self.provenance.push(Provenance {
            nodes,
            note: note.map(str::to_string),
        });
        self.steps.len() - 1
    }

    fn chain_ids(&self, node: &LayoutNode) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut cur = node;
        loop {
            out.push(self.id(cur));
            match cur.children.first() {
                Some(c) => cur = c,
                None => break,
            }
        }
        out.sort_unstable();
        out
    }

    /// Detector or grounder call plus selection for an attention chain.
    fn locate(&mut self, node: &LayoutNode) -> Result<StepId, CompileError> {
        if let Some(&done) = self.located.get(&self.id(node)) {
            return Ok(done);
        }
        let len = attention_path_length(node)?;
        let (call, source) = if len == 1 {
            let id = self.emit(
                PlanStep::Detect {
                    object: node.args[0].clone(),
                },
                vec![self.id(node)],
                None,
            );
            (id, Source::Detector)
        } else {
            let query = synthesize_grounding(node)?;
            let nodes = self.chain_ids(node);
            let id = self.emit(
                PlanStep::Ground { query },
                nodes,
                Some("attention chain folded into one grounding sentence"),
            );
            (id, Source::Grounder)
        };
        let selected = self.emit(
            PlanStep::ThresholdSelect {
                source,
                input: call,
            },
            vec![self.id(node)],
            None,
        );
        self.located.insert(self.id(node), selected);
        Ok(selected)
    }

    fn attention_child<'n>(&self, node: &'n LayoutNode, i: usize) -> Result<&'n LayoutNode, CompileError> {
        node.children
            .get(i)
            .filter(|c| c.module.is_attention())
            .ok_or_else(|| {
                CompileError::UnsupportedLayout(format!(
                    "{} input {} must be Find, Filter or Relocate",
                    node.module,
                    i + 1
                ))
            })
    }

    fn compile_root(&mut self, root: &LayoutNode) -> Result<StepId, CompileError> {
        let root_id = self.id(root);
        match root.module {
            ModuleName::Query => {
                let aspect = root.args.first().ok_or(CompileError::MissingCandidates(root.module))?;
                let sel = self.locate(self.attention_child(root, 0)?)?;
                if let Some(axis) = is_position_query(aspect) {
                    return Ok(self.emit(
                        PlanStep::SpD { axis, input: sel },
                        vec![root_id],
                        Some("position query answered by the spatial heuristic"),
                    ));
                }
                let region = self.emit(
                    PlanStep::Region {
                        region: RegionKind::Crop,
                        inputs: vec![sel],
                    },
                    vec![root_id],
                    None,
                );
                let intent = if aspect.trim().eq_ignore_ascii_case("name") {
                    IntentRule::Name
                } else {
                    IntentRule::Attribute
                };
                Ok(self.emit(
                    PlanStep::MatchTexts {
                        template: MaskedTemplate::bare(),
                        candidates: Candidates::Vocabulary,
                        intent,
                        region,
                    },
                    vec![root_id],
                    None,
                ))
            }
            ModuleName::Choose => {
                let [a, b] = root.args.as_slice() else {
                    return Err(CompileError::MissingCandidates(root.module));
                };
                let x = self.attention_child(root, 0)?;
                let y = self.attention_child(root, 1)?;
                let s0 = self.locate(x)?;
                let s1 = self.locate(y)?;
                if let Some(pair) = SpatialPair::from_candidates(a, b) {
                    return Ok(self.emit(
                        PlanStep::SpC {
                            pair,
                            subject: s0,
                            object: s1,
                        },
                        vec![root_id],
                        Some("spatial relation choice answered by the heuristic"),
                    ));
                }
                let template = relation_template(x, y)?;
                let region = self.emit(
                    PlanStep::Region {
                        region: RegionKind::MaskKeep,
                        inputs: vec![s0, s1],
                    },
                    vec![root_id],
                    None,
                );
                Ok(self.emit(
                    PlanStep::MatchTexts {
                        template,
                        candidates: Candidates::Fixed(vec![a.clone(), b.clone()]),
                        intent: IntentRule::Relation,
                        region,
                    },
                    vec![root_id],
                    None,
                ))
            }
            ModuleName::Compare => {
                let x = self.attention_child(root, 0)?;
                let y = self.attention_child(root, 1)?;
                let (comparative, candidates) = match root.args.as_slice() {
                    [c] => (c.clone(), vec![phrase(x)?, phrase(y)?]),
                    [c, a, b] => (c.clone(), vec![a.clone(), b.clone()]),
                    other => {
                        return Err(CompileError::UnsupportedLayout(format!(
                            "Compare takes a comparative and optionally two candidates, got {} arguments",
                            other.len()
                        )))
                    }
                };
                let template = comparative_template(&comparative)?;
                let s0 = self.locate(x)?;
                let s1 = self.locate(y)?;
                let region = self.emit(
                    PlanStep::Region {
                        region: RegionKind::MaskKeep,
                        inputs: vec![s0, s1],
                    },
                    vec![root_id],
                    None,
                );
                Ok(self.emit(
                    PlanStep::MatchTexts {
                        template,
                        candidates: Candidates::Fixed(candidates),
                        intent: IntentRule::Comparative { comparative },
                        region,
                    },
                    vec![root_id],
                    Some("comparison read as choosing which of the two objects fits the comparative"),
                ))
            }
            ModuleName::Count => {
                let sel = self.locate(self.attention_child(root, 0)?)?;
                Ok(self.emit(PlanStep::Count { input: sel }, vec![root_id], None))
            }
            ModuleName::Exist => self.compile_exist(root),
            ModuleName::And | ModuleName::Or => {
                let op = if root.module == ModuleName::And {
                    LogicOp::And
                } else {
                    LogicOp::Or
                };
                let [l, r] = root.children.as_slice() else {
                    return Err(CompileError::UnsupportedLayout(format!(
                        "{} needs two operands",
                        root.module
                    )));
                };
                if l.module != ModuleName::Exist || r.module != ModuleName::Exist {
                    return Err(CompileError::UnsupportedLayout(format!(
                        "{} operands must be Exist",
                        root.module
                    )));
                }
                let left = self.compile_exist(l)?;
                let right = self.compile_exist(r)?;
                Ok(self.emit(PlanStep::Logic { op, left, right }, vec![root_id], None))
            }
            other => Err(CompileError::UnsupportedLayout(format!(
                "{other} cannot produce an answer"
            ))),
        }
    }

    /// Traces the chain under an Exist node into object, attribute and
    /// relation checks.
    fn compile_exist(&mut self, exist: &LayoutNode) -> Result<StepId, CompileError> {
        let exist_id = self.id(exist);
        let child = self.attention_child(exist, 0)?;
        if child.module == ModuleName::Find {
            return Ok(self.emit(
                PlanStep::ExistObject {
                    object: child.args[0].clone(),
                },
                vec![exist_id, self.id(child)],
                None,
            ));
        }

        let mut nouns = Vec::new();
        let mut cur = child;
        loop {
            if cur.module == ModuleName::Find {
                nouns.push(cur.args[0].clone());
                break;
            }
            cur = &cur.children[0];
        }
        const NOUN_NOTE: &str = "objects to verify are the Find arguments of the traced chain";

        let mut checks = Vec::new();
        let mut cur = child;
        while cur.module != ModuleName::Find {
            match cur.module {
                ModuleName::Filter => {
                    let mut run = Vec::new();
                    let mut attributes = Vec::new();
                    let mut n = cur;
                    while n.module == ModuleName::Filter {
                        run.push(self.id(n));
                        attributes.push(n.args[0].clone());
                        n = &n.children[0];
                    }
                    attributes.reverse();
                    run.sort_unstable();
                    let target = self.locate(n)?;
                    checks.push(self.emit(
                        PlanStep::ExistAttr {
                            nouns: nouns.clone(),
                            attributes,
                            target,
                        },
                        run,
                        Some(NOUN_NOTE),
                    ));
                    cur = n;
                }
                ModuleName::Relocate => {
                    let target = &cur.children[0];
                    let relation = cur.args[0].clone();
                    let statements = relation_pair(
                        &with_article(ANY_OBJECT),
                        &relation,
                        &with_article(&phrase(target)?),
                    )?;
                    let subject = self.locate(cur)?;
                    let object = self.locate(target)?;
                    checks.push(self.emit(
                        PlanStep::ExistRela {
                            nouns: nouns.clone(),
                            relation,
                            statements,
                            subject,
                            object,
                        },
                        vec![self.id(cur)],
                        Some(NOUN_NOTE),
                    ));
                    cur = target;
                }
                other => {
                    return Err(CompileError::UnsupportedLayout(format!(
                        "{other} inside an Exist chain"
                    )))
                }
            }
        }

        let mut iter = checks.into_iter();
        let mut acc = iter.next().expect("a non-Find chain yields at least one check");
        let mut combined = false;
        for next in iter {
            acc = self.emit(
                PlanStep::Logic {
                    op: LogicOp::And,
                    left: acc,
                    right: next,
                },
                vec![exist_id],
                Some("every traced attribute and relation must hold"),
            );
            combined = true;
        }
        if !combined {
            self.provenance[acc].nodes.push(exist_id);
            self.provenance[acc].nodes.sort_unstable();
        }
        Ok(acc)
    }
}

/// Compiles a validated layout.
pub fn compile(layout: &Layout) -> Result<ZeroShotPlan, CompileError> {
    let report = validate(layout);
    if !report.is_valid() {
        return Err(CompileError::Invalid(report));
    }
    let mut c = Compiler::new(layout);
    let root = c.compile_root(&layout.root)?;
    Ok(ZeroShotPlan {
        layout: layout.to_canonical(),
        steps: c.steps,
        provenance: c.provenance,
        root,
    })
}
