//! Proptest strategies shared by the property tests and the acceptance run.

use proptest::prelude::*;

use modvqa_core::backend::{
    BackendError, BackendRequest, BackendResponse, DetectRequest, FilterAnswersRequest,
    GroundRequest, MatchIntent, MatchRequest,
};
use modvqa_core::geometry::{BoundingBox, Detection, RegionSpec};
use modvqa_core::layout::{Layout, LayoutNode, ModuleName};
use modvqa_core::plan::synthesize_grounding;

pub fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,6}( [a-z]{1,6}){0,2}"
}

pub fn text() -> impl Strategy<Value = String> {
    "[ -~]{0,24}"
}

/// Find/Filter/Relocate chains with at most `depth` modules.
pub fn attention(depth: u32) -> BoxedStrategy<LayoutNode> {
    let leaf = word().prop_map(|w| LayoutNode::leaf(ModuleName::Find, w));
    leaf.prop_recursive(depth.saturating_sub(1), 8, 1, |inner| {
        (prop_oneof![Just(ModuleName::Filter), Just(ModuleName::Relocate)], word(), inner)
            .prop_map(|(m, w, child)| LayoutNode::wrap(m, vec![w], child))
    })
    .boxed()
}

fn exist(chain: BoxedStrategy<LayoutNode>) -> impl Strategy<Value = LayoutNode> {
    chain.prop_map(|c| LayoutNode::new(ModuleName::Exist, vec![], vec![c]))
}

/// Valid layouts of every root type, at most six levels deep.
pub fn layout() -> impl Strategy<Value = Layout> {
    let pair = || (attention(4), attention(4));
    prop_oneof![
        exist(attention(5)),
        attention(5).prop_map(|c| LayoutNode::new(ModuleName::Count, vec![], vec![c])),
        (word(), attention(5)).prop_map(|(a, c)| LayoutNode::wrap(ModuleName::Query, vec![a], c)),
        (word(), word(), pair())
            .prop_map(|(a, b, (x, y))| LayoutNode::new(ModuleName::Choose, vec![a, b], vec![x, y])),
        (prop::collection::vec(word(), 1..=3), pair())
            .prop_map(|(args, (x, y))| LayoutNode::new(ModuleName::Compare, args, vec![x, y])),
        (
            prop_oneof![Just(ModuleName::And), Just(ModuleName::Or)],
            exist(attention(4)),
            exist(attention(4))
        )
            .prop_map(|(m, l, r)| LayoutNode::new(m, vec![], vec![l, r])),
    ]
    .prop_map(|root| Layout::from_root(root).expect("generated layouts are valid"))
}

pub fn unit() -> impl Strategy<Value = f64> {
    0.0..1.0f64
}

pub fn bbox() -> impl Strategy<Value = BoundingBox> {
    (unit(), unit(), 0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y, fw, fh)| {
        let w = ((1.0 - x) * fw).max(1e-6).min(1.0 - x);
        let h = ((1.0 - y) * fh).max(1e-6).min(1.0 - y);
        BoundingBox { x, y, w, h }
    })
}

pub fn detection() -> impl Strategy<Value = Detection> {
    prop::collection::vec((bbox(), 0.0..=1.0f64), 0..6).prop_map(|v| {
        let (boxes, scores) = v.into_iter().unzip();
        Detection { boxes, scores }
    })
}

pub fn region() -> impl Strategy<Value = RegionSpec> {
    prop_oneof![
        bbox().prop_map(RegionSpec::Crop),
        (bbox(), bbox()).prop_map(|(a, b)| RegionSpec::MaskKeep(a, b)),
    ]
}

pub fn intent() -> impl Strategy<Value = MatchIntent> {
    prop_oneof![
        word().prop_map(|name| MatchIntent::Name { name }),
        (word(), any::<bool>()).prop_map(|(attribute, negated)| MatchIntent::Attribute {
            attribute,
            negated
        }),
        (word(), any::<bool>()).prop_map(|(relation, negated)| MatchIntent::Relation {
            relation,
            negated
        }),
        (word(), 0..2usize).prop_map(|(comparative, subject)| MatchIntent::Comparative {
            comparative,
            subject
        }),
    ]
}

pub fn request() -> impl Strategy<Value = BackendRequest> {
    prop_oneof![
        (text(), text()).prop_map(|(image, object)| BackendRequest::Detect(DetectRequest {
            image,
            object
        })),
        (text(), text()).prop_map(|(image, sentence)| BackendRequest::Ground(GroundRequest {
            image,
            sentence,
            structured: None
        })),
        (text(), attention(4).prop_filter("chain", |c| c.module != ModuleName::Find)).prop_map(
            |(image, chain)| {
                let q = synthesize_grounding(&chain).unwrap();
                BackendRequest::Ground(GroundRequest {
                    image,
                    sentence: q.sentence,
                    structured: Some(q.structured),
                })
            }
        ),
        (text(), region(), prop::collection::vec((text(), intent()), 1..5), any::<bool>())
            .prop_map(|(image, region, pairs, with_intents)| {
                let (texts, intents): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                BackendRequest::Match(MatchRequest {
                    image,
                    region,
                    texts,
                    intents: with_intents.then_some(intents),
                })
            }),
        (text(), prop::collection::vec(text(), 0..6), 1..200usize).prop_map(
            |(template, candidates, k)| BackendRequest::FilterAnswers(FilterAnswersRequest {
                template,
                candidates,
                k
            })
        ),
    ]
}

pub fn response_for(req: &BackendRequest) -> BoxedStrategy<BackendResponse> {
    match req {
        BackendRequest::Detect(_) | BackendRequest::Ground(_) => {
            detection().prop_map(BackendResponse::Detection).boxed()
        }
        BackendRequest::Match(m) => prop::collection::vec(0.0..=1.0f64, m.texts.len())
            .prop_map(|scores| BackendResponse::Scores { scores })
            .boxed(),
        BackendRequest::FilterAnswers(_) => prop::collection::vec(text(), 0..6)
            .prop_map(|candidates| BackendResponse::Candidates { candidates })
            .boxed(),
    }
}

pub fn error() -> impl Strategy<Value = BackendError> {
    prop_oneof![
        text().prop_map(BackendError::UnknownImage),
        text().prop_map(BackendError::OracleNeedsStructured),
        text().prop_map(BackendError::Unavailable),
        text().prop_map(BackendError::InvalidRequest),
        text().prop_map(BackendError::InvalidResponse),
    ]
}

/// A request, an outcome of the right shape, and nothing else.
pub fn exchange() -> impl Strategy<Value = (BackendRequest, Result<BackendResponse, BackendError>)> {
    request().prop_flat_map(|req| {
        let ok = response_for(&req).prop_map(Ok);
        let outcome = prop_oneof![3 => ok, 1 => error().prop_map(Err)];
        (Just(req), outcome)
    })
}

/// Layouts the compiler accepts: Compare carries the comparative alone or
/// with both candidate phrases.
pub fn compilable_layout() -> impl Strategy<Value = Layout> {
    layout().prop_filter("Compare needs 1 or 3 arguments", |l| {
        l.root.module != ModuleName::Compare || matches!(l.root.args.len(), 1 | 3)
    })
}
