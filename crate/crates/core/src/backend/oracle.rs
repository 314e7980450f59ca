use std::collections::HashMap;
use std::path::Path;

use super::scene::{load_aliases, load_scene_dir, normalize_name, normalize_relation};
use super::{
    Backend, BackendError, BackendRequest, BackendResponse, DetectRequest, FilterAnswersRequest,
    GroundRequest, MatchIntent, MatchRequest, SceneError, SceneGraph, SceneObject,
};
use crate::geometry::{BoundingBox, Detection};
use crate::plan::{StructuredQuery, ANY_OBJECT};

/// Tolerance when matching a region box back to an annotated object.
const BOX_TOLERANCE: f64 = 1e-9;

/// Answers every capability from ground-truth scene graphs. Detection and
/// grounding return annotated boxes with score 1.0 in annotation order;
/// matching scores 1.0 for texts whose intent holds and 0.0 otherwise.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    scenes: HashMap<String, SceneGraph>,
    aliases: HashMap<String, String>,
}

impl OracleBackend {
    pub fn new(scenes: impl IntoIterator<Item = SceneGraph>) -> OracleBackend {
        OracleBackend {
            scenes: scenes
                .into_iter()
                .map(|s| (s.image_id.clone(), s))
                .collect(),
            aliases: HashMap::new(),
        }
    }

    /// Names on the left are treated as the name on the right.
    pub fn with_aliases(mut self, aliases: HashMap<String, String>) -> OracleBackend {
        self.aliases = aliases
            .into_iter()
            .map(|(k, v)| (normalize_name(&k), normalize_name(&v)))
            .collect();
        self
    }

    /// Loads a scene directory, picking up `aliases.json` when present.
    pub fn from_dir(dir: &Path) -> Result<OracleBackend, SceneError> {
        let scenes = load_scene_dir(dir)?;
        let alias_path = dir.join("aliases.json");
        let aliases = if alias_path.exists() {
            load_aliases(&alias_path)?
        } else {
            HashMap::new()
        };
        Ok(OracleBackend {
            scenes,
            aliases,
        })
    }

    pub fn scene(&self, image: &str) -> Option<&SceneGraph> {
        self.scenes.get(image)
    }

    pub fn image_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.scenes.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }

    fn canonical(&self, name: &str) -> String {
        let n = normalize_name(name);
        self.aliases.get(&n).cloned().unwrap_or(n)
    }

    fn scene_for(&self, image: &str) -> Result<&SceneGraph, BackendError> {
        self.scenes
            .get(image)
            .ok_or_else(|| BackendError::UnknownImage(image.to_string()))
    }

    fn name_matches(&self, obj: &SceneObject, name: &str) -> bool {
        self.canonical(&obj.name) == self.canonical(name)
    }

    fn has_attribute(obj: &SceneObject, attribute: &str) -> bool {
        let want = normalize_name(attribute);
        obj.attributes.iter().any(|a| normalize_name(a) == want)
    }

    fn has_edge(from: &SceneObject, relation: &str, to: &SceneObject) -> bool {
        let want = normalize_relation(relation);
        from.relations
            .iter()
            .any(|r| r.target == to.id && normalize_relation(&r.relation) == want)
    }

    fn satisfies(&self, scene: &SceneGraph, obj: &SceneObject, q: &StructuredQuery) -> bool {
        let head_ok = normalize_name(&q.head) == ANY_OBJECT || self.name_matches(obj, &q.head);
        head_ok
            && q.attributes.iter().all(|a| Self::has_attribute(obj, a))
            && q.relation_chain.iter().all(|link| {
                scene.objects.iter().any(|t| {
                    Self::has_edge(obj, &link.relation, t)
                        && self.satisfies(scene, t, &link.target)
                })
            })
    }

    fn detection(objs: impl Iterator<Item = BoundingBox>) -> Detection {
        let boxes: Vec<BoundingBox> = objs.collect();
        let scores = vec![1.0; boxes.len()];
        Detection { boxes, scores }
    }

    fn answer_detect(&self, req: &DetectRequest) -> Result<BackendResponse, BackendError> {
        let scene = self.scene_for(&req.image)?;
        let det = Self::detection(
            scene
                .objects
                .iter()
                .filter(|o| self.name_matches(o, &req.object))
                .map(|o| o.bbox),
        );
        Ok(BackendResponse::Detection(det))
    }

    fn answer_ground(&self, req: &GroundRequest) -> Result<BackendResponse, BackendError> {
        let scene = self.scene_for(&req.image)?;
        let q = req
            .structured
            .as_ref()
            .ok_or_else(|| BackendError::OracleNeedsStructured("grounding query".into()))?;
        let det = Self::detection(
            scene
                .objects
                .iter()
                .filter(|o| self.satisfies(scene, o, q))
                .map(|o| o.bbox),
        );
        Ok(BackendResponse::Detection(det))
    }

    fn objects_at<'s>(scene: &'s SceneGraph, b: &BoundingBox) -> Vec<&'s SceneObject> {
        scene
            .objects
            .iter()
            .filter(|o| {
                (o.bbox.x - b.x).abs() <= BOX_TOLERANCE
                    && (o.bbox.y - b.y).abs() <= BOX_TOLERANCE
                    && (o.bbox.w - b.w).abs() <= BOX_TOLERANCE
                    && (o.bbox.h - b.h).abs() <= BOX_TOLERANCE
            })
            .collect()
    }

    fn holds(&self, at: &[Vec<&SceneObject>], intent: &MatchIntent) -> bool {
        match intent {
            MatchIntent::Name { name } => at
                .iter()
                .flatten()
                .any(|o| self.name_matches(o, name)),
            MatchIntent::Attribute {
                attribute,
                negated,
            } => {
                let found = at[0].iter().any(|o| Self::has_attribute(o, attribute));
                found != *negated
            }
            MatchIntent::Relation { relation, negated } => {
                let found = at.len() == 2
                    && at[0].iter().any(|s| {
                        at[1].iter().any(|t| Self::has_edge(s, relation, t))
                    });
                found != *negated
            }
            MatchIntent::Comparative {
                comparative,
                subject,
            } => {
                if at.len() != 2 || *subject > 1 {
                    return false;
                }
                let relation = format!("{} than", normalize_name(comparative));
                at[*subject].iter().any(|s| {
                    at[1 - subject].iter().any(|t| {
                        Self::has_edge(s, &relation, t)
                            || Self::has_edge(s, comparative, t)
                    })
                })
            }
        }
    }

    fn answer_match_texts(&self, req: &MatchRequest) -> Result<BackendResponse, BackendError> {
        let scene = self.scene_for(&req.image)?;
        if req.texts.is_empty() {
            return Err(BackendError::InvalidRequest("match needs at least one text".into()));
        }
        let intents = req
            .intents
            .as_ref()
            .ok_or_else(|| BackendError::OracleNeedsStructured("match intent".into()))?;
        if intents.len() != req.texts.len() {
            return Err(BackendError::InvalidRequest(format!(
                "{} intents for {} texts",
                intents.len(),
                req.texts.len()
            )));
        }
        let at: Vec<Vec<&SceneObject>> = req
            .region
            .boxes()
            .iter()
            .map(|b| Self::objects_at(scene, b))
            .collect();
        let scores = intents
            .iter()
            .map(|i| if self.holds(&at, i) { 1.0 } else { 0.0 })
            .collect();
        Ok(BackendResponse::Scores { scores })
    }

    fn answer_filter_answers(&self, req: &FilterAnswersRequest) -> Result<BackendResponse, BackendError> {
        if req.k == 0 {
            return Err(BackendError::InvalidRequest("k must be at least 1".into()));
        }
        Ok(BackendResponse::Candidates {
            candidates: req.candidates.iter().take(req.k).cloned().collect(),
        })
    }
}

impl Backend for OracleBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        match request {
            BackendRequest::Detect(r) => self.answer_detect(r),
            BackendRequest::Ground(r) => self.answer_ground(r),
            BackendRequest::Match(r) => self.answer_match_texts(r),
            BackendRequest::FilterAnswers(r) => self.answer_filter_answers(r),
        }
    }
}
