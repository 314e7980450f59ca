//! Scene-graph documents, one JSON file per image.
//!
//! ```json
//! {
//!   "image_id": "kitchen-01",
//!   "width": 640, "height": 480,
//!   "objects": [
//!     {"id": "o1", "name": "cup", "box": {"x": 0.1, "y": 0.2, "w": 0.1, "h": 0.1},
//!      "attributes": ["white"], "relations": [{"relation": "on", "target": "o2"}]},
//!     {"id": "o2", "name": "table", "pixel_box": {"x": 0, "y": 240, "w": 640, "h": 240}}
//!   ]
//! }
//! ```
//!
//! Each object carries either a relative `box` or a `pixel_box`, which the
//! loader converts using the image size.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::answer::collapse_ws;
use crate::answer::strip_copula;
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRelation {
    pub relation: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub name: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub relations: Vec<SceneRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("scene `{image}`: {message}")]
    Invalid { image: String, message: String },
}

#[derive(Deserialize)]
struct RawObject {
    id: String,
    name: String,
    #[serde(rename = "box")]
    bbox: Option<BoundingBox>,
    pixel_box: Option<BoundingBox>,
    #[serde(default)]
    attributes: Vec<String>,
    #[serde(default)]
    relations: Vec<SceneRelation>,
}

#[derive(Deserialize)]
struct RawScene {
    image_id: String,
    width: u32,
    height: u32,
    objects: Vec<RawObject>,
}

/// Lowercase with single spaces.
pub fn normalize_name(s: &str) -> String {
    collapse_ws(&s.to_lowercase())
}

/// Lowercase, single spaces, no leading copula (`is holding` -> `holding`).
pub fn normalize_relation(s: &str) -> String {
    strip_copula(&normalize_name(s))
}

impl SceneGraph {
    pub fn from_json(text: &str) -> Result<SceneGraph, SceneError> {
        let raw: RawScene = serde_json::from_str(text).map_err(|source| SceneError::Json {
            path: PathBuf::from("<inline>"),
            source,
        })?;
        SceneGraph::from_raw(raw)
    }

    fn from_raw(raw: RawScene) -> Result<SceneGraph, SceneError> {
        let invalid = |message: String| SceneError::Invalid {
            image: raw.image_id.clone(),
            message,
        };
        let mut objects = Vec::with_capacity(raw.objects.len());
        for o in &raw.objects {
            let bbox = match (o.bbox, o.pixel_box) {
                (Some(b), None) => b,
                (None, Some(p)) => {
                    BoundingBox::from_pixels(p.x, p.y, p.w, p.h, raw.width as f64, raw.height as f64)
                        .map_err(|e| invalid(format!("object `{}`: {e}", o.id)))?
                        .0
                }
                _ => {
                    return Err(invalid(format!(
                        "object `{}` needs exactly one of `box` and `pixel_box`",
                        o.id
                    )))
                }
            };
            objects.push(SceneObject {
                id: o.id.clone(),
                name: o.name.clone(),
                bbox,
                attributes: o.attributes.clone(),
                relations: o.relations.clone(),
            });
        }
        let scene = SceneGraph {
            image_id: raw.image_id,
            width: raw.width,
            height: raw.height,
            objects,
        };
        scene.check()?;
        Ok(scene)
    }

    /// Unique ids, existing relation targets, valid boxes.
    pub fn check(&self) -> Result<(), SceneError> {
        let invalid = |message: String| SceneError::Invalid {
            image: self.image_id.clone(),
            message,
        };
        let mut ids = HashSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(invalid(format!("duplicate object id `{}`", o.id)));
            }
            if !o.bbox.is_valid() {
                return Err(invalid(format!("object `{}` has an invalid box {}", o.id, o.bbox)));
            }
            if o.name.trim().is_empty() {
                return Err(invalid(format!("object `{}` has an empty name", o.id)));
            }
        }
        for o in &self.objects {
            for r in &o.relations {
                if !ids.contains(r.target.as_str()) {
                    return Err(invalid(format!(
                        "object `{}` relates to missing object `{}`",
                        o.id, r.target
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn load(path: &Path) -> Result<SceneGraph, SceneError> {
        let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawScene = serde_json::from_str(&text).map_err(|source| SceneError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        SceneGraph::from_raw(raw)
    }
}

/// Loads every `*.json` scene in a directory (except `aliases.json`),
/// keyed by image id.
pub fn load_scene_dir(dir: &Path) -> Result<HashMap<String, SceneGraph>, SceneError> {
    let io = |source| SceneError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && p.file_name().is_some_and(|n| n != "aliases.json")
        })
        .collect();
    paths.sort();
    let mut scenes = HashMap::new();
    for path in paths {
        let scene = SceneGraph::load(&path)?;
        if scenes.contains_key(&scene.image_id) {
            return Err(SceneError::Invalid {
                image: scene.image_id,
                message: format!("duplicate image id in {}", path.display()),
            });
        }
        scenes.insert(scene.image_id.clone(), scene);
    }
    Ok(scenes)
}

/// Reads an alias file: a JSON object mapping a name to its canonical form,
/// e.g. `{"trash can": "garbage bin"}`.
pub fn load_aliases(path: &Path) -> Result<HashMap<String, String>, SceneError> {
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: HashMap<String, String> =
        serde_json::from_str(&text).map_err(|source| SceneError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| (normalize_name(&k), normalize_name(&v)))
        .collect())
}
