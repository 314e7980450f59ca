use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::backend::{normalize_name, SceneGraph};

/// Default minimum share of listed objects in a test image. The value is a
/// choice, not a published constant.
pub const DEFAULT_TEST_PORTION: f64 = 0.3;

static FOOD: &str = include_str!("../../data/food_objects.txt");
static STREET: &str = include_str!("../../data/street_objects.txt");

/// Scene-specific object names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectList {
    names: BTreeSet<String>,
}

impl ObjectList {
    /// Names separated by commas and/or newlines.
    pub fn parse(text: &str) -> ObjectList {
        ObjectList {
            names: text
                .split([',', '\n'])
                .map(normalize_name)
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn food() -> ObjectList {
        ObjectList::parse(FOOD)
    }

    pub fn street() -> ObjectList {
        ObjectList::parse(STREET)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(&normalize_name(name))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OodSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Share of a scene's objects whose name is listed; 0 for an empty scene.
pub fn listed_fraction(scene: &SceneGraph, list: &ObjectList) -> f64 {
    if scene.objects.is_empty() {
        return 0.0;
    }
    let listed = scene.objects.iter().filter(|o| list.contains(&o.name)).count();
    listed as f64 / scene.objects.len() as f64
}

/// Images with no listed object go to train; images whose listed share is
/// at least `portion` go to test; the rest are dropped. Output keeps the
/// order of `images`.
pub fn ood_filter(
    images: &[String],
    scenes: &HashMap<String, SceneGraph>,
    list: &ObjectList,
    portion: f64,
) -> Result<OodSplit, EvalError> {
    if !(portion > 0.0 && portion <= 1.0) {
        return Err(EvalError::InvalidPortion(portion));
    }
    let mut split = OodSplit::default();
    for id in images {
        let scene = scenes
            .get(id)
            .ok_or_else(|| EvalError::MissingSceneGraph(id.clone()))?;
        let any_listed = scene.objects.iter().any(|o| list.contains(&o.name));
        if !any_listed {
            split.train.push(id.clone());
        } else if listed_fraction(scene, list) >= portion {
            split.test.push(id.clone());
        }
    }
    Ok(split)
}
