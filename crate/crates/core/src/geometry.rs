//! Boxes, detections, regions and the two spatial heuristics.
//!
//! Coordinates are relative to the image: `(x, y)` is the top-left corner
//! and `w`, `h` the size, all in `[0, 1]`. The position heuristic compares
//! the raw corner against the image midline and the relation heuristic
//! compares the raw corners of two boxes; ties fall to the second label.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Slack allowed on `x + w` and `y + h` before clamping kicks in.
pub const EDGE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate box ({x}, {y}, {w}, {h}): width and height must be positive")]
    DegenerateBox { x: f64, y: f64, w: f64, h: f64 },
    #[error("non-finite box coordinate")]
    NonFinite,
    #[error("detection has {boxes} boxes but {scores} scores")]
    LengthMismatch { boxes: usize, scores: usize },
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("a region needs 1 or 2 boxes, got {0}")]
    RegionArity(usize),
    #[error("candidates {0:?} do not form a supported spatial pair")]
    UnsupportedPair(Vec<String>),
}

impl BoundingBox {
    /// Builds a box that already satisfies every invariant.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<BoundingBox, GeometryError> {
        let (b, clamped) = BoundingBox::clamped(x, y, w, h)?;
        if clamped {
            return Err(GeometryError::DegenerateBox { x, y, w, h });
        }
        Ok(b)
    }

    /// Builds a box, pulling out-of-range values back into the unit square.
    /// The flag reports whether anything moved.
    pub fn clamped(x: f64, y: f64, w: f64, h: f64) -> Result<(BoundingBox, bool), GeometryError> {
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let cx = x.clamp(0.0, 1.0);
        let cy = y.clamp(0.0, 1.0);
        let mut cw = w;
        let mut ch = h;
        if cx + cw > 1.0 + EDGE_EPSILON {
            cw = 1.0 - cx;
        }
        if cy + ch > 1.0 + EDGE_EPSILON {
            ch = 1.0 - cy;
        }
        if cw <= 0.0 || ch <= 0.0 {
            return Err(GeometryError::DegenerateBox { x, y, w, h });
        }
        let moved = cx != x || cy != y || cw != w || ch != h;
        Ok((
            BoundingBox {
                x: cx,
                y: cy,
                w: cw,
                h: ch,
            },
            moved,
        ))
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite())
            && (0.0..=1.0).contains(&self.x)
            && (0.0..=1.0).contains(&self.y)
            && self.w > 0.0
            && self.h > 0.0
            && self.x + self.w <= 1.0 + EDGE_EPSILON
            && self.y + self.h <= 1.0 + EDGE_EPSILON
    }

    /// Converts a pixel-space box given the image size.
    pub fn from_pixels(
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        width: f64,
        height: f64,
    ) -> Result<(BoundingBox, bool), GeometryError> {
        if width <= 0.0 || height <= 0.0 {
            return Err(GeometryError::DegenerateBox {
                x,
                y,
                w: width,
                h: height,
            });
        }
        BoundingBox::clamped(x / width, y / height, w / width, h / height)
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3}, {:.3}, {:.3})", self.x, self.y, self.w, self.h)
    }
}

/// Boxes with their confidence scores, index-aligned.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub boxes: Vec<BoundingBox>,
    pub scores: Vec<f64>,
}

impl Detection {
    pub fn new(boxes: Vec<BoundingBox>, scores: Vec<f64>) -> Result<Detection, GeometryError> {
        let det = Detection { boxes, scores };
        det.check()?;
        Ok(det)
    }

    pub fn empty() -> Detection {
        Detection::default()
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Checks lengths and score bounds; boxes are checked by [`Detection::sanitized`].
    pub fn check(&self) -> Result<(), GeometryError> {
        if self.boxes.len() != self.scores.len() {
            return Err(GeometryError::LengthMismatch {
                boxes: self.boxes.len(),
                scores: self.scores.len(),
            });
        }
        if let Some(&s) = self
            .scores
            .iter()
            .find(|s| !(s.is_finite() && (0.0..=1.0).contains(*s)))
        {
            return Err(GeometryError::ScoreOutOfRange(s));
        }
        Ok(())
    }

    /// Validates an incoming detection, clamping boxes that overshoot the
    /// image. Returns the cleaned detection and how many boxes were clamped.
    pub fn sanitized(&self) -> Result<(Detection, usize), GeometryError> {
        self.check()?;
        let mut clamped = 0;
        let mut boxes = Vec::with_capacity(self.boxes.len());
        for b in &self.boxes {
            let (fixed, moved) = BoundingBox::clamped(b.x, b.y, b.w, b.h)?;
            if moved {
                clamped += 1;
            }
            boxes.push(fixed);
        }
        Ok((
            Detection {
                boxes,
                scores: self.scores.clone(),
            },
            clamped,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub index: usize,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub filtered: Detection,
    /// Highest-scoring survivor; `index` refers to the filtered list.
    pub top1: Option<ScoredBox>,
}

/// Keeps entries scoring at least `threshold` (original order), and picks
/// the best survivor. Ties go to the lowest index.
pub fn filter_and_select(det: &Detection, threshold: f64) -> Selection {
    let mut filtered = Detection::empty();
    for (b, &s) in det.boxes.iter().zip(&det.scores) {
        if s >= threshold {
            filtered.boxes.push(*b);
            filtered.scores.push(s);
        }
    }
    let mut top1: Option<ScoredBox> = None;
    for (i, (b, &s)) in filtered.boxes.iter().zip(&filtered.scores).enumerate() {
        if top1.map_or(true, |t| s > t.score) {
            top1 = Some(ScoredBox {
                index: i,
                bbox: *b,
                score: s,
            });
        }
    }
    Selection { filtered, top1 }
}

/// Which part of the image the matcher should look at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion", into = "RawRegion")]
pub enum RegionSpec {
    /// Keep only the box.
    Crop(BoundingBox),
    /// Keep the image size, blank everything outside both boxes.
    MaskKeep(BoundingBox, BoundingBox),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Crop,
    MaskKeep,
}

impl RegionKind {
    pub fn for_inputs(n: usize) -> Option<RegionKind> {
        match n {
            1 => Some(RegionKind::Crop),
            2 => Some(RegionKind::MaskKeep),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawRegion {
    kind: RegionKind,
    boxes: Vec<BoundingBox>,
}

impl TryFrom<RawRegion> for RegionSpec {
    type Error = String;

    fn try_from(raw: RawRegion) -> Result<Self, Self::Error> {
        match (raw.kind, raw.boxes.as_slice()) {
            (RegionKind::Crop, [b]) => Ok(RegionSpec::Crop(*b)),
            (RegionKind::MaskKeep, [a, b]) => Ok(RegionSpec::MaskKeep(*a, *b)),
            (RegionKind::Crop, boxes) => Err(format!("crop needs 1 box, got {}", boxes.len())),
            (RegionKind::MaskKeep, boxes) => {
                Err(format!("mask_keep needs 2 boxes, got {}", boxes.len()))
            }
        }
    }
}

impl From<RegionSpec> for RawRegion {
    fn from(r: RegionSpec) -> Self {
        RawRegion {
            kind: r.kind(),
            boxes: r.boxes(),
        }
    }
}

impl RegionSpec {
    pub fn kind(&self) -> RegionKind {
        match self {
            RegionSpec::Crop(_) => RegionKind::Crop,
            RegionSpec::MaskKeep(..) => RegionKind::MaskKeep,
        }
    }

    pub fn boxes(&self) -> Vec<BoundingBox> {
        match *self {
            RegionSpec::Crop(b) => vec![b],
            RegionSpec::MaskKeep(a, b) => vec![a, b],
        }
    }
}

/// One box crops, two boxes mask everything else out.
pub fn make_region(boxes: &[BoundingBox]) -> Result<RegionSpec, GeometryError> {
    match boxes {
        [b] => Ok(RegionSpec::Crop(*b)),
        [a, b] => Ok(RegionSpec::MaskKeep(*a, *b)),
        _ => Err(GeometryError::RegionArity(boxes.len())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Left,
    Right,
    Top,
    Bottom,
}

impl Position {
    pub fn as_str(self) -> &'static str {
        match self {
            Position::Left => "left",
            Position::Right => "right",
            Position::Top => "top",
            Position::Bottom => "bottom",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where in the image a box sits along one axis.
pub fn spd(b: &BoundingBox, axis: Axis) -> Position {
    match axis {
        Axis::Horizontal => {
            if b.x < 0.5 {
                Position::Left
            } else {
                Position::Right
            }
        }
        Axis::Vertical => {
            if b.y < 0.5 {
                Position::Top
            } else {
                Position::Bottom
            }
        }
    }
}

/// Relation labels that come before the other box along the axis.
const LEFT_SET: &[&str] = &["to the left of"];
const RIGHT_SET: &[&str] = &["to the right of"];
const ABOVE_SET: &[&str] = &["above", "on top of"];
const BELOW_SET: &[&str] = &["under", "below", "beneath", "underneath"];

fn norm_label(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn all_in(labels: &[String], set: &[&str]) -> bool {
    !labels.is_empty() && labels.iter().all(|l| set.contains(&norm_label(l).as_str()))
}

/// A spatial choice resolved against the published label sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpatialPair {
    pub axis: Axis,
    /// Label used when the first box comes first (left of / above).
    pub before: String,
    /// Label used otherwise.
    pub after: String,
}

impl SpatialPair {
    /// Resolves two single-label candidates, in either order.
    pub fn from_candidates(first: &str, second: &str) -> Option<SpatialPair> {
        let a = [first.to_string()];
        let b = [second.to_string()];
        match spatial_choice_axis(&a, &b)? {
            (axis, false) => Some(SpatialPair {
                axis,
                before: first.to_string(),
                after: second.to_string(),
            }),
            (axis, true) => Some(SpatialPair {
                axis,
                before: second.to_string(),
                after: first.to_string(),
            }),
        }
    }
}

/// Classifies two label sets as a horizontal or vertical choice. The flag is
/// true when the sets arrived in swapped order (right/below set first).
pub fn spatial_choice_axis(a: &[String], b: &[String]) -> Option<(Axis, bool)> {
    let table = [
        (Axis::Horizontal, LEFT_SET, RIGHT_SET),
        (Axis::Vertical, ABOVE_SET, BELOW_SET),
    ];
    for (axis, before, after) in table {
        if all_in(a, before) && all_in(b, after) {
            return Some((axis, false));
        }
        if all_in(a, after) && all_in(b, before) {
            return Some((axis, true));
        }
    }
    None
}

/// Picks the relation between two boxes (`b1` RELATION `b2`).
pub fn spc<'a>(b1: &BoundingBox, b2: &BoundingBox, pair: &'a SpatialPair) -> &'a str {
    let first = match pair.axis {
        Axis::Horizontal => b1.x < b2.x,
        Axis::Vertical => b1.y < b2.y,
    };
    if first {
        &pair.before
    } else {
        &pair.after
    }
}

/// [`spc`] over raw candidate labels.
pub fn spc_labels(
    b1: &BoundingBox,
    b2: &BoundingBox,
    first: &str,
    second: &str,
) -> Result<String, GeometryError> {
    let pair = SpatialPair::from_candidates(first, second).ok_or_else(|| {
        GeometryError::UnsupportedPair(vec![first.to_string(), second.to_string()])
    })?;
    Ok(spc(b1, b2, &pair).to_string())
}
