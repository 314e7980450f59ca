//! Parse module-network layouts, compile them into plans over zero-shot
//! vision capabilities, and run those plans against pluggable backends.
//!
//! ```
//! use modvqa_core::{layout::parse_layout, plan::compile};
//!
//! let layout = parse_layout("Query[name](Relocate[to the left of](Find[garbage bin]))").unwrap();
//! let plan = compile(&layout).unwrap();
//! assert_eq!(plan.steps[0].kind(), "ground");
//! ```

pub mod answer;
pub mod backend;
pub mod eval;
pub mod exec;
pub mod geometry;
pub mod layout;
pub mod plan;
