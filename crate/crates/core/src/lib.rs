//! Local-first image exploration engine: folder scanning, hand-crafted and
//! ingested visual descriptors, self-sorting grid layouts with a list-shaped
//! border, multi-query similarity search and a compact on-disk feature index.

pub mod features;
pub mod id;
pub mod imgscan;
pub mod pipeline;
pub mod search;
pub mod sortgrid;
pub mod store;

pub use id::ImageId;
