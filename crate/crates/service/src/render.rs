//! Static montage rendering of a grid layout.

use std::path::PathBuf;

use gridsort_core::imgscan::{decode_path, thumbnail, ImageRecord};
use gridsort_core::sortgrid::GridLayout;
use gridsort_core::ImageId;
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

pub const BACKGROUND: Rgb<u8> = Rgb([24, 24, 24]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub position: usize,
    pub row: usize,
    pub col: usize,
    pub id: ImageId,
    pub path: PathBuf,
}

/// Position to path mapping for a rendered montage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub columns: usize,
    pub rows: usize,
    pub count: usize,
    pub cell: u32,
    pub cells: Vec<ManifestCell>,
}

/// Manifest for `layout`, whose items index into `records`.
pub fn manifest(layout: &GridLayout, records: &[ImageRecord], cell: u32) -> Manifest {
    let cells = layout
        .cells
        .iter()
        .enumerate()
        .filter_map(|(position, item)| {
            let record = &records[(*item)?];
            Some(ManifestCell {
                position,
                row: position / layout.columns,
                col: position % layout.columns,
                id: record.id,
                path: record.path.clone(),
            })
        })
        .collect();
    Manifest {
        columns: layout.columns,
        rows: layout.rows,
        count: layout.len,
        cell,
        cells,
    }
}

/// Draws every item letterboxed into a `cell`×`cell` square. Empty tail
/// cells and undecodable files stay background.
pub fn render_montage(layout: &GridLayout, records: &[ImageRecord], cell: u32) -> RgbImage {
    assert!(cell >= 16, "cell edge must be at least 16");
    let width = layout.columns as u32 * cell;
    let height = layout.rows as u32 * cell;
    let mut canvas = RgbImage::from_pixel(width.max(1), height.max(1), BACKGROUND);
    for (position, item) in layout.cells.iter().enumerate() {
        let Some(item) = item else { continue };
        let Ok(pixels) = decode_path(&records[*item].path) else {
            continue;
        };
        let thumb = thumbnail(&pixels, cell);
        let x = (position % layout.columns) as u32 * cell + (cell - thumb.width()) / 2;
        let y = (position / layout.columns) as u32 * cell + (cell - thumb.height()) / 2;
        image::imageops::replace(&mut canvas, &thumb, x as i64, y as i64);
    }
    canvas
}
