//! Conversion of `[-1, 1]` image tensors to 8-bit pictures.

use image::{Rgb, RgbImage};
use ndarray::{Array3, ArrayView3};

use crate::error::{validation, Result};
use crate::networks::ImageBatch;

fn to_u8(v: f64) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8
}

/// `(3, H, W)` array in `[-1, 1]` to an RGB image.
pub fn to_rgb_image(img: &Array3<f64>) -> RgbImage {
    view_to_rgb(img.view())
}

fn view_to_rgb(img: ArrayView3<f64>) -> RgbImage {
    let (_, h, w) = img.dim();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        Rgb([to_u8(img[[0, y, x]]), to_u8(img[[1, y, x]]), to_u8(img[[2, y, x]])])
    })
}

/// Lays out equally sized rows of images into one picture, separated by
/// `gap` pixels of black.
pub fn tile_rows(rows: &[ImageBatch], gap: u32) -> Result<RgbImage> {
    let first = rows.first().ok_or_else(|| validation("nothing to tile"))?;
    let s = first.image_size() as u32;
    let cols = first.batch_size() as u32;
    if rows
        .iter()
        .any(|r| r.image_size() as u32 != s || r.batch_size() as u32 != cols)
    {
        return Err(validation("tile rows differ in size"));
    }
    let n = rows.len() as u32;
    let mut canvas = RgbImage::new(cols * s + (cols - 1) * gap, n * s + (n - 1) * gap);
    for (r, row) in rows.iter().enumerate() {
        for (c, img) in row.data().outer_iter().enumerate() {
            let tile = view_to_rgb(img);
            let (ox, oy) = (c as u32 * (s + gap), r as u32 * (s + gap));
            image::imageops::replace(&mut canvas, &tile, ox as i64, oy as i64);
        }
    }
    Ok(canvas)
}
