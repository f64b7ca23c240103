//! Synthetic depth maps for tests, examples and tuning.

use crate::image_io::Image;

/// Four constant quadrants at 40, 120, 180 and 230.
pub fn four_regions(width: usize, height: usize) -> Image {
    Image::from_fn(width, height, |r, c| match (r < height / 2, c < width / 2) {
        (true, true) => 40.0,
        (true, false) => 120.0,
        (false, true) => 180.0,
        (false, false) => 230.0,
    })
    .expect("non-empty size")
}

/// A slanted background plane, a raised tilted box and a disc in front,
/// like a small indoor depth scene. Values stay in [20, 235].
pub fn depth_scene(width: usize, height: usize) -> Image {
    let (w, h) = (width as f64, height as f64);
    Image::from_fn(width, height, |r, c| {
        let (y, x) = (r as f64 / h, c as f64 / w);
        let (dx, dy) = (x - 0.68, y - 0.62);
        if dx * dx + dy * dy < 0.04 {
            235.0
        } else if (0.15..0.5).contains(&x) && (0.2..0.7).contains(&y) {
            150.0 + 60.0 * (x - 0.15) - 30.0 * (y - 0.2)
        } else {
            20.0 + 70.0 * x + 50.0 * y
        }
    })
    .expect("non-empty size")
}
