use image::GrayImage;

use super::DisplacementMap;

/// Lambert-shaded relief of the height field with unit exaggeration.
///
/// Heights are converted from normalized mesh units to pixels by the map
/// width, since the UV square spans one unit.
pub fn shaded_preview(disp: &DisplacementMap, light_dir: [f64; 3]) -> GrayImage {
    shaded_preview_scaled(disp, light_dir, 1.0)
}

/// Like [`shaded_preview`] with heights multiplied by `exaggeration`.
pub fn shaded_preview_scaled(disp: &DisplacementMap, light_dir: [f64; 3], exaggeration: f64) -> GrayImage {
    let g = disp.grid();
    let n = g.width();
    let scale = n as f64 * exaggeration;
    let len = (light_dir[0].powi(2) + light_dir[1].powi(2) + light_dir[2].powi(2)).sqrt();
    let l = if len > 0.0 {
        [light_dir[0] / len, light_dir[1] / len, light_dir[2] / len]
    } else {
        [0.0, 0.0, 1.0]
    };
    let h = |x: usize, y: usize| g[(x, y)] * scale;
    GrayImage::from_fn(n as u32, n as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        let (x0, x1) = (x.saturating_sub(1), (x + 1).min(n - 1));
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(n - 1));
        let dx = (h(x1, y) - h(x0, y)) / (x1 - x0).max(1) as f64;
        let dy = (h(x, y1) - h(x, y0)) / (y1 - y0).max(1) as f64;
        let norm = (dx * dx + dy * dy + 1.0).sqrt();
        let shade = (-dx * l[0] - dy * l[1] + l[2]) / norm;
        image::Luma([(255.0 * shade.max(0.0)).round().min(255.0) as u8])
    })
}
