//! PNG containers for rasters.
//!
//! Displacement maps are 16-bit grayscale with `v_png = round((v / scale + 1)
//! / 2 * 65535)`; distance fields map `[0, delta]` linearly onto `[0, 65535]`.
//! The scale lives in a sidecar text file next to the PNG (`<file>.meta`)
//! holding `kind`, `width` and `scale` as `key=value` lines. Line maps are
//! 8-bit PNGs with 0 for background and 255 for line pixels.

use std::fmt;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{GrayImage, ImageBuffer, ImageFormat, Luma};

use crate::error::{Error, Result};
use crate::raster::{DisplacementMap, DistanceField, Grid};
use crate::structure::LineMap;

const LEVELS: f64 = 65535.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RasterKind {
    Displacement,
    DistanceField,
}

impl fmt::Display for RasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RasterKind::Displacement => "displacement",
            RasterKind::DistanceField => "distance_field",
        })
    }
}

impl FromStr for RasterKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "displacement" => Ok(RasterKind::Displacement),
            "distance_field" => Ok(RasterKind::DistanceField),
            other => Err(format!("unknown raster kind {other:?}")),
        }
    }
}

/// Contents of a raster sidecar file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterMeta {
    pub kind: RasterKind,
    pub width: usize,
    /// Displacement magnitude mapped to full scale, or the truncation distance
    /// for distance fields.
    pub scale: f64,
}

impl RasterMeta {
    pub fn to_text(&self) -> String {
        format!("kind={}\nwidth={}\nscale={}\n", self.kind, self.width, self.scale)
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let (mut kind, mut width, mut scale) = (None, None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| format!("expected key=value, got {line:?}"))?;
            let v = v.trim();
            match k.trim() {
                "kind" => kind = Some(v.parse::<RasterKind>()?),
                "width" => width = Some(v.parse::<usize>().map_err(|e| format!("width: {e}"))?),
                "scale" => scale = Some(v.parse::<f64>().map_err(|e| format!("scale: {e}"))?),
                _ => {}
            }
        }
        let meta = RasterMeta {
            kind: kind.ok_or("missing kind")?,
            width: width.ok_or("missing width")?,
            scale: scale.ok_or("missing scale")?,
        };
        if !(meta.scale > 0.0 && meta.scale.is_finite()) {
            return Err(format!("scale must be positive, got {}", meta.scale));
        }
        Ok(meta)
    }
}

/// Path of the sidecar for a PNG path.
pub fn meta_path(png: &Path) -> PathBuf {
    let mut s = png.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Full-scale value used when saving a displacement map: its largest
/// magnitude, or 1 for an all-zero map.
pub fn displacement_scale(disp: &DisplacementMap) -> f64 {
    let m = disp.grid().max_abs();
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn encode_u16(grid: &Grid, to_unit: impl Fn(f64) -> f64) -> Result<Vec<u8>> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(grid.width() as u32, grid.height() as u32, |x, y| {
        let t = to_unit(grid[(x as usize, y as usize)]).clamp(0.0, 1.0);
        Luma([(t * LEVELS).round() as u16])
    });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

fn decode_u16(bytes: &[u8], from_unit: impl Fn(f64) -> f64) -> Result<Grid> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Grid::from_fn(w, h, |x, y| from_unit(img.get_pixel(x as u32, y as u32)[0] as f64 / LEVELS)))
}

pub fn encode_displacement_png(disp: &DisplacementMap, scale: f64) -> Result<Vec<u8>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
    }
    encode_u16(disp.grid(), |v| (v / scale + 1.0) / 2.0)
}

pub fn decode_displacement_png(bytes: &[u8], scale: f64) -> Result<DisplacementMap> {
    DisplacementMap::new(decode_u16(bytes, |t| (2.0 * t - 1.0) * scale)?)
}

pub fn encode_distance_png(df: &DistanceField) -> Result<Vec<u8>> {
    let delta = df.truncation();
    encode_u16(df.grid(), |v| v / delta)
}

pub fn decode_distance_png(bytes: &[u8], truncation: f64) -> Result<DistanceField> {
    Ok(DistanceField::clamped(decode_u16(bytes, |t| t * truncation)?, truncation))
}

pub fn encode_line_png(lines: &LineMap) -> Result<Vec<u8>> {
    let img = GrayImage::from_fn(lines.width() as u32, lines.height() as u32, |x, y| {
        Luma([if lines.get(x as usize, y as usize) { 255 } else { 0 }])
    });
    encode_gray8_png(&img)
}

/// Any pixel brighter than mid-grey counts as a line pixel.
pub fn decode_line_png(bytes: &[u8]) -> Result<LineMap> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(LineMap::from_fn(w, h, |x, y| img.get_pixel(x as u32, y as u32)[0] >= 128))
}

pub fn encode_gray8_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Light direction of the previews served and written by the tools.
pub const PREVIEW_LIGHT: [f64; 3] = [-0.4, -0.6, 1.0];

/// Shaded relief of `disp` as an 8-bit PNG.
pub fn preview_png(disp: &DisplacementMap) -> Result<Vec<u8>> {
    encode_gray8_png(&crate::raster::shaded_preview(disp, PREVIEW_LIGHT))
}

fn read_meta(png: &Path, expected: RasterKind) -> Result<RasterMeta> {
    let path = meta_path(png);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::format(&path, format!("cannot read sidecar: {e}")))?;
    let meta = RasterMeta::parse(&text).map_err(|r| Error::format(&path, r))?;
    if meta.kind != expected {
        return Err(Error::format(&path, format!("expected kind {expected}, found {}", meta.kind)));
    }
    Ok(meta)
}

fn check_width(png: &Path, meta: &RasterMeta, found: usize) -> Result<()> {
    if meta.width != found {
        return Err(Error::format(png, format!("sidecar width {} but image width {found}", meta.width)));
    }
    Ok(())
}

/// Writes the PNG and its sidecar. Returns the scale used.
pub fn save_displacement(path: impl AsRef<Path>, disp: &DisplacementMap) -> Result<f64> {
    let path = path.as_ref();
    let scale = displacement_scale(disp);
    std::fs::write(path, encode_displacement_png(disp, scale)?)?;
    let meta = RasterMeta { kind: RasterKind::Displacement, width: disp.resolution(), scale };
    std::fs::write(meta_path(path), meta.to_text())?;
    Ok(scale)
}

pub fn load_displacement(path: impl AsRef<Path>) -> Result<DisplacementMap> {
    let path = path.as_ref();
    let meta = read_meta(path, RasterKind::Displacement)?;
    let disp = decode_displacement_png(&std::fs::read(path)?, meta.scale)?;
    check_width(path, &meta, disp.resolution())?;
    Ok(disp)
}

pub fn save_distance_field(path: impl AsRef<Path>, df: &DistanceField) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_distance_png(df)?)?;
    let meta = RasterMeta { kind: RasterKind::DistanceField, width: df.width(), scale: df.truncation() };
    std::fs::write(meta_path(path), meta.to_text())?;
    Ok(())
}

pub fn load_distance_field(path: impl AsRef<Path>) -> Result<DistanceField> {
    let path = path.as_ref();
    let meta = read_meta(path, RasterKind::DistanceField)?;
    let df = decode_distance_png(&std::fs::read(path)?, meta.scale)?;
    check_width(path, &meta, df.width())?;
    Ok(df)
}

pub fn save_lines(path: impl AsRef<Path>, lines: &LineMap) -> Result<()> {
    std::fs::write(path, encode_line_png(lines)?)?;
    Ok(())
}

pub fn load_lines(path: impl AsRef<Path>) -> Result<LineMap> {
    decode_line_png(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{distance_transform, rasterize_polyline};

    fn wavy(res: usize) -> DisplacementMap {
        DisplacementMap::new(Grid::from_fn(res, res, |x, y| 0.003 * ((x as f64 * 0.3).sin() - (y as f64 * 0.17).cos()))).unwrap()
    }

    #[test]
    fn displacement_round_trip_within_one_level() {
        let d = wavy(64);
        let scale = displacement_scale(&d);
        let back = decode_displacement_png(&encode_displacement_png(&d, scale).unwrap(), scale).unwrap();
        for (a, b) in d.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= scale / LEVELS);
        }
    }

    #[test]
    fn quantization_formula() {
        let d = DisplacementMap::new(Grid::from_fn(64, 64, |x, _| if x == 0 { -2.0 } else if x == 1 { 2.0 } else { 0.0 })).unwrap();
        let bytes = encode_displacement_png(&d, 2.0).unwrap();
        let img = image::load_from_memory(&bytes).unwrap().into_luma16();
        assert_eq!(img.get_pixel(0, 0)[0], 0);
        assert_eq!(img.get_pixel(1, 0)[0], 65535);
        // round((0 + 1) / 2 * 65535) = round(32767.5) = 32768
        assert_eq!(img.get_pixel(2, 0)[0], 32768);
    }

    #[test]
    fn files_with_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let d = wavy(64);
        let p = dir.path().join("d.png");
        let scale = save_displacement(&p, &d).unwrap();
        let meta = RasterMeta::parse(&std::fs::read_to_string(meta_path(&p)).unwrap()).unwrap();
        assert_eq!(meta, RasterMeta { kind: RasterKind::Displacement, width: 64, scale });
        let back = load_displacement(&p).unwrap();
        assert!(back.values().iter().zip(d.values()).all(|(a, b)| (a - b).abs() <= scale / LEVELS));

        let lines = rasterize_polyline(64, 64, &[[3.0, 4.0], [60.0, 30.0]]);
        let df = distance_transform(&lines);
        let q = dir.path().join("df.png");
        save_distance_field(&q, &df).unwrap();
        let back = load_distance_field(&q).unwrap();
        assert_eq!(back.truncation(), 3.2);
        assert!(back.values().iter().zip(df.values()).all(|(a, b)| (a - b).abs() <= 3.2 / LEVELS));
        assert!(matches!(load_displacement(&q), Err(Error::Format { .. })));

        let l = dir.path().join("l.png");
        save_lines(&l, &lines).unwrap();
        assert_eq!(load_lines(&l).unwrap(), lines);
    }

    #[test]
    fn missing_or_bad_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        std::fs::write(&p, encode_displacement_png(&wavy(64), 1.0).unwrap()).unwrap();
        assert!(matches!(load_displacement(&p), Err(Error::Format { .. })));
        std::fs::write(meta_path(&p), "kind=displacement\nwidth=64\nscale=-1\n").unwrap();
        assert!(matches!(load_displacement(&p), Err(Error::Format { .. })));
        std::fs::write(meta_path(&p), "kind=displacement\nwidth=128\nscale=1\n").unwrap();
        assert!(matches!(load_displacement(&p), Err(Error::Format { .. })));
    }
}
