//! PNG/PGM input and output. Color inputs are reduced with Rec. 601 luma.

use std::path::Path;

use ffdga::fitness::GrayImage;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{CliError, Result};

fn to_gray(img: DynamicImage) -> ffdga::Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb32f();
        let data = rgb
            .pixels()
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).clamp(0.0, 1.0))
            .collect();
        GrayImage::new(w, h, data)
    } else {
        match img {
            DynamicImage::ImageLuma8(g) => GrayImage::from_u8(w, h, g.as_raw()),
            other => GrayImage::new(
                w,
                h,
                other.to_luma32f().as_raw().iter().map(|&v| (v as f64).clamp(0.0, 1.0)).collect(),
            ),
        }
    }
}

/// Decodes PNG or PGM bytes (format sniffed from the content).
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory(bytes).map_err(|e| CliError::io("decode", e))?;
    to_gray(img).map_err(|e| CliError::io("decode", e))
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path.display(), e))?;
    decode_gray(&bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

pub fn encode_gray(img: &GrayImage, pgm: bool) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes = img.to_u8();
    let res = if pgm {
        PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&bytes, w, h, ExtendedColorType::L8)
    } else {
        image::codecs::png::PngEncoder::new(&mut out).write_image(&bytes, w, h, ExtendedColorType::L8)
    };
    res.map_err(|e| CliError::io("encode", e))?;
    Ok(out)
}

/// Writes PGM for a `.pgm` extension, PNG otherwise.
pub fn save_gray(path: &Path, img: &GrayImage) -> Result<()> {
    let bytes = encode_gray(img, is_pgm(path))?;
    std::fs::write(path, bytes).map_err(|e| CliError::io(path.display(), e))
}

pub fn save_rgb(path: &Path, w: usize, h: usize, rgb: &[u8]) -> Result<()> {
    image::save_buffer_with_format(path, rgb, w as u32, h as u32, ExtendedColorType::Rgb8, ImageFormat::Png)
        .map_err(|e| CliError::io(path.display(), e))
}
