//! Image file I/O (PNG and binary PPM) plus the light geometry needed to
//! standardize a folder of photos: center crop to square and bilinear
//! resize.

use crate::error::{Error, Result};
use crate::qtensor::ImageBuf;
use std::fs;
use std::io::Write;
use std::path::Path;

fn to_bytes(img: &ImageBuf) -> Vec<u8> {
    img.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

fn from_rgb8(width: u32, height: u32, bytes: &[u8]) -> ImageBuf {
    let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
    ImageBuf { height: height as usize, width: width as usize, data }
}

/// Decode a PNG or PPM file into [0,1] RGB.
pub fn load_image(path: &Path) -> Result<ImageBuf> {
    let img = image::open(path)
        .map_err(|e| Error::data(path, format!("cannot decode image: {e}")))?
        .to_rgb8();
    Ok(from_rgb8(img.width(), img.height(), img.as_raw()))
}

/// Write as 8-bit PNG.
pub fn save_png(path: &Path, img: &ImageBuf) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, to_bytes(img))
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::data(path, format!("cannot write png: {e}")))
}

/// Write as binary (P6) PPM with 8-bit samples.
pub fn save_ppm(path: &Path, img: &ImageBuf) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write!(f, "P6\n{} {}\n255\n", img.width, img.height).map_err(|e| Error::io(path, e))?;
    f.write_all(&to_bytes(img)).map_err(|e| Error::io(path, e))
}

/// Center-crop to a square, then bilinearly resample to `size` x `size`.
pub fn center_crop_resize(img: &ImageBuf, size: usize) -> Result<ImageBuf> {
    if size == 0 {
        return Err(Error::invalid("target size must be at least 1"));
    }
    if img.height == 0 || img.width == 0 {
        return Err(Error::invalid("cannot resize an empty image"));
    }
    let side = img.height.min(img.width);
    let y0 = (img.height - side) / 2;
    let x0 = (img.width - side) / 2;
    if side == size {
        let mut out = ImageBuf::new(size, size);
        for y in 0..size {
            for x in 0..size {
                out.set_pixel(y, x, img.pixel(y0 + y, x0 + x));
            }
        }
        return Ok(out);
    }
    // Center-aligned bilinear sampling of the cropped square.
    let scale = side as f32 / size as f32;
    let mut out = ImageBuf::new(size, size);
    for y in 0..size {
        let sy = ((y as f32 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f32);
        let iy = (sy.floor() as usize).min(side - 1);
        let fy = sy - iy as f32;
        let iy1 = (iy + 1).min(side - 1);
        for x in 0..size {
            let sx = ((x as f32 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f32);
            let ix = (sx.floor() as usize).min(side - 1);
            let fx = sx - ix as f32;
            let ix1 = (ix + 1).min(side - 1);
            let p00 = img.pixel(y0 + iy, x0 + ix);
            let p01 = img.pixel(y0 + iy, x0 + ix1);
            let p10 = img.pixel(y0 + iy1, x0 + ix);
            let p11 = img.pixel(y0 + iy1, x0 + ix1);
            let mut p = [0.0f32; 3];
            for ch in 0..3 {
                let top = p00[ch] * (1.0 - fx) + p01[ch] * fx;
                let bot = p10[ch] * (1.0 - fx) + p11[ch] * fx;
                p[ch] = top * (1.0 - fy) + bot * fy;
            }
            out.set_pixel(y, x, p);
        }
    }
    Ok(out)
}

/// Load every readable PNG/PPM in a directory (sorted by file name),
/// standardized to `size` x `size`. Unreadable or foreign files are
/// skipped; an error is returned only if nothing loads.
pub fn load_image_folder(dir: &Path, size: usize) -> Result<Vec<ImageBuf>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| entry.file_name().into_string().ok())
        .filter(|name| {
            let lower = name.to_lowercase();
            lower.ends_with(".png") || lower.ends_with(".ppm")
        })
        .collect();
    names.sort();
    let mut out = Vec::new();
    for name in &names {
        let Ok(img) = load_image(&dir.join(name)) else { continue };
        out.push(center_crop_resize(&img, size)?);
    }
    if out.is_empty() {
        return Err(Error::data(dir, "no readable .png or .ppm images"));
    }
    Ok(out)
}
