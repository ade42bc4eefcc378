//! Image decoding: binary PPM (P6, maxval 255) hand-parsed, PNG via the
//! `png` crate (8-bit RGB/RGBA only, alpha dropped). Dispatch is by content
//! magic, not file extension.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Decodes to a `[h, w, 3]` tensor of integer channel values in 0..=255.
pub fn decode_image(path: &Path) -> Result<Tensor<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&PNG_MAGIC) {
        decode_png(path, &bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(path, &bytes)
    } else {
        Err(Error::UnsupportedImageFormat {
            path: path.to_path_buf(),
        })
    }
}

fn decode_ppm(path: &Path, bytes: &[u8]) -> Result<Tensor<f32>> {
    let mut cursor = 2usize; // past "P6"
    let width = ppm_header_int(path, bytes, &mut cursor)?;
    let height = ppm_header_int(path, bytes, &mut cursor)?;
    let maxval = ppm_header_int(path, bytes, &mut cursor)?;
    if maxval != 255 {
        return Err(Error::BadMaxval {
            maxval: maxval as u32,
            path: path.to_path_buf(),
        });
    }
    if width == 0 || height == 0 {
        return Err(Error::UnsupportedImageFormat {
            path: path.to_path_buf(),
        });
    }
    // exactly one whitespace byte separates the header from the payload
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        return Err(Error::TruncatedImage {
            path: path.to_path_buf(),
        });
    }
    cursor += 1;
    let needed = width * height * 3;
    let payload = &bytes[cursor.min(bytes.len())..];
    if payload.len() < needed {
        return Err(Error::TruncatedImage {
            path: path.to_path_buf(),
        });
    }
    let data: Vec<f32> = payload[..needed].iter().map(|&b| b as f32).collect();
    Tensor::from_dims(vec![height, width, 3], data)
}

/// Reads one whitespace-delimited decimal integer, skipping `#` comments.
fn ppm_header_int(path: &Path, bytes: &[u8], cursor: &mut usize) -> Result<usize> {
    let truncated = || Error::TruncatedImage {
        path: path.to_path_buf(),
    };
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && bytes[*cursor].is_ascii_digit() {
        *cursor += 1;
    }
    if start == *cursor {
        return Err(if *cursor >= bytes.len() {
            truncated()
        } else {
            Error::UnsupportedImageFormat {
                path: path.to_path_buf(),
            }
        });
    }
    std::str::from_utf8(&bytes[start..*cursor])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(truncated)
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<Tensor<f32>> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| Error::PngDecode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let info = reader.info();
    let color = info.color_type;
    let depth = info.bit_depth;
    if depth != png::BitDepth::Eight
        || !matches!(color, png::ColorType::Rgb | png::ColorType::Rgba)
    {
        return Err(Error::UnsupportedImageFormat {
            path: path.to_path_buf(),
        });
    }
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader.next_frame(&mut buf).map_err(|e| Error::PngDecode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let channels = match color {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        _ => unreachable!(),
    };
    let mut data = Vec::with_capacity(w * h * 3);
    for px in buf[..w * h * channels].chunks_exact(channels) {
        data.push(px[0] as f32);
        data.push(px[1] as f32);
        data.push(px[2] as f32); // alpha, if present, is dropped
    }
    Tensor::from_dims(vec![h, w, 3], data)
}
