//! Point-cloud and raster file formats.
//!
//! - ASCII PLY with `double x y z px py pz` vertices.
//! - Flat little-endian `f32` records of six values.
//! - KITTI-style 16-bit disparity PNG: `round(d * 256)`, 0 marks invalid pixels.
//! - 8-bit mask and part-location PNGs.
//! - PFM for lossless float rasters (1 or 3 channels).

use std::io::{BufRead, Cursor, Write};

use crate::error::{Error, Result};
use crate::parts::{part_to_rgb, PartLocation};
use crate::pointcloud::InstancePointCloud;
use crate::raster::Raster;

const PLY_PROPERTIES: [&str; 6] = ["x", "y", "z", "px", "py", "pz"];

pub fn write_ply<W: Write>(mut w: W, cloud: &InstancePointCloud) -> Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for p in PLY_PROPERTIES {
        writeln!(w, "property double {p}")?;
    }
    writeln!(w, "end_header")?;
    for r in cloud.to_rows() {
        writeln!(w, "{} {} {} {} {} {}", r[0], r[1], r[2], r[3], r[4], r[5])?;
    }
    Ok(())
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

/// Read the `N x 6` vertex table of an ASCII PLY written by [`write_ply`].
pub fn read_ply(text: &str) -> Result<Vec<[f64; 6]>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(format_err(1, "missing `ply` magic")),
    }
    let mut count = None;
    let mut props = Vec::new();
    loop {
        let (n, line) = lines.next().ok_or_else(|| format_err(0, "missing end_header"))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] | ["comment", ..] => {}
            ["format", other, ..] => return Err(format_err(n, format!("unsupported format {other}"))),
            ["element", "vertex", c] => {
                count = Some(c.parse::<usize>().map_err(|e| format_err(n, e.to_string()))?);
            }
            ["property", _, name] => props.push(name.to_string()),
            _ => return Err(format_err(n, format!("unexpected header line {line:?}"))),
        }
    }
    if props != PLY_PROPERTIES {
        return Err(format_err(0, format!("expected properties {PLY_PROPERTIES:?}, found {props:?}")));
    }
    let count = count.ok_or_else(|| format_err(0, "missing vertex element"))?;
    let mut rows = Vec::with_capacity(count);
    for (n, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|e| format_err(n, format!("{v:?}: {e}"))))
            .collect::<Result<_>>()?;
        let row: [f64; 6] = vals
            .try_into()
            .map_err(|v: Vec<f64>| format_err(n, format!("expected 6 values, found {}", v.len())))?;
        rows.push(row);
    }
    if rows.len() != count {
        return Err(format_err(0, format!("header declares {count} vertices, found {}", rows.len())));
    }
    Ok(rows)
}

/// Flat binary: six little-endian `f32` per point.
pub fn write_cloud_bin<W: Write>(mut w: W, cloud: &InstancePointCloud) -> Result<()> {
    for r in cloud.to_rows() {
        for v in r {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_cloud_bin(bytes: &[u8]) -> Result<Vec<[f32; 6]>> {
    if !bytes.len().is_multiple_of(24) {
        return Err(Error::Input(format!(
            "binary cloud length {} is not a multiple of 24 bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(24)
        .map(|rec| std::array::from_fn(|i| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap())))
        .collect())
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Png(e.to_string())
}

fn encode_png(width: usize, height: usize, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

fn decode_png(bytes: &[u8], color: png::ColorType, depth: png::BitDepth) -> Result<(usize, usize, Vec<u8>)> {
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().map_err(png_err)?;
    if reader.output_color_type() != (color, depth) {
        return Err(Error::Png(format!(
            "expected {color:?} {depth:?}, found {:?}",
            reader.output_color_type()
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

/// Encode disparities as a 16-bit PNG. Pixels outside `mask` are written as 0.
///
/// Fails on masked values that are negative, non-finite, round to 0, or
/// exceed `65535 / 256`.
pub fn encode_disparity_png(disparity: &Raster<f64>, mask: &Raster<bool>) -> Result<Vec<u8>> {
    if disparity.dims() != mask.dims() {
        return Err(Error::Shape {
            expected: disparity.dims(),
            found: mask.dims(),
        });
    }
    let mut data = Vec::with_capacity(disparity.as_slice().len() * 2);
    for (&d, &m) in disparity.as_slice().iter().zip(mask.as_slice()) {
        let q = if m {
            let q = (d * 256.0).round();
            if !(1.0..=65535.0).contains(&q) {
                return Err(Error::domain(format!("disparity {d} cannot be stored in a 16-bit PNG")));
            }
            q as u16
        } else {
            0
        };
        data.extend_from_slice(&q.to_be_bytes());
    }
    let (w, h) = disparity.dims();
    encode_png(w, h, png::ColorType::Grayscale, png::BitDepth::Sixteen, &data)
}

/// Decode a 16-bit disparity PNG into disparities and a validity mask.
pub fn decode_disparity_png(bytes: &[u8]) -> Result<(Raster<f64>, Raster<bool>)> {
    let (w, h, data) = decode_png(bytes, png::ColorType::Grayscale, png::BitDepth::Sixteen)?;
    let raw: Vec<u16> = data
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((
        Raster::from_vec(w, h, raw.iter().map(|&q| q as f64 / 256.0).collect())?,
        Raster::from_vec(w, h, raw.iter().map(|&q| q != 0).collect())?,
    ))
}

pub fn encode_mask_png(mask: &Raster<bool>) -> Result<Vec<u8>> {
    let data: Vec<u8> = mask.as_slice().iter().map(|&m| if m { 255 } else { 0 }).collect();
    let (w, h) = mask.dims();
    encode_png(w, h, png::ColorType::Grayscale, png::BitDepth::Eight, &data)
}

pub fn decode_mask_png(bytes: &[u8]) -> Result<Raster<bool>> {
    let (w, h, data) = decode_png(bytes, png::ColorType::Grayscale, png::BitDepth::Eight)?;
    Raster::from_vec(w, h, data.into_iter().map(|v| v >= 128).collect())
}

/// 8-bit RGB visualization of part locations (lossy).
pub fn encode_parts_png(parts: &Raster<[f64; 3]>, mask: &Raster<bool>) -> Result<Vec<u8>> {
    if parts.dims() != mask.dims() {
        return Err(Error::Shape {
            expected: parts.dims(),
            found: mask.dims(),
        });
    }
    let data: Vec<u8> = parts
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .flat_map(|(&p, &m)| if m { part_to_rgb(&PartLocation::from_array(p)) } else { [0; 3] })
        .collect();
    let (w, h) = parts.dims();
    encode_png(w, h, png::ColorType::Rgb, png::BitDepth::Eight, &data)
}

fn write_pfm<W: Write>(mut w: W, width: usize, height: usize, channels: usize, values: &[f64]) -> Result<()> {
    writeln!(w, "{}", if channels == 3 { "PF" } else { "Pf" })?;
    writeln!(w, "{width} {height}")?;
    writeln!(w, "-1.0")?;
    // rows are stored bottom to top
    for row in values.chunks_exact(width * channels).rev() {
        for &v in row {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_pfm(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    let mut cursor = Cursor::new(bytes);
    let mut header = Vec::new();
    for n in 1..=3 {
        let mut line = String::new();
        cursor.read_line(&mut line)?;
        if line.is_empty() {
            return Err(format_err(n, "truncated PFM header"));
        }
        header.push(line.trim().to_string());
    }
    let channels = match header[0].as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(format_err(1, format!("unknown PFM magic {other:?}"))),
    };
    let dims: Vec<usize> = header[1]
        .split_whitespace()
        .map(|v| v.parse().map_err(|e| format_err(2, format!("{v:?}: {e}"))))
        .collect::<Result<_>>()?;
    let [width, height] = dims[..] else {
        return Err(format_err(2, "expected width and height"));
    };
    let scale: f64 = header[2].parse().map_err(|e| format_err(3, format!("{e}")))?;
    let little = scale < 0.0;
    let body = &bytes[cursor.position() as usize..];
    let n = width * height * channels;
    if body.len() != n * 4 {
        return Err(Error::Input(format!("PFM body has {} bytes, expected {}", body.len(), n * 4)));
    }
    let floats: Vec<f64> = body
        .chunks_exact(4)
        .map(|b| {
            let b: [u8; 4] = b.try_into().unwrap();
            (if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }) as f64
        })
        .collect();
    let values = if width == 0 {
        floats
    } else {
        floats.chunks_exact(width * channels).rev().flatten().copied().collect()
    };
    Ok((width, height, channels, values))
}

/// Write a single-channel raster as little-endian PFM (values stored as `f32`).
pub fn write_pfm_gray<W: Write>(w: W, raster: &Raster<f64>) -> Result<()> {
    write_pfm(w, raster.width(), raster.height(), 1, raster.as_slice())
}

pub fn write_pfm_rgb<W: Write>(w: W, raster: &Raster<[f64; 3]>) -> Result<()> {
    let flat: Vec<f64> = raster.as_slice().iter().flatten().copied().collect();
    write_pfm(w, raster.width(), raster.height(), 3, &flat)
}

pub fn read_pfm_gray(bytes: &[u8]) -> Result<Raster<f64>> {
    match read_pfm(bytes)? {
        (w, h, 1, values) => Raster::from_vec(w, h, values),
        _ => Err(Error::Input("expected a single-channel PFM".into())),
    }
}

pub fn read_pfm_rgb(bytes: &[u8]) -> Result<Raster<[f64; 3]>> {
    match read_pfm(bytes)? {
        (w, h, 3, values) => Raster::from_vec(w, h, values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()),
        _ => Err(Error::Input("expected a three-channel PFM".into())),
    }
}
