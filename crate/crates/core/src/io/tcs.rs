//! TCS raster container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "TCS1" | T: u32 | H: u32 | W: u32 | C: u32 | dtype: u8
//! T*C*H*W samples in [t][channel][row][col] order
//! H*W mask bytes (chip files only)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Result, TcmError};
use crate::geom_raster::{ChipStack, Mask, Raster, SampleType};

pub const MAGIC: &[u8; 4] = b"TCS1";
const HEADER_LEN: usize = 4 + 4 * 4 + 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TcsImage {
    pub layers: Vec<Raster>,
    pub dtype: SampleType,
    pub mask: Option<Mask>,
}

pub fn encode(layers: &[Raster], dtype: SampleType, mask: Option<&Mask>) -> Result<Vec<u8>> {
    let first = layers
        .first()
        .ok_or_else(|| TcmError::InvalidArgument("no layers to encode".into()))?;
    let (h, w, c) = first.shape();
    if layers.iter().any(|l| l.shape() != (h, w, c)) {
        return Err(TcmError::InvalidArgument("layers differ in shape".into()));
    }
    if let Some(m) = mask {
        if (m.height(), m.width()) != (h, w) {
            return Err(TcmError::InvalidArgument(
                "mask shape differs from layers".into(),
            ));
        }
    }
    let dims = [layers.len(), h, w, c].map(|v| {
        u32::try_from(v)
            .map_err(|_| TcmError::InvalidArgument(format!("dimension {v} exceeds u32")))
    });
    let samples = layers.len() * h * w * c;
    let mut out = Vec::with_capacity(HEADER_LEN + samples * dtype.byte_width() + h * w);
    out.extend_from_slice(MAGIC);
    for d in dims {
        out.extend_from_slice(&d?.to_le_bytes());
    }
    out.push(dtype.code());
    for layer in layers {
        for ch in 0..c {
            for px in layer.pixels() {
                let v = dtype.quantize(px[ch]);
                match dtype {
                    SampleType::U8 => out.push(v as u8),
                    SampleType::U16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
                    SampleType::F32 => out.extend_from_slice(&v.to_le_bytes()),
                }
            }
        }
    }
    if let Some(m) = mask {
        out.extend(m.as_slice().iter().map(|&b| b as u8));
    }
    Ok(out)
}

/// Parses a TCS buffer. Whether a mask is present follows from the
/// trailing byte count.
pub fn decode(bytes: &[u8]) -> std::result::Result<TcsImage, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic".into());
    }
    let word =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (t, h, w, c) = (word(0), word(1), word(2), word(3));
    let dtype = SampleType::from_code(bytes[HEADER_LEN - 1])
        .ok_or_else(|| format!("unknown dtype code {}", bytes[HEADER_LEN - 1]))?;
    if t == 0 || h == 0 || w == 0 || c == 0 {
        return Err(format!("empty dimensions {t}x{h}x{w}x{c}"));
    }
    let plane = h.checked_mul(w).ok_or("dimensions overflow")?;
    let body = t
        .checked_mul(c)
        .and_then(|v| v.checked_mul(plane))
        .and_then(|v| v.checked_mul(dtype.byte_width()))
        .ok_or("dimensions overflow")?;
    let rest = bytes.len() - HEADER_LEN;
    let has_mask = if rest == body {
        false
    } else if rest.checked_sub(body) == Some(plane) {
        true
    } else {
        return Err(format!(
            "expected {body} or {} payload bytes, found {rest}",
            body + plane
        ));
    };

    let payload = &bytes[HEADER_LEN..HEADER_LEN + body];
    let bw = dtype.byte_width();
    let sample = |i: usize| -> f32 {
        let b = &payload[i * bw..(i + 1) * bw];
        match dtype {
            SampleType::U8 => b[0] as f32,
            SampleType::U16 => u16::from_le_bytes([b[0], b[1]]) as f32,
            SampleType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
        }
    };
    let mut layers = Vec::with_capacity(t);
    for l in 0..t {
        let mut data = vec![0f32; plane * c];
        for ch in 0..c {
            let base = (l * c + ch) * plane;
            for p in 0..plane {
                data[p * c + ch] = sample(base + p);
            }
        }
        layers.push(Raster::new(h, w, c, data).map_err(|e| e.to_string())?);
    }
    let mask = if has_mask {
        let raw = &bytes[HEADER_LEN + body..];
        if let Some(bad) = raw.iter().find(|&&b| b > 1) {
            return Err(format!("mask byte {bad} is not 0 or 1"));
        }
        Some(Mask::new(h, w, raw.iter().map(|&b| b == 1).collect()).map_err(|e| e.to_string())?)
    } else {
        None
    };
    Ok(TcsImage {
        layers,
        dtype,
        mask,
    })
}

pub fn read(path: &Path) -> Result<TcsImage> {
    let bytes = fs::read(path).map_err(|e| TcmError::io(path, e))?;
    decode(&bytes).map_err(|reason| TcmError::format("TCS raster", path, reason))
}

pub fn write(path: &Path, layers: &[Raster], dtype: SampleType, mask: Option<&Mask>) -> Result<()> {
    let bytes = encode(layers, dtype, mask)?;
    fs::write(path, bytes).map_err(|e| TcmError::io(path, e))
}

/// Writes every layer of a chip stack followed by its footprint mask.
pub fn write_chips(path: &Path, chips: &ChipStack, dtype: SampleType) -> Result<()> {
    write(path, chips.layers(), dtype, Some(chips.mask()))
}
