//! Mask file formats and deterministic dataset iteration.
//!
//! Three zero-dependency formats are supported, inferred from the file
//! extension:
//!
//! - `.pgm`: grayscale PGM (P2 or P5 read, P5 written), values normalized by
//!   the header maxval
//! - `.txt`: text grid of whitespace-separated 0/1 tokens, one row per line
//! - `.rle.json`: `{"h": .., "w": .., "counts": [..]}` with run lengths
//!   alternating background/foreground in column-major order
//!
//! Dataset iteration sorts relative paths by raw byte order so reports built
//! from a directory are identical on every platform.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::MaskRaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFormat {
    Pgm,
    TextGrid,
    RleJson,
}

impl MaskFormat {
    /// Infer the format from a file name; `.rle.json` wins over plain `.json`.
    pub fn from_path(path: &Path) -> Option<MaskFormat> {
        let name = path.file_name()?.to_str()?;
        if name.ends_with(".rle.json") {
            Some(MaskFormat::RleJson)
        } else if name.ends_with(".pgm") {
            Some(MaskFormat::Pgm)
        } else if name.ends_with(".txt") {
            Some(MaskFormat::TextGrid)
        } else {
            None
        }
    }
}

/// A mask file recognized by [`iter_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFile {
    pub path: PathBuf,
    pub format: MaskFormat,
    /// Path relative to the dataset root, `/`-separated; the sort key.
    pub relative: String,
}

/// Load a mask in any supported format, mapping values into `[0, 1]`.
pub fn load_mask(path: &Path) -> Result<MaskRaster> {
    let format = MaskFormat::from_path(path)
        .ok_or_else(|| Error::UnsupportedExtension(path.to_path_buf()))?;
    match format {
        MaskFormat::Pgm => load_pgm(path),
        MaskFormat::TextGrid => load_textgrid(path),
        MaskFormat::RleJson => load_rle_json(path),
    }
}

/// Save a mask, inferring the format from the extension.
///
/// With `binarize` the raster threshold is applied first. The text and RLE
/// formats only hold binary masks, so soft rasters must either be binarized
/// or already 0/1; PGM writes soft values as rounded 0-255 grayscale.
pub fn save_mask(raster: &MaskRaster, path: &Path, binarize: bool) -> Result<()> {
    let format = MaskFormat::from_path(path)
        .ok_or_else(|| Error::UnsupportedExtension(path.to_path_buf()))?;
    let binarized;
    let to_write = if binarize {
        binarized = raster.binarize();
        &binarized
    } else {
        raster
    };
    match format {
        MaskFormat::Pgm => save_pgm(to_write, path),
        MaskFormat::TextGrid => {
            require_binary(to_write, path, "textgrid")?;
            save_textgrid(to_write, path)
        }
        MaskFormat::RleJson => {
            require_binary(to_write, path, "rle-json")?;
            save_rle_json(to_write, path)
        }
    }
}

fn require_binary(raster: &MaskRaster, path: &Path, format: &str) -> Result<()> {
    if !raster.is_binary() {
        return Err(Error::mask_format(
            path,
            format!("{format} only stores binary masks; pass binarize or save as pgm"),
        ));
    }
    Ok(())
}

/// Recognized mask files under `dir`, recursively, ordered by the raw bytes
/// of their relative paths.
pub fn iter_dataset(dir: &Path) -> Result<Vec<MaskFile>> {
    let mut files = Vec::new();
    collect(dir, dir, &mut files)?;
    files.sort_by(|a, b| a.relative.as_bytes().cmp(b.relative.as_bytes()));
    Ok(files)
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<MaskFile>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ty = entry.file_type().map_err(|e| Error::io(&path, e))?;
        if ty.is_dir() {
            collect(root, &path, out)?;
        } else if let Some(format) = MaskFormat::from_path(&path) {
            let relative = path
                .strip_prefix(root)
                .expect("walk stays under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            out.push(MaskFile { path, format, relative });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

fn load_pgm(path: &Path) -> Result<MaskRaster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::mask_format(path, msg);

    // Header tokens are whitespace-separated; '#' starts a comment to EOL.
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        let mut tok = Vec::new();
        while pos < bytes.len() {
            let b = bytes[pos];
            if b == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if !tok.is_empty() {
                    break;
                }
                pos += 1;
            } else {
                tok.push(b);
                pos += 1;
            }
        }
        if tok.is_empty() {
            return Err(Error::mask_format(path, "truncated pgm header"));
        }
        Ok(String::from_utf8_lossy(&tok).into_owned())
    };

    let magic = token(&bytes)?;
    if magic != "P5" && magic != "P2" {
        return Err(bad(&format!("unsupported pgm magic {magic:?}")));
    }
    let w: usize = token(&bytes)?.parse().map_err(|_| bad("bad width"))?;
    let h: usize = token(&bytes)?.parse().map_err(|_| bad("bad height"))?;
    let maxval: u32 = token(&bytes)?.parse().map_err(|_| bad("bad maxval"))?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad(&format!("maxval {maxval} out of range")));
    }

    let values = if magic == "P2" {
        let mut values = Vec::with_capacity(h * w);
        for _ in 0..h * w {
            let v: u32 = token(&bytes)?.parse().map_err(|_| bad("bad pixel token"))?;
            if v > maxval {
                return Err(bad(&format!("pixel {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64 / maxval as f64);
        }
        values
    } else {
        // P5: exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let wide = maxval > 255;
        let need = h * w * if wide { 2 } else { 1 };
        let raster = bytes.get(pos..pos + need).ok_or_else(|| bad("truncated pgm raster"))?;
        let mut values = Vec::with_capacity(h * w);
        if wide {
            for pair in raster.chunks_exact(2) {
                let v = u16::from_be_bytes([pair[0], pair[1]]) as u32;
                if v > maxval {
                    return Err(bad(&format!("pixel {v} exceeds maxval {maxval}")));
                }
                values.push(v as f64 / maxval as f64);
            }
        } else {
            for &b in raster {
                let v = b as u32;
                if v > maxval {
                    return Err(bad(&format!("pixel {v} exceeds maxval {maxval}")));
                }
                values.push(v as f64 / maxval as f64);
            }
        }
        values
    };
    MaskRaster::new(h, w, values)
}

fn save_pgm(raster: &MaskRaster, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(raster.len() + 32);
    write!(out, "P5\n{} {}\n255\n", raster.width(), raster.height())
        .expect("writing to a Vec cannot fail");
    for &v in raster.values() {
        // round half up: 0.5 maps to 128
        out.push((v * 255.0).round() as u8);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Text grid
// ---------------------------------------------------------------------------

fn load_textgrid(path: &Path) -> Result<MaskRaster> {
    let mut text = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            match tok {
                "0" => row.push(0.0),
                "1" => row.push(1.0),
                other => {
                    return Err(Error::mask_format(
                        path,
                        format!("non-binary textgrid token {other:?}"),
                    ))
                }
            }
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::mask_format(path, "textgrid has no rows"));
    }
    let w = rows[0].len();
    if rows.iter().any(|r| r.len() != w) {
        return Err(Error::mask_format(path, "textgrid rows have unequal lengths"));
    }
    let h = rows.len();
    MaskRaster::new(h, w, rows.concat())
}

fn save_textgrid(raster: &MaskRaster, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(raster.len() * 2);
    for i in 0..raster.height() {
        for j in 0..raster.width() {
            if j > 0 {
                out.push(' ');
            }
            out.push(if raster.get(i, j) == 1.0 { '1' } else { '0' });
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Column-major run-length JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RleDoc {
    h: usize,
    w: usize,
    counts: Vec<u64>,
}

fn load_rle_json(path: &Path) -> Result<MaskRaster> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: RleDoc = serde_json::from_str(&text)
        .map_err(|e| Error::mask_format(path, format!("bad rle json: {e}")))?;
    if doc.h == 0 || doc.w == 0 {
        return Err(Error::mask_format(path, "rle dims must be positive"));
    }
    let total: u64 = doc.counts.iter().sum();
    if total != (doc.h * doc.w) as u64 {
        return Err(Error::mask_format(
            path,
            format!("run lengths sum to {total}, raster has {} pixels", doc.h * doc.w),
        ));
    }

    // Runs alternate 0s and 1s, starting with 0s, in column-major order.
    let mut values = vec![0.0; doc.h * doc.w];
    let mut pos = 0usize;
    for (run_idx, &run) in doc.counts.iter().enumerate() {
        let bit = (run_idx % 2) as u8;
        for _ in 0..run {
            if bit == 1 {
                let (col, row) = (pos / doc.h, pos % doc.h);
                values[row * doc.w + col] = 1.0;
            }
            pos += 1;
        }
    }
    MaskRaster::new(doc.h, doc.w, values)
}

fn save_rle_json(raster: &MaskRaster, path: &Path) -> Result<()> {
    let (h, w) = (raster.height(), raster.width());
    let mut counts = Vec::new();
    let mut current = 0u8; // runs start with background
    let mut run = 0u64;
    for pos in 0..h * w {
        let (col, row) = (pos / h, pos % h);
        let bit = if raster.get(row, col) == 1.0 { 1 } else { 0 };
        if bit == current {
            run += 1;
        } else {
            counts.push(run);
            current = bit;
            run = 1;
        }
    }
    counts.push(run);
    let doc = RleDoc { h, w, counts };
    fs::write(path, serde_json::to_string(&doc)?).map_err(|e| Error::io(path, e))
}
