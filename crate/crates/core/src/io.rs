//! Readers and writers for `.flo` files, mask and id-map PNGs, the per-frame
//! stack directory layout and the single-file AMFL container.
//!
//! All writers go through a temp file followed by a rename, so a reader never
//! observes a half-written file.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use crate::error::{Error, Result};
use crate::flow::{FlowField, LayeredFlowStack, LevelField, MAX_LEVELS};
use crate::raster::{IdMap, Mask, Raster};

/// `.flo` magic number, the float32 whose bytes spell "PIEH".
pub const FLO_MAGIC: f32 = 202021.25;
pub const FLO_HEADER_LEN: usize = 12;

pub const AMFL_MAGIC: &[u8; 4] = b"AMFL";
pub const AMFL_VERSION: u32 = 1;
pub const AMFL_HEADER_LEN: usize = 17;

// Sanity cap on stored dimensions, well above any real sensor.
const MAX_DIM: usize = 1 << 15;

pub fn frame_dir_name(frame: usize) -> String {
    format!("frame_{frame:06}")
}

pub fn level_flow_name(level: usize) -> String {
    format!("level_{level}.flo")
}

pub fn level_mask_name(level: usize) -> String {
    format!("level_{level}_mask.png")
}

pub fn amodal_mask_name(instance: u32) -> String {
    format!("inst_{instance}_amodal.png")
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Parameter(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn checked_dims(width: i64, height: i64) -> Result<(usize, usize)> {
    if width <= 0 || height <= 0 {
        return Err(Error::format(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if width as usize > MAX_DIM || height as usize > MAX_DIM {
        return Err(Error::format(format!(
            "dimensions {width}x{height} exceed the {MAX_DIM} px limit"
        )));
    }
    Ok((width as usize, height as usize))
}

fn le_f32(bytes: &[u8]) -> f32 {
    f32::from_le_bytes(bytes.try_into().unwrap())
}

fn le_u32(bytes: &[u8]) -> u32 {
    u32::from_le_bytes(bytes.try_into().unwrap())
}

// ---------------------------------------------------------------------------
// .flo

pub fn encode_flo(field: &FlowField) -> Vec<u8> {
    let (w, h) = field.dims();
    let mut out = Vec::with_capacity(FLO_HEADER_LEN + w * h * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for (u, v) in field.u().iter().zip(field.v()) {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < FLO_HEADER_LEN {
        return Err(Error::format("truncated .flo header"));
    }
    if bytes[0..4] != FLO_MAGIC.to_le_bytes() {
        return Err(Error::format("bad .flo magic"));
    }
    let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let (w, h) = checked_dims(width as i64, height as i64)?;
    let expected = FLO_HEADER_LEN + w * h * 8;
    if bytes.len() < expected {
        return Err(Error::format(format!(
            "truncated .flo payload: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(Error::format(format!(
            "trailing data after .flo payload ({} extra bytes)",
            bytes.len() - expected
        )));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for pair in bytes[FLO_HEADER_LEN..].chunks_exact(8) {
        u.push(le_f32(&pair[0..4]));
        v.push(le_f32(&pair[4..8]));
    }
    FlowField::new(w, h, u, v)
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    decode_flo(&read_bytes(path)?).map_err(|e| with_path(e, path))
}

pub fn write_flo(field: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_flo(field))
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    }
}

// ---------------------------------------------------------------------------
// PNG rasters

fn encode_png(image: DynamicImage, path: &Path) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    image
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(buf.into_inner())
}

fn decode_png(path: &Path) -> Result<DynamicImage> {
    let bytes = read_bytes(path)?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Writes a mask as 8-bit grayscale with values 0 and 255.
pub fn write_mask_png(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = mask.dims();
    let pixels = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(w as u32, h as u32, pixels)
        .expect("buffer length matches dimensions");
    write_atomic(path, &encode_png(DynamicImage::ImageLuma8(img), path)?)
}

/// Reads an 8-bit grayscale mask PNG; only the values 0 and 255 are accepted.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let img = match decode_png(path)? {
        DynamicImage::ImageLuma8(img) => img,
        other => {
            return Err(Error::Format(format!(
                "{}: mask must be 8-bit grayscale, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let bits = img
        .into_raw()
        .into_iter()
        .map(|p| match p {
            0 => Ok(false),
            255 => Ok(true),
            other => Err(Error::Format(format!(
                "{}: mask value {other} is neither 0 nor 255",
                path.display()
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Mask::from_bits(w, h, bits)
}

/// Writes an instance id map as 16-bit grayscale (0 = background).
pub fn write_id_png(ids: &IdMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = ids.dims();
    let pixels = ids
        .data()
        .iter()
        .map(|&id| {
            u16::try_from(id)
                .map_err(|_| Error::Parameter(format!("instance id {id} does not fit in 16 bits")))
        })
        .collect::<Result<Vec<_>>>()?;
    let img = ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w as u32, h as u32, pixels)
        .expect("buffer length matches dimensions");
    write_atomic(path, &encode_png(DynamicImage::ImageLuma16(img), path)?)
}

/// Reads a 16-bit (or 8-bit) grayscale instance id map.
pub fn read_id_png(path: impl AsRef<Path>) -> Result<IdMap> {
    let path = path.as_ref();
    let (w, h, data) = match decode_png(path)? {
        DynamicImage::ImageLuma16(img) => (
            img.width(),
            img.height(),
            img.into_raw().into_iter().map(u32::from).collect::<Vec<_>>(),
        ),
        DynamicImage::ImageLuma8(img) => (
            img.width(),
            img.height(),
            img.into_raw().into_iter().map(u32::from).collect(),
        ),
        other => {
            return Err(Error::Format(format!(
                "{}: id map must be grayscale, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    Raster::from_vec(w as usize, h as usize, data)
}

pub fn write_rgb_png(img: &image::RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, &encode_png(DynamicImage::ImageRgb8(img.clone()), path)?)
}

// ---------------------------------------------------------------------------
// Stack directory layout

/// Reads `level_<n>.flo` / `level_<n>_mask.png` pairs from one frame directory.
///
/// A missing level-0 mask means "background everywhere".
pub fn read_stack_dir(dir: impl AsRef<Path>) -> Result<LayeredFlowStack> {
    let dir = dir.as_ref();
    if !dir.join(level_flow_name(0)).is_file() {
        return Err(Error::Format(format!(
            "{}: missing {}",
            dir.display(),
            level_flow_name(0)
        )));
    }
    let mut levels = Vec::new();
    for n in 0.. {
        let flow_path = dir.join(level_flow_name(n));
        let mask_path = dir.join(level_mask_name(n));
        if !flow_path.is_file() {
            if mask_path.is_file() {
                return Err(Error::Format(format!(
                    "{}: found {} without {}",
                    dir.display(),
                    level_mask_name(n),
                    level_flow_name(n)
                )));
            }
            break;
        }
        if n >= MAX_LEVELS {
            return Err(Error::Format(format!(
                "{}: more than {MAX_LEVELS} levels",
                dir.display()
            )));
        }
        let flow = read_flo(&flow_path)?;
        let mask = if mask_path.is_file() {
            read_mask_png(&mask_path)?
        } else if n == 0 {
            Mask::full(flow.width(), flow.height())
        } else {
            return Err(Error::Format(format!(
                "{}: missing {}",
                dir.display(),
                level_mask_name(n)
            )));
        };
        if mask.dims() != flow.dims() {
            return Err(Error::Format(format!(
                "{}: level {n} mask is {:?} but flow is {:?}",
                dir.display(),
                mask.dims(),
                flow.dims()
            )));
        }
        levels.push(LevelField { mask, flow });
    }
    let dims = levels[0].dims();
    if let Some(n) = levels.iter().position(|l| l.dims() != dims) {
        return Err(Error::Format(format!(
            "{}: level {n} has dimensions {:?}, level 0 has {:?}",
            dir.display(),
            levels[n].dims(),
            dims
        )));
    }
    LayeredFlowStack::new(levels)
}

/// Writes every level's flow and mask into `dir`, creating it if needed.
pub fn write_stack_dir(stack: &LayeredFlowStack, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    check_level_cap(stack)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (n, level) in stack.levels().iter().enumerate() {
        write_flo(&level.flow, dir.join(level_flow_name(n)))?;
        write_mask_png(&level.mask, dir.join(level_mask_name(n)))?;
    }
    Ok(())
}

fn check_level_cap(stack: &LayeredFlowStack) -> Result<()> {
    if stack.num_levels() > MAX_LEVELS {
        return Err(Error::Format(format!(
            "stack has {} levels, at most {MAX_LEVELS} can be stored",
            stack.num_levels()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// AMFL container

pub fn encode_amfl(stack: &LayeredFlowStack) -> Result<Vec<u8>> {
    check_level_cap(stack)?;
    let (w, h) = stack.dims();
    let mut out = Vec::with_capacity(AMFL_HEADER_LEN + stack.num_levels() * w * h * 9);
    out.extend_from_slice(AMFL_MAGIC);
    out.extend_from_slice(&AMFL_VERSION.to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.push(stack.num_levels() as u8);
    for level in stack.levels() {
        out.extend(level.mask.bits().iter().map(|&b| b as u8));
        for (u, v) in level.flow.u().iter().zip(level.flow.v()) {
            out.extend_from_slice(&u.to_le_bytes());
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_amfl(bytes: &[u8]) -> Result<LayeredFlowStack> {
    if bytes.len() < AMFL_HEADER_LEN {
        return Err(Error::format("truncated AMFL header"));
    }
    if &bytes[0..4] != AMFL_MAGIC {
        return Err(Error::format("bad AMFL magic"));
    }
    let version = le_u32(&bytes[4..8]);
    if version != AMFL_VERSION {
        return Err(Error::format(format!("unsupported AMFL version {version}")));
    }
    let (w, h) = checked_dims(le_u32(&bytes[8..12]) as i64, le_u32(&bytes[12..16]) as i64)?;
    let n = bytes[16] as usize;
    if n == 0 || n > MAX_LEVELS {
        return Err(Error::format(format!(
            "AMFL level count {n} outside 1..={MAX_LEVELS}"
        )));
    }
    let per_level = w * h * 9;
    let expected = AMFL_HEADER_LEN + n * per_level;
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "AMFL payload size mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let mut levels = Vec::with_capacity(n);
    for chunk in bytes[AMFL_HEADER_LEN..].chunks_exact(per_level) {
        let (mask_bytes, flow_bytes) = chunk.split_at(w * h);
        let mask = Mask::from_bytes(w, h, mask_bytes)?;
        let mut u = Vec::with_capacity(w * h);
        let mut v = Vec::with_capacity(w * h);
        for pair in flow_bytes.chunks_exact(8) {
            u.push(le_f32(&pair[0..4]));
            v.push(le_f32(&pair[4..8]));
        }
        levels.push(LevelField {
            mask,
            flow: FlowField::new(w, h, u, v)?,
        });
    }
    LayeredFlowStack::new(levels)
}

pub fn read_amfl(path: impl AsRef<Path>) -> Result<LayeredFlowStack> {
    let path = path.as_ref();
    decode_amfl(&read_bytes(path)?).map_err(|e| with_path(e, path))
}

pub fn write_amfl(stack: &LayeredFlowStack, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_amfl(stack)?)
}

fn is_amfl_path(path: &Path) -> bool {
    path.extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("amfl"))
}

/// Reads a stack from a frame directory or an `.amfl` container file.
pub fn read_stack(path: impl AsRef<Path>) -> Result<LayeredFlowStack> {
    let path = path.as_ref();
    if path.is_file() {
        read_amfl(path)
    } else if path.is_dir() {
        read_stack_dir(path)
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ))
    }
}

/// Writes an `.amfl` container when `path` has that extension, otherwise a
/// frame directory.
pub fn write_stack(stack: &LayeredFlowStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_amfl_path(path) {
        write_amfl(stack, path)
    } else {
        write_stack_dir(stack, path)
    }
}

/// Sorted `(frame index, path)` pairs for every `frame_NNNNNN` directory in `root`.
pub fn list_frame_dirs(root: impl AsRef<Path>) -> Result<Vec<(usize, PathBuf)>> {
    let root = root.as_ref();
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(index) = name.strip_prefix("frame_") else {
            continue;
        };
        if index.len() != 6 || !entry.path().is_dir() {
            continue;
        }
        if let Ok(index) = index.parse::<usize>() {
            frames.push((index, entry.path()));
        }
    }
    frames.sort();
    Ok(frames)
}

/// Reads every `inst_<id>_amodal.png` in a frame directory, sorted by id.
pub fn read_amodal_masks(dir: impl AsRef<Path>) -> Result<Vec<(u32, Mask)>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(id) = name
            .to_str()
            .and_then(|n| n.strip_prefix("inst_"))
            .and_then(|n| n.strip_suffix("_amodal.png"))
            .and_then(|n| n.parse::<u32>().ok())
        else {
            continue;
        };
        out.push((id, read_mask_png(entry.path())?));
    }
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_field() -> FlowField {
        FlowField::new(2, 2, vec![1.5, 0.0, 3.0, -1.0], vec![-0.25, 0.0, 4.0, 2.0]).unwrap()
    }

    fn sample_stack(n: usize, w: usize, h: usize) -> LayeredFlowStack {
        let levels = (0..n)
            .map(|k| LevelField {
                mask: if k == 0 {
                    Mask::full(w, h)
                } else {
                    Mask::from_fn(w, h, |x, y| (x + y + k) % 3 == 0)
                },
                flow: FlowField::from_fn(w, h, |x, y| (x as f32 * 0.25 + k as f32, -(y as f32) / 3.0))
                    .unwrap(),
            })
            .collect();
        LayeredFlowStack::new(levels).unwrap()
    }

    #[test]
    fn flo_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.flo");
        let f = sample_field();
        write_flo(&f, &path).unwrap();
        let g = read_flo(&path).unwrap();
        let bits = |f: &FlowField| {
            f.u().iter().chain(f.v()).map(|x| x.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(bits(&f), bits(&g));
        assert_eq!(fs::read(&path).unwrap(), encode_flo(&g));
    }

    #[test]
    fn flo_byte_counts() {
        // a 1x1 field carries one (u, v) float32 pair
        let bytes = encode_flo(&FlowField::zeros(1, 1));
        assert_eq!(bytes.len() - FLO_HEADER_LEN, 8);
        assert_eq!(encode_flo(&FlowField::zeros(2, 2)).len(), 12 + 2 * 2 * 2 * 4);
        assert_eq!(&bytes[0..4], b"PIEH");
    }

    #[test]
    fn flo_rejects_bad_input() {
        let mut bytes = encode_flo(&sample_field());
        assert!(matches!(decode_flo(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        bytes[0] = b'X';
        assert!(matches!(decode_flo(&bytes), Err(Error::Format(_))));
        let mut zero_width = encode_flo(&sample_field());
        zero_width[4..8].copy_from_slice(&0i32.to_le_bytes());
        assert!(matches!(decode_flo(&zero_width), Err(Error::Format(_))));
        let mut negative = encode_flo(&sample_field());
        negative[8..12].copy_from_slice(&(-2i32).to_le_bytes());
        assert!(matches!(decode_flo(&negative), Err(Error::Format(_))));
        let mut nan = encode_flo(&sample_field());
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_flo(&nan).is_err());
    }

    #[test]
    fn mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let m = Mask::from_fn(7, 5, |x, y| (x * y) % 2 == 1);
        write_mask_png(&m, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(read_mask_png(&path).unwrap(), m);
        write_mask_png(&read_mask_png(&path).unwrap(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes);
        let img = image::open(&path).unwrap().to_luma8();
        assert!(img.pixels().all(|p| p.0[0] == 0 || p.0[0] == 255));
    }

    #[test]
    fn id_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ids.png");
        let ids = Raster::from_fn(4, 3, |x, y| (x * 1000 + y) as u32);
        write_id_png(&ids, &path).unwrap();
        assert_eq!(read_id_png(&path).unwrap(), ids);
        let too_big = Raster::filled(1, 1, 70_000u32);
        assert!(write_id_png(&too_big, &path).is_err());
    }

    #[test]
    fn stack_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stack = sample_stack(3, 6, 4);
        write_stack(&stack, dir.path().join("f")).unwrap();
        assert_eq!(read_stack(dir.path().join("f")).unwrap(), stack);
    }

    #[test]
    fn stack_dir_missing_mask_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let stack = sample_stack(2, 4, 4);
        write_stack_dir(&stack, dir.path()).unwrap();
        fs::remove_file(dir.path().join("level_1_mask.png")).unwrap();
        assert!(matches!(read_stack_dir(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn stack_dir_level0_mask_optional() {
        let dir = tempfile::tempdir().unwrap();
        let stack = sample_stack(2, 4, 4);
        write_stack_dir(&stack, dir.path()).unwrap();
        fs::remove_file(dir.path().join("level_0_mask.png")).unwrap();
        let back = read_stack_dir(dir.path()).unwrap();
        assert_eq!(back.levels()[0].mask, Mask::full(4, 4));
    }

    #[test]
    fn stack_dir_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        write_stack_dir(&sample_stack(2, 4, 4), dir.path()).unwrap();
        write_flo(&FlowField::zeros(5, 4), dir.path().join("level_1.flo")).unwrap();
        write_mask_png(&Mask::full(5, 4), dir.path().join("level_1_mask.png")).unwrap();
        assert!(matches!(read_stack_dir(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn stack_dir_too_many_levels() {
        let dir = tempfile::tempdir().unwrap();
        write_stack_dir(&sample_stack(8, 3, 3), dir.path()).unwrap();
        write_flo(&FlowField::zeros(3, 3), dir.path().join("level_8.flo")).unwrap();
        write_mask_png(&Mask::full(3, 3), dir.path().join("level_8_mask.png")).unwrap();
        assert!(matches!(read_stack_dir(dir.path()), Err(Error::Format(_))));
        assert!(write_stack_dir(&sample_stack(9, 3, 3), dir.path().join("x")).is_err());
    }

    #[test]
    fn amfl_size_and_round_trip() {
        let stack = sample_stack(8, 128, 96);
        let bytes = encode_amfl(&stack).unwrap();
        assert_eq!(bytes.len(), 8 * (128 * 96 + 128 * 96 * 2 * 4) + AMFL_HEADER_LEN);
        assert_eq!(decode_amfl(&bytes).unwrap(), stack);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.amfl");
        write_stack(&stack, &path).unwrap();
        assert_eq!(read_stack(&path).unwrap(), stack);
        assert_eq!(fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn amfl_rejects_bad_input() {
        let bytes = encode_amfl(&sample_stack(2, 3, 2)).unwrap();
        assert!(decode_amfl(&bytes[..bytes.len() - 3]).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(decode_amfl(&bad_magic).is_err());
        let mut too_many = bytes.clone();
        too_many[16] = 9;
        assert!(decode_amfl(&too_many).is_err());
        let mut bad_mask = bytes.clone();
        bad_mask[AMFL_HEADER_LEN] = 7;
        assert!(decode_amfl(&bad_mask).is_err());
    }

    #[test]
    fn frame_dirs_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for i in [3usize, 0, 12] {
            fs::create_dir(dir.path().join(frame_dir_name(i))).unwrap();
        }
        fs::create_dir(dir.path().join("frame_x")).unwrap();
        let frames = list_frame_dirs(dir.path()).unwrap();
        assert_eq!(frames.iter().map(|f| f.0).collect::<Vec<_>>(), vec![0, 3, 12]);
    }

    proptest! {
        #[test]
        fn flo_bytes_round_trip(w in 1usize..6, h in 1usize..6, seed in any::<u64>()) {
            let field = FlowField::from_fn(w, h, |x, y| {
                let s = seed.wrapping_mul(31).wrapping_add((x * 7 + y) as u64);
                ((s % 1000) as f32 / 7.0 - 50.0, (s % 333) as f32 * -0.125)
            }).unwrap();
            let bytes = encode_flo(&field);
            let back = decode_flo(&bytes).unwrap();
            prop_assert_eq!(encode_flo(&back), bytes);
            prop_assert_eq!(back, field);
        }
    }
}
