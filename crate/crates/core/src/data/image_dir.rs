//! `<root>/<ClassName>/*.png` directory trees of 32x32 8-bit RGB patches.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::data::dataset::{Dataset, CLASS_NAMES, PATCH_BYTES, PATCH_SIDE};
use crate::error::{Error, Result};

fn png_err(path: &Path, message: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}: {message}", path.display()))
}

/// Decode an 8-bit RGB PNG, returning `(width, height, pixels)`.
pub fn read_png_rgb(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<u8>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let decoder = png::Decoder::new(file);
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(png_err(
            path,
            format!(
                "expected 8-bit RGB, found {:?} at {:?}",
                info.color_type, info.bit_depth
            ),
        ));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, buf))
}

/// A single 32x32 patch.
pub fn read_png_patch(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let (w, h, data) = read_png_rgb(path)?;
    if w as usize != PATCH_SIDE || h as usize != PATCH_SIDE {
        return Err(png_err(
            path,
            format!("expected {PATCH_SIDE}x{PATCH_SIDE} pixels, found {w}x{h}"),
        ));
    }
    debug_assert_eq!(data.len(), PATCH_BYTES);
    Ok(data)
}

pub fn write_png_rgb(path: impl AsRef<Path>, width: u32, height: u32, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file =
        File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width, height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| png_err(path, e))?;
    writer
        .write_image_data(pixels)
        .map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    entries.sort();
    Ok(entries)
}

/// Loads every class folder. Samples are ordered by class, then by file name,
/// independent of directory listing order.
pub fn load_image_dir(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    let mut per_class: Vec<Vec<PathBuf>> = vec![Vec::new(); CLASS_NAMES.len()];
    for entry in sorted_entries(root)? {
        if !entry.is_dir() {
            continue;
        }
        let name = entry
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let label = CLASS_NAMES.iter().position(|&c| c == name).ok_or_else(|| {
            Error::Data(format!(
                "unknown class folder `{name}` in {} (expected {})",
                root.display(),
                CLASS_NAMES.join(", ")
            ))
        })?;
        per_class[label] = sorted_entries(&entry)?
            .into_iter()
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
            })
            .collect();
    }
    let mut ds = Dataset::empty();
    for (label, files) in per_class.iter().enumerate() {
        for path in files {
            ds.push(&read_png_patch(path)?, label as u8)?;
        }
    }
    if ds.is_empty() {
        return Err(Error::Data(format!(
            "no PNG patches found under {}",
            root.display()
        )));
    }
    Ok(ds)
}

/// Inverse of [`load_image_dir`]: one folder per class, files numbered in dataset order.
pub fn write_image_dir(root: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let root = root.as_ref();
    for (label, class) in CLASS_NAMES.iter().enumerate() {
        let dir = root.join(class);
        fs::create_dir_all(&dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for i in (0..ds.len()).filter(|&i| ds.label(i) == label) {
            write_png_rgb(
                dir.join(format!("{i:06}.png")),
                PATCH_SIDE as u32,
                PATCH_SIDE as u32,
                ds.patch(i),
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_image_per_class() {
        let dir = tempfile::tempdir().unwrap();
        for (label, class) in CLASS_NAMES.iter().enumerate() {
            fs::create_dir(dir.path().join(class)).unwrap();
            write_png_rgb(
                dir.path().join(class).join("a.png"),
                32,
                32,
                &[label as u8 * 60; PATCH_BYTES],
            )
            .unwrap();
        }
        let ds = load_image_dir(dir.path()).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.labels(), &[0, 1, 2, 3]);
        assert_eq!(ds.patch(2)[0], 120);
    }

    #[test]
    fn wrong_size_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("Fibroblast")).unwrap();
        write_png_rgb(
            dir.path().join("Fibroblast").join("x.png"),
            31,
            32,
            &vec![0; 31 * 32 * 3],
        )
        .unwrap();
        let err = load_image_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("31x32"), "{err}");
    }

    #[test]
    fn unknown_folder_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("Stroma")).unwrap();
        assert!(load_image_dir(dir.path())
            .unwrap_err()
            .to_string()
            .contains("Stroma"));
    }
}
