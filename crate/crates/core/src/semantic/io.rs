use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};

use super::{SemanticError, SemanticMap};

/// Reads a single-channel PNG (8 or 16 bit) or PGM (P2/P5) label image.
pub fn load_semantic_map(path: &Path) -> Result<SemanticMap, SemanticError> {
    let img = image::ImageReader::open(path)?.with_guessed_format()?.decode()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels: Vec<u16> = match img {
        DynamicImage::ImageLuma16(buf) => buf.into_raw(),
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u16::from).collect(),
        other => {
            return Err(SemanticError::Format(format!(
                "{}: expected a single-channel image, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    SemanticMap::new(w, h, labels)
}

pub fn save_semantic_map_png(map: &SemanticMap, path: &Path) -> Result<(), SemanticError> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width() as u32, map.height() as u32, map.labels().to_vec())
            .expect("buffer size matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Optional `<map>.labels.json` sidecar mapping label ids to names.
pub fn load_label_names(map_path: &Path) -> Result<Option<BTreeMap<u16, String>>, SemanticError> {
    let sidecar = sidecar_path(map_path);
    if !sidecar.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&sidecar)?;
    let raw: BTreeMap<String, String> = serde_json::from_str(&text)?;
    let mut names = BTreeMap::new();
    for (k, v) in raw {
        let id: u16 = k
            .parse()
            .map_err(|_| SemanticError::Format(format!("bad label id {k:?} in {}", sidecar.display())))?;
        names.insert(id, v);
    }
    Ok(Some(names))
}

fn sidecar_path(map_path: &Path) -> PathBuf {
    let mut s = map_path.as_os_str().to_owned();
    s.push(".labels.json");
    PathBuf::from(s)
}
