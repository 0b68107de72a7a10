use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use a2pm::pipeline::SgamResult;
use a2pm::semantic::BBox;
use anyhow::Context;
use image::{ImageFormat, Rgb, RgbImage};
use tempfile::TempDir;

/// Output files buffered in memory and written only once the command has
/// succeeded, each through a temporary file renamed into place.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn json(&mut self, name: &str, v: &serde_json::Value) -> anyhow::Result<()> {
        let mut text = serde_json::to_vec_pretty(v)?;
        text.push(b'\n');
        self.bytes(name, text);
        Ok(())
    }

    pub fn bytes(&mut self, name: &str, data: Vec<u8>) {
        self.files.push((name.to_string(), data));
    }

    pub fn commit(self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        for (name, data) in self.files {
            let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
            tmp.write_all(&data)?;
            tmp.persist(self.dir.join(&name))
                .with_context(|| format!("writing {name}"))?;
        }
        Ok(())
    }
}

/// Temporary directory next to `out`, so that [`publish`] can rename.
pub fn staging_dir(out: &Path) -> anyhow::Result<TempDir> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent)?;
    Ok(tempfile::Builder::new().prefix(".a2pm-").tempdir_in(parent)?)
}

/// Moves the staged files into `out`, replacing same-named entries.
pub fn publish(staging: TempDir, out: &Path) -> anyhow::Result<()> {
    if !out.exists() {
        std::fs::rename(staging.path(), out).with_context(|| format!("creating {}", out.display()))?;
        // the directory now lives at `out`; nothing left to clean up
        let _ = staging.keep();
        return Ok(());
    }
    for entry in std::fs::read_dir(staging.path())? {
        let entry = entry?;
        let dst = out.join(entry.file_name());
        if dst.is_dir() {
            std::fs::remove_dir_all(&dst)?;
        }
        std::fs::rename(entry.path(), &dst).with_context(|| format!("writing {}", dst.display()))?;
    }
    Ok(())
}

const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

fn draw_box(img: &mut RgbImage, b: &BBox, dx: u32, color: [u8; 3]) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = b.min_x.floor() as i64 + dx as i64;
    let x1 = b.max_x.ceil() as i64 - 1 + dx as i64;
    let (y0, y1) = (b.min_y.floor() as i64, b.max_y.ceil() as i64 - 1);
    let mut put = |x: i64, y: i64| {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.put_pixel(x as u32, y as u32, Rgb(color));
        }
    };
    for k in 0..2 {
        for x in x0..=x1 {
            put(x, y0 + k);
            put(x, y1 - k);
        }
        for y in y0..=y1 {
            put(x0 + k, y);
            put(x1 - k, y);
        }
    }
}

/// Both images side by side with kept area matches in matching colors and
/// unresolved doubtful areas in gray, as PNG bytes.
pub fn overlay(images: &[RgbImage; 2], result: &SgamResult) -> anyhow::Result<Vec<u8>> {
    let w0 = images[0].width();
    let mut canvas = RgbImage::new(w0 + images[1].width(), images[0].height().max(images[1].height()));
    for (x, y, p) in images[0].enumerate_pixels() {
        canvas.put_pixel(x, y, *p);
    }
    for (x, y, p) in images[1].enumerate_pixels() {
        canvas.put_pixel(x + w0, y, *p);
    }
    let gray = [160, 160, 160];
    for a in &result.sam.doubtful_a0 {
        draw_box(&mut canvas, &a.bbox, 0, gray);
    }
    for a in &result.sam.doubtful_a1 {
        draw_box(&mut canvas, &a.bbox, w0, gray);
    }
    for (i, e) in result.area_matches.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        draw_box(&mut canvas, &e.candidate.a0.bbox, 0, c);
        draw_box(&mut canvas, &e.candidate.a1.bbox, w0, c);
    }
    let mut buf = Cursor::new(Vec::new());
    canvas.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}
