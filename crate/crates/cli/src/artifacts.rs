//! Output files are assembled in memory and written only once a command has
//! fully succeeded, so a failing run leaves nothing behind.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn add_png<P, C>(&mut self, name: impl Into<String>, img: &image::ImageBuffer<P, C>) -> Result<()>
    where
        P: image::PixelWithColorType,
        [P::Subpixel]: image::EncodableLayout,
        C: std::ops::Deref<Target = [P::Subpixel]>,
    {
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png)?;
        self.add(name, buf.into_inner());
        Ok(())
    }

    /// Writes every file into `out_dir`. Files go to a hidden staging
    /// directory inside `out_dir` first and are then renamed into place.
    pub fn commit(self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let staging = tempfile::Builder::new()
            .prefix(".filer-staging-")
            .tempdir_in(out_dir)
            .with_context(|| format!("staging in {}", out_dir.display()))?;
        for (name, bytes) in &self.files {
            fs::write(staging.path().join(name), bytes).with_context(|| format!("writing {name}"))?;
        }
        let mut written = Vec::with_capacity(self.files.len());
        for (name, _) in &self.files {
            let dest = out_dir.join(name);
            fs::rename(staging.path().join(name), &dest).with_context(|| format!("moving {name} into place"))?;
            written.push(dest);
        }
        Ok(written)
    }
}
