//! Minimal PGM (P5) writer for debug images.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// Write grayscale `data` (row-major, `height` rows of `width`) as binary PGM.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    assert_eq!(data.len(), width * height);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(data)?;
    w.flush()?;
    Ok(())
}

/// Scale u32 counts into 0..=255 for visualization.
pub fn normalize_counts(counts: &[u32]) -> Vec<u8> {
    let max = counts.iter().copied().max().unwrap_or(0).max(1);
    counts
        .iter()
        .map(|&c| ((c as f64 / max as f64) * 255.0).round() as u8)
        .collect()
}
