use super::{Grid, Image, ImagingError};
use std::io::{Read, Write};

const MAGIC: &[u8; 8] = b"MICROIMG";

impl Image {
    /// Binary 8-bit PGM (P5). Values are rounded and clipped to `[0, 255]`;
    /// the first file row is the top of the image (largest `y`).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width(), self.height())?;
        let mut row = Vec::with_capacity(self.width());
        for j in (0..self.height()).rev() {
            row.clear();
            row.extend((0..self.width()).map(|i| self.get(i, j).round().clamp(0.0, 255.0) as u8));
            w.write_all(&row)?;
        }
        Ok(())
    }

    /// Lossless dump: 16-byte header (8-byte magic, width and height as
    /// little-endian `u32`) followed by row-major little-endian `f64` values.
    pub fn write_raw<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.width() as u32).to_le_bytes())?;
        w.write_all(&(self.height() as u32).to_le_bytes())?;
        for v in self.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a raw dump; the file carries no geometry, so pixel size and
    /// origin are supplied by the caller.
    pub fn read_raw<R: Read>(mut r: R, pixel_size: f64, origin: crate::Vec2) -> Result<Image, ImagingError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..8] != MAGIC {
            return Err(ImagingError::Format("bad magic".into()));
        }
        let width = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let grid = Grid::new(width, height, pixel_size, origin)?;
        let mut bytes = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut bytes)
            .map_err(|_| ImagingError::Format("truncated pixel data".into()))?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Image::new(grid, values)
    }
}
