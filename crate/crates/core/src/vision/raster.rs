use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub type Rgb = [u8; 3];

/// Row-major RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("image dimensions must be positive".into()));
        }
        Ok(Self {
            width,
            height,
            pixels: vec![color; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> Rgb {
        self.pixels[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, color: Rgb) {
        self.pixels[v * self.width + u] = color;
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    pub fn count(&self, color: Rgb) -> usize {
        self.pixels.iter().filter(|p| **p == color).count()
    }

    pub fn write_ppm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        out.write_all(&bytes)
    }

    pub fn read_ppm<R: Read>(input: R) -> Result<Self> {
        let mut r = BufReader::new(input);
        let mut header = Vec::new();
        // Magic, width, height and maxval, with `#` comments allowed.
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line).map_err(|e| Error::io("<ppm>", e))? == 0 {
                return Err(Error::parse("ppm", "truncated header"));
            }
            let line = line.split('#').next().unwrap_or_default();
            header.extend(line.split_whitespace().map(str::to_string));
        }
        if header[0] != "P6" || header.len() != 4 {
            return Err(Error::parse("ppm", "expected a binary P6 header"));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|e| Error::parse("ppm", e));
        let (w, h, maxval) = (dim(&header[1])?, dim(&header[2])?, dim(&header[3])?);
        if maxval != 255 {
            return Err(Error::parse("ppm", format!("unsupported maxval {maxval}")));
        }
        let mut bytes = vec![0u8; w * h * 3];
        r.read_exact(&mut bytes).map_err(|e| Error::io("<ppm>", e))?;
        let mut img = Self::filled(w, h, [0; 3])?;
        for (p, c) in img.pixels.iter_mut().zip(bytes.chunks_exact(3)) {
            *p = [c[0], c[1], c[2]];
        }
        Ok(img)
    }

    pub fn save_ppm(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_ppm(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load_ppm(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_ppm(f)
    }
}

/// Largest per-channel absolute difference.
pub fn color_distance(a: Rgb, b: Rgb) -> u8 {
    (0..3).map(|i| a[i].abs_diff(b[i])).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_is_bit_exact() {
        let mut img = RasterImage::filled(5, 3, [10, 20, 30]).unwrap();
        img.set(4, 2, [255, 0, 7]);
        img.set(0, 1, [1, 2, 3]);
        let mut buf = Vec::new();
        img.write_ppm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n5 3\n255\n"));
        assert_eq!(RasterImage::read_ppm(&buf[..]).unwrap(), img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut data = b"P6\n# made by hand\n1 1\n255\n".to_vec();
        data.extend([9, 8, 7]);
        assert_eq!(RasterImage::read_ppm(&data[..]).unwrap().get(0, 0), [9, 8, 7]);
        assert!(RasterImage::read_ppm(&b"P3\n1 1\n255\n0 0 0"[..]).is_err());
    }

    #[test]
    fn empty_image_rejected() {
        assert!(RasterImage::filled(0, 4, [0; 3]).is_err());
    }

    #[test]
    fn distance_is_max_channel() {
        assert_eq!(color_distance([10, 200, 30], [40, 190, 30]), 30);
    }
}
