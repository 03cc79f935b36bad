use std::io::{BufReader, BufWriter};
use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Result, VisionError};
use crate::sandfield::ToolFootprint;

/// 8-bit luminance raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(VisionError::BadRaster {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, u: usize, v: usize) -> u8 {
        self.pixels[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: u8) {
        self.pixels[v * self.width + u] = value;
    }

    pub fn same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(VisionError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| VisionError::Io(e.to_string()))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| VisionError::Io(e.to_string()))?;
        writer
            .write_image_data(&self.pixels)
            .map_err(|e| VisionError::Io(e.to_string()))
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| VisionError::Io(e.to_string()))?;
        let decoder = png::Decoder::new(BufReader::new(file));
        let mut reader = decoder.read_info().map_err(|e| VisionError::Io(e.to_string()))?;
        let info = reader.info();
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
            return Err(VisionError::Io("expected 8-bit grayscale png".into()));
        }
        let (w, h) = (info.width as usize, info.height as usize);
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(w * h)];
        let frame = reader
            .next_frame(&mut buf)
            .map_err(|e| VisionError::Io(e.to_string()))?;
        buf.truncate(frame.buffer_size());
        Self::from_raw(w, h, buf)
    }
}

/// Wire form used by the HTTP surface: dimensions plus base64 of the raw
/// row-major bytes.
#[derive(Serialize, Deserialize)]
struct WireImage {
    width: usize,
    height: usize,
    data: String,
}

impl Serialize for GrayImage {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WireImage {
            width: self.width,
            height: self.height,
            data: base64::engine::general_purpose::STANDARD.encode(&self.pixels),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GrayImage {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = WireImage::deserialize(d)?;
        let pixels = base64::engine::general_purpose::STANDARD
            .decode(wire.data)
            .map_err(serde::de::Error::custom)?;
        GrayImage::from_raw(wire.width, wire.height, pixels).map_err(serde::de::Error::custom)
    }
}

/// The image at tool resolution: one cell per `w_tcp x h_tcp` block.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledImage {
    pub width: usize,
    pub height: usize,
    pub tool: ToolFootprint,
    pub cells: Vec<f64>,
}

impl ResampledImage {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.cells[row * self.width + col]
    }
}

/// Block-mean downsampling; trailing partial blocks are dropped.
pub fn resample_to_tool(img: &GrayImage, tool: ToolFootprint) -> Result<ResampledImage> {
    if tool.w_tcp == 0 || tool.h_tcp == 0 || tool.w_tcp > img.width || tool.h_tcp > img.height {
        return Err(VisionError::InvalidTool(tool.w_tcp, tool.h_tcp));
    }
    let (cw, ch) = (img.width / tool.w_tcp, img.height / tool.h_tcp);
    let mut sums = vec![0u64; cw * ch];
    for v in 0..ch * tool.h_tcp {
        let row = &img.pixels[v * img.width..v * img.width + cw * tool.w_tcp];
        let cell_row = v / tool.h_tcp;
        for (u, &p) in row.iter().enumerate() {
            sums[cell_row * cw + u / tool.w_tcp] += p as u64;
        }
    }
    let count = (tool.w_tcp * tool.h_tcp) as f64;
    Ok(ResampledImage {
        width: cw,
        height: ch,
        tool,
        cells: sums.into_iter().map(|s| s as f64 / count).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_block_mean(img: &GrayImage, tool: ToolFootprint) -> Vec<f64> {
        let (cw, ch) = (img.width() / tool.w_tcp, img.height() / tool.h_tcp);
        let mut out = Vec::new();
        for r in 0..ch {
            for c in 0..cw {
                let mut s = 0.0;
                for dv in 0..tool.h_tcp {
                    for du in 0..tool.w_tcp {
                        s += img.get(c * tool.w_tcp + du, r * tool.h_tcp + dv) as f64;
                    }
                }
                out.push(s / (tool.w_tcp * tool.h_tcp) as f64);
            }
        }
        out
    }

    #[test]
    fn uniform_640x480_image() {
        let img = GrayImage::new(640, 480, 77);
        let r = resample_to_tool(&img, ToolFootprint::new(30, 40)).unwrap();
        assert_eq!((r.width, r.height), (21, 12));
        assert!(r.cells.iter().all(|&c| c == 77.0));
    }

    #[test]
    fn constant_blocks_give_exact_values() {
        let tool = ToolFootprint::new(3, 2);
        let mut img = GrayImage::new(9, 4, 0);
        for v in 0..4 {
            for u in 0..9 {
                img.set(u, v, (10 * (u / 3) + 100 * (v / 2)) as u8);
            }
        }
        let r = resample_to_tool(&img, tool).unwrap();
        assert_eq!(r.cells, vec![0.0, 10.0, 20.0, 100.0, 110.0, 120.0]);
    }

    #[test]
    fn oversized_tool_rejected() {
        let img = GrayImage::new(10, 10, 0);
        assert!(resample_to_tool(&img, ToolFootprint::new(11, 2)).is_err());
    }

    #[test]
    fn png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = GrayImage::from_raw(3, 2, vec![0, 1, 2, 200, 254, 255]).unwrap();
        img.write_png(&path).unwrap();
        assert_eq!(GrayImage::read_png(&path).unwrap(), img);
    }

    proptest! {
        #[test]
        fn matches_naive_block_mean(
            w in 4usize..40, h in 4usize..40, tw in 1usize..5, th in 1usize..5, seed in any::<u64>()
        ) {
            let mut x = seed;
            let pixels = (0..w * h).map(|_| { x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (x >> 56) as u8 }).collect();
            let img = GrayImage::from_raw(w, h, pixels).unwrap();
            let tool = ToolFootprint::new(tw, th);
            let r = resample_to_tool(&img, tool).unwrap();
            prop_assert_eq!(r.cells, naive_block_mean(&img, tool));
        }

        #[test]
        fn block_mean_is_affine_under_offsets(seed in any::<u64>(), offset in 0u8..50) {
            let mut x = seed;
            let pixels: Vec<u8> = (0..24 * 16).map(|_| { x = x.wrapping_mul(6364136223846793005).wrapping_add(1); ((x >> 56) as u8) % 200 }).collect();
            let shifted: Vec<u8> = pixels.iter().map(|p| p + offset).collect();
            let tool = ToolFootprint::new(4, 4);
            let a = resample_to_tool(&GrayImage::from_raw(24, 16, pixels).unwrap(), tool).unwrap();
            let b = resample_to_tool(&GrayImage::from_raw(24, 16, shifted).unwrap(), tool).unwrap();
            for (x, y) in a.cells.iter().zip(&b.cells) {
                prop_assert!((y - x - offset as f64).abs() < 1e-9);
            }
        }
    }
}
