//! Offline fixtures: generated images and an OCR adapter that reads them.
//!
//! Posters are drawn with a 5x7 bitmap font on a fixed grid, so
//! [`GlyphOcr`] recovers their text exactly. That gives image tests a known
//! ground truth without an OCR engine.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::{DynamicImage, ImageFormat, Rgb, RgbImage};

use crate::error::Result;
use crate::image::{ImageInput, MediaType, OcrAdapter, OcrResult};

pub const GLYPH_SCALE: u32 = 4;
pub const MARGIN: u32 = 16;
const GLYPH_W: u32 = 5;
const GLYPH_H: u32 = 7;
const CELL_W: u32 = GLYPH_W + 1;
const LINE_H: u32 = GLYPH_H + 2;

const INK: Rgb<u8> = Rgb([0, 0, 0]);
const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);

#[rustfmt::skip]
const FONT: &[(char, [u8; 7])] = &[
    ('A', [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001]),
    ('B', [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110]),
    ('C', [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110]),
    ('D', [0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110]),
    ('E', [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111]),
    ('F', [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000]),
    ('G', [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111]),
    ('H', [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001]),
    ('I', [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110]),
    ('J', [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100]),
    ('K', [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001]),
    ('L', [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111]),
    ('M', [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001]),
    ('N', [0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001]),
    ('O', [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110]),
    ('P', [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000]),
    ('Q', [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101]),
    ('R', [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001]),
    ('S', [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110]),
    ('T', [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100]),
    ('U', [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110]),
    ('V', [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100]),
    ('W', [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010]),
    ('X', [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001]),
    ('Y', [0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100]),
    ('Z', [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111]),
    ('!', [0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00000, 0b00100]),
    ('.', [0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100]),
    ('\'', [0b00100, 0b00100, 0b01000, 0b00000, 0b00000, 0b00000, 0b00000]),
];

fn glyph(c: char) -> Option<[u8; 7]> {
    FONT.iter().find(|(g, _)| *g == c).map(|(_, rows)| *rows)
}

fn encode(img: RgbImage, media_type: MediaType) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    let img = DynamicImage::ImageRgb8(img);
    match media_type {
        MediaType::Png => img.write_to(&mut out, ImageFormat::Png).expect("png encode"),
        MediaType::Jpeg => img
            .write_with_encoder(JpegEncoder::new_with_quality(&mut out, 95))
            .expect("jpeg encode"),
    }
    out.into_inner()
}

/// Render `text` (uppercased, `\n` for line breaks) as a black-on-white PNG.
/// Characters outside the font are drawn as blanks.
pub fn poster_png(text: &str) -> Vec<u8> {
    let lines: Vec<String> = text.to_uppercase().lines().map(str::to_string).collect();
    let cols = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(1) as u32;
    let rows = lines.len().max(1) as u32;
    let width = 2 * MARGIN + cols * CELL_W * GLYPH_SCALE;
    let height = 2 * MARGIN + rows * LINE_H * GLYPH_SCALE;
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    for (row, line) in lines.iter().enumerate() {
        for (col, c) in line.chars().enumerate() {
            let Some(bits) = glyph(c) else { continue };
            let x0 = MARGIN + col as u32 * CELL_W * GLYPH_SCALE;
            let y0 = MARGIN + row as u32 * LINE_H * GLYPH_SCALE;
            for (gy, bits_row) in bits.iter().enumerate() {
                for gx in 0..GLYPH_W {
                    if bits_row >> (GLYPH_W - 1 - gx) & 1 == 1 {
                        for dy in 0..GLYPH_SCALE {
                            for dx in 0..GLYPH_SCALE {
                                img.put_pixel(
                                    x0 + gx * GLYPH_SCALE + dx,
                                    y0 + gy as u32 * GLYPH_SCALE + dy,
                                    INK,
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    encode(img, MediaType::Png)
}

/// Solid white PNG.
pub fn blank_png(width: u32, height: u32) -> Vec<u8> {
    solid_image(width, height, [255, 255, 255], MediaType::Png)
}

pub fn solid_image(width: u32, height: u32, rgb: [u8; 3], media_type: MediaType) -> Vec<u8> {
    encode(RgbImage::from_pixel(width, height, Rgb(rgb)), media_type)
}

/// Fake OCR adapter for images drawn by [`poster_png`].
#[derive(Debug, Clone, Copy, Default)]
pub struct GlyphOcr;

impl GlyphOcr {
    fn read(img: &RgbImage) -> OcrResult {
        let is_ink = |x: u32, y: u32| {
            let Rgb([r, g, b]) = *img.get_pixel(x, y);
            (u32::from(r) + u32::from(g) + u32::from(b)) < 3 * 128
        };
        if !img.enumerate_pixels().any(|(x, y, _)| is_ink(x, y)) {
            return OcrResult::empty();
        }
        let (w, h) = img.dimensions();
        let cell_px = CELL_W * GLYPH_SCALE;
        let line_px = LINE_H * GLYPH_SCALE;
        let cols = w.saturating_sub(2 * MARGIN) / cell_px;
        let rows = h.saturating_sub(2 * MARGIN) / line_px;

        let mut lines = Vec::new();
        let (mut inked, mut known) = (0u32, 0u32);
        for row in 0..rows {
            let mut line = String::new();
            for col in 0..cols {
                let x0 = MARGIN + col * cell_px;
                let y0 = MARGIN + row * line_px;
                let mut bits = [0u8; 7];
                for (gy, bits_row) in bits.iter_mut().enumerate() {
                    for gx in 0..GLYPH_W {
                        let x = x0 + gx * GLYPH_SCALE + GLYPH_SCALE / 2;
                        let y = y0 + gy as u32 * GLYPH_SCALE + GLYPH_SCALE / 2;
                        if x < w && y < h && is_ink(x, y) {
                            *bits_row |= 1 << (GLYPH_W - 1 - gx);
                        }
                    }
                }
                if bits == [0; 7] {
                    line.push(' ');
                    continue;
                }
                inked += 1;
                match FONT.iter().find(|(_, rows)| *rows == bits) {
                    Some((c, _)) => {
                        known += 1;
                        line.push(*c);
                    }
                    None => line.push('?'),
                }
            }
            lines.push(line.trim_end().to_string());
        }
        let text = lines.join("\n").trim().to_string();
        if inked == 0 {
            return OcrResult::empty();
        }
        OcrResult {
            text,
            confidence: f64::from(known) / f64::from(inked),
        }
    }
}

impl OcrAdapter for GlyphOcr {
    fn extract(&self, img: &ImageInput) -> Result<OcrResult> {
        Ok(Self::read(&img.decode()?.to_rgb8()))
    }
}
