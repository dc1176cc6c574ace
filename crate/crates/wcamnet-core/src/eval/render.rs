//! Dependency-free rasterization for tables and histograms: a built-in 5×7
//! bitmap font and a bar-chart painter, saved as PNG.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::Result;

pub const GLYPH_W: u32 = 5;
pub const GLYPH_H: u32 = 7;
/// Glyph cell including 1px tracking/leading.
pub const CELL_W: u32 = GLYPH_W + 1;
pub const CELL_H: u32 = GLYPH_H + 1;

const INK: Rgb<u8> = Rgb([24, 24, 32]);
const PAPER: Rgb<u8> = Rgb([252, 252, 250]);
const BAR: Rgb<u8> = Rgb([70, 110, 160]);
const AXIS: Rgb<u8> = Rgb([120, 120, 130]);

/// Row bitmaps (5 LSBs used, MSB-left) for one character. Lowercase input is
/// folded to uppercase; anything unknown renders as a filled box.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        ' ' => [0, 0, 0, 0, 0, 0, 0],
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1E, 0x01, 0x01, 0x0E, 0x01, 0x01, 0x1E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ',' => [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        ';' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x04, 0x08],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        '+' => [0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00],
        '*' => [0x00, 0x15, 0x0E, 0x1F, 0x0E, 0x15, 0x00],
        '/' => [0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10],
        '%' => [0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        '[' => [0x0E, 0x08, 0x08, 0x08, 0x08, 0x08, 0x0E],
        ']' => [0x0E, 0x02, 0x02, 0x02, 0x02, 0x02, 0x0E],
        '<' => [0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02],
        '>' => [0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08],
        '|' => [0x04, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        '#' => [0x0A, 0x0A, 0x1F, 0x0A, 0x1F, 0x0A, 0x0A],
        '\'' => [0x04, 0x04, 0x08, 0x00, 0x00, 0x00, 0x00],
        '"' => [0x0A, 0x0A, 0x14, 0x00, 0x00, 0x00, 0x00],
        '?' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04],
        _ => [0x1F, 0x1F, 0x1F, 0x1F, 0x1F, 0x1F, 0x1F],
    }
}

fn draw_char(img: &mut RgbImage, c: char, x0: u32, y0: u32, scale: u32, ink: Rgb<u8>) {
    let rows = glyph(c);
    for (ry, row) in rows.iter().enumerate() {
        for rx in 0..GLYPH_W {
            if row & (1 << (GLYPH_W - 1 - rx)) != 0 {
                for sy in 0..scale {
                    for sx in 0..scale {
                        let x = x0 + rx * scale + sx;
                        let y = y0 + ry as u32 * scale + sy;
                        if x < img.width() && y < img.height() {
                            img.put_pixel(x, y, ink);
                        }
                    }
                }
            }
        }
    }
}

pub fn draw_text(img: &mut RgbImage, text: &str, x0: u32, y0: u32, scale: u32) {
    for (i, c) in text.chars().enumerate() {
        draw_char(img, c, x0 + i as u32 * CELL_W * scale, y0, scale, INK);
    }
}

/// Render text lines onto a fresh canvas, 8px padding, 2x glyphs.
pub fn render_text_lines(lines: &[String]) -> RgbImage {
    let scale = 2;
    let pad = 8;
    let cols = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0) as u32;
    let w = cols.max(1) * CELL_W * scale + 2 * pad;
    let h = lines.len().max(1) as u32 * CELL_H * scale + 2 * pad;
    let mut img = RgbImage::from_pixel(w, h, PAPER);
    for (i, line) in lines.iter().enumerate() {
        draw_text(&mut img, line, pad, pad + i as u32 * CELL_H * scale, scale);
    }
    img
}

/// Layout constants for [`render_bar_chart`], exposed so tests can probe
/// exact pixel positions.
pub const CHART_MARGIN: u32 = 16;
pub const CHART_BAR_W: u32 = 18;
pub const CHART_GAP: u32 = 6;
pub const CHART_PLOT_H: u32 = 160;
pub const CHART_TITLE_H: u32 = CELL_H * 2 + 6;

/// Bottom-aligned bars scaled so the tallest bin fills the plot height.
pub fn render_bar_chart(counts: &[usize], title: &str) -> RgbImage {
    let n = counts.len().max(1) as u32;
    let w = 2 * CHART_MARGIN + n * CHART_BAR_W + (n - 1) * CHART_GAP;
    let h = CHART_MARGIN + CHART_TITLE_H + CHART_PLOT_H + CELL_H * 2 + CHART_MARGIN;
    let mut img = RgbImage::from_pixel(w.max(220), h, PAPER);
    draw_text(&mut img, title, CHART_MARGIN, CHART_MARGIN, 2);

    let baseline = CHART_MARGIN + CHART_TITLE_H + CHART_PLOT_H;
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    for (i, &count) in counts.iter().enumerate() {
        let bar_h = ((count as f64 / max) * CHART_PLOT_H as f64).round() as u32;
        let x0 = CHART_MARGIN + i as u32 * (CHART_BAR_W + CHART_GAP);
        for y in (baseline - bar_h)..baseline {
            for x in x0..(x0 + CHART_BAR_W) {
                img.put_pixel(x, y, BAR);
            }
        }
        let label = count.to_string();
        let label_w = label.chars().count() as u32 * CELL_W;
        let lx = x0 + CHART_BAR_W / 2 - (label_w / 2).min(x0 + CHART_BAR_W / 2);
        draw_char_string(&mut img, &label, lx, baseline + 3);
    }
    for x in (CHART_MARGIN - 2)..(w.max(220) - CHART_MARGIN + 2) {
        img.put_pixel(x, baseline, AXIS);
    }
    img
}

fn draw_char_string(img: &mut RgbImage, text: &str, x0: u32, y0: u32) {
    for (i, c) in text.chars().enumerate() {
        draw_char(img, c, x0 + i as u32 * CELL_W, y0, 1, INK);
    }
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| crate::error::CoreError::Decode {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
}
