//! RGB raster with the few primitives the renderers need, text drawn from
//! the 8x8 bitmap font.

use std::path::Path;

use font8x8::UnicodeFonts;
use image::{ImageEncoder, RgbImage};

pub type Rgb = [u8; 3];

pub const GLYPH: u32 = 8;

fn glyph(c: char) -> [u8; 8] {
    font8x8::BASIC_FONTS
        .get(c)
        .or_else(|| font8x8::LATIN_FONTS.get(c))
        .or_else(|| font8x8::GREEK_FONTS.get(c))
        .or_else(|| font8x8::BOX_FONTS.get(c))
        .or_else(|| font8x8::BLOCK_FONTS.get(c))
        .or_else(|| font8x8::MISC_FONTS.get(c))
        .unwrap_or([0x7E, 0x42, 0x42, 0x42, 0x42, 0x42, 0x7E, 0x00])
}

pub struct Canvas {
    img: RgbImage,
}

impl Canvas {
    pub fn new(width: u32, height: u32, background: Rgb) -> Self {
        Canvas {
            img: RgbImage::from_pixel(width.max(1), height.max(1), image::Rgb(background)),
        }
    }

    pub fn width(&self) -> u32 {
        self.img.width()
    }

    pub fn height(&self) -> u32 {
        self.img.height()
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        self.img.get_pixel(x, y).0
    }

    fn put(&mut self, x: i64, y: i64, color: Rgb) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, image::Rgb(color));
        }
    }

    pub fn fill_rect(&mut self, x: i64, y: i64, w: i64, h: i64, color: Rgb) {
        for yy in y..y + h {
            for xx in x..x + w {
                self.put(xx, yy, color);
            }
        }
    }

    pub fn stroke_rect(&mut self, x: i64, y: i64, w: i64, h: i64, color: Rgb) {
        self.line(x, y, x + w - 1, y, color);
        self.line(x, y + h - 1, x + w - 1, y + h - 1, color);
        self.line(x, y, x, y + h - 1, color);
        self.line(x + w - 1, y, x + w - 1, y + h - 1, color);
    }

    pub fn line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb) {
        let (mut x, mut y) = (x0, y0);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.put(x, y, color);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    pub fn dashed_line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb) {
        let len = (((x1 - x0).pow(2) + (y1 - y0).pow(2)) as f64).sqrt().max(1.0);
        let steps = (len / 6.0).ceil() as i64;
        for i in (0..steps).step_by(2) {
            let t0 = i as f64 / steps as f64;
            let t1 = ((i + 1) as f64 / steps as f64).min(1.0);
            let p = |t: f64| ((x0 as f64 + (x1 - x0) as f64 * t) as i64, (y0 as f64 + (y1 - y0) as f64 * t) as i64);
            let (ax, ay) = p(t0);
            let (bx, by) = p(t1);
            self.line(ax, ay, bx, by, color);
        }
    }

    /// Thickened line, `width` pixels across.
    pub fn thick_line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, width: i64, color: Rgb) {
        let r = width / 2;
        for d in -r..=r {
            if (x1 - x0).abs() >= (y1 - y0).abs() {
                self.line(x0, y0 + d, x1, y1 + d, color);
            } else {
                self.line(x0 + d, y0, x1 + d, y1, color);
            }
        }
    }

    /// Filled triangular head at (x1, y1) pointing away from (x0, y0).
    pub fn arrow_head(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, size: f64, color: Rgb) {
        let (dx, dy) = ((x1 - x0) as f64, (y1 - y0) as f64);
        let len = (dx * dx + dy * dy).sqrt();
        if len < 1.0 {
            return;
        }
        let (ux, uy) = (dx / len, dy / len);
        let (bx, by) = (x1 as f64 - ux * size, y1 as f64 - uy * size);
        let (px, py) = (-uy * size * 0.5, ux * size * 0.5);
        let pts = [(x1 as f64, y1 as f64), (bx + px, by + py), (bx - px, by - py)];
        self.fill_triangle(pts, color);
    }

    pub fn fill_triangle(&mut self, pts: [(f64, f64); 3], color: Rgb) {
        let min_x = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor() as i64;
        let max_x = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
        let min_y = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor() as i64;
        let max_y = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
        let edge = |a: (f64, f64), b: (f64, f64), p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        for y in min_y..=max_y {
            for x in min_x..=max_x {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                let e0 = edge(pts[0], pts[1], p);
                let e1 = edge(pts[1], pts[2], p);
                let e2 = edge(pts[2], pts[0], p);
                if (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0) {
                    self.put(x, y, color);
                }
            }
        }
    }

    pub fn stroke_ellipse(&mut self, cx: i64, cy: i64, rx: i64, ry: i64, color: Rgb) {
        let steps = ((rx + ry) * 4).max(16);
        let mut prev = (cx + rx, cy);
        for i in 1..=steps {
            let t = i as f64 / steps as f64 * std::f64::consts::TAU;
            let p = (cx + (rx as f64 * t.cos()).round() as i64, cy + (ry as f64 * t.sin()).round() as i64);
            self.line(prev.0, prev.1, p.0, p.1, color);
            prev = p;
        }
    }

    pub fn stroke_polygon(&mut self, pts: &[(i64, i64)], color: Rgb) {
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            self.line(a.0, a.1, b.0, b.1, color);
        }
    }

    /// Draws one line of text with its top-left at (x, y).
    pub fn text(&mut self, x: i64, y: i64, s: &str, scale: u32, color: Rgb) {
        let scale = i64::from(scale.max(1));
        for (i, c) in s.chars().enumerate() {
            if c == ' ' {
                continue;
            }
            let rows = glyph(c);
            let ox = x + i as i64 * i64::from(GLYPH) * scale;
            for (ry, bits) in rows.iter().enumerate() {
                for rx in 0..8 {
                    if bits & (1 << rx) != 0 {
                        self.fill_rect(ox + rx * scale, y + ry as i64 * scale, scale, scale, color);
                    }
                }
            }
        }
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(self.img.as_raw(), self.img.width(), self.img.height(), image::ExtendedColorType::Rgb8)
            .expect("in-memory png encoding");
        out
    }

    pub fn save_png(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.encode_png())
    }
}

/// Pixel width of `s` at `scale`.
pub fn text_width(s: &str, scale: u32) -> u32 {
    s.chars().count() as u32 * GLYPH * scale.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_sets_pixels() {
        let mut c = Canvas::new(40, 20, [255, 255, 255]);
        c.text(2, 2, "A", 2, [0, 0, 0]);
        let dark = (0..40).flat_map(|x| (0..20).map(move |y| (x, y))).filter(|&(x, y)| c.pixel(x, y) == [0, 0, 0]).count();
        assert!(dark > 20);
    }

    #[test]
    fn png_encoding_is_deterministic() {
        let mut a = Canvas::new(30, 30, [250, 250, 250]);
        a.line(0, 0, 29, 29, [0, 0, 0]);
        a.arrow_head(0, 0, 20, 20, 8.0, [10, 10, 10]);
        let mut b = Canvas::new(30, 30, [250, 250, 250]);
        b.line(0, 0, 29, 29, [0, 0, 0]);
        b.arrow_head(0, 0, 20, 20, 8.0, [10, 10, 10]);
        assert_eq!(a.encode_png(), b.encode_png());
        assert!(a.encode_png().starts_with(b"\x89PNG"));
    }

    #[test]
    fn drawing_outside_is_clipped() {
        let mut c = Canvas::new(5, 5, [0, 0, 0]);
        c.line(-10, -10, 20, 20, [255, 0, 0]);
        c.fill_rect(3, 3, 10, 10, [0, 255, 0]);
        assert_eq!(c.pixel(4, 4), [0, 255, 0]);
    }
}
