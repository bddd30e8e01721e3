//! Planar RGB images, square crop windows with bilinear resampling, and
//! image file I/O (raw planar float and binary PPM/PGM).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Magic bytes of the raw planar float image format.
pub const RAW_MAGIC: &[u8; 4] = b"SIMG";

/// `3×H×W` image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    tensor: Tensor,
}

impl Image {
    pub fn new(tensor: Tensor) -> Result<Self> {
        match tensor.shape() {
            [3, _, _] => {}
            s => return Err(Error::dim(format!("image must be 3×H×W, got {s:?}"))),
        }
        if tensor.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("image contains non-finite values".into()));
        }
        Ok(Self { tensor })
    }

    pub fn filled(h: usize, w: usize, rgb: [f32; 3]) -> Self {
        let hw = h * w;
        Self { tensor: Tensor::from_fn(&[3, h, w], |i| rgb[i / hw]) }
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn height(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.tensor.shape()[2]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.tensor.data()[(c * self.height() + y) * self.width() + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        let (h, w) = (self.height(), self.width());
        self.tensor.data_mut()[(c * h + y) * w + x] = v;
    }

    pub fn set_rgb(&mut self, y: usize, x: usize, rgb: [f32; 3]) {
        for (c, v) in rgb.into_iter().enumerate() {
            self.set(c, y, x, v);
        }
    }

    pub fn rgb(&self, y: usize, x: usize) -> [f32; 3] {
        [self.get(0, y, x), self.get(1, y, x), self.get(2, y, x)]
    }

    /// Bilinear sample at real pixel coordinates; coordinates outside the
    /// frame clamp to the nearest edge pixel (edge replication).
    fn sample(&self, c: usize, sy: f64, sx: f64) -> f32 {
        let (h, w) = (self.height(), self.width());
        let sy = sy.clamp(0.0, (h - 1) as f64);
        let sx = sx.clamp(0.0, (w - 1) as f64);
        let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
        let (fy, fx) = ((sy - y0 as f64) as f32, (sx - x0 as f64) as f32);
        let top = self.get(c, y0, x0) * (1.0 - fx) + self.get(c, y0, x1) * fx;
        let bot = self.get(c, y1, x0) * (1.0 - fx) + self.get(c, y1, x1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// Resample `window` to an `out×out` image.
    pub fn crop_resample(&self, window: &CropWindow, out: usize) -> Result<Image> {
        if window.clamped(self.width(), self.height()).is_none() {
            return Err(Error::Extraction(format!(
                "crop window {window:?} lies outside the {}×{} frame",
                self.width(),
                self.height()
            )));
        }
        let step = window.side / out as f64;
        let mut data = Vec::with_capacity(3 * out * out);
        for c in 0..3 {
            for v in 0..out {
                let sy = window.y0 + (v as f64 + 0.5) * step - 0.5;
                for u in 0..out {
                    let sx = window.x0 + (u as f64 + 0.5) * step - 0.5;
                    data.push(self.sample(c, sy, sx));
                }
            }
        }
        Image::new(Tensor::new(vec![3, out, out], data)?)
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ppm_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let (h, w) = (self.height(), self.width());
        let mut buf = format!("P6\n{w} {h}\n255\n").into_bytes();
        buf.reserve(3 * h * w);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    buf.push((self.get(c, y, x).clamp(0.0, 1.0) * 255.0).round() as u8);
                }
            }
        }
        buf
    }

    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_raw_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn to_raw_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + 4 * self.tensor.len());
        buf.extend_from_slice(RAW_MAGIC);
        for d in [3, self.height(), self.width()] {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in self.tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    /// Loads a raw planar (`SIMG`), PPM (`P6`) or PGM (`P5`) image by content.
    pub fn load(path: &Path) -> Result<Image> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn decode(bytes: &[u8]) -> Result<Image> {
        if bytes.starts_with(RAW_MAGIC) {
            decode_raw(bytes)
        } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
            decode_pnm(bytes)
        } else {
            Err(Error::Format("unrecognized image format".into()))
        }
    }
}

fn decode_raw(bytes: &[u8]) -> Result<Image> {
    let word = |i: usize| -> Result<usize> {
        bytes
            .get(4 + 4 * i..8 + 4 * i)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| Error::Format("truncated raw header".into()))
    };
    let (c, h, w) = (word(0)?, word(1)?, word(2)?);
    if c != 1 && c != 3 {
        return Err(Error::Format(format!("raw image with {c} channels")));
    }
    let body = &bytes[16..];
    if body.len() != 4 * c * h * w {
        return Err(Error::Format(format!(
            "raw body has {} bytes, header implies {}",
            body.len(),
            4 * c * h * w
        )));
    }
    let vals: Vec<f32> = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let data = if c == 1 { vals.repeat(3) } else { vals };
    Image::new(Tensor::new(vec![3, h, w], data)?)
}

fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let channels = if bytes[1] == b'6' { 3 } else { 1 };
    // header: magic, width, height, maxval, each separated by whitespace,
    // with `#` comments allowed
    let mut fields = Vec::with_capacity(3);
    let mut i = 2;
    while fields.len() < 3 {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        let tok = std::str::from_utf8(&bytes[start..i]).unwrap_or("");
        let v: usize = tok
            .parse()
            .map_err(|_| Error::Format(format!("bad PNM header field {tok:?}")))?;
        fields.push(v);
    }
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PNM maxval {maxval}")));
    }
    let body = bytes.get(i + 1..).unwrap_or(&[]);
    if body.len() < channels * w * h || w == 0 || h == 0 {
        return Err(Error::Format("truncated PNM body".into()));
    }
    let mut img = Image::filled(h, w, [0.0; 3]);
    let scale = 1.0 / maxval as f32;
    for y in 0..h {
        for x in 0..w {
            let px = &body[(y * w + x) * channels..(y * w + x + 1) * channels];
            let rgb = if channels == 3 {
                [px[0], px[1], px[2]].map(|b| b as f32 * scale)
            } else {
                [px[0] as f32 * scale; 3]
            };
            img.set_rgb(y, x, rgb);
        }
    }
    Ok(img)
}

/// Square region `[x0, x0 + side) × [y0, y0 + side)` in frame pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropWindow {
    pub x0: f64,
    pub y0: f64,
    pub side: f64,
}

impl CropWindow {
    /// Square of side `context · max(w, h)` centred on the box.
    pub fn around(b: &BBox, context: f64) -> Self {
        let side = context * b.w.max(b.h);
        let (cx, cy) = b.center();
        Self { x0: cx - side / 2.0, y0: cy - side / 2.0, side }
    }

    /// Part of the window inside a `width×height` frame as `(x0, y0, x1, y1)`,
    /// or `None` when the window misses the frame entirely.
    pub fn clamped(&self, width: usize, height: usize) -> Option<(f64, f64, f64, f64)> {
        let x0 = self.x0.max(0.0);
        let y0 = self.y0.max(0.0);
        let x1 = (self.x0 + self.side).min(width as f64);
        let y1 = (self.y0 + self.side).min(height as f64);
        (self.side.is_finite() && self.side > 0.0 && x1 > x0 && y1 > y0).then_some((x0, y0, x1, y1))
    }

    /// Maps a box from resampled-crop coordinates (`out` pixels per side)
    /// back to frame coordinates.
    pub fn to_frame(&self, b: &BBox, out: usize) -> BBox {
        let k = self.side / out as f64;
        BBox::new(self.x0 + b.x * k, self.y0 + b.y * k, b.w * k, b.h * k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        let hw = h * w;
        Image::new(Tensor::from_fn(&[3, h, w], |i| ((i % hw) as f32) / hw as f32)).unwrap()
    }

    #[test]
    fn centered_box_gets_exact_context_square() {
        let b = BBox::new(100.0, 120.0, 20.0, 10.0);
        let win = CropWindow::around(&b, 2.0);
        assert_eq!(win, CropWindow { x0: 90.0, y0: 105.0, side: 40.0 });
        assert_eq!(win.clamped(320, 320), Some((90.0, 105.0, 130.0, 145.0)));
    }

    #[test]
    fn corner_box_is_clamped_and_edge_replicated() {
        let mut img = Image::filled(4, 4, [0.0; 3]);
        img.set_rgb(0, 0, [1.0, 1.0, 1.0]);
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        let win = CropWindow::around(&b, 2.0);
        assert_eq!(win.clamped(4, 4), Some((0.0, 0.0, 1.5, 1.5)));
        let crop = img.crop_resample(&win, 2).unwrap();
        // source coordinates are (-0.5 → clamped 0) and 0.5
        assert_eq!(crop.get(0, 0, 0), 1.0);
        assert_eq!(crop.get(0, 0, 1), 0.5);
        assert_eq!(crop.get(0, 1, 0), 0.5);
        assert_eq!(crop.get(0, 1, 1), 0.25);
    }

    #[test]
    fn window_outside_frame_is_rejected() {
        let img = Image::filled(8, 8, [0.5; 3]);
        let win = CropWindow { x0: 20.0, y0: 20.0, side: 4.0 };
        assert!(matches!(img.crop_resample(&win, 4), Err(Error::Extraction(_))));
    }

    #[test]
    fn identity_resample() {
        let img = ramp(6, 6);
        let win = CropWindow { x0: 0.0, y0: 0.0, side: 6.0 };
        assert_eq!(img.crop_resample(&win, 6).unwrap(), img);
    }

    #[test]
    fn crop_box_maps_back() {
        let win = CropWindow { x0: 10.0, y0: 20.0, side: 160.0 };
        let b = win.to_frame(&BBox::new(160.0, 160.0, 32.0, 64.0), 320);
        assert_eq!(b, BBox::new(90.0, 100.0, 16.0, 32.0));
    }

    #[test]
    fn raw_and_ppm_round_trip() {
        let img = ramp(4, 5);
        assert_eq!(Image::decode(&img.to_raw_bytes()).unwrap(), img);
        let q = Image::decode(&img.to_ppm_bytes()).unwrap();
        assert!(q.tensor().max_abs_diff(img.tensor()) <= 0.5 / 255.0 + 1e-6);
        let mut pgm = b"P5\n# comment\n2 1\n255\n".to_vec();
        pgm.extend_from_slice(&[0, 255]);
        let g = Image::decode(&pgm).unwrap();
        assert_eq!(g.rgb(0, 1), [1.0; 3]);
        assert!(Image::decode(b"GIF89a").is_err());
    }
}
