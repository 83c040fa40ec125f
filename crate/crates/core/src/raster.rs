//! Owned 8-bit rasters and the classical per-pixel kernels the detector is
//! built from: luma conversion, global and local thresholding, square
//! morphology and connected-component labelling.
//!
//! Window operations replicate the border. Binary images are `Gray8` rasters
//! holding only 0 (background) and 255 (foreground).

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::par::for_each_row;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    ZeroDimension { width: u32, height: u32 },
    #[error("buffer holds {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("expected a {expected:?} image, got {actual:?}")]
    WrongChannels { expected: Channels, actual: Channels },
    #[error("window size must be odd and at least 1, got {0}")]
    EvenWindow(u32),
    #[error("crop {0:?} exceeds the image bounds")]
    CropOutOfBounds(BBox),
    #[error("failed to decode {path}: {message}")]
    Decode { path: String, message: String },
    #[error("failed to encode {path}: {message}")]
    Encode { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channels {
    Gray8,
    Rgb8,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Gray8 => 1,
            Channels::Rgb8 => 3,
        }
    }
}

/// Row-major 8-bit image, one or three interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: Channels,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: Channels, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        let expected = width as usize * height as usize * channels.count();
        if data.len() != expected {
            return Err(RasterError::BufferLength { expected, actual: data.len() });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn gray(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        Self::new(width, height, Channels::Gray8, data)
    }

    pub fn rgb(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        Self::new(width, height, Channels::Rgb8, data)
    }

    /// Image with every pixel set to `pixel` (1 or 3 bytes).
    pub fn filled(width: u32, height: u32, pixel: &[u8]) -> Result<Self, RasterError> {
        let channels = match pixel.len() {
            1 => Channels::Gray8,
            3 => Channels::Rgb8,
            n => {
                return Err(RasterError::BufferLength { expected: 3, actual: n });
            }
        };
        let data = pixel.repeat(width as usize * height as usize);
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn bounds(&self) -> BBox {
        BBox::new(0, 0, self.width, self.height)
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels.count()
    }

    /// The bytes of one pixel.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels.count()]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, value: &[u8]) {
        let o = self.offset(x, y);
        let n = self.channels.count();
        self.data[o..o + n].copy_from_slice(&value[..n]);
    }

    /// Gray value at (x, y); panics on RGB images.
    pub fn luma_at(&self, x: u32, y: u32) -> u8 {
        assert_eq!(self.channels, Channels::Gray8);
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn ensure(&self, expected: Channels) -> Result<(), RasterError> {
        if self.channels == expected {
            Ok(())
        } else {
            Err(RasterError::WrongChannels { expected, actual: self.channels })
        }
    }

    pub fn crop(&self, region: BBox) -> Result<RasterImage, RasterError> {
        if region.is_empty() || !region.fits_within(self.width, self.height) {
            return Err(RasterError::CropOutOfBounds(region));
        }
        let n = self.channels.count();
        let mut data = Vec::with_capacity(region.area() as usize * n);
        for y in region.y..region.bottom() {
            let start = self.offset(region.x, y);
            data.extend_from_slice(&self.data[start..start + region.w as usize * n]);
        }
        RasterImage::new(region.w, region.h, self.channels, data)
    }

    /// Copy `self` into a larger canvas filled with `fill`, placing the
    /// top-left corner at (dx, dy).
    pub fn pad(&self, dx: u32, dy: u32, new_width: u32, new_height: u32, fill: &[u8]) -> Result<RasterImage, RasterError> {
        let mut out = RasterImage::filled(new_width, new_height, fill)?;
        out.ensure(self.channels)?;
        if !BBox::new(dx, dy, self.width, self.height).fits_within(new_width, new_height) {
            return Err(RasterError::CropOutOfBounds(BBox::new(dx, dy, self.width, self.height)));
        }
        let n = self.channels.count();
        let row = self.width as usize * n;
        for y in 0..self.height {
            let src = self.offset(0, y);
            let dst = out.offset(dx, y + dy);
            out.data[dst..dst + row].copy_from_slice(&self.data[src..src + row]);
        }
        Ok(out)
    }

    /// Number of non-zero pixels (foreground count for binary images).
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn from_dynamic(img: DynamicImage) -> RasterImage {
        match img {
            DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                RasterImage { width: w, height: h, channels: Channels::Gray8, data: g.into_raw() }
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                RasterImage { width: w, height: h, channels: Channels::Rgb8, data: rgb.into_raw() }
            }
        }
    }

    pub fn to_dynamic(&self) -> DynamicImage {
        match self.channels {
            Channels::Gray8 => DynamicImage::ImageLuma8(
                GrayImage::from_raw(self.width, self.height, self.data.clone())
                    .expect("buffer length checked at construction"),
            ),
            Channels::Rgb8 => DynamicImage::ImageRgb8(
                RgbImage::from_raw(self.width, self.height, self.data.clone())
                    .expect("buffer length checked at construction"),
            ),
        }
    }

    /// Decode a PNG or JPEG file.
    pub fn load(path: impl AsRef<Path>) -> Result<RasterImage, RasterError> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| RasterError::Decode {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if img.width() == 0 || img.height() == 0 {
            return Err(RasterError::ZeroDimension { width: img.width(), height: img.height() });
        }
        Ok(RasterImage::from_dynamic(img))
    }

    /// Encode to the format implied by the file extension (PNG or JPEG).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let path = path.as_ref();
        self.to_dynamic().save(path).map_err(|e| RasterError::Encode {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// BT.601 luma, rounded half up: `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((weighted + 500) / 1000).min(255) as u8
}

pub fn to_grayscale(img: &RasterImage) -> Result<RasterImage, RasterError> {
    img.ensure(Channels::Rgb8)?;
    let w = img.width as usize;
    let mut out = vec![0u8; w * img.height as usize];
    for_each_row(&mut out, w, |y, row| {
        let src = &img.data[y * w * 3..(y + 1) * w * 3];
        for (dst, px) in row.iter_mut().zip(src.chunks_exact(3)) {
            *dst = luma(px[0], px[1], px[2]);
        }
    });
    RasterImage::gray(img.width, img.height, out)
}

/// Gray view of any image: RGB is converted, gray is cloned.
pub fn as_gray(img: &RasterImage) -> RasterImage {
    match img.channels {
        Channels::Gray8 => img.clone(),
        Channels::Rgb8 => to_grayscale(img).expect("channel checked"),
    }
}

pub fn histogram(img: &RasterImage) -> Result<[u64; 256], RasterError> {
    img.ensure(Channels::Gray8)?;
    let mut hist = [0u64; 256];
    for &v in &img.data {
        hist[v as usize] += 1;
    }
    Ok(hist)
}

/// Exact comparison of `a/b` with `c/d` for positive denominators.
fn cmp_fractions(a: u128, b: u128, c: u128, d: u128) -> Ordering {
    let (q1, r1) = (a / b, a % b);
    let (q2, r2) = (c / d, c % d);
    match q1.cmp(&q2) {
        Ordering::Equal => {}
        other => return other,
    }
    match (r1 == 0, r2 == 0) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        // r1/b vs r2/d has the opposite order of d/r2 vs b/r1
        (false, false) => cmp_fractions(d, r2, b, r1),
    }
}

/// Otsu threshold over a 256-bin histogram.
///
/// Class 0 holds values `<= t`. The between-class variance is compared in
/// exact integer arithmetic; ties resolve to the smallest `t`. A histogram
/// with a single occupied bin yields that bin's value.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> u8 {
    let total: u128 = hist.iter().map(|&c| u128::from(c)).sum();
    let sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as u128 * u128::from(c))
        .sum();
    let occupied: Vec<usize> = (0..256).filter(|&v| hist[v] > 0).collect();
    match occupied.as_slice() {
        [] => return 0,
        [only] => return *only as u8,
        _ => {}
    }

    // sigma_b^2(t) * N^2 = (S*n0 - N*s0)^2 / (n0*n1)
    let mut best: Option<(u8, u128, u128)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for t in 0..255usize {
        n0 += u128::from(hist[t]);
        s0 += t as u128 * u128::from(hist[t]);
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (sum * n0).abs_diff(total * s0);
        let num = diff * diff;
        let den = n0 * n1;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => cmp_fractions(num, den, bn, bd) == Ordering::Greater,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    best.map_or(0, |(t, _, _)| t)
}

pub fn otsu_threshold(img: &RasterImage) -> Result<u8, RasterError> {
    Ok(otsu_from_histogram(&histogram(img)?))
}

/// Which side of the threshold is foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Pixels `<= t` become foreground.
    DarkFg,
    /// Pixels `> t` become foreground.
    LightFg,
}

impl Polarity {
    pub fn flipped(self) -> Polarity {
        match self {
            Polarity::DarkFg => Polarity::LightFg,
            Polarity::LightFg => Polarity::DarkFg,
        }
    }
}

pub fn binarize(img: &RasterImage, t: u8, polarity: Polarity) -> Result<RasterImage, RasterError> {
    img.ensure(Channels::Gray8)?;
    let w = img.width as usize;
    let mut out = vec![0u8; img.data.len()];
    for_each_row(&mut out, w, |y, row| {
        let src = &img.data[y * w..(y + 1) * w];
        for (dst, &v) in row.iter_mut().zip(src) {
            let fg = match polarity {
                Polarity::DarkFg => v <= t,
                Polarity::LightFg => v > t,
            };
            *dst = if fg { 255 } else { 0 };
        }
    });
    RasterImage::gray(img.width, img.height, out)
}

fn check_window(k: u32) -> Result<usize, RasterError> {
    if k % 2 == 0 {
        Err(RasterError::EvenWindow(k))
    } else {
        Ok(k as usize / 2)
    }
}

/// Separable k×k box sums with replicated borders.
fn box_sums(img: &RasterImage, radius: usize) -> Vec<u32> {
    let (w, h) = (img.width as usize, img.height as usize);
    let mut horiz = vec![0u32; w * h];
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0u32;
            for dx in 0..=2 * radius {
                let sx = (x + dx).saturating_sub(radius).min(w - 1);
                acc += u32::from(row[sx]);
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut out = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0u32;
            for dy in 0..=2 * radius {
                let sy = (y + dy).saturating_sub(radius).min(h - 1);
                acc += horiz[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Local-mean thresholding: a pixel is foreground iff its value is below the
/// mean of its `window`×`window` neighbourhood minus `bias`.
pub fn adaptive_threshold(img: &RasterImage, window: u32, bias: i32) -> Result<RasterImage, RasterError> {
    img.ensure(Channels::Gray8)?;
    let radius = check_window(window)?;
    let sums = box_sums(img, radius);
    let area = i64::from(window) * i64::from(window);
    let w = img.width as usize;
    let mut out = vec![0u8; img.data.len()];
    for_each_row(&mut out, w, |y, row| {
        for (x, dst) in row.iter_mut().enumerate() {
            let v = i64::from(img.data[y * w + x]);
            // v < sum/area - bias, kept in integers
            let fg = v * area < i64::from(sums[y * w + x]) - i64::from(bias) * area;
            *dst = if fg { 255 } else { 0 };
        }
    });
    RasterImage::gray(img.width, img.height, out)
}

fn rank_filter(img: &RasterImage, k: u32, take_max: bool) -> Result<RasterImage, RasterError> {
    img.ensure(Channels::Gray8)?;
    let radius = check_window(k)?;
    let (w, h) = (img.width as usize, img.height as usize);
    let pick = |a: u8, b: u8| if take_max { a.max(b) } else { a.min(b) };

    let mut horiz = vec![0u8; w * h];
    for_each_row(&mut horiz, w, |y, row| {
        let src = &img.data[y * w..(y + 1) * w];
        for (x, dst) in row.iter_mut().enumerate() {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            *dst = src[lo..=hi].iter().copied().reduce(pick).unwrap_or(0);
        }
    });
    let mut out = vec![0u8; w * h];
    for_each_row(&mut out, w, |y, row| {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for (x, dst) in row.iter_mut().enumerate() {
            *dst = (lo..=hi).map(|sy| horiz[sy * w + x]).reduce(pick).unwrap_or(0);
        }
    });
    RasterImage::gray(img.width, img.height, out)
}

/// k×k maximum filter.
pub fn dilate(img: &RasterImage, k: u32) -> Result<RasterImage, RasterError> {
    rank_filter(img, k, true)
}

/// k×k minimum filter.
pub fn erode(img: &RasterImage, k: u32) -> Result<RasterImage, RasterError> {
    rank_filter(img, k, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub label: u32,
    pub bbox: BBox,
    pub area: u64,
    pub centroid: (f64, f64),
}

impl Component {
    /// Foreground pixels over box area.
    pub fn fill_ratio(&self) -> f64 {
        self.area as f64 / self.bbox.area() as f64
    }

    /// Height over width.
    pub fn aspect(&self) -> f64 {
        f64::from(self.bbox.h) / f64::from(self.bbox.w)
    }
}

/// Connected-component labelling.
///
/// Returns the per-pixel label map (0 = background) and the components in
/// label order. Labels are assigned in raster order of each component's first
/// pixel.
pub fn label_components(img: &RasterImage, connectivity: Connectivity) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = (img.width as usize, img.height as usize);
    let fg = |i: usize| img.data[i * img.channels.count()] != 0;
    let mut labels = vec![0u32; w * h];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..w * h {
        if labels[start] != 0 || !fg(start) {
            continue;
        }
        let label = comps.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let (mut area, mut sx, mut sy) = (0u64, 0f64, 0f64);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            area += 1;
            sx += x as f64;
            sy += y as f64;
            for &(dx, dy) in connectivity.offsets() {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if labels[j] == 0 && fg(j) {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        comps.push(Component {
            label,
            bbox: BBox::from_corners(x0 as u32, y0 as u32, x1 as u32, y1 as u32),
            area,
            centroid: (sx / area as f64, sy / area as f64),
        });
    }
    (labels, comps)
}

pub fn connected_components(img: &RasterImage, connectivity: Connectivity) -> Vec<Component> {
    label_components(img, connectivity).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary(rows: &[&str]) -> RasterImage {
        let w = rows[0].len() as u32;
        let data = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| if b == b'#' { 255 } else { 0 }))
            .collect();
        RasterImage::gray(w, rows.len() as u32, data).unwrap()
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(matches!(RasterImage::gray(0, 3, vec![]), Err(RasterError::ZeroDimension { .. })));
        assert!(matches!(
            RasterImage::rgb(2, 2, vec![0; 5]),
            Err(RasterError::BufferLength { expected: 12, actual: 5 })
        ));
    }

    #[test]
    fn grayscale_luma() {
        let img = RasterImage::rgb(3, 1, vec![255, 255, 255, 0, 0, 0, 255, 0, 0]).unwrap();
        let g = to_grayscale(&img).unwrap();
        // round(0.299 * 255) = round(76.245)
        let red = (0.299f64 * 255.0).round() as u8;
        assert_eq!(g.data(), &[255, 0, red]);
        assert_eq!(red, 76);
        assert!(matches!(to_grayscale(&g), Err(RasterError::WrongChannels { .. })));
    }

    #[test]
    fn otsu_uniform_returns_value() {
        let img = RasterImage::filled(4, 4, &[128]).unwrap();
        assert_eq!(otsu_threshold(&img).unwrap(), 128);
    }

    #[test]
    fn otsu_two_levels_picks_smallest_maximizer() {
        let img = RasterImage::gray(5, 1, vec![0, 0, 0, 255, 255]).unwrap();
        assert_eq!(otsu_threshold(&img).unwrap(), 0);
    }

    #[test]
    fn fraction_compare_is_exact() {
        assert_eq!(cmp_fractions(1, 3, 2, 6), Ordering::Equal);
        assert_eq!(cmp_fractions(10, 3, 7, 2), Ordering::Less);
        assert_eq!(cmp_fractions(u128::MAX, u128::MAX - 1, u128::MAX - 1, u128::MAX - 2), Ordering::Less);
    }

    #[test]
    fn binarize_polarities() {
        let zeros = RasterImage::filled(3, 2, &[0]).unwrap();
        let b = binarize(&zeros, 0, Polarity::DarkFg).unwrap();
        assert!(b.data().iter().all(|&v| v == 255));

        let checker = RasterImage::gray(2, 2, vec![0, 255, 255, 0]).unwrap();
        let b = binarize(&checker, 128, Polarity::LightFg).unwrap();
        assert_eq!(b.data(), checker.data());
    }

    #[test]
    fn adaptive_threshold_uniform() {
        let img = RasterImage::filled(9, 9, &[100]).unwrap();
        let bg = adaptive_threshold(&img, 3, 5).unwrap();
        assert_eq!(bg.count_nonzero(), 0);
        let fg = adaptive_threshold(&img, 3, -1).unwrap();
        assert_eq!(fg.count_nonzero(), 81);
        assert!(matches!(adaptive_threshold(&img, 4, 0), Err(RasterError::EvenWindow(4))));
    }

    /// Direct per-pixel mean over the edge-replicated window.
    fn adaptive_oracle(img: &RasterImage, window: u32, bias: i32) -> Vec<u8> {
        let r = (window / 2) as i64;
        let (w, h) = (img.width() as i64, img.height() as i64);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut sum = 0f64;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w - 1) as u32;
                        let sy = (y + dy).clamp(0, h - 1) as u32;
                        sum += f64::from(img.luma_at(sx, sy));
                    }
                }
                let mean = sum / f64::from(window * window);
                let v = f64::from(img.luma_at(x as u32, y as u32));
                out.push(if v < mean - f64::from(bias) { 255 } else { 0 });
            }
        }
        out
    }

    #[test]
    fn adaptive_threshold_dark_blob() {
        let mut img = RasterImage::filled(31, 31, &[200]).unwrap();
        for y in 14..17 {
            for x in 14..17 {
                img.set_pixel(x, y, &[40]);
            }
        }
        let out = adaptive_threshold(&img, 15, 10).unwrap();
        assert_eq!(out.data(), adaptive_oracle(&img, 15, 10).as_slice());
        for y in 14..17 {
            for x in 14..17 {
                assert_eq!(out.luma_at(x, y), 255);
            }
        }
        assert_eq!(out.count_nonzero(), 9);
    }

    #[test]
    fn components_by_connectivity() {
        let img = binary(&["##.", "...", ".##"]);
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let comps = connected_components(&img, conn);
            assert_eq!(comps.len(), 2);
            assert!(comps.iter().all(|c| c.area == 2));
            assert_eq!(comps[0].label, 1);
            assert_eq!(comps[0].bbox, BBox::new(0, 0, 2, 1));
        }
        let diag = binary(&["#.", ".#"]);
        assert_eq!(connected_components(&diag, Connectivity::Four).len(), 2);
        assert_eq!(connected_components(&diag, Connectivity::Eight).len(), 1);
    }

    #[test]
    fn dilate_then_erode_single_pixel() {
        let dot = binary(&[".....", ".....", "..#..", ".....", "....."]);
        let grown = dilate(&dot, 3).unwrap();
        assert_eq!(grown, binary(&[".....", ".###.", ".###.", ".###.", "....."]));
        assert_eq!(erode(&grown, 3).unwrap(), dot);
        assert!(matches!(dilate(&dot, 2), Err(RasterError::EvenWindow(2))));
    }

    #[test]
    fn crop_and_pad() {
        let img = RasterImage::gray(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let c = img.crop(BBox::new(1, 0, 2, 2)).unwrap();
        assert_eq!(c.data(), &[2, 3, 5, 6]);
        assert!(img.crop(BBox::new(2, 0, 2, 1)).is_err());
        let p = c.pad(1, 1, 4, 3, &[9]).unwrap();
        assert_eq!(p.data(), &[9, 9, 9, 9, 9, 2, 3, 9, 9, 5, 6, 9]);
    }

    fn arb_binary(max: u32) -> impl Strategy<Value = RasterImage> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            proptest::collection::vec(prop_oneof![Just(0u8), Just(255u8)], (w * h) as usize)
                .prop_map(move |d| RasterImage::gray(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn binarize_is_binary_and_complementary(data in proptest::collection::vec(any::<u8>(), 1..400), t: u8) {
            let img = RasterImage::gray(data.len() as u32, 1, data).unwrap();
            let dark = binarize(&img, t, Polarity::DarkFg).unwrap();
            let light = binarize(&img, t, Polarity::LightFg).unwrap();
            for (a, b) in dark.data().iter().zip(light.data()) {
                prop_assert!(*a == 0 || *a == 255);
                prop_assert_eq!(a ^ b, 255);
            }
        }

        #[test]
        fn closing_is_superset(img in arb_binary(16), k in prop_oneof![Just(1u32), Just(3u32), Just(5u32)]) {
            let closed = erode(&dilate(&img, k).unwrap(), k).unwrap();
            for (orig, c) in img.data().iter().zip(closed.data()) {
                prop_assert!(*orig == 0 || *c == 255);
            }
        }

        #[test]
        fn dilate_is_monotone(x in arb_binary(12), extra in proptest::collection::vec(any::<bool>(), 144)) {
            let mut y = x.clone();
            for (i, v) in y.data_mut().iter_mut().enumerate() {
                if extra[i % extra.len()] { *v = 255; }
            }
            let dx = dilate(&x, 3).unwrap();
            let dy = dilate(&y, 3).unwrap();
            for (a, b) in dx.data().iter().zip(dy.data()) {
                prop_assert!(*a == 0 || *b == 255);
            }
        }

        #[test]
        fn components_partition_foreground(img in arb_binary(32), eight: bool) {
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            let (labels, comps) = label_components(&img, conn);
            let total: u64 = comps.iter().map(|c| c.area).sum();
            prop_assert_eq!(total as usize, img.count_nonzero());
            for (i, &l) in labels.iter().enumerate() {
                prop_assert_eq!(l != 0, img.data()[i] != 0);
            }
            for c in &comps {
                prop_assert!(c.area >= 1 && c.area <= c.bbox.area());
                prop_assert!(c.bbox.contains_point(c.centroid.0, c.centroid.1));
            }
        }
    }
}
