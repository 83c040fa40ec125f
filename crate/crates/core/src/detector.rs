//! Panel segmentation and text-line extraction.
//!
//! A frame goes through three steps: colored boards are found by hue, each
//! board is binarized and filtered down to glyph-like components, and the
//! components are chained into lines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::par::for_each_row;
use crate::raster::{
    as_gray, binarize, dilate, label_components, otsu_threshold, Channels, Component, Connectivity, Polarity,
    RasterImage,
};

#[derive(Debug, Error, PartialEq)]
pub enum DetectorConfigError {
    #[error("{field}: lower bound {lo} exceeds upper bound {hi}")]
    Unordered { field: &'static str, lo: f64, hi: f64 },
    #[error("{field}: {value} is out of range")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("mask_dilation must be odd, got {0}")]
    EvenDilation(u32),
}

/// Detection parameters. Area fractions are relative to the panel being
/// searched, hues are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub hue_ranges: Vec<(f64, f64)>,
    pub min_saturation: f64,
    /// Side of the square dilation applied to the board mask.
    pub mask_dilation: u32,
    /// Smallest board kept, as a fraction of the frame.
    pub min_panel_fraction: f64,
    pub area_fraction: (f64, f64),
    /// Height over width.
    pub aspect: (f64, f64),
    pub fill: (f64, f64),
    /// τ_v: required vertical overlap, as a fraction of the shorter box.
    pub line_overlap: f64,
    /// γ: largest horizontal gap inside a line, in median heights.
    pub gap_factor: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            hue_ranges: vec![(90.0, 150.0), (200.0, 250.0), (40.0, 65.0)],
            min_saturation: 0.35,
            mask_dilation: 5,
            min_panel_fraction: 0.01,
            area_fraction: (0.0001, 0.20),
            aspect: (0.3, 12.0),
            fill: (0.1, 0.95),
            line_overlap: 0.5,
            gap_factor: 2.5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectorConfigError> {
        let ordered = |field, (lo, hi): (f64, f64)| {
            if lo <= hi {
                Ok(())
            } else {
                Err(DetectorConfigError::Unordered { field, lo, hi })
            }
        };
        for &range in &self.hue_ranges {
            ordered("hue_ranges", range)?;
        }
        ordered("area_fraction", self.area_fraction)?;
        ordered("aspect", self.aspect)?;
        ordered("fill", self.fill)?;
        let in_range = |field, value: f64, lo: f64, hi: f64| {
            if (lo..=hi).contains(&value) {
                Ok(())
            } else {
                Err(DetectorConfigError::OutOfRange { field, value })
            }
        };
        in_range("min_saturation", self.min_saturation, 0.0, 1.0)?;
        in_range("min_panel_fraction", self.min_panel_fraction, 0.0, 1.0)?;
        in_range("line_overlap", self.line_overlap, 0.0, 1.0)?;
        in_range("gap_factor", self.gap_factor, 0.0, f64::MAX)?;
        if self.mask_dilation % 2 == 0 {
            return Err(DetectorConfigError::EvenDilation(self.mask_dilation));
        }
        Ok(())
    }

    fn hue_matches(&self, hue: f64) -> bool {
        self.hue_ranges.iter().any(|&(lo, hi)| lo <= hue && hue <= hi)
    }

    fn keeps(&self, comp: &Component, panel_area: f64) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
        within(comp.area as f64 / panel_area, self.area_fraction)
            && within(comp.aspect(), self.aspect)
            && within(comp.fill_ratio(), self.fill)
    }
}

/// One detected line of text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRegion {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub line_index: usize,
    /// Left to right.
    pub component_boxes: Vec<BBox>,
    pub score: f64,
}

/// Hue in degrees and saturation in [0, 1].
pub fn hue_saturation(r: u8, g: u8, b: u8) -> (f64, f64) {
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if max == 0.0 || delta == 0.0 {
        return (0.0, 0.0);
    }
    let hue = if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (hue, delta / max)
}

/// Candidate boards: boxes of board-colored pixels, largest first. Empty for
/// grayscale input or when nothing board-colored covers enough of the frame.
pub fn segment_panel(img: &RasterImage, cfg: &DetectorConfig) -> Vec<BBox> {
    if img.channels() != Channels::Rgb8 {
        return Vec::new();
    }
    let (w, h) = (img.width(), img.height());
    let mut mask = vec![0u8; (w * h) as usize];
    for_each_row(&mut mask, w as usize, |y, row| {
        for (x, dst) in row.iter_mut().enumerate() {
            let p = img.pixel(x as u32, y as u32);
            let (hue, sat) = hue_saturation(p[0], p[1], p[2]);
            if sat >= cfg.min_saturation && cfg.hue_matches(hue) {
                *dst = 255;
            }
        }
    });
    let mask = RasterImage::gray(w, h, mask).expect("mask matches frame size");
    let grown = dilate(&mask, cfg.mask_dilation.max(1) | 1).expect("window is odd");
    let (labels, comps) = label_components(&grown, Connectivity::Eight);

    // Tight box of the original mask pixels under each dilated component.
    let mut extents: Vec<Option<BBox>> = vec![None; comps.len()];
    for y in 0..h {
        for x in 0..w {
            if mask.pixel(x, y)[0] == 0 {
                continue;
            }
            let slot = &mut extents[labels[(y * w + x) as usize] as usize - 1];
            let px = BBox::new(x, y, 1, 1);
            *slot = Some(slot.map_or(px, |b| b.union(&px)));
        }
    }
    let min_area = cfg.min_panel_fraction * f64::from(w) * f64::from(h);
    let mut boards: Vec<BBox> = extents.into_iter().flatten().filter(|b| b.area() as f64 >= min_area).collect();
    boards.sort_by_key(|b| (std::cmp::Reverse(b.area()), b.y, b.x));
    boards
}

/// Glyph-like components of a grayscale panel, in raster label order. Both
/// Otsu polarities are tried and the one yielding more kept components wins;
/// dark ink wins a tie.
pub fn extract_candidates(panel: &RasterImage, cfg: &DetectorConfig) -> Vec<Component> {
    let gray = as_gray(panel);
    let t = otsu_threshold(&gray).expect("grayscale");
    let panel_area = f64::from(gray.width()) * f64::from(gray.height());
    let mut best: Vec<Component> = Vec::new();
    for polarity in [Polarity::DarkFg, Polarity::LightFg] {
        let bin = binarize(&gray, t, polarity).expect("grayscale");
        let (_, comps) = label_components(&bin, Connectivity::Eight);
        let kept: Vec<Component> = comps.into_iter().filter(|c| cfg.keeps(c, panel_area)).collect();
        if kept.len() > best.len() {
            best = kept;
        }
    }
    best
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn line_score(boxes: &[BBox]) -> f64 {
    let mut heights: Vec<f64> = boxes.iter().map(|b| f64::from(b.h)).collect();
    let med = median(&mut heights);
    let total: f64 = boxes
        .iter()
        .map(|b| {
            let h = f64::from(b.h);
            1.0 - (h - med).abs() / h.max(med)
        })
        .sum();
    (total / boxes.len() as f64).clamp(0.0, 1.0)
}

/// Sort regions into reading order and renumber them. Regions sharing a row
/// (enough vertical overlap with the row's first region) go left to right.
fn order_regions(regions: &mut Vec<TextRegion>, overlap: f64) {
    regions.sort_by_key(|r| (r.bbox.y, r.bbox.x));
    let mut rows: Vec<(BBox, Vec<TextRegion>)> = Vec::new();
    for region in regions.drain(..) {
        let b = region.bbox;
        match rows.iter_mut().find(|(first, _)| {
            f64::from(first.vertical_overlap(&b)) >= overlap * f64::from(first.h.min(b.h))
        }) {
            Some((_, row)) => row.push(region),
            None => rows.push((b, vec![region])),
        }
    }
    for (_, mut row) in rows {
        row.sort_by_key(|r| (r.bbox.x, r.bbox.y));
        regions.extend(row);
    }
    for (i, r) in regions.iter_mut().enumerate() {
        r.line_index = i;
    }
}

/// Chain candidates into lines. Two candidates are linked when their vertical
/// overlap is at least `line_overlap` of the shorter height and their
/// horizontal gap is at most `gap_factor` median heights; lines are the
/// connected groups of that relation.
pub fn group_into_lines(candidates: &[Component], cfg: &DetectorConfig) -> Vec<TextRegion> {
    let boxes: Vec<BBox> = candidates.iter().map(|c| c.bbox).collect();
    if boxes.is_empty() {
        return Vec::new();
    }
    let mut heights: Vec<f64> = boxes.iter().map(|b| f64::from(b.h)).collect();
    let max_gap = cfg.gap_factor * median(&mut heights);
    let mut parent: Vec<usize> = (0..boxes.len()).collect();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            let (a, b) = (&boxes[i], &boxes[j]);
            let overlap = f64::from(a.vertical_overlap(b));
            if overlap >= cfg.line_overlap * f64::from(a.h.min(b.h)) && f64::from(a.horizontal_gap(b)) <= max_gap {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: Vec<Vec<BBox>> = Vec::new();
    let mut slot = vec![usize::MAX; boxes.len()];
    for i in 0..boxes.len() {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(boxes[i]);
    }
    let mut regions: Vec<TextRegion> = groups
        .into_iter()
        .map(|mut members| {
            members.sort_by_key(|b| (b.x, b.y, b.w, b.h));
            TextRegion {
                bbox: BBox::union_all(&members).expect("group is non-empty"),
                line_index: 0,
                score: line_score(&members),
                component_boxes: members,
            }
        })
        .collect();
    order_regions(&mut regions, cfg.line_overlap);
    regions
}

/// Full detection: boards, then candidates per board, then lines, all in
/// frame coordinates. Without a board the whole frame is searched.
pub fn detect_text_regions(img: &RasterImage, cfg: &DetectorConfig) -> Vec<TextRegion> {
    let mut boards = segment_panel(img, cfg);
    if boards.is_empty() {
        boards.push(img.bounds());
    }
    let mut regions = Vec::new();
    for board in boards {
        let panel = img.crop(board).expect("board lies inside the frame");
        for mut region in group_into_lines(&extract_candidates(&panel, cfg), cfg) {
            region.bbox = region.bbox.translate(board.x, board.y);
            for b in &mut region.component_boxes {
                *b = b.translate(board.x, board.y);
            }
            regions.push(region);
        }
    }
    order_regions(&mut regions, cfg.line_overlap);
    regions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recognizer::atlas::{render_text, GlyphAtlas, RenderStyle};
    use crate::raster::to_grayscale;

    const GRAY: [u8; 3] = [128, 128, 128];
    const GREEN: [u8; 3] = [0, 130, 50];

    fn frame(w: u32, h: u32) -> RasterImage {
        RasterImage::filled(w, h, &GRAY).unwrap()
    }

    fn fill(img: &mut RasterImage, b: BBox, color: [u8; 3]) {
        for y in b.y..b.bottom() {
            for x in b.x..b.right() {
                img.set_pixel(x, y, &color);
            }
        }
    }

    /// Paint rendered text onto `img` at `(x, y)` in white; returns its ink box.
    fn stamp(img: &mut RasterImage, text: &str, scale: u32, x: u32, y: u32) -> BBox {
        let style = RenderStyle { scale, margin: 0, ..RenderStyle::default() };
        let r = render_text(GlyphAtlas::builtin(), text, style).unwrap();
        for py in 0..r.image.height() {
            for px in 0..r.image.width() {
                if r.image.pixel(px, py)[0] != 0 {
                    img.set_pixel(x + px, y + py, &[255, 255, 255]);
                }
            }
        }
        r.ink.unwrap().translate(x, y)
    }

    fn iou(a: &BBox, b: &BBox) -> f64 {
        let inter = a.intersection(b).map_or(0, |i| i.area()) as f64;
        inter / ((a.area() + b.area()) as f64 - inter)
    }

    #[test]
    fn hue_of_board_colors() {
        let (h, s) = hue_saturation(0, 130, 50);
        assert!((h - 143.077).abs() < 1e-3 && s == 1.0);
        assert_eq!(hue_saturation(0, 0, 255).0, 240.0);
        assert_eq!(hue_saturation(255, 0, 0).0, 0.0);
        assert_eq!(hue_saturation(255, 0, 255).0, 300.0);
        assert_eq!(hue_saturation(90, 90, 90), (0.0, 0.0));
    }

    #[test]
    fn finds_a_centered_board() {
        let mut img = frame(300, 200);
        let truth = BBox::new(50, 50, 200, 100);
        fill(&mut img, truth, GREEN);
        let boards = segment_panel(&img, &DetectorConfig::default());
        assert_eq!(boards, vec![truth]);
    }

    #[test]
    fn gray_frame_has_no_board() {
        assert!(segment_panel(&frame(100, 80), &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn two_boards_largest_first() {
        let mut img = frame(400, 200);
        fill(&mut img, BBox::new(10, 10, 100, 60), [0, 70, 160]);
        fill(&mut img, BBox::new(200, 20, 180, 150), [230, 200, 0]);
        let boards = segment_panel(&img, &DetectorConfig::default());
        assert_eq!(boards, vec![BBox::new(200, 20, 180, 150), BBox::new(10, 10, 100, 60)]);
    }

    #[test]
    fn stop_yields_four_candidates() {
        let mut img = RasterImage::filled(400, 120, &GREEN).unwrap();
        stamp(&mut img, "STOP", 5, 40, 20);
        let gray = to_grayscale(&img).unwrap();
        assert_eq!(extract_candidates(&gray, &DetectorConfig::default()).len(), 4);
    }

    #[test]
    fn blank_and_speck_boards_have_no_candidates() {
        let cfg = DetectorConfig::default();
        let mut board = RasterImage::filled(300, 200, &[80]).unwrap();
        assert!(extract_candidates(&board, &cfg).is_empty());
        board.set_pixel(100, 100, &[250]);
        board.set_pixel(101, 100, &[250]);
        assert!(extract_candidates(&board, &cfg).is_empty());
    }

    fn comp(b: BBox) -> Component {
        Component { label: 1, bbox: b, area: b.area() / 2, centroid: b.center() }
    }

    #[test]
    fn single_candidate_is_its_own_line() {
        let b = BBox::new(5, 6, 10, 20);
        let lines = group_into_lines(&[comp(b)], &DetectorConfig::default());
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].bbox, b);
        assert_eq!(lines[0].score, 1.0);
    }

    #[test]
    fn far_apart_candidates_split_left_to_right() {
        let cfg = DetectorConfig::default();
        let right = BBox::new(200, 11, 10, 20);
        let left = BBox::new(10, 10, 10, 20);
        let lines = group_into_lines(&[comp(right), comp(left)], &cfg);
        assert_eq!(lines.len(), 2);
        assert_eq!((lines[0].bbox, lines[0].line_index), (left, 0));
        assert_eq!((lines[1].bbox, lines[1].line_index), (right, 1));
    }

    #[test]
    fn two_rows_of_text() {
        let mut img = RasterImage::filled(420, 200, &GREEN).unwrap();
        let top = stamp(&mut img, "DRIVE SLOW", 3, 20, 20);
        let bottom = stamp(&mut img, "SCHOOL AHEAD", 3, 20, 110);
        let lines = detect_text_regions(&img, &DetectorConfig::default());
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].bbox, top);
        assert_eq!(lines[1].bbox, bottom);
        for line in &lines {
            assert_eq!(BBox::union_all(&line.component_boxes), Some(line.bbox));
            assert!(line.component_boxes.windows(2).all(|p| p[0].x <= p[1].x));
        }
    }

    #[test]
    fn board_in_frame_maps_back() {
        let mut img = frame(500, 300);
        fill(&mut img, BBox::new(60, 40, 380, 160), GREEN);
        let truth = stamp(&mut img, "GUWAHATI 25 KM", 3, 80, 90);
        let lines = detect_text_regions(&img, &DetectorConfig::default());
        assert_eq!(lines.len(), 1);
        assert!(iou(&lines[0].bbox, &truth) >= 0.99);
    }

    #[test]
    fn blank_frame_has_no_regions() {
        assert!(detect_text_regions(&frame(120, 90), &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn config_validation() {
        let mut cfg = DetectorConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.fill = (0.9, 0.1);
        assert!(matches!(cfg.validate(), Err(DetectorConfigError::Unordered { field: "fill", .. })));
        cfg = DetectorConfig { mask_dilation: 4, ..DetectorConfig::default() };
        assert_eq!(cfg.validate(), Err(DetectorConfigError::EvenDilation(4)));
    }
}
