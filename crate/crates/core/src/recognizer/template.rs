//! Deterministic template-matching recognizer over a [`GlyphAtlas`].

use std::time::Instant;

use crate::geometry::BBox;
use crate::raster::{
    binarize, label_components, otsu_threshold, Channels, Component, Connectivity, Polarity, RasterImage,
};
use crate::recognizer::atlas::{normalize_ink, GlyphAtlas};
use crate::recognizer::script::{identify_script, ScriptTag};
use crate::recognizer::{RecognizedLine, RecognizedText};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateParams {
    /// Components smaller than this fraction of the largest are noise.
    pub min_area_fraction: f64,
    /// Below this agreement a component is emitted as U+FFFD.
    pub min_agreement: f64,
    /// A gap wider than this fraction of the median glyph width is a space.
    pub space_gap_factor: f64,
}

impl Default for TemplateParams {
    fn default() -> Self {
        Self { min_area_fraction: 0.08, min_agreement: 0.6, space_gap_factor: 0.5 }
    }
}

/// Foreground mask for a gray region: Otsu threshold, with the polarity that
/// leaves the region's border mostly background. Ties fall back to the
/// polarity whose foreground is the minority.
pub fn binarize_region(region: &RasterImage) -> RasterImage {
    let gray = crate::raster::as_gray(region);
    let t = otsu_threshold(&gray).expect("gray image");
    let light = binarize(&gray, t, Polarity::LightFg).expect("gray image");
    let dark = binarize(&gray, t, Polarity::DarkFg).expect("gray image");
    let key = |m: &RasterImage| (border_ink(m), m.count_nonzero());
    if key(&light) <= key(&dark) {
        light
    } else {
        dark
    }
}

fn border_ink(mask: &RasterImage) -> usize {
    let (w, h) = (mask.width(), mask.height());
    let on = |x: u32, y: u32| usize::from(mask.pixel(x, y)[0] != 0);
    let rows: usize = (0..w).map(|x| on(x, 0) + if h > 1 { on(x, h - 1) } else { 0 }).sum();
    let cols: usize = (1..h.saturating_sub(1)).map(|y| on(0, y) + if w > 1 { on(w - 1, y) } else { 0 }).sum();
    rows + cols
}

/// Recognize one text line in a binary region (255 = ink).
pub fn template_recognize(atlas: &GlyphAtlas, region: &RasterImage) -> RecognizedText {
    template_recognize_with(atlas, region, &[], TemplateParams::default())
}

/// As [`template_recognize`], restricting candidates to `scripts` (digits are
/// always candidates; an empty list allows every glyph).
pub fn template_recognize_with(
    atlas: &GlyphAtlas,
    region: &RasterImage,
    scripts: &[ScriptTag],
    params: TemplateParams,
) -> RecognizedText {
    let started = Instant::now();
    debug_assert_eq!(region.channels(), Channels::Gray8);
    let (labels, comps) = label_components(region, Connectivity::Eight);
    let largest = comps.iter().map(|c| c.area).max().unwrap_or(0);
    let min_area = (largest as f64 * params.min_area_fraction).max(1.0);
    let mut glyphs: Vec<&Component> = comps.iter().filter(|c| c.area as f64 >= min_area).collect();
    glyphs.sort_by_key(|c| (c.bbox.x, c.bbox.y));

    let mut text = RecognizedText::empty("builtin");
    if glyphs.is_empty() {
        text.elapsed_s = started.elapsed().as_secs_f64();
        return text;
    }

    let candidates: Vec<_> = atlas
        .glyphs()
        .filter(|g| scripts.is_empty() || g.script().map_or(true, |s| scripts.contains(&s)))
        .collect();
    let cells = (atlas.height() * atlas.width()) as f64;
    let width = region.width();

    let mut widths: Vec<u32> = glyphs.iter().map(|c| c.bbox.w).collect();
    widths.sort_unstable();
    let median_width = f64::from(widths[widths.len() / 2]);

    let mut out = String::new();
    let mut score_sum = 0.0;
    let mut prev_right: Option<u32> = None;
    for comp in &glyphs {
        if let Some(right) = prev_right {
            let gap = comp.bbox.x.saturating_sub(right);
            if f64::from(gap) > params.space_gap_factor * median_width {
                out.push(' ');
            }
        }
        prev_right = Some(prev_right.map_or(comp.bbox.right(), |r| r.max(comp.bbox.right())));

        let ink = |x: u32, y: u32| labels[(y * width + x) as usize] == comp.label;
        let bbox = if comp.bbox.h >= 2 * atlas.height() { trim_sparse_edges(&ink, comp.bbox, atlas) } else { comp.bbox };
        let grid = normalize_ink(
            ink,
            bbox,
            atlas.height(),
            atlas.width(),
        );
        let mut best: Option<(char, f64)> = None;
        for g in &candidates {
            let agree = grid.iter().zip(&g.template).filter(|(a, b)| a == b).count() as f64 / cells;
            // candidates ascend by codepoint, so strict improvement keeps the lowest on ties
            if best.map_or(true, |(_, s)| agree > s) {
                best = Some((g.ch, agree));
            }
        }
        let (ch, score) = best.unwrap_or(('\u{FFFD}', 0.0));
        out.push(if score >= params.min_agreement { ch } else { '\u{FFFD}' });
        score_sum += score;
    }

    let confidence = (score_sum / glyphs.len() as f64).clamp(0.0, 1.0);
    text.lines.push(RecognizedLine { script: identify_script(&out), text: out, confidence });
    text.elapsed_s = started.elapsed().as_secs_f64();
    text
}

/// Shrink `bbox` past edge rows and columns whose longest ink run is shorter
/// than the glyph's stroke: noise pixels stuck to a glyph. The stroke estimate
/// never exceeds the render scale, so edges of a clean upscaled glyph are kept.
fn trim_sparse_edges(ink: &impl Fn(u32, u32) -> bool, mut bbox: BBox, atlas: &GlyphAtlas) -> BBox {
    let stroke = (bbox.h / atlas.height()).max(bbox.w / atlas.width()) as usize;
    let longest_run = |cells: &mut dyn Iterator<Item = bool>| {
        let (mut best, mut run) = (0, 0);
        for on in cells {
            run = if on { run + 1 } else { 0 };
            best = best.max(run);
        }
        best
    };
    let row = |b: &BBox, y: u32| longest_run(&mut (b.x..b.right()).map(|x| ink(x, y)));
    let col = |b: &BBox, x: u32| longest_run(&mut (b.y..b.bottom()).map(|y| ink(x, y)));
    loop {
        let before = bbox;
        if bbox.h > 1 && row(&bbox, bbox.y) < stroke {
            bbox = BBox::new(bbox.x, bbox.y + 1, bbox.w, bbox.h - 1);
        }
        if bbox.h > 1 && row(&bbox, bbox.bottom() - 1) < stroke {
            bbox.h -= 1;
        }
        if bbox.w > 1 && col(&bbox, bbox.x) < stroke {
            bbox = BBox::new(bbox.x + 1, bbox.y, bbox.w - 1, bbox.h);
        }
        if bbox.w > 1 && col(&bbox, bbox.right() - 1) < stroke {
            bbox.w -= 1;
        }
        if bbox == before {
            return bbox;
        }
    }
}
