//! Bitmap glyph atlas backing the builtin recognizer, plus the text renderer
//! used to produce panels the recognizer must read back exactly.
//!
//! File format (`.atlas`, UTF-8 text):
//!
//! ```text
//! atlas v1 <H> <W>
//! U+0041
//! <H rows of W characters, '.' = background, '#' = ink>
//! U+0042
//! ...
//! ```
//!
//! Blank lines between glyphs are ignored.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use thiserror::Error;

use crate::geometry::BBox;
use crate::raster::RasterImage;
use crate::recognizer::script::{char_script, ScriptTag};

const BUNDLED_ATLAS: &str = include_str!("../../assets/glyphs.atlas");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AtlasError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("codepoint {0:?} defined twice")]
    DuplicateCodepoint(char),
    #[error("glyph {0:?} has no ink")]
    EmptyGlyph(char),
    #[error("no glyph for {0:?}")]
    MissingGlyph(char),
}

#[derive(Debug, Clone)]
pub struct Glyph {
    pub ch: char,
    /// Row-major `height * width` cell bitmap.
    pub cell: Vec<bool>,
    /// Tight ink box inside the cell.
    pub ink: BBox,
    /// Ink normalized to the atlas grid, the matching template.
    pub template: Vec<bool>,
}

impl Glyph {
    pub fn script(&self) -> Option<ScriptTag> {
        char_script(self.ch)
    }
}

/// Ordered by codepoint; lookups go through the `BTreeMap`.
#[derive(Debug, Clone)]
pub struct GlyphAtlas {
    height: u32,
    width: u32,
    glyphs: BTreeMap<char, Glyph>,
}

/// Scale the ink inside `bbox` to fit a `height`×`width` grid, keeping its
/// aspect ratio and centering it. Sampling is nearest-neighbour at the centre
/// of each destination cell, so an integer upscale of a bitmap normalizes to
/// exactly the same grid as the original.
pub fn normalize_ink(ink: impl Fn(u32, u32) -> bool, bbox: BBox, height: u32, width: u32) -> Vec<bool> {
    let (h, w) = (u64::from(bbox.h), u64::from(bbox.w));
    let (gh, gw) = (u64::from(height), u64::from(width));
    let (th, tw) = if h * gw >= w * gh {
        (gh, ((w * gh * 2 + h) / (2 * h)).clamp(1, gw))
    } else {
        (((h * gw * 2 + w) / (2 * w)).clamp(1, gh), gw)
    };
    let (oy, ox) = ((gh - th) / 2, (gw - tw) / 2);
    let mut out = vec![false; (gh * gw) as usize];
    for i in 0..th {
        let sy = ((2 * i + 1) * h / (2 * th)) as u32;
        for j in 0..tw {
            let sx = ((2 * j + 1) * w / (2 * tw)) as u32;
            out[((oy + i) * gw + ox + j) as usize] = ink(bbox.x + sx, bbox.y + sy);
        }
    }
    out
}

fn parse_codepoint(s: &str) -> Option<char> {
    let hex = s.strip_prefix("U+")?;
    char::from_u32(u32::from_str_radix(hex, 16).ok()?)
}

impl GlyphAtlas {
    pub fn parse(text: &str) -> Result<GlyphAtlas, AtlasError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(AtlasError::Parse { line: 1, message: "empty atlas".into() })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (height, width) = match parts.as_slice() {
            ["atlas", "v1", h, w] => match (h.parse::<u32>(), w.parse::<u32>()) {
                (Ok(h), Ok(w)) if h > 0 && w > 0 => (h, w),
                _ => return Err(AtlasError::Parse { line: hline, message: "bad glyph size".into() }),
            },
            _ => {
                return Err(AtlasError::Parse { line: hline, message: "expected `atlas v1 H W`".into() });
            }
        };

        let mut glyphs = BTreeMap::new();
        while let Some((lno, tag)) = lines.next() {
            let ch = parse_codepoint(tag)
                .ok_or_else(|| AtlasError::Parse { line: lno, message: format!("expected U+XXXX, got {tag:?}") })?;
            let mut cell = Vec::with_capacity((height * width) as usize);
            for _ in 0..height {
                let (rno, row) = lines
                    .next()
                    .ok_or_else(|| AtlasError::Parse { line: lno, message: format!("glyph {tag} is truncated") })?;
                if row.chars().count() != width as usize {
                    return Err(AtlasError::Parse { line: rno, message: format!("row must have {width} cells") });
                }
                for c in row.chars() {
                    cell.push(match c {
                        '#' => true,
                        '.' => false,
                        other => {
                            return Err(AtlasError::Parse { line: rno, message: format!("unexpected {other:?}") });
                        }
                    });
                }
            }
            let glyph = Self::make_glyph(ch, cell, height, width)?;
            if glyphs.insert(ch, glyph).is_some() {
                return Err(AtlasError::DuplicateCodepoint(ch));
            }
        }
        Ok(GlyphAtlas { height, width, glyphs })
    }

    fn make_glyph(ch: char, cell: Vec<bool>, height: u32, width: u32) -> Result<Glyph, AtlasError> {
        let mut ink: Option<BBox> = None;
        for y in 0..height {
            for x in 0..width {
                if cell[(y * width + x) as usize] {
                    let px = BBox::new(x, y, 1, 1);
                    ink = Some(ink.map_or(px, |b| b.union(&px)));
                }
            }
        }
        let ink = ink.ok_or(AtlasError::EmptyGlyph(ch))?;
        let template = normalize_ink(|x, y| cell[(y * width + x) as usize], ink, height, width);
        Ok(Glyph { ch, cell, ink, template })
    }

    /// The atlas shipped with the crate.
    pub fn builtin() -> &'static GlyphAtlas {
        static ATLAS: OnceLock<GlyphAtlas> = OnceLock::new();
        ATLAS.get_or_init(|| GlyphAtlas::parse(BUNDLED_ATLAS).expect("bundled atlas is valid"))
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn glyph(&self, ch: char) -> Option<&Glyph> {
        self.glyphs.get(&ch)
    }

    /// Glyphs in ascending codepoint order.
    pub fn glyphs(&self) -> impl Iterator<Item = &Glyph> {
        self.glyphs.values()
    }

    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    pub fn covers(&self, text: &str) -> bool {
        text.chars().all(|c| c == ' ' || self.glyphs.contains_key(&c))
    }

    /// Scripts with at least one glyph.
    pub fn scripts(&self) -> Vec<ScriptTag> {
        let mut s: Vec<ScriptTag> = self.glyphs().filter_map(Glyph::script).collect();
        s.sort();
        s.dedup();
        s
    }
}

/// Layout parameters for [`render_text`], in atlas cell units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderStyle {
    /// Integer upscale applied to every atlas pixel.
    pub scale: u32,
    /// Blank columns between consecutive glyphs.
    pub spacing: u32,
    /// Extra blank columns for a space character.
    pub space_advance: u32,
    /// Blank border around the text.
    pub margin: u32,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self { scale: 4, spacing: 1, space_advance: 5, margin: 2 }
    }
}

/// Output of [`render_text`]: a binary image (255 = ink) and its ink box.
#[derive(Debug, Clone)]
pub struct RenderedText {
    pub image: RasterImage,
    pub ink: Option<BBox>,
}

/// Render a single line codepoint by codepoint, without shaping. Each glyph
/// occupies its ink columns and the full cell height, so glyphs never touch.
pub fn render_text(atlas: &GlyphAtlas, text: &str, style: RenderStyle) -> Result<RenderedText, AtlasError> {
    let s = style.scale.max(1);
    let mut placements = Vec::new();
    let mut pen = style.margin;
    let mut first = true;
    for ch in text.chars() {
        if ch == ' ' {
            pen += style.space_advance;
            continue;
        }
        let glyph = atlas.glyph(ch).ok_or(AtlasError::MissingGlyph(ch))?;
        if !first {
            pen += style.spacing;
        }
        first = false;
        placements.push((glyph, pen));
        pen += glyph.ink.w;
    }
    let width_units = (pen + style.margin).max(1);
    let height_units = atlas.height + 2 * style.margin;
    let (w, h) = (width_units * s, height_units * s);
    let mut data = vec![0u8; (w * h) as usize];
    let mut ink: Option<BBox> = None;
    for (glyph, x0) in placements {
        for gy in 0..atlas.height {
            for gx in glyph.ink.x..glyph.ink.right() {
                if !glyph.cell[(gy * atlas.width + gx) as usize] {
                    continue;
                }
                let ux = x0 + gx - glyph.ink.x;
                let uy = style.margin + gy;
                let block = BBox::new(ux * s, uy * s, s, s);
                ink = Some(ink.map_or(block, |b| b.union(&block)));
                for py in block.y..block.bottom() {
                    let row = (py * w) as usize;
                    data[row + block.x as usize..row + block.right() as usize].fill(255);
                }
            }
        }
    }
    let image = RasterImage::gray(w, h, data).expect("dimensions are positive");
    Ok(RenderedText { image, ink })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{connected_components, Connectivity};

    #[test]
    fn bundled_atlas_coverage() {
        let atlas = GlyphAtlas::builtin();
        for c in ('0'..='9').chain('A'..='Z') {
            assert!(atlas.glyph(c).is_some(), "missing {c}");
        }
        let scripts = atlas.scripts();
        assert!(scripts.contains(&ScriptTag::Devanagari));
        assert!(scripts.contains(&ScriptTag::BengaliAssamese));
        assert!(atlas.covers("नगर 25 किमी"));
        assert!(atlas.covers("নলবাৰী"));
    }

    #[test]
    fn glyphs_are_single_components_and_distinct() {
        let atlas = GlyphAtlas::builtin();
        for g in atlas.glyphs() {
            let data = g.cell.iter().map(|&b| if b { 255 } else { 0 }).collect();
            let img = RasterImage::gray(atlas.width(), atlas.height(), data).unwrap();
            assert_eq!(connected_components(&img, Connectivity::Four).len(), 1, "glyph {:?}", g.ch);
        }
        let glyphs: Vec<_> = atlas.glyphs().collect();
        for (i, a) in glyphs.iter().enumerate() {
            for b in &glyphs[i + 1..] {
                let d = a.template.iter().zip(&b.template).filter(|(x, y)| x != y).count();
                assert!(d >= 8, "{:?} and {:?} differ in only {d} cells", a.ch, b.ch);
            }
        }
    }

    #[test]
    fn rejects_bad_atlases() {
        assert!(matches!(GlyphAtlas::parse("atlas v2 2 2"), Err(AtlasError::Parse { .. })));
        let dup = "atlas v1 1 2\nU+0041\n#.\nU+0041\n.#\n";
        assert_eq!(GlyphAtlas::parse(dup).unwrap_err(), AtlasError::DuplicateCodepoint('A'));
        let blank = "atlas v1 1 2\nU+0041\n..\n";
        assert_eq!(GlyphAtlas::parse(blank).unwrap_err(), AtlasError::EmptyGlyph('A'));
        let short = "atlas v1 2 2\nU+0041\n#.\n";
        assert!(matches!(GlyphAtlas::parse(short), Err(AtlasError::Parse { .. })));
    }

    #[test]
    fn normalization_is_scale_invariant() {
        let atlas = GlyphAtlas::builtin();
        let g = atlas.glyph('K').unwrap();
        for s in 2..6u32 {
            let ink = BBox::new(0, 0, g.ink.w * s, g.ink.h * s);
            let scaled = normalize_ink(
                |x, y| g.cell[((g.ink.y + y / s) * atlas.width() + g.ink.x + x / s) as usize],
                ink,
                atlas.height(),
                atlas.width(),
            );
            assert_eq!(scaled, g.template);
        }
    }

    #[test]
    fn render_unknown_glyph_fails() {
        let err = render_text(GlyphAtlas::builtin(), "A~", RenderStyle::default()).unwrap_err();
        assert_eq!(err, AtlasError::MissingGlyph('~'));
    }
}
