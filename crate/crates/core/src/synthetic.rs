//! Rendered stand-in corpus: atlas text on colored boards with exactly known
//! line boxes, optionally degraded with luminance and impulse noise.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{save_manifest, Category, Corpus, CorpusError, Direction, GroundTruthRegion, Language, PanelRecord, Source};
use crate::geometry::BBox;
use crate::raster::{RasterError, RasterImage};
use crate::recognizer::atlas::{render_text, AtlasError, GlyphAtlas, RenderStyle};
use crate::recognizer::script::identify_script;

pub const FRAME_WIDTH: u32 = 640;
pub const FRAME_HEIGHT: u32 = 360;
pub const BACKGROUND: [u8; 3] = [128, 128, 128];
pub const GREEN: [u8; 3] = [0, 130, 50];
pub const BLUE: [u8; 3] = [0, 70, 160];
pub const YELLOW: [u8; 3] = [230, 200, 0];
const WHITE: [u8; 3] = [255, 255, 255];
const BLACK: [u8; 3] = [0, 0, 0];

const TEXT_SCALE: u32 = 4;
const LINE_GAP: u32 = 24;
const BOARD_PAD_X: u32 = 40;
const BOARD_PAD_Y: u32 = 32;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("panel {0:?} does not fit the frame")]
    TooLarge(String),
}

/// What to paint on one panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDesign {
    pub id: String,
    pub category: Category,
    pub languages: Vec<Language>,
    pub lines: Vec<String>,
    pub direction: Option<Direction>,
    pub board: [u8; 3],
    pub ink: [u8; 3],
}

/// Per-pixel degradation. Luminance noise shifts all three channels by the
/// same uniform offset in `[-luminance, luminance]`; impulses set a pixel to
/// black or white with equal odds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub luminance: u8,
    pub impulse_rate: f64,
    pub seed: u64,
}

impl Noise {
    pub fn standard(seed: u64) -> Self {
        Self { luminance: 30, impulse_rate: 0.01, seed }
    }
}

fn design(id: &str, category: u8, languages: &[Language], lines: &[&str], direction: Option<Direction>) -> PanelDesign {
    let (board, ink) = match category {
        1 | 3 => (GREEN, WHITE),
        2 => (BLUE, WHITE),
        _ => (YELLOW, BLACK),
    };
    PanelDesign {
        id: id.to_string(),
        category: Category::from_number(i64::from(category)).expect("category in range"),
        languages: languages.to_vec(),
        lines: lines.iter().map(|s| s.to_string()).collect(),
        direction,
        board,
        ink,
    }
}

/// Twelve panels: every category in English, Hindi and Assamese.
pub fn standard_designs() -> Vec<PanelDesign> {
    use Language::{Assamese as As, English as En, Hindi as Hi};
    vec![
        design("c1-en", 1, &[En], &["GUWAHATI 25 KM", "JORHAT 140 KM"], None),
        design("c1-hi", 1, &[Hi, En], &["नगर 25 किमी", "NAGAR 25 KM"], None),
        design("c1-as", 1, &[As, En], &["নগৰ 25 কিমি", "NAGAR 25 KM"], None),
        design("c2-en", 2, &[En], &["AIRPORT"], Some(Direction::Left)),
        design("c2-hi", 2, &[Hi], &["महल"], Some(Direction::Right)),
        design("c2-as", 2, &[As], &["মহল"], Some(Direction::Straight)),
        design("c3-en", 3, &[En], &["KAZIRANGA"], None),
        design("c3-hi", 3, &[Hi], &["पटना"], None),
        design("c3-as", 3, &[As], &["নলবাৰী"], None),
        design("c4-en", 4, &[En], &["DRIVE SLOW", "SCHOOL AHEAD"], None),
        design("c4-hi", 4, &[Hi], &["सावधान"], None),
        design("c4-as", 4, &[As], &["সাবধান"], None),
    ]
}

/// Render a panel centered in a gray frame. Returns the RGB frame and one
/// region per line whose box is the exact ink box of that line.
pub fn render_panel(design: &PanelDesign, noise: Option<Noise>) -> Result<(RasterImage, Vec<GroundTruthRegion>), SynthError> {
    let atlas = GlyphAtlas::builtin();
    let style = RenderStyle { scale: TEXT_SCALE, margin: 0, ..RenderStyle::default() };
    let lines = design
        .lines
        .iter()
        .map(|line| render_text(atlas, line, style))
        .collect::<Result<Vec<_>, _>>()?;

    let text_w = lines.iter().map(|l| l.image.width()).max().unwrap_or(0);
    let text_h: u32 = lines.iter().map(|l| l.image.height()).sum::<u32>() + LINE_GAP * (lines.len() as u32).saturating_sub(1);
    let board_w = text_w + 2 * BOARD_PAD_X;
    let board_h = text_h + 2 * BOARD_PAD_Y;
    if board_w > FRAME_WIDTH || board_h > FRAME_HEIGHT {
        return Err(SynthError::TooLarge(design.id.clone()));
    }
    let board = BBox::new((FRAME_WIDTH - board_w) / 2, (FRAME_HEIGHT - board_h) / 2, board_w, board_h);

    let mut img = RasterImage::filled(FRAME_WIDTH, FRAME_HEIGHT, &BACKGROUND)?;
    for y in board.y..board.bottom() {
        for x in board.x..board.right() {
            img.set_pixel(x, y, &design.board);
        }
    }

    let mut regions = Vec::new();
    let mut top = board.y + BOARD_PAD_Y;
    for (order, (text, line)) in design.lines.iter().zip(&lines).enumerate() {
        let left = board.x + (board_w - line.image.width()) / 2;
        for y in 0..line.image.height() {
            for x in 0..line.image.width() {
                if line.image.pixel(x, y)[0] != 0 {
                    img.set_pixel(left + x, top + y, &design.ink);
                }
            }
        }
        if let Some(ink) = line.ink {
            regions.push(GroundTruthRegion {
                bbox: ink.translate(left, top),
                transcript: text.clone(),
                script: identify_script(text),
                reading_order: order as u32,
                direction: design.direction,
            });
        }
        top += line.image.height() + LINE_GAP;
    }

    if let Some(noise) = noise {
        degrade(&mut img, noise);
    }
    Ok((img, regions))
}

/// Apply [`Noise`] to an RGB image in place.
pub fn degrade(img: &mut RasterImage, noise: Noise) {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let amp = i16::from(noise.luminance);
    for px in img.data_mut().chunks_exact_mut(3) {
        if rng.gen_bool(noise.impulse_rate) {
            px.fill(if rng.gen_bool(0.5) { 255 } else { 0 });
            continue;
        }
        let shift = rng.gen_range(-amp..=amp);
        for c in px.iter_mut() {
            *c = (i16::from(*c) + shift).clamp(0, 255) as u8;
        }
    }
}

fn record_for(design: &PanelDesign, id: String, image: PathBuf, regions: Vec<GroundTruthRegion>, note: &str) -> PanelRecord {
    PanelRecord {
        id,
        image_path: image,
        category: design.category,
        languages: design.languages.iter().copied().collect(),
        source: Source::Photograph,
        capture_note: Some(note.to_string()),
        regions,
    }
}

/// Write the standard panels under `dir` as `images/<id>.png` plus
/// `manifest.json`. With `noisy`, a degraded copy of every panel is added
/// (`<id>-noisy`), seeded by its position.
pub fn write_corpus(dir: impl AsRef<Path>, noisy: bool) -> Result<Corpus, SynthError> {
    let dir = dir.as_ref();
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|source| SynthError::Io { path: images.clone(), source })?;
    let mut records = Vec::new();
    let mut variants: Vec<(PanelDesign, Option<Noise>)> =
        standard_designs().into_iter().map(|d| (d, None)).collect();
    if noisy {
        let degraded: Vec<_> = standard_designs()
            .into_iter()
            .enumerate()
            .map(|(i, d)| (d, Some(Noise::standard(i as u64 + 1))))
            .collect();
        variants.extend(degraded);
    }
    for (design, noise) in &variants {
        let id = match noise {
            Some(_) => format!("{}-noisy", design.id),
            None => design.id.clone(),
        };
        let (img, regions) = render_panel(design, *noise)?;
        let rel = PathBuf::from("images").join(format!("{id}.png"));
        img.save(dir.join(&rel))?;
        let note = if noise.is_some() { "synthetic render, noisy" } else { "synthetic render" };
        records.push(record_for(design, id, rel, regions, note));
    }
    let corpus = Corpus::new(records);
    save_manifest(&corpus, dir.join("manifest.json"))?;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recognizer::script::ScriptTag;

    #[test]
    fn designs_cover_categories_and_languages() {
        let designs = standard_designs();
        assert_eq!(designs.len(), 12);
        for cat in 1..=4 {
            let n = designs.iter().filter(|d| d.category.number() == cat).count();
            assert_eq!(n, 3);
        }
        let atlas = GlyphAtlas::builtin();
        assert!(designs.iter().all(|d| d.lines.iter().all(|l| atlas.covers(l))));
    }

    #[test]
    fn regions_are_ink_boxes_on_the_board() {
        let d = &standard_designs()[1];
        let (img, regions) = render_panel(d, None).unwrap();
        assert_eq!((img.width(), img.height()), (FRAME_WIDTH, FRAME_HEIGHT));
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0].script, ScriptTag::Devanagari);
        assert_eq!(regions[1].script, ScriptTag::Latin);
        assert!(regions[0].bbox.bottom() < regions[1].bbox.y);
        for r in &regions {
            // Every edge row and column of the box carries ink.
            let b = r.bbox;
            let ink = |x, y| img.pixel(x, y) == WHITE;
            assert!((b.x..b.right()).any(|x| ink(x, b.y)));
            assert!((b.x..b.right()).any(|x| ink(x, b.bottom() - 1)));
            assert!((b.y..b.bottom()).any(|y| ink(b.x, y)));
            assert!((b.y..b.bottom()).any(|y| ink(b.right() - 1, y)));
        }
    }

    #[test]
    fn noise_is_seeded() {
        let d = &standard_designs()[0];
        let a = render_panel(d, Some(Noise::standard(3))).unwrap().0;
        let b = render_panel(d, Some(Noise::standard(3))).unwrap().0;
        let c = render_panel(d, Some(Noise::standard(4))).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn luminance_noise_keeps_gray_gray() {
        let mut img = RasterImage::filled(50, 50, &BACKGROUND).unwrap();
        degrade(&mut img, Noise { luminance: 30, impulse_rate: 0.0, seed: 9 });
        for px in img.data().chunks_exact(3) {
            assert!(px[0] == px[1] && px[1] == px[2]);
            assert!((98..=158).contains(&px[0]));
        }
    }
}
