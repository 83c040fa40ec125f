//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;

use num_bigint::BigInt;
use panelvoice::raster::{Connectivity, RasterImage};

/// Otsu by brute force: for every threshold, the between-class variance
/// `w0 w1 (mu0 - mu1)^2` straight from the pixels, compared as exact
/// fractions. Ties go to the smallest threshold; a single-valued image gives
/// its value.
pub fn otsu_oracle(img: &RasterImage) -> u8 {
    let pixels = img.data();
    let first = pixels[0];
    if pixels.iter().all(|&p| p == first) {
        return first;
    }
    let total = BigInt::from(pixels.len());
    // (numerator, denominator) of sigma^2, both positive
    let mut best: Option<(u8, BigInt, BigInt)> = None;
    for t in 0..=255u8 {
        let (mut n0, mut s0, mut n1, mut s1) = (0u64, 0u64, 0u64, 0u64);
        for &p in pixels {
            if p <= t {
                n0 += 1;
                s0 += u64::from(p);
            } else {
                n1 += 1;
                s1 += u64::from(p);
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        // w0 w1 (s0/n0 - s1/n1)^2 = (s0 n1 - s1 n0)^2 / (N^2 n0 n1)
        let d = BigInt::from(s0) * BigInt::from(n1) - BigInt::from(s1) * BigInt::from(n0);
        let num = &d * &d;
        let den = &total * &total * BigInt::from(n0) * BigInt::from(n1);
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => (&num * bd).cmp(&(bn * &den)) == Ordering::Greater,
        };
        if better {
            best = Some((t, num, den));
        }
    }
    best.expect("two distinct values give a valid split").0
}

/// Levenshtein distance by plain recursion, no memo.
pub fn edit_distance_oracle(a: &[char], b: &[char]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let replace = edit_distance_oracle(ra, rb) + usize::from(x != y);
            let delete = edit_distance_oracle(ra, b) + 1;
            let insert = edit_distance_oracle(a, rb) + 1;
            replace.min(delete).min(insert)
        }
    }
}

fn neighbours(c: Connectivity) -> &'static [(i64, i64)] {
    match c {
        Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    }
}

/// Checks that a label map partitions the foreground of `img` into the
/// connected components listed in `areas` (label `i + 1` has `areas[i]`
/// pixels). Returns a description of the first violation.
pub fn check_partition(img: &RasterImage, labels: &[u32], areas: &[u64], c: Connectivity) -> Result<(), String> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let fg = |x: i64, y: i64| img.data()[(y * w + x) as usize] != 0;
    let foreground = img.data().iter().filter(|&&v| v != 0).count() as u64;
    if areas.iter().sum::<u64>() != foreground {
        return Err(format!("areas sum to {} but foreground is {foreground}", areas.iter().sum::<u64>()));
    }
    let mut counted = vec![0u64; areas.len()];
    let mut first_seen = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels[(y * w + x) as usize];
            if fg(x, y) != (l != 0) {
                return Err(format!("({x},{y}) labelled {l} but foreground={}", fg(x, y)));
            }
            if l == 0 {
                continue;
            }
            if l as usize > areas.len() {
                return Err(format!("label {l} out of range"));
            }
            if counted[l as usize - 1] == 0 {
                first_seen.push(l);
            }
            counted[l as usize - 1] += 1;
            for &(dx, dy) in neighbours(c) {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w && ny < h && fg(nx, ny) && labels[(ny * w + nx) as usize] != l {
                    return Err(format!("adjacent pixels ({x},{y}) and ({nx},{ny}) in different components"));
                }
            }
        }
    }
    if counted != areas {
        return Err("per-label pixel counts differ from areas".into());
    }
    if !first_seen.iter().enumerate().all(|(i, &l)| l as usize == i + 1) {
        return Err("labels not in first-encounter raster order".into());
    }
    // Each label is a single connected piece.
    for label in 1..=areas.len() as u32 {
        let start = labels.iter().position(|&l| l == label).unwrap() as i64;
        let mut seen = vec![false; labels.len()];
        let mut stack = vec![(start % w, start / w)];
        seen[start as usize] = true;
        let mut reached = 0u64;
        while let Some((x, y)) = stack.pop() {
            reached += 1;
            for &(dx, dy) in neighbours(c) {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w && ny < h {
                    let j = (ny * w + nx) as usize;
                    if !seen[j] && labels[j] == label {
                        seen[j] = true;
                        stack.push((nx, ny));
                    }
                }
            }
        }
        if reached != areas[label as usize - 1] {
            return Err(format!("label {label} is not connected"));
        }
    }
    Ok(())
}

/// Intersection over union, computed pixel by pixel.
pub fn iou_by_pixels(a: panelvoice::geometry::BBox, b: panelvoice::geometry::BBox) -> f64 {
    let inside = |r: panelvoice::geometry::BBox, x: u32, y: u32| x >= r.x && x < r.right() && y >= r.y && y < r.bottom();
    let (x0, y0) = (a.x.min(b.x), a.y.min(b.y));
    let (x1, y1) = (a.right().max(b.right()), a.bottom().max(b.bottom()));
    let (mut inter, mut union) = (0u64, 0u64);
    for y in y0..y1 {
        for x in x0..x1 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
