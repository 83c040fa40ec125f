mod common;

use panelvoice::eval::{cer, edit_distance, iou, wer};
use panelvoice::geometry::BBox;
use panelvoice::raster::{label_components, otsu_threshold, Connectivity, RasterImage};
use proptest::prelude::*;

fn gray_image() -> impl Strategy<Value = RasterImage> {
    (1u32..=64, 1u32..=64, any::<u8>(), 1u8..=255).prop_flat_map(|(w, h, base, spread)| {
        proptest::collection::vec(0..=spread, (w * h) as usize).prop_map(move |noise| {
            let data = noise.into_iter().map(|n| base.wrapping_add(n)).collect();
            RasterImage::gray(w, h, data).unwrap()
        })
    })
}

fn binary_image() -> impl Strategy<Value = RasterImage> {
    (1u32..=32, 1u32..=32, 0.0f64..1.0).prop_flat_map(|(w, h, density)| {
        proptest::collection::vec(proptest::bool::weighted(density), (w * h) as usize)
            .prop_map(move |bits| RasterImage::gray(w, h, bits.into_iter().map(|b| if b { 255 } else { 0 }).collect()).unwrap())
    })
}

fn short_string() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'क', 'ি', ' ']), 0..=8)
        .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #[test]
    fn otsu_matches_exhaustive_scan(img in gray_image()) {
        prop_assert_eq!(otsu_threshold(&img).unwrap(), common::otsu_oracle(&img));
    }

    #[test]
    fn components_partition_foreground(img in binary_image()) {
        for c in [Connectivity::Four, Connectivity::Eight] {
            let (labels, comps) = label_components(&img, c);
            let areas: Vec<u64> = comps.iter().map(|k| k.area).collect();
            prop_assert!(comps.iter().enumerate().all(|(i, k)| k.label as usize == i + 1));
            if let Err(e) = common::check_partition(&img, &labels, &areas, c) {
                return Err(TestCaseError::fail(e));
            }
        }
    }

    #[test]
    fn edit_distance_matches_recursion(a in short_string(), b in short_string()) {
        let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        prop_assert_eq!(edit_distance(&a, &b), common::edit_distance_oracle(&ca, &cb));
    }

    #[test]
    fn edit_distance_is_a_metric(a in short_string(), b in short_string(), c in short_string()) {
        prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
        prop_assert_eq!(edit_distance(&a, &b) == 0, a == b);
        prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
    }

    #[test]
    fn iou_agrees_with_pixel_count(
        a in (0u32..40, 0u32..40, 1u32..30, 1u32..30),
        b in (0u32..40, 0u32..40, 1u32..30, 1u32..30),
    ) {
        let (a, b) = (BBox::new(a.0, a.1, a.2, a.3), BBox::new(b.0, b.1, b.2, b.3));
        prop_assert!((iou(&a, &b) - common::iou_by_pixels(a, b)).abs() < 1e-12);
    }
}

#[test]
fn worked_examples() {
    assert_eq!(edit_distance("kitten", "sitting"), 3);
    assert_eq!(cer("kitten", "sitting").unwrap(), 0.5);
    assert_eq!(cer("abc", "abc").unwrap(), 0.0);
    assert!((wer("drive slow ahead", "drive fast ahead").unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!(cer("", "x").is_err());
    assert!(wer("  ", "x").is_err());
    assert_eq!(cer("ab", "xxxxxx").unwrap(), 3.0);
}

#[test]
fn otsu_edge_cases() {
    let flat = RasterImage::gray(3, 3, vec![77; 9]).unwrap();
    assert_eq!(otsu_threshold(&flat).unwrap(), 77);
    let two = RasterImage::gray(2, 1, vec![10, 200]).unwrap();
    assert_eq!(otsu_threshold(&two).unwrap(), common::otsu_oracle(&two));
    assert_eq!(otsu_threshold(&two).unwrap(), 10);
}
