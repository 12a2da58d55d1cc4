//! Fixed clean-up of generated images: the top eight and bottom six rows are
//! cleared. Used for display and evaluation only, never inside a loss.

use std::ops::RangeInclusive;

use crate::image::{ImageTensor, SIDE};

pub const ZEROED_ROWS: [RangeInclusive<usize>; 2] = [0..=7, 26..=31];

pub fn is_zeroed_row(row: usize) -> bool {
    ZEROED_ROWS.iter().any(|r| r.contains(&row))
}

pub fn post_process(image: &ImageTensor) -> ImageTensor {
    let mut out = image.clone();
    for r in (0..SIDE).filter(|r| is_zeroed_row(*r)) {
        for c in 0..SIDE {
            out.set(r, c, 0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_ones_keeps_eighteen_middle_rows() {
        let out = post_process(&ImageTensor::filled(1.0));
        for r in 0..SIDE {
            let expected = if (8..=25).contains(&r) { 1.0 } else { 0.0 };
            assert!(out.row(r).iter().all(|p| *p == expected), "row {r}");
        }
        assert_eq!(out.as_slice().iter().filter(|p| **p == 0.0).count(), 448);
    }

    #[test]
    fn zero_image_unchanged() {
        assert_eq!(post_process(&ImageTensor::zeros()), ImageTensor::zeros());
    }

    proptest! {
        #[test]
        fn idempotent_and_interior_preserved(px in proptest::collection::vec(0.0f64..=1.0, 1024)) {
            let img = ImageTensor::from_vec(px).unwrap();
            let once = post_process(&img);
            prop_assert_eq!(post_process(&once), once.clone());
            for r in 8..=25 {
                prop_assert_eq!(once.row(r), img.row(r));
            }
        }
    }
}
