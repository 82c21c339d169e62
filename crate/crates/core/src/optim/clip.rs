use crate::matlin::{fro_norm, Mat};

/// Rescales `c` onto the Frobenius ball of radius `threshold` when it lies
/// outside; identity otherwise.
///
/// # Panics
/// If `threshold` is not positive.
pub fn clip_fro(c: &Mat, threshold: f64) -> Mat {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let norm = fro_norm(c);
    if norm > threshold {
        let mut out = c.scale(threshold / norm);
        // Rounding can leave the norm a few ulps above the threshold.
        let mut shrink = 1.0;
        while fro_norm(&out) > threshold {
            shrink *= 1.0 - 4.0 * f64::EPSILON;
            out = c.scale(shrink * threshold / norm);
        }
        out
    } else {
        c.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clips_above_threshold() {
        let c = Mat::from_rows(&[&[2.0, 0.0], &[0.0, 0.0]]).unwrap();
        assert_eq!(clip_fro(&c, 1.0), Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap());
    }

    #[test]
    fn leaves_small_inputs_alone() {
        let c = Mat::from_rows(&[&[0.3, 0.4]]).unwrap();
        assert_eq!(clip_fro(&c, 1.0), c);
        let z = Mat::zeros(3, 3);
        assert_eq!(clip_fro(&z, 0.5), z);
    }

    proptest! {
        #[test]
        fn norm_never_exceeds_threshold(
            data in proptest::collection::vec(-1e6f64..1e6, 6),
            tau in 1e-3f64..1e3,
        ) {
            let c = Mat::new(2, 3, data).unwrap();
            let out = clip_fro(&c, tau);
            prop_assert!(fro_norm(&out) <= tau + 1e-15);
            if fro_norm(&c) <= tau {
                prop_assert_eq!(out, c);
            }
        }
    }
}
