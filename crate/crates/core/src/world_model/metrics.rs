//! Frame fidelity metrics.

use crate::toyworld::Frame;

pub const PSNR_CAP_DB: f64 = 99.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_STRIDE: usize = 4;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

pub fn mse(a: &Frame, b: &Frame) -> f64 {
    let n = a.pixels().len() as f64;
    a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

/// Mean absolute pixel difference.
pub fn l1(a: &Frame, b: &Frame) -> f64 {
    let n = a.pixels().len() as f64;
    a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / n
}

/// `10 log10(1 / mse)` for unit dynamic range, capped at 99 dB (which also
/// covers `mse < 1e-10`, including exact matches).
pub fn psnr_db(mse: f64) -> f64 {
    if mse < 1e-10 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Mean SSIM over uniform 8x8 windows placed with stride 4, with
/// `C1 = (0.01)^2`, `C2 = (0.03)^2` (dynamic range 1) and population
/// statistics inside each window.
pub fn ssim(a: &Frame, b: &Frame) -> f64 {
    let size = a.size();
    let win = SSIM_WINDOW.min(size);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = (win * win) as f64;
    let starts: Vec<usize> = (0..=size - win).step_by(SSIM_STRIDE).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for &y0 in &starts {
        for &x0 in &starts {
            let (mut sa, mut sb) = (0.0, 0.0);
            for y in y0..y0 + win {
                for x in x0..x0 + win {
                    sa += a.get(x, y);
                    sb += b.get(x, y);
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for y in y0..y0 + win {
                for x in x0..x0 + win {
                    let (da, db) = (a.get(x, y) - ma, b.get(x, y) - mb);
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            }
            let (va, vb, cov) = (va / n, vb / n, cov / n);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_frames() {
        let f = Frame::from_pixels(16, (0..256).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap();
        assert_eq!(mse(&f, &f), 0.0);
        assert_eq!(psnr_db(0.0), 99.0);
        assert!((ssim(&f, &f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_versus_half_gray() {
        let z = Frame::zeros(16);
        let g = Frame::filled(16, 0.5);
        let m = mse(&z, &g);
        assert_eq!(m, 0.25);
        assert!((psnr_db(m) - 6.0206).abs() < 1e-4);
        assert_eq!(l1(&z, &g), 0.5);
    }

    #[test]
    fn psnr_cap() {
        assert_eq!(psnr_db(1e-11), 99.0);
        assert!(psnr_db(1.1e-10) <= 99.0);
        assert!((psnr_db(0.01) - 20.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ssim_is_bounded(
            a in proptest::collection::vec(0.0f64..=1.0, 256),
            b in proptest::collection::vec(0.0f64..=1.0, 256),
        ) {
            let fa = Frame::from_pixels(16, a).unwrap();
            let fb = Frame::from_pixels(16, b).unwrap();
            let s = ssim(&fa, &fb);
            prop_assert!(s.is_finite() && (-1.0..=1.0 + 1e-12).contains(&s));
            prop_assert!((s - ssim(&fb, &fa)).abs() < 1e-12);
        }
    }
}
