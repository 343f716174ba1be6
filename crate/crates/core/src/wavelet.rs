//! Orthonormal 2×2 Haar pooling and unpooling.
//!
//! For each non-overlapping block `[[a, b], [c, d]]`:
//!
//! ```text
//! ll = (a + b + c + d) / 2
//! lh = (a + b - c - d) / 2
//! hl = (a - b + c - d) / 2
//! hh = (a - b - c + d) / 2
//! ```
//!
//! The four kernels form an orthonormal basis of the block, so unpooling is the
//! transpose of pooling and the transform preserves energy.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// The four sub-bands produced by one pooling step. `ll` is the low-frequency
/// band; `lh`, `hl` and `hh` carry the detail.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBands {
    pub ll: Tensor,
    pub lh: Tensor,
    pub hl: Tensor,
    pub hh: Tensor,
}

impl WaveletBands {
    pub fn shape(&self) -> (usize, usize, usize) {
        self.ll.shape()
    }

    pub fn energy(&self) -> f64 {
        self.ll.energy() + self.lh.energy() + self.hl.energy() + self.hh.energy()
    }
}

pub fn haar_pool(x: &Tensor) -> Result<WaveletBands> {
    let (c, h, w) = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddDimensions { h, w });
    }
    let (oh, ow) = (h / 2, w / 2);
    let plane = oh * ow;

    let per_channel: Vec<[Vec<f64>; 4]> = (0..c)
        .into_par_iter()
        .map(|ch| {
            let src = x.channel(ch);
            let mut bands = [
                vec![0.0; plane],
                vec![0.0; plane],
                vec![0.0; plane],
                vec![0.0; plane],
            ];
            for y in 0..oh {
                let top = &src[2 * y * w..(2 * y + 1) * w];
                let bottom = &src[(2 * y + 1) * w..(2 * y + 2) * w];
                for xo in 0..ow {
                    let (a, b) = (top[2 * xo], top[2 * xo + 1]);
                    let (cc, d) = (bottom[2 * xo], bottom[2 * xo + 1]);
                    let i = y * ow + xo;
                    bands[0][i] = 0.5 * (a + b + cc + d);
                    bands[1][i] = 0.5 * (a + b - cc - d);
                    bands[2][i] = 0.5 * (a - b + cc - d);
                    bands[3][i] = 0.5 * (a - b - cc + d);
                }
            }
            bands
        })
        .collect();

    let mut out: [Vec<f64>; 4] = Default::default();
    for bands in per_channel {
        for (dst, src) in out.iter_mut().zip(bands) {
            dst.extend(src);
        }
    }
    let [ll, lh, hl, hh] = out;
    Ok(WaveletBands {
        ll: Tensor::from_parts_unchecked(c, oh, ow, ll),
        lh: Tensor::from_parts_unchecked(c, oh, ow, lh),
        hl: Tensor::from_parts_unchecked(c, oh, ow, hl),
        hh: Tensor::from_parts_unchecked(c, oh, ow, hh),
    })
}

pub fn haar_unpool(b: &WaveletBands) -> Result<Tensor> {
    let shape = b.ll.shape();
    for (name, band) in [("lh", &b.lh), ("hl", &b.hl), ("hh", &b.hh)] {
        if band.shape() != shape {
            return Err(Error::ShapeMismatch(format!(
                "band {name} has shape {:?}, ll has {:?}",
                band.shape(),
                shape
            )));
        }
    }
    let (c, oh, ow) = shape;
    let (h, w) = (2 * oh, 2 * ow);

    let data: Vec<f64> = (0..c)
        .into_par_iter()
        .flat_map_iter(|ch| {
            let (ll, lh, hl, hh) = (b.ll.channel(ch), b.lh.channel(ch), b.hl.channel(ch), b.hh.channel(ch));
            let mut out = vec![0.0; h * w];
            for y in 0..oh {
                for xo in 0..ow {
                    let i = y * ow + xo;
                    let (s, v, u, d) = (ll[i], lh[i], hl[i], hh[i]);
                    out[2 * y * w + 2 * xo] = 0.5 * (s + v + u + d);
                    out[2 * y * w + 2 * xo + 1] = 0.5 * (s + v - u - d);
                    out[(2 * y + 1) * w + 2 * xo] = 0.5 * (s - v + u - d);
                    out[(2 * y + 1) * w + 2 * xo + 1] = 0.5 * (s - v - u + d);
                }
            }
            out
        })
        .collect();
    Ok(Tensor::from_parts_unchecked(c, h, w, data))
}

/// Pads the bottom and right edges by replicating the last row/column until
/// both dimensions are multiples of `multiple`. Returns the padded tensor and
/// the original `(h, w)` for cropping.
pub fn pad_symmetric(x: &Tensor, multiple: usize) -> Result<(Tensor, (usize, usize))> {
    if multiple == 0 || !multiple.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("pad multiple {multiple} is not a power of two")));
    }
    let (c, h, w) = x.shape();
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::Empty("cannot pad an empty tensor"));
    }
    let ph = h.div_ceil(multiple) * multiple;
    let pw = w.div_ceil(multiple) * multiple;
    if (ph, pw) == (h, w) {
        return Ok((x.clone(), (h, w)));
    }
    let padded = Tensor::from_fn(c, ph, pw, |ch, y, xx| x.get(ch, y.min(h - 1), xx.min(w - 1)));
    Ok((padded, (h, w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_tensor(c: usize, h: usize, w: usize, seed: u64) -> Tensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn constant_image_has_no_detail() {
        let x = Tensor::filled(2, 4, 6, 0.3);
        let b = haar_pool(&x).unwrap();
        assert!(b.ll.data().iter().all(|&v| (v - 0.6).abs() < 1e-15));
        for band in [&b.lh, &b.hl, &b.hh] {
            assert!(band.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_block_by_hand() {
        let x = Tensor::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = haar_pool(&x).unwrap();
        assert_eq!(b.ll.data(), &[5.0]);
        assert_eq!(b.lh.data(), &[-2.0]);
        assert_eq!(b.hl.data(), &[-1.0]);
        assert_eq!(b.hh.data(), &[0.0]);
    }

    #[test]
    fn odd_size_is_rejected() {
        assert!(matches!(
            haar_pool(&Tensor::zeros(1, 3, 4)),
            Err(Error::OddDimensions { h: 3, w: 4 })
        ));
    }

    #[test]
    fn energy_identity_on_8x8() {
        let x = random_tensor(1, 8, 8, 1);
        let b = haar_pool(&x).unwrap();
        assert!((x.energy() - b.energy()).abs() <= 1e-12 * x.energy().max(1.0));
    }

    #[test]
    fn unpool_constant_bands() {
        let v = 0.4;
        let bands = WaveletBands {
            ll: Tensor::filled(1, 3, 2, 2.0 * v),
            lh: Tensor::zeros(1, 3, 2),
            hl: Tensor::zeros(1, 3, 2),
            hh: Tensor::zeros(1, 3, 2),
        };
        let x = haar_unpool(&bands).unwrap();
        assert_eq!(x.shape(), (1, 6, 4));
        assert!(x.data().iter().all(|&p| (p - v).abs() < 1e-15));
    }

    #[test]
    fn unpool_rejects_mismatched_bands() {
        let bands = WaveletBands {
            ll: Tensor::zeros(1, 2, 2),
            lh: Tensor::zeros(1, 2, 2),
            hl: Tensor::zeros(1, 2, 3),
            hh: Tensor::zeros(1, 2, 2),
        };
        assert!(matches!(haar_unpool(&bands), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn padding() {
        let x = random_tensor(1, 64, 64, 2);
        let (p, orig) = pad_symmetric(&x, 4).unwrap();
        assert_eq!(p, x);
        assert_eq!(orig, (64, 64));

        let x = random_tensor(1, 5, 8, 3);
        let (p, orig) = pad_symmetric(&x, 2).unwrap();
        assert_eq!(p.shape(), (1, 6, 8));
        for col in 0..8 {
            assert_eq!(p.get(0, 5, col), x.get(0, 4, col));
        }
        assert_eq!(p.crop(orig.0, orig.1), x);

        assert!(pad_symmetric(&x, 3).is_err());
        assert!(matches!(pad_symmetric(&Tensor::zeros(1, 0, 0), 2), Err(Error::Empty(_))));
    }

    proptest! {
        #[test]
        fn perfect_reconstruction(c in 1usize..4, hh in 1usize..10, ww in 1usize..10, seed in any::<u64>()) {
            let x = random_tensor(c, 2 * hh, 2 * ww, seed);
            let b = haar_pool(&x).unwrap();
            prop_assert!(haar_unpool(&b).unwrap().max_abs_diff(&x) <= 1e-10);
            prop_assert!((x.energy() - b.energy()).abs() <= 1e-12 * x.energy().max(1.0));
        }

        #[test]
        fn linearity(seed in any::<u64>(), a in -3.0f64..3.0, bcoef in -3.0f64..3.0) {
            let x = random_tensor(2, 6, 4, seed);
            let y = random_tensor(2, 6, 4, seed.wrapping_add(1));
            let combo = Tensor::from_fn(2, 6, 4, |c, r, q| a * x.get(c, r, q) + bcoef * y.get(c, r, q));
            let (px, py, pc) = (haar_pool(&x).unwrap(), haar_pool(&y).unwrap(), haar_pool(&combo).unwrap());
            for (bx, by, bc) in [(&px.ll, &py.ll, &pc.ll), (&px.lh, &py.lh, &pc.lh), (&px.hl, &py.hl, &pc.hl), (&px.hh, &py.hh, &pc.hh)] {
                for i in 0..bc.len() {
                    prop_assert!((bc.data()[i] - (a * bx.data()[i] + bcoef * by.data()[i])).abs() < 1e-12);
                }
            }
        }
    }
}
