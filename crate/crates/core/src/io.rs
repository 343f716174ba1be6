//! 8-bit PNG and binary PGM (P5) reading and writing.

use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Loads an 8-bit grayscale or RGB image, scaling bytes to `[0, 1]`.
///
/// Grayscale images give one channel, RGB images three. An alpha channel, if
/// present, is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut head = Vec::with_capacity(16);
    File::open(path)
        .and_then(|f| f.take(16).read_to_end(&mut head))
        .map_err(|e| Error::io(path, e))?;
    match image::guess_format(&head) {
        Ok(ImageFormat::Png) | Ok(ImageFormat::Pnm) => {}
        Ok(other) => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("{other:?}"),
            })
        }
        Err(_) => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: "unrecognized signature".into(),
            })
        }
    }
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: u.to_string(),
        },
        other => Error::CorruptImage {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;

    let (w, h) = (img.width() as usize, img.height() as usize);
    let scale = |b: u8| b as f64 / 255.0;
    match img {
        DynamicImage::ImageLuma8(buf) => Tensor::new(1, h, w, buf.into_raw().into_iter().map(scale).collect()),
        DynamicImage::ImageLumaA8(_) => {
            let buf = img.to_luma8();
            Tensor::new(1, h, w, buf.into_raw().into_iter().map(scale).collect())
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            let raw = img.to_rgb8().into_raw();
            let n = h * w;
            let mut data = vec![0.0; 3 * n];
            for (i, px) in raw.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[c * n + i] = scale(px[c]);
                }
            }
            Tensor::new(3, h, w, data)
        }
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("{:?} is not an 8-bit grayscale or RGB layout", other.color()),
        }),
    }
}

/// Clamp to `[0,1]` and quantize with round-half-up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes `t` as PNG or binary PGM depending on the file extension.
pub fn save_image(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (c, h, w) = t.shape();
    if c != 1 && c != 3 {
        return Err(Error::UnsupportedChannels(c));
    }
    let n = h * w;
    let mut bytes = vec![0u8; c * n];
    for ch in 0..c {
        for (i, &v) in t.channel(ch).iter().enumerate() {
            bytes[i * c + ch] = quantize(v);
        }
    }
    let color = if c == 1 { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };

    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let writer = BufWriter::new(file);
    let result = match ext.as_str() {
        "png" => PngEncoder::new(writer).write_image(&bytes, w as u32, h as u32, color),
        "pgm" if c == 1 => PnmEncoder::new(writer)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&bytes, w as u32, h as u32, color),
        "pgm" => return Err(Error::UnsupportedChannels(c)),
        _ => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: "output extension must be .png or .pgm".into(),
            })
        }
    };
    result.map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::CorruptImage {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loads_tiny_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 128, 64]);
        std::fs::write(&p, bytes).unwrap();
        let t = load_image(&p).unwrap();
        assert_eq!(t.shape(), (1, 2, 2));
        assert_eq!(t.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_image("/nonexistent/img.png").unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
        assert!(err.to_string().contains("/nonexistent/img.png"));
    }

    #[test]
    fn unsupported_and_corrupt_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let txt = dir.path().join("x.png");
        std::fs::write(&txt, b"hello, not an image").unwrap();
        assert!(matches!(load_image(&txt), Err(Error::UnsupportedFormat { .. })));

        let bad = dir.path().join("bad.png");
        let mut bytes = b"\x89PNG\r\n\x1a\n".to_vec();
        bytes.extend_from_slice(&[0, 0, 0, 13, b'I', b'H', b'D', b'R', 1, 2]);
        std::fs::write(&bad, bytes).unwrap();
        let err = load_image(&bad).unwrap_err();
        assert!(matches!(err, Error::CorruptImage { .. }), "{err:?}");
    }

    #[test]
    fn quantizer() {
        assert_eq!(quantize(1.2), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(-0.1), 0);
    }

    #[test]
    fn rejects_four_channels() {
        let dir = tempfile::tempdir().unwrap();
        let err = save_image(&Tensor::zeros(4, 2, 2), dir.path().join("x.png")).unwrap_err();
        assert!(matches!(err, Error::UnsupportedChannels(4)));
    }

    #[test]
    fn eight_bit_round_trip_png_and_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (c, name) in [(1, "g.png"), (3, "rgb.png"), (1, "g.pgm")] {
            let t = Tensor::from_fn(c, 9, 13, |_, _, _| rng.random_range(0..=255u8) as f64 / 255.0);
            let p = dir.path().join(name);
            save_image(&t, &p).unwrap();
            let once = load_image(&p).unwrap();
            assert_eq!(once, t, "{name}");
            save_image(&once, &p).unwrap();
            assert_eq!(load_image(&p).unwrap(), once);
        }
    }

    #[test]
    fn round_trip_idempotent_after_first_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = Tensor::from_fn(1, 5, 5, |_, _, _| rng.random_range(-0.2..1.2));
        let p = dir.path().join("q.png");
        save_image(&t, &p).unwrap();
        let a = load_image(&p).unwrap();
        save_image(&a, &p).unwrap();
        assert_eq!(load_image(&p).unwrap(), a);
    }
}
