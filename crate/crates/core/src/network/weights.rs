//! `WTS1` weight files.
//!
//! Layout: the 4 magic bytes `WTS1`, a little-endian `u32` header length, a
//! UTF-8 header with one record per line (`name out in kh kw bias_len`), then
//! every record's kernel followed by its bias as little-endian `f32`, in
//! header order.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WTS1";

/// Kernel of shape `(out, in, kh, kw)` plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvWeights {
    pub fn new(out_ch: usize, in_ch: usize, kh: usize, kw: usize, kernel: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if kernel.len() != out_ch * in_ch * kh * kw || bias.len() != out_ch {
            return Err(Error::ShapeMismatch(format!(
                "conv weights {out_ch}x{in_ch}x{kh}x{kw} got {} kernel values and {} biases",
                kernel.len(),
                bias.len()
            )));
        }
        if kernel.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ConvWeights {
            out_ch,
            in_ch,
            kh,
            kw,
            kernel,
            bias,
        })
    }

    /// `n`-channel 1×1 identity convolution.
    pub fn identity(n: usize) -> Self {
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            kernel[i * n + i] = 1.0;
        }
        ConvWeights {
            out_ch: n,
            in_ch: n,
            kh: 1,
            kw: 1,
            kernel,
            bias: vec![0.0; n],
        }
    }

    #[inline]
    pub fn at(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.kernel[((o * self.in_ch + i) * self.kh + ky) * self.kw + kx]
    }
}

/// Conv parameters keyed by layer name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    pub layers: BTreeMap<String, ConvWeights>,
}

impl WeightStore {
    pub fn get(&self, name: &str) -> Option<&ConvWeights> {
        self.layers.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, w: ConvWeights) {
        self.layers.insert(name.into(), w);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = String::new();
        for (name, w) in &self.layers {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::WeightFormat(format!("layer name {name:?} must be non-empty without whitespace")));
            }
            header.push_str(&format!("{name} {} {} {} {} {}\n", w.out_ch, w.in_ch, w.kh, w.kw, w.bias.len()));
        }
        let mut out = Vec::with_capacity(8 + header.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for w in self.layers.values() {
            for v in w.kernel.iter().chain(&w.bias) {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::WeightFormat("bad magic, expected WTS1".into()));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header = bytes
            .get(8..8 + hlen)
            .ok_or_else(|| Error::Truncated(format!("header declares {hlen} bytes, file has {}", bytes.len() - 8)))?;
        let header = std::str::from_utf8(header).map_err(|e| Error::WeightFormat(format!("header is not UTF-8: {e}")))?;

        let mut records = Vec::new();
        for line in header.lines().filter(|l| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 6 {
                return Err(Error::WeightFormat(format!("malformed header record {line:?}")));
            }
            let nums: Vec<usize> = parts[1..]
                .iter()
                .map(|p| p.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::WeightFormat(format!("bad number in record {line:?}: {e}")))?;
            records.push((parts[0].to_string(), nums));
        }

        let declared: usize = records.iter().map(|(_, n)| n[0] * n[1] * n[2] * n[3] + n[4]).sum();
        let blob = &bytes[8 + hlen..];
        if blob.len() % 4 != 0 {
            return Err(Error::WeightFormat(format!("blob length {} is not a multiple of 4", blob.len())));
        }
        let available = blob.len() / 4;
        if available < declared {
            return Err(Error::Truncated(format!("header declares {declared} floats, blob has {available}")));
        }
        if available > declared {
            return Err(Error::WeightFormat(format!(
                "header declares {declared} floats, blob has {available} (trailing data)"
            )));
        }

        let mut floats = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let mut store = WeightStore::default();
        for (name, n) in records {
            let kernel: Vec<f64> = floats.by_ref().take(n[0] * n[1] * n[2] * n[3]).collect();
            let bias: Vec<f64> = floats.by_ref().take(n[4]).collect();
            let w = ConvWeights::new(n[0], n[1], n[2], n[3], kernel, bias)?;
            if store.layers.insert(name.clone(), w).is_some() {
                return Err(Error::WeightFormat(format!("duplicate layer {name}")));
            }
        }
        Ok(store)
    }
}

pub fn save_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, store.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    WeightStore::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_store() -> WeightStore {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut store = WeightStore::default();
        for (name, o, i, k) in [("enc0_conv0", 4, 1, 3), ("dec0_conv0", 1, 4, 3), ("mid", 4, 4, 1)] {
            let kernel = (0..o * i * k * k).map(|_| rng.random::<f32>() as f64 - 0.5).collect();
            let bias = (0..o).map(|_| rng.random::<f32>() as f64).collect();
            store.insert(name, ConvWeights::new(o, i, k, k, kernel, bias).unwrap());
        }
        store
    }

    #[test]
    fn round_trip() {
        let store = random_store();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.wts");
        save_weights(&store, &p).unwrap();
        assert_eq!(load_weights(&p).unwrap(), store);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = random_store().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(WeightStore::from_bytes(&bytes), Err(Error::WeightFormat(_))));
    }

    #[test]
    fn truncated_blob() {
        let mut store = WeightStore::default();
        store.insert("c", ConvWeights::new(1, 1, 3, 3, vec![0.5; 9], vec![0.0]).unwrap());
        // 9 kernel floats + 1 bias; drop the bias and one kernel value.
        let mut bytes = store.to_bytes().unwrap();
        bytes.truncate(bytes.len() - 8);
        let err = WeightStore::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::Truncated(_)), "{err:?}");
        assert!(err.to_string().contains("10 floats, blob has 8"));
    }

    #[test]
    fn nine_declared_eight_present() {
        let header = "k 1 1 3 3 0\n";
        let mut bytes = b"WTS1".to_vec();
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        for _ in 0..8 {
            bytes.extend_from_slice(&1.0f32.to_le_bytes());
        }
        let err = WeightStore::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("9 floats, blob has 8"), "{err}");
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_weights("/no/such/weights.wts"), Err(Error::MissingFile(_))));
    }
}
