//! Datasets: MNIST IDX files, the synthetic parabola and image patches.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetTargets {
    Labels { classes: usize, labels: Vec<usize> },
    /// Row-major `len × dim`.
    Values { dim: usize, values: Vec<f64> },
}

/// Row-major inputs with per-row targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub inputs: Vec<f64>,
    pub targets: DatasetTargets,
}

/// An owned batch gathered from a dataset.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
    pub values: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.inputs.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn gather(&self, indices: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            match &self.targets {
                DatasetTargets::Labels { labels: l, .. } => labels.push(l[i]),
                DatasetTargets::Values { dim, values: v } => {
                    values.extend_from_slice(&v[i * dim..(i + 1) * dim])
                }
            }
        }
        Batch {
            inputs,
            labels,
            values,
        }
    }

    /// The first `n` rows (or all, if fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let batch = self.gather(indices);
        let targets = match &self.targets {
            DatasetTargets::Labels { classes, .. } => DatasetTargets::Labels {
                classes: *classes,
                labels: batch.labels,
            },
            DatasetTargets::Values { dim, .. } => DatasetTargets::Values {
                dim: *dim,
                values: batch.values,
            },
        };
        Dataset {
            dim: self.dim,
            inputs: batch.inputs,
            targets,
        }
    }
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Data {
            offset: bytes.len(),
            detail: format!("truncated header, expected 4 bytes at offset {offset}"),
        })
}

/// Parses an IDX3 image file into `(count, rows, cols, pixels in [0,1])`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Data {
            offset: 0,
            detail: format!("bad image magic {magic:#010x}"),
        });
    }
    let n = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    let need = 16 + n * rows * cols;
    if bytes.len() < need {
        return Err(Error::Data {
            offset: bytes.len(),
            detail: format!("image data truncated, expected {need} bytes"),
        });
    }
    let pixels = bytes[16..need].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Data {
            offset: 0,
            detail: format!("bad label magic {magic:#010x}"),
        });
    }
    let n = read_u32_be(bytes, 4)? as usize;
    let need = 8 + n;
    if bytes.len() < need {
        return Err(Error::Data {
            offset: bytes.len(),
            detail: format!("label data truncated, expected {need} bytes"),
        });
    }
    bytes[8..need]
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if l > 9 {
                Err(Error::Data {
                    offset: 8 + i,
                    detail: format!("label {l} out of range"),
                })
            } else {
                Ok(usize::from(l))
            }
        })
        .collect()
}

/// Loads an MNIST image/label file pair.
pub fn load_mnist_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let (n, rows, cols, pixels) = parse_idx_images(&std::fs::read(images)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels)?)?;
    if labels.len() != n {
        return Err(Error::Data {
            offset: 4,
            detail: format!("{n} images but {} labels", labels.len()),
        });
    }
    Ok(Dataset {
        dim: rows * cols,
        inputs: pixels,
        targets: DatasetTargets::Labels {
            classes: 10,
            labels,
        },
    })
}

/// Loads `train` and `t10k` splits from a directory holding the standard file names.
pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let train = load_mnist_idx(
        dir.join("train-images-idx3-ubyte"),
        dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_mnist_idx(
        dir.join("t10k-images-idx3-ubyte"),
        dir.join("t10k-labels-idx1-ubyte"),
    )?;
    Ok((train, test))
}

/// `(x, x²)` pairs with `x` uniform in `[-1, 1]`.
pub fn gen_parabola(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    parabola_at(&xs)
}

/// The parabola evaluated at given points.
pub fn parabola_at(xs: &[f64]) -> Dataset {
    Dataset {
        dim: 1,
        inputs: xs.to_vec(),
        targets: DatasetTargets::Values {
            dim: 1,
            values: xs.iter().map(|x| x * x).collect(),
        },
    }
}

/// Greyscale images with pixels in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct ImageSet {
    pub images: Vec<(usize, usize, Vec<f64>)>,
}

impl ImageSet {
    /// Treats each dataset row as a `side × side` image.
    pub fn from_dataset(data: &Dataset, side: usize) -> Result<Self> {
        if data.dim != side * side {
            return Err(Error::ShapeMismatch {
                expected: side * side,
                got: data.dim,
            });
        }
        Ok(Self {
            images: (0..data.len())
                .map(|i| (side, side, data.input(i).to_vec()))
                .collect(),
        })
    }

    /// Reads every PNG/PGM image in a directory, sorted by file name.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                    Some("png" | "pgm" | "pnm")
                )
            })
            .collect();
        paths.sort();
        let mut images = Vec::new();
        for p in paths {
            let img = image::open(&p)
                .map_err(|e| Error::Data {
                    offset: 0,
                    detail: format!("{}: {e}", p.display()),
                })?
                .to_luma8();
            let (w, h) = img.dimensions();
            images.push((
                w as usize,
                h as usize,
                img.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect(),
            ));
        }
        if images.is_empty() {
            return Err(Error::Data {
                offset: 0,
                detail: "no readable images".into(),
            });
        }
        Ok(Self { images })
    }
}

/// Random `patch × patch` crops flattened to auto-encoder samples (target = input).
pub fn gen_patches(source: &ImageSet, patch: usize, n: usize, seed: u64) -> Result<Dataset> {
    let usable: Vec<usize> = source
        .images
        .iter()
        .enumerate()
        .filter(|(_, (w, h, _))| *w >= patch && *h >= patch)
        .map(|(i, _)| i)
        .collect();
    if usable.is_empty() || patch == 0 {
        return Err(Error::Data {
            offset: 0,
            detail: format!("no image is at least {patch}×{patch}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = patch * patch;
    let mut inputs = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let (w, h, pixels) = &source.images[usable[rng.random_range(0..usable.len())]];
        let x0 = rng.random_range(0..=w - patch);
        let y0 = rng.random_range(0..=h - patch);
        for y in y0..y0 + patch {
            inputs.extend_from_slice(&pixels[y * w + x0..y * w + x0 + patch]);
        }
    }
    Ok(Dataset {
        dim,
        targets: DatasetTargets::Values {
            dim,
            values: inputs.clone(),
        },
        inputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IDX_IMAGES_MAGIC, n, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    #[test]
    fn parses_images_and_scales() {
        let bytes = idx_images(2, 1, 2, &[0, 255, 51, 102]);
        let (n, r, c, px) = parse_idx_images(&bytes).unwrap();
        assert_eq!((n, r, c), (2, 1, 2));
        assert_eq!(px, vec![0.0, 1.0, 0.2, 0.4]);
    }

    #[test]
    fn truncated_images_report_offset() {
        let bytes = idx_images(2, 2, 2, &[1, 2, 3]);
        match parse_idx_images(&bytes) {
            Err(Error::Data { offset, .. }) => assert_eq!(offset, 19),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_idx_images(&bytes[..6]), Err(Error::Data { .. })));
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = idx_images(1, 1, 1, &[0]);
        bytes[3] = 0x01;
        assert!(parse_idx_images(&bytes).is_err());
        assert!(parse_idx_labels(&idx_images(1, 1, 1, &[0])).is_err());
    }

    #[test]
    fn labels_parse() {
        let mut b = Vec::new();
        b.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        b.extend_from_slice(&3u32.to_be_bytes());
        b.extend_from_slice(&[7, 0, 9]);
        assert_eq!(parse_idx_labels(&b).unwrap(), vec![7, 0, 9]);
        b[8] = 10;
        assert!(parse_idx_labels(&b).is_err());
    }

    #[test]
    fn parabola_targets() {
        let d = parabola_at(&[0.0, 1.0, -1.0, 0.5]);
        let batch = d.gather(&[0, 1, 2, 3]);
        assert_eq!(batch.values, vec![0.0, 1.0, 1.0, 0.25]);
        let a = gen_parabola(100, 9);
        assert_eq!(a, gen_parabola(100, 9));
        assert!(a.inputs.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn patches_shape_range_determinism() {
        let images = ImageSet {
            images: vec![(10, 9, (0..90).map(|i| f64::from(i) / 89.0).collect())],
        };
        let d = gen_patches(&images, 8, 20, 4).unwrap();
        assert_eq!(d.dim, 64);
        assert_eq!(d.len(), 20);
        assert!(d.inputs.iter().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(d, gen_patches(&images, 8, 20, 4).unwrap());
        assert!(gen_patches(&images, 11, 1, 0).is_err());
    }
}
