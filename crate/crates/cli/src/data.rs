//! Train/test splits for each task.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use lutnet::data::{gen_parabola, gen_patches, load_mnist_dir, Dataset, ImageSet};
use lutnet::{Error, Result, Task};

const PARABOLA_TRAIN: usize = 10_000;
const PARABOLA_TEST: usize = 2_000;
const PATCH: usize = 8;
const PATCH_SOURCE_IMAGES: usize = 5_000;
const PATCHES_TRAIN: usize = 20_000;
const PATCHES_TEST: usize = 2_000;

fn require(dir: Option<&Path>, task: Task) -> Result<&Path> {
    dir.ok_or_else(|| Error::InvalidArgument(format!("task `{}` needs --data DIR", task.name())))
}

pub fn load(task: Task, dir: Option<&Path>, seed: u64) -> Result<(Dataset, Dataset)> {
    match task {
        Task::Parabola => Ok((
            gen_parabola(PARABOLA_TRAIN, seed),
            gen_parabola(PARABOLA_TEST, seed.wrapping_add(1)),
        )),
        Task::Mnist => load_mnist_dir(require(dir, task)?),
        Task::Autoenc => {
            let dir = require(dir, task)?;
            let images = if dir.join("train-images-idx3-ubyte").is_file() {
                let (train, _) = load_mnist_dir(dir)?;
                ImageSet::from_dataset(&train.head(PATCH_SOURCE_IMAGES), 28)?
            } else {
                ImageSet::from_dir(dir)?
            };
            Ok((
                gen_patches(&images, PATCH, PATCHES_TRAIN, seed)?,
                gen_patches(&images, PATCH, PATCHES_TEST, seed.wrapping_add(1))?,
            ))
        }
    }
}

/// Comma- or whitespace-separated samples, one per line, each of width `dim`.
pub fn read_csv(path: &Path, dim: usize) -> Result<Vec<f64>> {
    let reader: Box<dyn Read> = if path.as_os_str() == "-" {
        Box::new(std::io::stdin())
    } else {
        Box::new(std::fs::File::open(path)?)
    };
    parse_rows(BufReader::new(reader), dim)
}

fn parse_rows(reader: impl BufRead, dim: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in reader.lines() {
        let line = line?;
        let start = offset;
        offset += line.len() + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = out.len();
        for field in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()) {
            let v: f64 = field.parse().map_err(|_| Error::Data {
                offset: start,
                detail: format!("not a number: `{field}`"),
            })?;
            out.push(v);
        }
        if out.len() - before != dim {
            return Err(Error::Data {
                offset: start,
                detail: format!("expected {dim} values, found {}", out.len() - before),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_separators_and_comments() {
        let rows = parse_rows("# header\n0.5, -1\n\n2 3\n".as_bytes(), 2).unwrap();
        assert_eq!(rows, vec![0.5, -1.0, 2.0, 3.0]);
    }

    #[test]
    fn wrong_width_is_a_data_error() {
        let err = parse_rows("1,2\n1,2,3\n".as_bytes(), 2).unwrap_err();
        assert!(matches!(err, Error::Data { offset: 4, .. }), "{err}");
    }

    #[test]
    fn mnist_without_a_directory_is_a_usage_error() {
        assert!(matches!(load(Task::Mnist, None, 0), Err(Error::InvalidArgument(_))));
    }
}
