//! Dataset loading: MNIST IDX files, digit sequences, one-hot targets.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Labelled fixed-width samples stored contiguously, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    dim: usize,
    classes: usize,
    inputs: Vec<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(dim: usize, classes: usize, inputs: Vec<T>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("sample"));
        }
        if inputs.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                actual: inputs.len(),
            });
        }
        if let Some(&class) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::ClassOutOfRange { class, classes });
        }
        Ok(Self {
            dim,
            classes,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], usize)> + '_ {
        self.inputs.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }

    /// First `k` samples after a seeded shuffle; `k` is clamped to the size.
    pub fn subset(&self, k: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order.truncate(k.min(self.len()));
        let mut inputs = Vec::with_capacity(order.len() * self.dim);
        for &i in &order {
            inputs.extend_from_slice(self.input(i));
        }
        Self {
            dim: self.dim,
            classes: self.classes,
            inputs,
            labels: order.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same labels with every input replaced by `f(input)`.
    pub fn map_inputs<F>(&self, out_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[T]) -> Result<Vec<T>>,
    {
        let mut inputs = Vec::with_capacity(self.len() * out_dim);
        for x in self.inputs.chunks_exact(self.dim) {
            let y = f(x)?;
            if y.len() != out_dim {
                return Err(Error::DimensionMismatch {
                    expected: out_dim,
                    actual: y.len(),
                });
            }
            inputs.extend_from_slice(&y);
        }
        Self::new(out_dim, self.classes, inputs, self.labels.clone())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct IdxReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> IdxReader<'a> {
    fn err(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Idx {
            path: self.path.to_path_buf(),
            offset,
            reason: reason.into(),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let b = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.err(self.bytes.len(), format!("truncated header reading {what}")))?;
        self.pos = end;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn expect_magic(&mut self, magic: u32) -> Result<()> {
        let found = self.u32("magic number")?;
        if found != magic {
            return Err(self.err(0, format!("bad magic 0x{found:08x}, expected 0x{magic:08x}")));
        }
        Ok(())
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos + len;
        if self.bytes.len() < end {
            return Err(self.err(
                self.bytes.len(),
                format!("truncated payload: expected {len} bytes from offset {}", self.pos),
            ));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

/// Raw IDX image file: `(count, rows, cols, pixels)`.
fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut r = IdxReader { path, bytes, pos: 0 };
    r.expect_magic(IDX_IMAGES_MAGIC)?;
    let n = r.u32("item count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let pixels = r.payload(n * rows * cols)?.to_vec();
    Ok((n, rows, cols, pixels))
}

fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = IdxReader { path, bytes, pos: 0 };
    r.expect_magic(IDX_LABELS_MAGIC)?;
    let n = r.u32("item count")? as usize;
    Ok(r.payload(n)?.to_vec())
}

/// Loads an IDX image/label file pair. Pixels are scaled to `[0, 1]` by 1/255.
pub fn load_mnist_idx<T: Scalar>(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset<T>> {
    let (ipath, lpath) = (images.as_ref(), labels.as_ref());
    let (n, rows, cols, pixels) = parse_idx_images(ipath, &read_file(ipath)?)?;
    let raw_labels = parse_idx_labels(lpath, &read_file(lpath)?)?;
    if raw_labels.len() != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: raw_labels.len(),
        });
    }
    let scale = T::lit(1.0 / 255.0);
    let inputs = pixels.iter().map(|&b| T::lit(f64::from(b)) * scale).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&l| usize::from(l)).collect();
    Dataset::new(rows * cols, 10, inputs, labels)
}

/// Ordered decimal digits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitSequence(Vec<u8>);

impl DigitSequence {
    /// Keeps every `0`–`9` character in order and drops everything else.
    pub fn parse(text: &str) -> Result<Self> {
        let digits: Vec<u8> = text
            .bytes()
            .filter(u8::is_ascii_digit)
            .map(|b| b - b'0')
            .collect();
        if digits.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(Self(digits))
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn load_digit_sequence(path: impl AsRef<Path>) -> Result<DigitSequence> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    DigitSequence::parse(&text)
}

/// Unit basis vector `e_class` of length `classes`.
pub fn one_hot<T: Scalar>(class: usize, classes: usize) -> Result<Vec<T>> {
    if class >= classes {
        return Err(Error::ClassOutOfRange { class, classes });
    }
    let mut v = vec![T::zero(); classes];
    v[class] = T::one();
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::argmax;
    use std::io::Write;

    fn idx_images(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IDX_IMAGES_MAGIC, n, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    #[test]
    fn two_image_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let pixels = [0u8, 255, 128, 0, 255, 255, 0, 1];
        let img = write(&dir, "img", &idx_images(2, 2, 2, &pixels));
        let lbl = write(&dir, "lbl", &idx_labels(&[7, 3]));
        let ds: Dataset<f64> = load_mnist_idx(&img, &lbl).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.input(0)[0], 0.0);
        assert_eq!(ds.input(0)[1], 1.0);
        assert_eq!(ds.input(1)[3], 1.0 / 255.0);
        assert_eq!(ds.labels(), &[7, 3]);
    }

    #[test]
    fn truncated_payload_names_offset() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(&dir, "img", &idx_images(2, 2, 2, &[1, 2, 3]));
        let lbl = write(&dir, "lbl", &idx_labels(&[0, 1]));
        match load_mnist_idx::<f64>(&img, &lbl) {
            Err(Error::Idx { offset, reason, .. }) => {
                assert_eq!(offset, 19);
                assert!(reason.contains("truncated"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_header() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(&dir, "img", &IDX_IMAGES_MAGIC.to_be_bytes()[..]);
        let lbl = write(&dir, "lbl", &idx_labels(&[0]));
        assert!(matches!(load_mnist_idx::<f64>(&img, &lbl), Err(Error::Idx { offset: 4, .. })));
    }

    #[test]
    fn bad_magic_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(&dir, "img", &idx_images(1, 1, 1, &[5]));
        let lbl = write(&dir, "lbl", &idx_labels(&[0, 1]));
        assert!(matches!(
            load_mnist_idx::<f64>(&img, &lbl),
            Err(Error::CountMismatch { images: 1, labels: 2 })
        ));
        // labels file passed as images
        assert!(matches!(load_mnist_idx::<f64>(&lbl, &lbl), Err(Error::Idx { offset: 0, .. })));
        let missing = dir.path().join("nope");
        assert!(matches!(load_mnist_idx::<f64>(&missing, &lbl), Err(Error::Io { .. })));
    }

    #[test]
    fn digit_filter() {
        assert_eq!(DigitSequence::parse("3.14159").unwrap().digits(), &[3, 1, 4, 1, 5, 9]);
        assert!(matches!(DigitSequence::parse(""), Err(Error::EmptySequence)));
        assert!(matches!(DigitSequence::parse(" .\n"), Err(Error::EmptySequence)));
        assert_eq!(DigitSequence::parse("1 2\n3").unwrap().digits(), &[1, 2, 3]);
    }

    #[test]
    fn one_hot_cases() {
        let v: Vec<f64> = one_hot(0, 10).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
        let v: Vec<f64> = one_hot(9, 10).unwrap();
        assert_eq!(v[9], 1.0);
        assert!(one_hot::<f64>(10, 10).is_err());
        for d in 0..10 {
            assert_eq!(argmax(&one_hot::<f64>(d, 10).unwrap()), d);
        }
    }

    #[test]
    fn subset_is_deterministic() {
        let ds = Dataset::new(1, 3, (0..20).map(f64::from).collect(), (0..20).map(|i| i % 3).collect()).unwrap();
        let a = ds.subset(5, 42);
        assert_eq!(a, ds.subset(5, 42));
        assert_eq!(a.len(), 5);
        for (x, l) in a.iter() {
            assert_eq!(x[0] as usize % 3, l);
        }
        assert_eq!(ds.subset(100, 1).len(), 20);
    }
}
