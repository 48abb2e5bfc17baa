//! Dataset ingestion and booleanization.

use std::path::Path;

use crate::cotm::LiteralVector;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Default pixel threshold for MNIST booleanization (pixel > 75).
pub const DEFAULT_THRESHOLD: u8 = 75;

/// Grayscale images with integer labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let sz = self.rows * self.cols;
        &self.pixels[i * sz..(i + 1) * sz]
    }

    /// First `n` samples (or all of them if fewer).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let sz = self.rows * self.cols;
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels[..n * sz].to_vec(),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
        }
    }
}

/// Booleanized samples ready for training or inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    pub samples: Vec<LiteralVector>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn literals(&self) -> usize {
        self.samples.first().map_or(0, LiteralVector::len)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn u32_be(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                detail: format!("need {n} bytes for {what}, {} left", self.bytes.len() - self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Parses an IDX3 image file; returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut r = Reader { bytes, pos: 0, path };
    let magic = r.u32_be("magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let n = r.u32_be("image count")? as usize;
    let rows = r.u32_be("row count")? as usize;
    let cols = r.u32_be("column count")? as usize;
    let pixels = r.take(n * rows * cols, "pixel data")?.to_vec();
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let mut r = Reader { bytes, pos: 0, path };
    let magic = r.u32_be("magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let n = r.u32_be("label count")? as usize;
    Ok(r.take(n, "label data")?.iter().map(|&b| usize::from(b)).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an IDX image/label file pair and checks labels lie in `[0, classes)`.
pub fn load_idx(images: &Path, labels: &Path, classes: usize) -> Result<RawDataset> {
    let (n, rows, cols, pixels) = parse_idx_images(&read(images)?, images)?;
    let labels = parse_idx_labels(&read(labels)?, labels)?;
    if n != labels.len() {
        return Err(Error::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::LabelRange { index, label, classes });
    }
    Ok(RawDataset {
        rows,
        cols,
        pixels,
        labels,
        classes,
    })
}

/// Standard MNIST file names inside `dir`; `train` selects the 60k split.
pub fn load_mnist(dir: &Path, train: bool) -> Result<RawDataset> {
    let prefix = if train { "train" } else { "t10k" };
    load_idx(
        &dir.join(format!("{prefix}-images-idx3-ubyte")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
        10,
    )
}

/// Feature bit = pixel > threshold; literals are the features then their negations.
pub fn booleanize(ds: &RawDataset, threshold: u8) -> LabeledSet {
    let samples = (0..ds.len())
        .map(|i| {
            let feats: Vec<bool> = ds.image(i).iter().map(|&p| p > threshold).collect();
            LiteralVector::from_features(&feats)
        })
        .collect();
    LabeledSet {
        samples,
        labels: ds.labels.clone(),
        classes: ds.classes,
    }
}

/// Numeric table with a `label` column, for small non-image datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl TabularDataset {
    pub fn booleanize(&self, threshold: f64) -> LabeledSet {
        LabeledSet {
            samples: self
                .features
                .iter()
                .map(|row| LiteralVector::from_features(&row.iter().map(|&v| v > threshold).collect::<Vec<_>>()))
                .collect(),
            labels: self.labels.clone(),
            classes: self.classes,
        }
    }
}

pub fn load_csv(path: &Path) -> Result<TabularDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file)
}

pub fn parse_csv(input: impl std::io::Read) -> Result<TabularDataset> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| Error::Parse("CSV has no `label` column".into()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_col)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, field) in rec.iter().enumerate() {
            let field = field.trim();
            if i == label_col {
                let l: usize = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: label `{field}` is not a class index", row_no + 1)))?;
                labels.push(l);
            } else {
                row.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("row {}: `{field}` is not numeric", row_no + 1)))?,
                );
            }
        }
        features.push(row);
    }
    if labels.is_empty() {
        return Err(Error::Empty("CSV dataset"));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    Ok(TabularDataset {
        feature_names,
        features,
        labels,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idx_images(n: u32, rows: u32, cols: u32, data: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IDX_IMAGES_MAGIC, n, rows, cols] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(data);
        v
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    fn write_pair(dir: &Path, img: &[u8], lab: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let (a, b) = (dir.join("img"), dir.join("lab"));
        std::fs::write(&a, img).unwrap();
        std::fs::write(&b, lab).unwrap();
        (a, b)
    }

    #[test]
    fn parses_small_pair() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = write_pair(dir.path(), &idx_images(2, 2, 2, &[0, 80, 200, 75, 1, 2, 3, 4]), &idx_labels(&[3, 9]));
        let ds = load_idx(&a, &b, 10).unwrap();
        assert_eq!((ds.len(), ds.rows, ds.cols), (2, 2, 2));
        assert_eq!(ds.image(0), &[0, 80, 200, 75]);
        let set = booleanize(&ds, 75);
        assert_eq!(set.literals(), 8);
        assert_eq!(
            set.samples[0].to_bools(),
            vec![false, true, true, false, true, false, false, true]
        );
    }

    #[test]
    fn empty_file_is_truncated() {
        let p = Path::new("x");
        assert!(matches!(parse_idx_images(&[], p), Err(Error::Truncated { .. })));
        assert!(matches!(parse_idx_labels(&[], p), Err(Error::Truncated { .. })));
        let short = idx_images(3, 2, 2, &[1, 2, 3]);
        assert!(matches!(parse_idx_images(&short, p), Err(Error::Truncated { .. })));
    }

    #[test]
    fn bad_magic() {
        let p = Path::new("x");
        let err = parse_idx_images(&idx_labels(&[1]), p).unwrap_err();
        assert!(matches!(err, Error::BadMagic { found: 0x801, .. }));
        assert!(matches!(parse_idx_labels(&idx_images(0, 1, 1, &[]), p), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn label_range_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = write_pair(dir.path(), &idx_images(2, 1, 1, &[0, 0]), &idx_labels(&[1, 12]));
        assert!(matches!(
            load_idx(&a, &b, 10),
            Err(Error::LabelRange { index: 1, label: 12, classes: 10 })
        ));
        let (a, b) = write_pair(dir.path(), &idx_images(2, 1, 1, &[0, 0]), &idx_labels(&[1]));
        assert!(matches!(load_idx(&a, &b, 10), Err(Error::CountMismatch { images: 2, labels: 1 })));
    }

    #[test]
    fn all_zero_image_layout() {
        let ds = RawDataset {
            rows: 28,
            cols: 28,
            pixels: vec![0; 784],
            labels: vec![0],
            classes: 10,
        };
        let lit = &booleanize(&ds, DEFAULT_THRESHOLD).samples[0];
        assert_eq!(lit.len(), 1568);
        assert!((0..784).all(|i| !lit.get(i)));
        assert!((784..1568).all(|i| lit.get(i)));
    }

    #[test]
    fn csv_loader() {
        let text = "a,label,b\n0.2,1,3\n0.9,0,-1\n";
        let t = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(t.feature_names, vec!["a", "b"]);
        assert_eq!(t.labels, vec![1, 0]);
        assert_eq!(t.classes, 2);
        let set = t.booleanize(0.5);
        assert_eq!(set.samples[0].to_bools(), vec![false, true, true, false]);
        assert!(parse_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(parse_csv("a,label\nx,1\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn booleanized_vectors_are_complemented(px in prop::collection::vec(any::<u8>(), 16), t in any::<u8>()) {
            let ds = RawDataset { rows: 4, cols: 4, pixels: px.clone(), labels: vec![0], classes: 2 };
            let a = booleanize(&ds, t);
            let lit = &a.samples[0];
            for i in 0..16 {
                prop_assert_eq!(lit.get(i), px[i] > t);
                prop_assert_eq!(lit.get(i + 16), !lit.get(i));
            }
            prop_assert_eq!(a, booleanize(&ds, t));
        }
    }
}
