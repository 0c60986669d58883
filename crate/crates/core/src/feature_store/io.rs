//! Binary and CSV feature files.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! "UDFT"  u32 version=1  u64 n  u64 d  u32 n_classes  u32 flags
//! n·d f32 row-major
//! [flags bit0] n·n_classes u8 class labels
//! [flags bit1] n u32 pseudo-labels
//! [flags bit2] u32 k
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use super::FeatureDataset;
use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"UDFT";

const FLAG_CLASS_LABELS: u32 = 1;
const FLAG_PSEUDO_LABELS: u32 = 1 << 1;
const FLAG_PSEUDO_K: u32 = 1 << 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FileFormat {
    #[default]
    Binary,
    Csv,
}

impl FileFormat {
    /// `.csv` means CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Binary,
        }
    }
}

impl FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "bin" => Ok(FileFormat::Binary),
            "csv" => Ok(FileFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown file format {other:?}"))),
        }
    }
}

pub fn load_features(path: &Path, format: FileFormat) -> Result<FeatureDataset> {
    match format {
        FileFormat::Binary => decode_binary(&codec::read_file(path)?),
        FileFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            decode_csv(&text)
        }
    }
}

pub fn save_features(dataset: &FeatureDataset, path: &Path, format: FileFormat) -> Result<()> {
    let bytes = match format {
        FileFormat::Binary => encode_binary(dataset),
        FileFormat::Csv => encode_csv(dataset).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_binary(ds: &FeatureDataset) -> Vec<u8> {
    let mut flags = 0;
    if ds.class_labels.is_some() {
        flags |= FLAG_CLASS_LABELS;
    }
    if ds.pseudo_labels.is_some() {
        flags |= FLAG_PSEUDO_LABELS;
        if ds.pseudo_k.is_some() {
            flags |= FLAG_PSEUDO_K;
        }
    }
    let mut enc = Encoder::with_header(MAGIC);
    enc.u64(ds.n() as u64);
    enc.u64(ds.d() as u64);
    enc.u32(ds.n_classes() as u32);
    enc.u32(flags);
    enc.f32s(ds.data.iter());
    if let Some(labels) = &ds.class_labels {
        for &v in labels {
            enc.u8s(&[v]);
        }
    }
    if let Some(pseudo) = &ds.pseudo_labels {
        for &p in pseudo {
            enc.u32(p);
        }
        if let Some(k) = ds.pseudo_k {
            enc.u32(k);
        }
    }
    enc.into_bytes()
}

pub(crate) fn decode_binary(bytes: &[u8]) -> Result<FeatureDataset> {
    let mut dec = Decoder::open(bytes, MAGIC, "feature file")?;
    let n = dec.len()?;
    let d = dec.len()?;
    let n_classes = dec.u32()? as usize;
    let flags = dec.u32()?;
    if flags & !(FLAG_CLASS_LABELS | FLAG_PSEUDO_LABELS | FLAG_PSEUDO_K) != 0 {
        return Err(Error::Format(format!("feature file: unknown flags {flags:#x}")));
    }
    if flags & FLAG_PSEUDO_K != 0 && flags & FLAG_PSEUDO_LABELS == 0 {
        return Err(Error::Format(
            "feature file: pseudo-label k recorded without pseudo-labels".into(),
        ));
    }
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format("feature file: n·d overflows".into()))?;
    let data = Array2::from_shape_vec((n, d), dec.f32s(count)?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let class_labels = if flags & FLAG_CLASS_LABELS != 0 {
        let raw = dec.u8s(n * n_classes)?.to_vec();
        Some(Array2::from_shape_vec((n, n_classes), raw).map_err(|e| Error::Format(e.to_string()))?)
    } else {
        None
    };
    let pseudo_labels = if flags & FLAG_PSEUDO_LABELS != 0 {
        Some((0..n).map(|_| dec.u32()).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let pseudo_k = if flags & FLAG_PSEUDO_K != 0 {
        Some(dec.u32()?)
    } else {
        None
    };
    dec.finish()?;
    let ds = FeatureDataset {
        data,
        class_labels,
        pseudo_labels,
        pseudo_k,
    };
    ds.validate()?;
    Ok(ds)
}

/// CSV export carries the data and class labels; pseudo-labels are binary-only.
pub(crate) fn encode_csv(ds: &FeatureDataset) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..ds.d())
        .map(|j| format!("f{j}"))
        .chain((0..ds.n_classes()).map(|c| format!("c{c}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ds.n() {
        let mut first = true;
        for v in ds.data.row(i) {
            if !first {
                out.push(',');
            }
            first = false;
            // `Display` for f32 prints the shortest string that round-trips.
            write!(out, "{v}").unwrap();
        }
        if let Some(labels) = &ds.class_labels {
            for v in labels.row(i) {
                write!(out, ",{v}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub(crate) fn decode_csv(text: &str) -> Result<FeatureDataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format("csv: missing header row".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = columns.iter().take_while(|c| c.starts_with('f')).count();
    let n_classes = columns.len() - d;
    for (j, name) in columns.iter().enumerate() {
        let expected = if j < d {
            format!("f{j}")
        } else {
            format!("c{}", j - d)
        };
        if *name != expected {
            return Err(Error::Format(format!(
                "csv: header column {j} is {name:?}, expected {expected:?}"
            )));
        }
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Corrupt(format!(
                "csv line {}: {} fields, expected {}",
                lineno + 1,
                fields.len(),
                columns.len()
            )));
        }
        for f in &fields[..d] {
            let v: f32 = f.parse().map_err(|_| {
                Error::Format(format!("csv line {}: bad number {f:?}", lineno + 1))
            })?;
            data.push(v);
        }
        for f in &fields[d..] {
            let v: u8 = f.parse().map_err(|_| {
                Error::Format(format!("csv line {}: bad label {f:?}", lineno + 1))
            })?;
            labels.push(v);
        }
        n += 1;
    }

    let mut ds = FeatureDataset::new(
        Array2::from_shape_vec((n, d), data).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    if n_classes > 0 {
        ds = ds.with_class_labels(
            Array2::from_shape_vec((n, n_classes), labels)
                .map_err(|e| Error::Format(e.to_string()))?,
        )?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const HEADER_LEN: usize = 32;

    fn small() -> FeatureDataset {
        FeatureDataset::new(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap()
    }

    #[test]
    fn binary_size_without_labels() {
        let bytes = encode_binary(&small());
        assert_eq!(bytes.len(), HEADER_LEN + 2 * 3 * 4);
        let back = decode_binary(&bytes).unwrap();
        assert_eq!((back.n(), back.d(), back.n_classes()), (2, 3, 0));
        assert_eq!(back, small());
    }

    #[test]
    fn pseudo_labels_set_flag_bits() {
        let ds = small().with_pseudo_labels(vec![1, 0], Some(2)).unwrap();
        let bytes = encode_binary(&ds);
        let flags = u32::from_le_bytes(bytes[28..32].try_into().unwrap());
        assert_eq!(flags, FLAG_PSEUDO_LABELS | FLAG_PSEUDO_K);
        assert_eq!(decode_binary(&bytes).unwrap(), ds);
    }

    #[test]
    fn truncated_rows_are_corrupt() {
        let data = Array2::from_shape_fn((10, 3), |(i, j)| (i + j) as f32);
        let mut bytes = encode_binary(&FeatureDataset::new(data).unwrap());
        bytes.truncate(bytes.len() - 3 * 4);
        assert!(matches!(decode_binary(&bytes), Err(Error::Corrupt(_))));
    }

    #[test]
    fn trailing_bytes_are_corrupt() {
        let mut bytes = encode_binary(&small());
        bytes.push(0);
        assert!(matches!(decode_binary(&bytes), Err(Error::Corrupt(_))));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_binary(&small());
        bytes[0] = b'X';
        assert!(matches!(decode_binary(&bytes), Err(Error::Format(_))));
        let mut bytes = encode_binary(&small());
        bytes[4] = 2;
        assert!(matches!(decode_binary(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn nan_payload_fails_validation() {
        let mut bytes = encode_binary(&small());
        bytes[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_binary(&bytes), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_layout() {
        let ds = FeatureDataset::new(array![[0.5, -1.25]]).unwrap();
        assert_eq!(encode_csv(&ds), "f0,f1\n0.5,-1.25\n");
        let labelled = ds.with_class_labels(array![[1, 0]]).unwrap();
        let text = encode_csv(&labelled);
        assert_eq!(text, "f0,f1,c0,c1\n0.5,-1.25,1,0\n");
        assert_eq!(decode_csv(&text).unwrap(), labelled);
    }

    #[test]
    fn csv_short_row_is_corrupt() {
        assert!(matches!(
            decode_csv("f0,f1\n1,2\n3\n"),
            Err(Error::Corrupt(_))
        ));
    }
}
