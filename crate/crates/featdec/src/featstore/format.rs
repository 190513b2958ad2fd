//! Feature-set persistence.
//!
//! Binary format `ODF1`, little-endian throughout:
//!
//! ```text
//! magic   4 bytes   "ODF1" (0x4F 0x44 0x46 0x31)
//! version u32       1
//! n       u64       sample count
//! d       u32       feature dimension
//! c       u32       class count (0 = unlabeled)
//! labels  n x i32   -1 for unlabeled samples
//! data    n*d x f32 features, row-major
//! ```
//!
//! CSV format: header `label,f0,...,f{d-1}`, one sample per line, label -1
//! for unlabeled. Features are written as the shortest decimal that parses
//! back to the same `f32`, so CSV and binary agree bit-for-bit after load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{FeatError, FeatureSet, Result, UNLABELED};
use crate::numkit::Matrix;

const MAGIC: [u8; 4] = *b"ODF1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Binary,
    Csv,
}

impl Format {
    /// Picks a format from the file extension: `.csv` is CSV, anything else
    /// is the binary format.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

pub fn save_featureset(fs: &FeatureSet, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Binary => save_binary(fs, &mut w),
        Format::Csv => save_csv(fs, &mut w),
    }
}

pub fn load_featureset(path: &Path, format: Format) -> Result<FeatureSet> {
    // a missing or unreadable input is a malformed input from the caller's
    // point of view, not an io fault of ours
    let file = File::open(path)
        .map_err(|e| FeatError::Format(format!("cannot open {}: {e}", path.display())))?;
    let mut r = BufReader::new(file);
    match format {
        Format::Binary => load_binary(&mut r),
        Format::Csv => load_csv(&mut r),
    }
}

fn save_binary(fs: &FeatureSet, w: &mut impl Write) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(fs.len() as u64)?;
    w.write_u32::<LittleEndian>(fs.dim() as u32)?;
    w.write_u32::<LittleEndian>(fs.class_count())?;
    for &l in fs.labels() {
        w.write_i32::<LittleEndian>(l)?;
    }
    for &v in fs.features().data() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    w.flush()?;
    Ok(())
}

fn load_binary(r: &mut impl Read) -> Result<FeatureSet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| FeatError::Format(format!("truncated header: {e}")))?;
    if magic != MAGIC {
        return Err(FeatError::Format(format!("bad magic {magic:02x?}")));
    }
    let version = read_u32(r, "version")?;
    if version != VERSION {
        return Err(FeatError::Format(format!("unsupported version {version}")));
    }
    let n = read_u64(r, "sample count")? as usize;
    let d = read_u32(r, "dimension")? as usize;
    let c = read_u32(r, "class count")?;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let l = r
            .read_i32::<LittleEndian>()
            .map_err(|e| FeatError::Format(format!("truncated labels at {i}: {e}")))?;
        labels.push(l);
    }
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n * d {
        let v = r
            .read_f32::<LittleEndian>()
            .map_err(|e| FeatError::Format(format!("truncated features at {i}: {e}")))?;
        data.push(v as f64);
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(FeatError::Format("trailing bytes after payload".into()));
    }
    FeatureSet::new(Matrix::from_vec(n, d, data), labels, c)
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    r.read_u32::<LittleEndian>()
        .map_err(|e| FeatError::Format(format!("truncated {what}: {e}")))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    r.read_u64::<LittleEndian>()
        .map_err(|e| FeatError::Format(format!("truncated {what}: {e}")))
}

fn save_csv(fs: &FeatureSet, w: &mut impl Write) -> Result<()> {
    write!(w, "label")?;
    for j in 0..fs.dim() {
        write!(w, ",f{j}")?;
    }
    writeln!(w)?;
    for i in 0..fs.len() {
        write!(w, "{}", fs.labels()[i])?;
        for &v in fs.sample(i) {
            write!(w, ",{}", v as f32)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn load_csv(r: &mut impl BufRead) -> Result<FeatureSet> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| FeatError::Format("empty file".into()))?
        .map_err(|e| FeatError::Format(format!("unreadable header: {e}")))?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.first() != Some(&"label") {
        return Err(FeatError::Format(format!(
            "header must start with 'label', got {:?}",
            cols.first()
        )));
    }
    for (j, col) in cols[1..].iter().enumerate() {
        if *col != format!("f{j}") {
            return Err(FeatError::Format(format!(
                "expected column f{j}, got {col:?}"
            )));
        }
    }
    let d = cols.len() - 1;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| FeatError::Format(format!("line {}: {e}", lineno + 2)))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.trim_end().split(',');
        let label: i32 = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|e| FeatError::Format(format!("line {}: bad label: {e}", lineno + 2)))?;
        labels.push(label);
        let mut count = 0;
        for field in fields {
            let v: f32 = field
                .parse()
                .map_err(|e| FeatError::Format(format!("line {}: bad float: {e}", lineno + 2)))?;
            data.push(v as f64);
            count += 1;
        }
        if count != d {
            return Err(FeatError::Format(format!(
                "line {}: {count} features, expected {d}",
                lineno + 2
            )));
        }
    }
    let n = labels.len();
    // class count is implied: one past the largest label, 0 if unlabeled
    let c = labels
        .iter()
        .filter(|&&l| l != UNLABELED)
        .map(|&l| l + 1)
        .max()
        .unwrap_or(0)
        .max(0) as u32;
    FeatureSet::new(Matrix::from_vec(n, d, data), labels, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;
    use std::io::Cursor;

    fn random_set(rng: &mut Rng, n: usize, d: usize, c: u32) -> FeatureSet {
        let m = Matrix::from_fn(n, d, |_, _| rng.next_uniform(-5.0, 5.0));
        let labels = (0..n)
            .map(|_| {
                if c == 0 {
                    UNLABELED
                } else {
                    rng.next_index(c as usize) as i32
                }
            })
            .collect();
        FeatureSet::new(m, labels, c).unwrap()
    }

    fn round_trip(fs: &FeatureSet, format: Format) -> FeatureSet {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set");
        save_featureset(fs, &path, format).unwrap();
        load_featureset(&path, format).unwrap()
    }

    #[test]
    fn binary_round_trip_quantizes_to_f32() {
        let mut rng = Rng::new(21);
        let fs = random_set(&mut rng, 17, 5, 3);
        let back = round_trip(&fs, Format::Binary);
        assert_eq!(back, fs.quantize_f32());
    }

    #[test]
    fn csv_round_trip_matches_binary() {
        let mut rng = Rng::new(22);
        let fs = random_set(&mut rng, 9, 4, 2);
        assert_eq!(round_trip(&fs, Format::Csv), round_trip(&fs, Format::Binary));
    }

    #[test]
    fn csv_two_rows_parse() {
        let text = "label,f0,f1\n0,1.5,-2\n1,0.25,3e2\n";
        let fs = load_csv(&mut Cursor::new(text)).unwrap();
        assert_eq!(fs.len(), 2);
        assert_eq!(fs.dim(), 2);
        assert_eq!(fs.class_count(), 2);
        assert_eq!(fs.sample(1), &[0.25, 300.0]);
    }

    #[test]
    fn unlabeled_set_round_trips_with_zero_classes() {
        let mut rng = Rng::new(23);
        let fs = random_set(&mut rng, 6, 3, 0);
        let back = round_trip(&fs, Format::Binary);
        assert_eq!(back.class_count(), 0);
        assert!(back.labels().iter().all(|&l| l == UNLABELED));
    }

    #[test]
    fn single_cell_binary_file_is_32_bytes() {
        let fs = FeatureSet::new(Matrix::from_vec(1, 1, vec![2.5]), vec![0], 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.odf");
        save_featureset(&fs, &path, Format::Binary).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 32);
    }

    #[test]
    fn truncated_binary_rejected() {
        let fs = FeatureSet::new(Matrix::from_vec(2, 2, vec![1.0; 4]), vec![0, 1], 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.odf");
        save_featureset(&fs, &path, Format::Binary).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            load_featureset(&path, Format::Binary),
            Err(FeatError::Format(_))
        ));
    }

    #[test]
    fn bad_magic_rejected() {
        let err = load_binary(&mut Cursor::new(b"NOPE".to_vec())).unwrap_err();
        assert!(matches!(err, FeatError::Format(_)));
    }

    #[test]
    fn binary_label_out_of_range_rejected() {
        let fs = FeatureSet::new(Matrix::from_vec(2, 1, vec![0.0, 1.0]), vec![0, 1], 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.odf");
        save_featureset(&fs, &path, Format::Binary).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // class count lives at offset 20; shrink it below the stored labels
        bytes[20] = 1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_featureset(&path, Format::Binary),
            Err(FeatError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn missing_file_is_format_error() {
        assert!(matches!(
            load_featureset(Path::new("/nonexistent/x.odf"), Format::Binary),
            Err(FeatError::Format(_))
        ));
    }
}
