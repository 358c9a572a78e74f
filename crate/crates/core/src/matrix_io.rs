//! Binary matrix files: 4-byte magic `MXLM`, u32 LE row count, u32 LE column
//! count, 4 reserved zero bytes, then row-major f64 LE values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MXLM";

pub fn write_matrix(path: impl AsRef<Path>, matrix: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&(matrix.nrows() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(matrix.ncols() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&[0u8; 4]).map_err(io_err)?;
    for row in matrix.rows() {
        for &v in row {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|_| Error::Checkpoint {
        path: path.into(),
        message: "truncated header".into(),
    })?;
    if &header[0..4] != MAGIC {
        return Err(Error::Checkpoint {
            path: path.into(),
            message: format!("bad magic {:?}, expected {MAGIC:?}", &header[0..4]),
        });
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut data = vec![0.0f64; rows * cols];
    let mut buf = [0u8; 8];
    for v in data.iter_mut() {
        r.read_exact(&mut buf).map_err(|_| Error::Checkpoint {
            path: path.into(),
            message: format!("truncated data, expected {rows}x{cols} values"),
        })?;
        *v = f64::from_le_bytes(buf);
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::Checkpoint {
            path: path.into(),
            message: "trailing bytes after matrix data".into(),
        });
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Checkpoint {
        path: path.into(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.bin");
        let p2 = dir.path().join("b.bin");
        let m = Array2::from_shape_fn((3, 5), |(i, j)| (i as f64 + 0.25) * (j as f64 - 1.5));
        write_matrix(&p1, &m).unwrap();
        let loaded = read_matrix(&p1).unwrap();
        assert_eq!(loaded, m);
        write_matrix(&p2, &loaded).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn bad_magic_is_rejected_with_file_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, b"NOPE0000000000000000000000").unwrap();
        let err = read_matrix(&p).unwrap_err();
        assert!(err.to_string().contains("bad.bin"), "{err}");
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trunc.bin");
        let m = Array2::from_elem((2, 2), 1.0);
        write_matrix(&p, &m).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_matrix(&p).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn file_size_matches_header_plus_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = Array2::from_elem((7, 11), 0.5);
        write_matrix(&p, &m).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 + 8 * 7 * 11);
    }
}
