//! Binary persistence for [`PcaBasis`].
//!
//! Little-endian layout: magic `ESRBASIS`, version u32, then d, r,
//! channels, height, width, corpus size (all u64), followed by the mean
//! (d f64), the eigenvalues (r f64) and the basis in column-major order
//! (d*r f64). Loading re-validates every basis invariant.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use crate::data::ImageShape;
use crate::error::{Error, Result};

use super::PcaBasis;

const MAGIC: &[u8; 8] = b"ESRBASIS";
const VERSION: u32 = 1;

pub fn save_basis(basis: &PcaBasis, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    let shape = basis.image_shape();
    let d = basis.dim() as u64;
    let r = basis.rank() as u64;
    for v in [
        d,
        r,
        shape.channels as u64,
        shape.height as u64,
        shape.width as u64,
        basis.corpus_size() as u64,
    ] {
        w.write_u64::<LittleEndian>(v)?;
    }
    for &v in basis.mean() {
        w.write_f64::<LittleEndian>(v)?;
    }
    for &v in basis.eigenvalues() {
        w.write_f64::<LittleEndian>(v)?;
    }
    for col in basis.basis().columns() {
        for &v in col {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_basis(path: &Path) -> Result<PcaBasis> {
    let malformed = |reason: &str| Error::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(malformed("bad magic"));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(malformed(&format!("unsupported version {version}")));
    }
    let d = r.read_u64::<LittleEndian>()? as usize;
    let rank = r.read_u64::<LittleEndian>()? as usize;
    let c = r.read_u64::<LittleEndian>()? as usize;
    let h = r.read_u64::<LittleEndian>()? as usize;
    let w = r.read_u64::<LittleEndian>()? as usize;
    let m = r.read_u64::<LittleEndian>()? as usize;
    let shape = ImageShape::new(c, h, w);
    if shape.len() != d || rank > d {
        return Err(malformed("inconsistent header"));
    }

    let mut read_vec = |len: usize| -> Result<Vec<f64>> {
        let mut out = vec![0.0; len];
        r.read_f64_into::<LittleEndian>(&mut out)?;
        Ok(out)
    };
    let mean = Array1::from_vec(read_vec(d)?);
    let eigenvalues = Array1::from_vec(read_vec(rank)?);
    let cols = read_vec(d * rank)?;
    let mut basis = Array2::<f64>::zeros((d, rank));
    for j in 0..rank {
        for i in 0..d {
            basis[[i, j]] = cols[j * d + i];
        }
    }
    let mut trailing = Vec::new();
    r.read_to_end(&mut trailing)?;
    if !trailing.is_empty() {
        return Err(malformed("trailing bytes"));
    }
    PcaBasis::from_parts(mean, basis, eigenvalues, shape, m)
}
