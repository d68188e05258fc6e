//! Flat binary embedding files: `d` and `N` as u64 little-endian, then `N * d`
//! f64 little-endian values, row-major.

use std::io::{Read, Write};
use std::path::Path;

use super::index::TenantIndex;
use crate::error::{Error, Result};

pub fn write_embeddings<W: Write>(mut w: W, dim: usize, rows: &[Vec<f64>]) -> Result<()> {
    w.write_all(&(dim as u64).to_le_bytes())?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    for r in rows {
        if r.len() != dim {
            return Err(Error::InvalidInput(format!("row of length {} in a {dim}-dimensional file", r.len())));
        }
        for x in r {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_embeddings<R: Read>(mut r: R) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let d = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let want = n.checked_mul(d).and_then(|x| x.checked_mul(8));
    if want != Some(body.len()) {
        return Err(Error::Encoding(format!(
            "header says {n} x {d} doubles but body has {} bytes",
            body.len()
        )));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let rows = if d == 0 {
        vec![Vec::new(); n]
    } else {
        vals.chunks_exact(d).map(<[f64]>::to_vec).collect()
    };
    Ok((d, rows))
}

/// Load a file as a tenant index; every row must be unit norm.
pub fn load_index(path: &Path, tenant_id: &str) -> Result<TenantIndex> {
    let f = std::fs::File::open(path)?;
    let (_, rows) = read_embeddings(std::io::BufReader::new(f))?;
    TenantIndex::from_embeddings(tenant_id, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_truncation() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, -1.0], vec![0.6, 0.8]];
        let mut buf = Vec::new();
        write_embeddings(&mut buf, 2, &rows).unwrap();
        assert_eq!(buf.len(), 16 + 6 * 8);
        assert_eq!(&buf[..8], &2u64.to_le_bytes());
        let (d, back) = read_embeddings(&buf[..]).unwrap();
        assert_eq!((d, back.clone()), (2, rows));
        assert!(read_embeddings(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn load_checks_norms() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        let mut buf = Vec::new();
        write_embeddings(&mut buf, 2, &[vec![1.0, 1.0]]).unwrap();
        std::fs::write(&p, &buf).unwrap();
        assert!(load_index(&p, "t").is_err());
        buf.clear();
        write_embeddings(&mut buf, 2, &[vec![0.6, 0.8]]).unwrap();
        std::fs::write(&p, &buf).unwrap();
        assert_eq!(load_index(&p, "t").unwrap().len(), 1);
    }
}
