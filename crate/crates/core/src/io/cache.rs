//! Binary permutation cache.
//!
//! Layout, all little-endian: the magic bytes `KPAX`, a `u32` version (1),
//! `u64` cell count `q`, `f64` tau, then `q` `u64` image indices.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::approx::{validate_image, Method, Permutation};
use crate::error::{Error, Result};
use crate::partition::Partition;

pub const MAGIC: &[u8; 4] = b"KPAX";
pub const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 8 + 8;

/// Contents of a cache file.
#[derive(Debug, Clone, PartialEq)]
pub struct PermCache {
    pub tau: f64,
    pub image: Vec<usize>,
}

impl PermCache {
    pub fn from_perm(perm: &Permutation) -> Self {
        PermCache { tau: perm.tau(), image: perm.image().to_vec() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER + 8 * self.image.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.image.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.tau.to_le_bytes());
        for &j in &self.image {
            out.extend_from_slice(&(j as u64).to_le_bytes());
        }
        out
    }

    /// Parses and checks that the image is a bijection.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER {
            return Err(Error::CorruptCache(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::CorruptCache("bad magic".into()));
        }
        let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::CorruptCache(format!("unsupported version {version}")));
        }
        let q = word(8);
        let tau = f64::from_bits(word(16));
        let expected = q.checked_mul(8).and_then(|b| b.checked_add(HEADER as u64));
        if expected != Some(bytes.len() as u64) {
            return Err(Error::CorruptCache(format!("{} bytes for {q} entries", bytes.len())));
        }
        let q = q as usize;
        let mut image = Vec::with_capacity(q);
        for i in 0..q {
            let v = word(HEADER + 8 * i);
            if v >= q as u64 {
                return Err(Error::IntegrityFailure(format!("entry {i} points to {v}, outside 0..{q}")));
            }
            image.push(v as usize);
        }
        let report = validate_image(&image, None);
        if !report.is_ok() {
            return Err(Error::IntegrityFailure(format!("image is not a bijection: {report}")));
        }
        Ok(PermCache { tau, image })
    }

    /// Attaches the cached image to `partition`.
    pub fn into_perm(self, partition: Arc<Partition>, method: Method) -> Result<Permutation> {
        if partition.len() != self.image.len() {
            return Err(Error::IntegrityFailure(format!(
                "cache holds {} cells, partition has {}",
                self.image.len(),
                partition.len()
            )));
        }
        Permutation::from_image(partition, self.image, self.tau, method)
    }
}

pub fn save_perm(perm: &Permutation, path: &Path) -> Result<()> {
    fs::write(path, PermCache::from_perm(perm).to_bytes())?;
    Ok(())
}

pub fn load_perm(path: &Path) -> Result<PermCache> {
    PermCache::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Domain;

    fn perm() -> Permutation {
        let p = Arc::new(Partition::new(Domain::unit_circle(), &[5]).unwrap());
        Permutation::from_image(p, vec![3, 0, 4, 1, 2], 0.25, Method::Explicit).unwrap()
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.kpax");
        let perm = perm();
        save_perm(&perm, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), HEADER + 40);
        assert_eq!(&bytes[..4], b"KPAX");
        let back = load_perm(&path).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.into_perm(perm.partition().clone(), Method::Explicit).unwrap(), perm);
    }

    #[test]
    fn corrupt_files() {
        let bytes = PermCache::from_perm(&perm()).to_bytes();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        let mut bad_version = bytes.clone();
        bad_version[4] = 2;
        for b in [&bytes[..bytes.len() - 1], &bytes[..10], &bad_magic[..], &bad_version[..]] {
            assert!(matches!(PermCache::from_bytes(b), Err(Error::CorruptCache(_))));
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(PermCache::from_bytes(&extra), Err(Error::CorruptCache(_))));
    }

    #[test]
    fn non_bijective_files() {
        let mut dup = PermCache::from_perm(&perm());
        dup.image[1] = dup.image[0];
        assert!(matches!(PermCache::from_bytes(&dup.to_bytes()), Err(Error::IntegrityFailure(_))));
        let mut out = PermCache::from_perm(&perm());
        out.image[2] = 99;
        assert!(matches!(PermCache::from_bytes(&out.to_bytes()), Err(Error::IntegrityFailure(_))));
    }
}
