//! Checkpoint files for the embedding scorer and the affine calibration.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes   b"TRPQCKPT"
//! version  u32       1
//! kind     u32       1 = embedding scorer, 2 = affine calibration
//!
//! kind 1:  u64 n_entities, u64 n_relations, u64 dim,
//!          f64[n_entities * dim] entity embeddings (row-major),
//!          f64[n_relations * dim] relation embeddings
//! kind 2:  u64 dim,
//!          per slot in (subject, relation, object):
//!            f64[dim] w_rho, f64[dim] w_lambda, f64 b_rho, f64 b_lambda
//! ```
//!
//! A JSON sidecar at `<path>.json` records hyperparameters and the seed.

use std::io::{Read, Write};
use std::path::Path;

use crate::scalar::Scalar;

use super::{AffineCalibration, ConfidenceBackend, ConfidenceError, EmbeddingScorer};

const MAGIC: &[u8; 8] = b"TRPQCKPT";
const VERSION: u32 = 1;
const KIND_SCORER: u32 = 1;
const KIND_CALIBRATION: u32 = 2;

fn ck_err(path: &Path, reason: impl Into<String>) -> ConfidenceError {
    ConfidenceError::Checkpoint {
        file: path.display().to_string(),
        reason: reason.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> ConfidenceError {
    ConfidenceError::Io {
        file: path.display().to_string(),
        source,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let out = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64_vec(&mut self, len: usize) -> Option<Vec<f64>> {
        let bytes = self.take(len * 8)?;
        Some(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }
}

fn write_header(out: &mut Vec<u8>, kind: u32) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&kind.to_le_bytes());
}

fn read_header(path: &Path, r: &mut Reader<'_>, want_kind: u32) -> Result<(), ConfidenceError> {
    let magic = r.take(8).ok_or_else(|| ck_err(path, "truncated header"))?;
    if magic != MAGIC {
        return Err(ck_err(path, "bad magic"));
    }
    let version = r.u32().ok_or_else(|| ck_err(path, "truncated header"))?;
    if version != VERSION {
        return Err(ck_err(path, format!("unsupported version {version}")));
    }
    let kind = r.u32().ok_or_else(|| ck_err(path, "truncated header"))?;
    if kind != want_kind {
        return Err(ck_err(path, format!("unexpected checkpoint kind {kind}")));
    }
    Ok(())
}

fn write_sidecar(path: &Path, sidecar: &serde_json::Value) -> Result<(), ConfidenceError> {
    let sidecar_path = sidecar_path(path);
    let mut f = std::fs::File::create(&sidecar_path).map_err(|e| io_err(&sidecar_path, e))?;
    let text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    f.write_all(text.as_bytes())
        .and_then(|()| f.write_all(b"\n"))
        .map_err(|e| io_err(&sidecar_path, e))
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

pub fn save_scorer<S: Scalar>(
    path: impl AsRef<Path>,
    scorer: &EmbeddingScorer<S>,
    sidecar: &serde_json::Value,
) -> Result<(), ConfidenceError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    write_header(&mut out, KIND_SCORER);
    out.extend_from_slice(&(scorer.num_entities() as u64).to_le_bytes());
    out.extend_from_slice(&(scorer.num_relations() as u64).to_le_bytes());
    out.extend_from_slice(&(scorer.dim as u64).to_le_bytes());
    for v in scorer.entity_params().iter().chain(scorer.relation_params()) {
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))?;
    write_sidecar(path, sidecar)
}

pub fn load_scorer<S: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingScorer<S>, ConfidenceError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    read_header(path, &mut r, KIND_SCORER)?;
    let n_entities = r.u64().ok_or_else(|| ck_err(path, "truncated dims"))? as usize;
    let n_relations = r.u64().ok_or_else(|| ck_err(path, "truncated dims"))? as usize;
    let dim = r.u64().ok_or_else(|| ck_err(path, "truncated dims"))? as usize;
    let entity = r
        .f64_vec(n_entities * dim)
        .ok_or_else(|| ck_err(path, "truncated entity embeddings"))?;
    let relation = r
        .f64_vec(n_relations * dim)
        .ok_or_else(|| ck_err(path, "truncated relation embeddings"))?;
    if r.pos != bytes.len() {
        return Err(ck_err(path, "trailing bytes"));
    }
    Ok(EmbeddingScorer::from_parts(
        dim,
        n_entities,
        n_relations,
        entity.into_iter().map(S::from_f64_lossy).collect(),
        relation.into_iter().map(S::from_f64_lossy).collect(),
    ))
}

pub fn save_calibration<S: Scalar>(
    path: impl AsRef<Path>,
    cal: &AffineCalibration<S>,
    sidecar: &serde_json::Value,
) -> Result<(), ConfidenceError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    write_header(&mut out, KIND_CALIBRATION);
    out.extend_from_slice(&(cal.dim as u64).to_le_bytes());
    for v in cal.params() {
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))?;
    write_sidecar(path, sidecar)
}

pub fn load_calibration<S: Scalar>(
    path: impl AsRef<Path>,
) -> Result<AffineCalibration<S>, ConfidenceError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    read_header(path, &mut r, KIND_CALIBRATION)?;
    let dim = r.u64().ok_or_else(|| ck_err(path, "truncated dims"))? as usize;
    let mut cal = AffineCalibration::<S>::zero(dim);
    let params = r
        .f64_vec(cal.param_len())
        .ok_or_else(|| ck_err(path, "truncated parameters"))?;
    if r.pos != bytes.len() {
        return Err(ck_err(path, "trailing bytes"));
    }
    cal.set_params(&params.into_iter().map(S::from_f64_lossy).collect::<Vec<_>>());
    Ok(cal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn scorer_round_trips() {
        let dir = std::env::temp_dir().join("tropiq-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("scorer.ckpt");
        let mut rng = rng::substream(1, "ckpt");
        let scorer = EmbeddingScorer::<f64>::init(4, 5, 2, &mut rng);
        save_scorer(&path, &scorer, &serde_json::json!({"seed": 1})).unwrap();
        let loaded = load_scorer::<f64>(&path).unwrap();
        assert_eq!(loaded, scorer);
        assert!(sidecar_path(&path).exists());
    }

    #[test]
    fn calibration_round_trips() {
        let dir = std::env::temp_dir().join("tropiq-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cal.ckpt");
        let mut cal = AffineCalibration::<f64>::zero(3);
        let params: Vec<f64> = (0..cal.param_len()).map(|i| i as f64 * 0.125).collect();
        cal.set_params(&params);
        save_calibration(&path, &cal, &serde_json::json!({"seed": 2})).unwrap();
        let loaded = load_calibration::<f64>(&path).unwrap();
        assert_eq!(loaded, cal);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let dir = std::env::temp_dir().join("tropiq-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mismatch.ckpt");
        let cal = AffineCalibration::<f64>::zero(2);
        save_calibration(&path, &cal, &serde_json::json!({})).unwrap();
        let err = load_scorer::<f64>(&path).unwrap_err();
        assert!(matches!(err, ConfidenceError::Checkpoint { .. }));
    }
}
