//! Binary embedding cache keyed by utterance ID.
//!
//! Layout, all integers little-endian:
//! `b"MSEMB\0"`, `u32` version (1), `u32` dim, `u32` count, then per record
//! `u32` id byte length, UTF-8 id, `dim` x `f32`.

use std::io::{Read, Write};

use super::SpeechEmbedding;
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"MSEMB\0";
const VERSION: u32 = 1;

pub fn write_embedding_cache(mut w: impl Write, embeddings: &[SpeechEmbedding]) -> Result<()> {
    let dim = embeddings.first().map_or(0, |e| e.vector.len());
    let io = |e| Error::io("<embedding cache>", e);
    w.write_all(MAGIC).map_err(io)?;
    for v in [VERSION, dim as u32, embeddings.len() as u32] {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for e in embeddings {
        if e.vector.len() != dim {
            return Err(Error::Shape(format!(
                "embedding `{}` has dimension {}, cache dimension is {dim}",
                e.utterance_id,
                e.vector.len()
            )));
        }
        let id = e.utterance_id.as_bytes();
        w.write_all(&(id.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(id).map_err(io)?;
        for x in &e.vector {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

/// Reads a cache; vectors are re-normalized on ingestion.
pub fn read_embedding_cache(mut r: impl Read) -> Result<Vec<SpeechEmbedding>> {
    let io = |e| Error::io("<embedding cache>", e);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::invalid("not an embedding cache (bad magic)"));
    }
    let mut u32_buf = [0u8; 4];
    let mut read_u32 = |r: &mut dyn Read| -> Result<u32> {
        r.read_exact(&mut u32_buf).map_err(io)?;
        Ok(u32::from_le_bytes(u32_buf))
    };
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::invalid(format!("unsupported embedding cache version {version}")));
    }
    let dim = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id).map_err(io)?;
        let id = String::from_utf8(id).map_err(|e| Error::invalid(format!("utterance id: {e}")))?;
        let mut raw = vec![0u8; dim * 4];
        r.read_exact(&mut raw).map_err(io)?;
        let v: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        out.push(SpeechEmbedding::new(id, &v)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trips() {
        let embs = vec![
            SpeechEmbedding::new("d1_u0", &[1.0, 0.0, 0.0]).unwrap(),
            SpeechEmbedding::new("d1_u1", &[0.0, 0.6, 0.8]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_embedding_cache(&mut buf, &embs).unwrap();
        assert_eq!(buf.len(), 6 + 12 + 2 * (4 + 5 + 12));
        assert_eq!(read_embedding_cache(buf.as_slice()).unwrap(), embs);
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(read_embedding_cache(&b"NOTEMB\0\0\0\0"[..]).is_err());
    }
}
