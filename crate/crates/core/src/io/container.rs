use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"NEUROVX1";

/// Header fields every container carries around the typed body.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    payload_len: usize,
    payload_sha256: String,
    body: T,
}

/// A parsed container whose typed body has not been interpreted yet.
#[derive(Debug, Clone)]
pub struct Container {
    pub kind: String,
    pub body: serde_json::Value,
    pub payload: Vec<f64>,
}

impl Container {
    pub fn header_as<T: DeserializeOwned>(&self, kind: &str) -> Result<T> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!(
                "expected a {kind} file, found {}",
                self.kind
            )));
        }
        Ok(serde_json::from_value(self.body.clone())?)
    }
}

pub(crate) fn payload_hash(payload: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in payload {
        h.update(v.to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

/// magic | u32 LE header length | JSON header | f64 LE payload
pub fn write_container<T: Serialize>(
    path: &Path,
    kind: &str,
    body: &T,
    payload: &[f64],
) -> Result<()> {
    let header = serde_json::to_vec(&Envelope {
        kind: kind.to_string(),
        payload_len: payload.len(),
        payload_sha256: payload_hash(payload),
        body,
    })?;
    let header_len =
        u32::try_from(header.len()).map_err(|_| Error::InvalidInput("header too large".into()))?;
    let mut bytes = Vec::with_capacity(MAGIC.len() + 4 + header.len() + payload.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&header_len.to_le_bytes());
    bytes.extend_from_slice(&header);
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).at(dir))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::from(e).at(path))?;
    f.write_all(&bytes).map_err(|e| Error::from(e).at(path))?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<Container> {
    let bytes = fs::read(path).map_err(|e| Error::from(e).at(path))?;
    parse(&bytes).map_err(|e| e.at(path))
}

fn parse(bytes: &[u8]) -> Result<Container> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("not a neurovox container (bad magic)"));
    }
    let at = MAGIC.len();
    let header_len = u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let body_start = at + 4 + header_len;
    if bytes.len() < body_start {
        return Err(bad("truncated header"));
    }
    let env: Envelope<serde_json::Value> = serde_json::from_slice(&bytes[at + 4..body_start])?;
    let rest = &bytes[body_start..];
    if rest.len() != env.payload_len * 8 {
        return Err(bad(&format!(
            "payload is {} bytes, header declares {} values",
            rest.len(),
            env.payload_len
        )));
    }
    let payload: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if payload_hash(&payload) != env.payload_sha256 {
        return Err(bad("payload hash does not match header"));
    }
    Ok(Container {
        kind: env.kind,
        body: env.body,
        payload,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_container(
            &p,
            "demo",
            &serde_json::json!({"a": 1}),
            &[1.0, -2.5, f64::MIN_POSITIVE],
        )
        .unwrap();
        let c = read_container(&p).unwrap();
        assert_eq!(c.kind, "demo");
        assert_eq!(c.payload, vec![1.0, -2.5, f64::MIN_POSITIVE]);
        assert!(c.header_as::<serde_json::Value>("other").is_err());

        let mut bytes = fs::read(&p).unwrap();
        let n = bytes.len();
        bytes[n - 3] ^= 0x40;
        fs::write(&p, &bytes).unwrap();
        let err = read_container(&p).unwrap_err().to_string();
        assert!(err.contains("hash"), "{err}");

        fs::write(&p, &bytes[..n - 8]).unwrap();
        assert!(read_container(&p).is_err());
        fs::write(&p, b"garbage").unwrap();
        assert!(read_container(&p).is_err());
    }
}
