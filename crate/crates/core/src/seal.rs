// SPDX-License-Identifier: Apache-2.0

//! Authenticated symmetric encryption for owner/client data at rest and for
//! document blocks (ChaCha20-Poly1305, random 96-bit nonce per seal).

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::{CryptoRng, Rng};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"ESEAL1";
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
/// Bytes a sealed payload adds on top of its plaintext.
pub const SEAL_OVERHEAD: usize = MAGIC.len() + NONCE_LEN + TAG_LEN;

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealKey([u8; 32]);

impl std::fmt::Debug for SealKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SealKey(..)")
    }
}

impl SealKey {
    pub fn generate<R: Rng + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let mut k = [0u8; 32];
        rng.fill_bytes(&mut k);
        Self(k)
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn cipher(&self) -> ChaCha20Poly1305 {
        ChaCha20Poly1305::new(Key::from_slice(&self.0))
    }
}

pub fn seal_bytes<R: Rng + CryptoRng + ?Sized>(
    key: &SealKey,
    plaintext: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>> {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let body = key
        .cipher()
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .map_err(|_| Error::Format("encryption failed".into()))?;
    let mut out = Vec::with_capacity(SEAL_OVERHEAD + plaintext.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn open_bytes(key: &SealKey, sealed: &[u8]) -> Result<Vec<u8>> {
    if sealed.len() < SEAL_OVERHEAD || &sealed[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("not a sealed payload".into()));
    }
    let (nonce, body) = sealed[MAGIC.len()..].split_at(NONCE_LEN);
    key.cipher()
        .decrypt(Nonce::from_slice(nonce), body)
        .map_err(|_| Error::Decryption)
}

pub fn seal_json<T: Serialize, R: Rng + CryptoRng + ?Sized>(
    key: &SealKey,
    value: &T,
    rng: &mut R,
) -> Result<Vec<u8>> {
    seal_bytes(key, &serde_json::to_vec(value)?, rng)
}

pub fn open_json<T: DeserializeOwned>(key: &SealKey, sealed: &[u8]) -> Result<T> {
    Ok(serde_json::from_slice(&open_bytes(key, sealed)?)?)
}

/// True when `bytes` starts with the sealed-payload header.
pub fn is_sealed(bytes: &[u8]) -> bool {
    bytes.len() >= SEAL_OVERHEAD && &bytes[..MAGIC.len()] == MAGIC
}
