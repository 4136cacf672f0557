//! JSON key files. Integers are lowercase hex.

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use ppsc_core::{KeyPair, PublicKey};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct PublicKeyFile {
    kappa: u64,
    n: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SecretKeyFile {
    kappa: u64,
    n: String,
    p: String,
    q: String,
}

fn hex(v: &BigUint) -> String {
    v.to_str_radix(16)
}

fn unhex(s: &str, what: &str) -> Result<BigUint, String> {
    BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| format!("{what} is not a hex integer"))
}

/// `PREFIX.pub.json` and `PREFIX.key.json`.
pub fn paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with(".pub.json"), with(".key.json"))
}

pub fn write(keys: &KeyPair, prefix: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
    let (pub_path, key_path) = paths(prefix);
    let n = keys.public.n();
    let (p, q) = keys.secret.primes();
    let public = PublicKeyFile { kappa: keys.public.bits(), n: hex(n) };
    let secret = SecretKeyFile { kappa: keys.public.bits(), n: hex(n), p: hex(p), q: hex(q) };
    fs::write(&pub_path, serde_json::to_string_pretty(&public)? + "\n")?;
    fs::write(&key_path, serde_json::to_string_pretty(&secret)? + "\n")?;
    Ok((pub_path, key_path))
}

pub fn read_secret(path: &Path) -> Result<KeyPair, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let f: SecretKeyFile = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let keys = KeyPair::from_stored_primes(unhex(&f.p, "p")?, unhex(&f.q, "q")?)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    if *keys.public.n() != unhex(&f.n, "n")? || keys.public.bits() != f.kappa {
        return Err(format!("{}: n or kappa does not match the primes", path.display()));
    }
    Ok(keys)
}

pub fn read_public(path: &Path) -> Result<PublicKey, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let f: PublicKeyFile = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let pk = PublicKey::from_modulus(unhex(&f.n, "n")?).map_err(|e| format!("{}: {e}", path.display()))?;
    if pk.bits() != f.kappa {
        return Err(format!("{}: modulus has {} bits, file says {}", path.display(), pk.bits(), f.kappa));
    }
    Ok(pk)
}
