//! keygen, cert issue, user add.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use qsh_core::certs::{issue, CertChain, CertificateBody, PqKey};
use qsh_core::kem::KemRegistry;
use qsh_core::keyfile::KeyFile;
use qsh_core::primitives::QshRng;
use qsh_core::sig::{read_public_key, SigAlgorithmId, SigKeyPair};
use qsh_core::userstore::UserStore;

use crate::args::{CertIssueArgs, KeygenArgs, UserAddArgs};
use crate::error::CliError;
use crate::rng_from_env;

pub fn public_path(secret: &Path) -> PathBuf {
    let mut s: OsString = secret.as_os_str().to_owned();
    s.push(".pub");
    PathBuf::from(s)
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn seed_rng(seed: Option<&str>) -> Result<QshRng, CliError> {
    let Some(hex_seed) = seed else {
        return rng_from_env();
    };
    let bytes = hex::decode(hex_seed).map_err(|e| CliError::usage(format!("--seed: {e}")))?;
    if bytes.is_empty() || bytes.len() > 32 {
        return Err(CliError::usage("--seed must be 1 to 32 bytes of hex"));
    }
    let mut seed = [0u8; 32];
    seed[..bytes.len()].copy_from_slice(&bytes);
    Ok(QshRng::from_seed_bytes(seed))
}

pub fn keygen(a: KeygenArgs) -> Result<(), CliError> {
    let registry = KemRegistry::with_defaults();
    let sig_alg = SigAlgorithmId::from_name(&a.alg).ok();
    let kem_alg = registry.by_name(&a.alg).ok();
    if sig_alg.is_none() && kem_alg.is_none() {
        let kems: Vec<String> = registry.algorithms().into_iter().map(|k| registry.name(k)).collect();
        let sigs: Vec<&str> = SigAlgorithmId::ALL.iter().map(|s| s.name()).collect();
        return Err(CliError::usage(format!(
            "unknown algorithm {:?}; expected one of {}, {}",
            a.alg,
            sigs.join(", "),
            kems.join(", ")
        )));
    }
    let mut rng = seed_rng(a.seed.as_deref())?;
    let pub_path = public_path(&a.out);
    let write_err = |p: &Path, e: &dyn std::fmt::Display| CliError::crypto(format!("cannot write {}: {e}", p.display()));
    if let Some(alg) = sig_alg {
        let kp = SigKeyPair::generate(alg, &mut rng).map_err(CliError::crypto)?;
        kp.write_secret(&a.out).map_err(|e| write_err(&a.out, &e))?;
        kp.write_public(&pub_path).map_err(|e| write_err(&pub_path, &e))?;
    } else if let Some(alg) = kem_alg {
        let kp = registry.keypair(alg, &mut rng).map_err(CliError::crypto)?;
        KeyFile::new(alg.code(), kp.secret_key).write(&a.out).map_err(|e| write_err(&a.out, &e))?;
        KeyFile::new(alg.code(), kp.public_key).write(&pub_path).map_err(|e| write_err(&pub_path, &e))?;
    }
    println!("{}: wrote {} and {}", a.alg, a.out.display(), pub_path.display());
    Ok(())
}

pub fn read_secret(path: &Path) -> Result<SigKeyPair, CliError> {
    SigKeyPair::read_secret(path).map_err(|e| CliError::input(path, e))
}

/// Public key from either a public-key file or a secret-key file.
fn read_any_public(path: &Path) -> Result<(SigAlgorithmId, Vec<u8>), CliError> {
    let kf = KeyFile::read(path).map_err(|e| CliError::input(path, e))?;
    if kf.trailer.is_empty() {
        read_public_key(path).map_err(|e| CliError::input(path, e))
    } else {
        let kp = read_secret(path)?;
        Ok((kp.alg(), kp.public_key().to_vec()))
    }
}

fn save_state(kp: &SigKeyPair, path: &Path) -> Result<(), CliError> {
    kp.write_secret(path).map_err(|e| CliError::crypto(format!("cannot update key state in {}: {e}", path.display())))
}

pub fn cert_issue(a: CertIssueArgs) -> Result<(), CliError> {
    if a.issuer_chain.is_some() && (a.issuer_classical_key.is_none() || a.issuer_pq_key.is_none()) {
        return Err(CliError::usage("--issuer-chain needs --issuer-classical-key and --issuer-pq-key"));
    }
    let mut rng = rng_from_env()?;
    let now = unix_now();
    let mut body = |issuer: &str, classical: (SigAlgorithmId, Vec<u8>), pq: (SigAlgorithmId, Vec<u8>), is_ca: bool| {
        if classical.0.quantum_safe() || !pq.0.quantum_safe() {
            return Err(CliError::usage("--classical-key must be a classical key and --pq-key a post-quantum key"));
        }
        Ok(CertificateBody {
            subject: a.subject.clone(),
            issuer: issuer.to_string(),
            serial: rng.random_array(),
            not_before: now,
            not_after: now + a.days * 86_400,
            classical_alg: classical.0,
            classical_pub: classical.1,
            pq: Some(PqKey { alg: pq.0, public: pq.1 }),
            is_ca,
        })
    };

    let chain = match &a.issuer_chain {
        None => {
            let mut classical = read_secret(&a.classical_key)?;
            let mut pq = read_secret(&a.pq_key)?;
            let b = body(
                &a.subject,
                (classical.alg(), classical.public_key().to_vec()),
                (pq.alg(), pq.public_key().to_vec()),
                true,
            )?;
            let cert = issue(&mut classical, Some(&mut pq), b).map_err(CliError::crypto)?;
            save_state(&pq, &a.pq_key)?;
            CertChain::new(vec![cert]).map_err(CliError::crypto)?
        }
        Some(issuer_path) => {
            let issuer_chain = CertChain::read(issuer_path).map_err(|e| CliError::input(issuer_path, e))?;
            let (ic_path, ip_path) = (a.issuer_classical_key.as_ref().unwrap(), a.issuer_pq_key.as_ref().unwrap());
            let mut ic = read_secret(ic_path)?;
            let mut ip = read_secret(ip_path)?;
            let issuer = &issuer_chain.leaf().body;
            if !issuer.is_ca {
                return Err(CliError::crypto(format!("issuer {:?} is not a CA", issuer.subject)));
            }
            let pq_matches = issuer.pq.as_ref().is_some_and(|k| k.alg == ip.alg() && k.public == ip.public_key());
            if issuer.classical_alg != ic.alg() || issuer.classical_pub != ic.public_key() || !pq_matches {
                return Err(CliError::crypto("issuer keys do not match the issuer certificate"));
            }
            let b = body(&issuer.subject, read_any_public(&a.classical_key)?, read_any_public(&a.pq_key)?, a.ca)?;
            let cert = issue(&mut ic, Some(&mut ip), b).map_err(CliError::crypto)?;
            save_state(&ip, ip_path)?;
            let mut certs = vec![cert];
            certs.extend(issuer_chain.certs().iter().cloned());
            CertChain::new(certs).map_err(CliError::crypto)?
        }
    };
    chain.write(&a.out).map_err(|e| CliError::crypto(format!("cannot write {}: {e}", a.out.display())))?;
    println!("issued {:?} ({} certificate(s) in {})", a.subject, chain.len(), a.out.display());
    Ok(())
}

/// Password file contents minus one trailing line break.
pub fn read_password(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let pw = text.strip_suffix('\n').map(|t| t.strip_suffix('\r').unwrap_or(t)).unwrap_or(&text);
    if pw.is_empty() {
        return Err(CliError::usage(format!("{} holds an empty password", path.display())));
    }
    Ok(pw.to_string())
}

pub fn user_add(a: UserAddArgs) -> Result<(), CliError> {
    let password = read_password(&a.password_file)?;
    let mut store = if a.users.exists() {
        UserStore::load(&a.users).map_err(|e| CliError::input(&a.users, e))?
    } else {
        UserStore::new()
    };
    let mut rng = rng_from_env()?;
    store.add_user(&a.user, &password, a.iterations, &mut rng).map_err(CliError::usage)?;
    store.save(&a.users).map_err(|e| CliError::crypto(format!("cannot write {}: {e}", a.users.display())))?;
    println!("added {:?} to {} ({} user(s))", a.user, a.users.display(), store.len());
    Ok(())
}
