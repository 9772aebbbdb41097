//! Sequential timed handshakes.

use std::net::SocketAddr;
use std::time::Instant;

use qsh_core::handshake::{run_client, ClientConfig, HandshakeError, HandshakeMode, NegotiationOffer};
use qsh_core::kem::KemAlgorithmId;
use qsh_core::primitives::QshRng;
use qsh_core::transport::{TcpChannel, DEFAULT_TIMEOUT};
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSample {
    pub algorithm: String,
    pub iteration: u64,
    pub duration_ns: u64,
}

impl BenchSample {
    pub fn millis(&self) -> f64 {
        self.duration_ns as f64 / 1e6
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub algorithms: Vec<String>,
    pub iterations: u64,
    pub warmup: u64,
}

pub const DEFAULT_WARMUP: u64 = 10;

/// Runs `warmup` untimed then `iterations` timed calls of `op` per
/// algorithm, strictly one after another. The clock wraps the whole call.
pub fn run_timed(
    config: &BenchConfig,
    mut op: impl FnMut(&str, u64) -> Result<(), BenchError>,
) -> Result<Vec<BenchSample>, BenchError> {
    if config.iterations == 0 {
        return Err(BenchError::NoIterations);
    }
    let mut samples = Vec::with_capacity(config.algorithms.len() * config.iterations as usize);
    for alg in &config.algorithms {
        for i in 0..config.warmup {
            op(alg, i).map_err(|e| e.during_warmup())?;
        }
        for iteration in 0..config.iterations {
            let start = Instant::now();
            op(alg, iteration)?;
            let ns = start.elapsed().as_nanos().clamp(1, u64::MAX as u128) as u64;
            samples.push(BenchSample { algorithm: alg.clone(), iteration, duration_ns: ns });
        }
    }
    Ok(samples)
}

/// Client config offering only `alg`, in the flow matching its name.
pub fn client_for(template: &ClientConfig, alg: KemAlgorithmId, rng: &mut QshRng) -> Result<ClientConfig, HandshakeError> {
    let mode = HandshakeMode::for_algorithm_name(&template.registry.name(alg));
    let offer = NegotiationOffer::new(vec![alg], template.offer.sig_prefs().to_vec(), vec![mode], rng.random_array())?;
    Ok(ClientConfig { offer, mode, ..template.clone() })
}

/// One fresh TCP connection and full handshake per sample. A rejected
/// password counts as a failure.
pub fn run_benchmark(
    addr: SocketAddr,
    config: &BenchConfig,
    template: &ClientConfig,
    rng: &mut QshRng,
) -> Result<Vec<BenchSample>, BenchError> {
    let ids = config
        .algorithms
        .iter()
        .map(|name| template.registry.by_name(name).map_err(|e| BenchError::Config(e.to_string())))
        .collect::<Result<Vec<KemAlgorithmId>, _>>()?;
    run_timed(config, |name, iteration| {
        let alg = ids[config.algorithms.iter().position(|a| a == name).unwrap()];
        let fail = |cause: String| BenchError::Handshake { algorithm: name.to_string(), iteration, cause };
        let client = client_for(template, alg, rng).map_err(|e| fail(e.to_string()))?;
        let mut channel = TcpChannel::connect(addr, DEFAULT_TIMEOUT).map_err(|e| fail(format!("transport: {e}")))?;
        let report = run_client(&mut channel, client, rng.fork()).map_err(|e| fail(e.to_string()))?;
        if !report.auth.success {
            return Err(fail(format!("authentication rejected: {}", report.auth.detail)));
        }
        Ok(())
    })
}
