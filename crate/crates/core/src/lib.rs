pub mod certs;
pub mod fixtures;
pub mod handshake;
pub mod kem;
pub mod keyfile;
pub mod primitives;
pub mod sig;
pub mod transport;
pub mod userstore;
