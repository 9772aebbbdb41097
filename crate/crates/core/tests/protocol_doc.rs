//! PROTOCOL.md and MIGRATION.md are checked against the code.

use std::collections::BTreeMap;
use std::path::Path;

use qsh_core::handshake::messages::{alert_fields, client_hello, client_key_share, sealed, server_hello};
use qsh_core::kem::KemRegistry;
use qsh_core::sig::SigAlgorithmId;
use qsh_core::transport::{alert, Frame, MsgType, MAGIC, VERSION};

fn doc(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Markdown table rows (cells trimmed) under the first heading that starts
/// with `heading`, up to the next heading. Header and rule rows dropped.
fn table(text: &str, heading: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines().skip_while(|l| !(l.starts_with('#') && l.trim_start_matches('#').trim().starts_with(heading)));
    lines.next().unwrap_or_else(|| panic!("no section {heading:?}"));
    let rows: Vec<Vec<String>> = lines
        .take_while(|l| !l.starts_with('#'))
        .filter(|l| l.starts_with('|'))
        .map(|l| l.trim().trim_matches('|').split('|').map(|c| c.trim().trim_matches('`').to_string()).collect())
        .collect();
    rows.into_iter().skip(2).collect()
}

fn hex_code(cell: &str) -> u16 {
    u16::from_str_radix(cell.trim_start_matches("0x"), 16).unwrap_or_else(|_| panic!("bad code {cell:?}"))
}

#[test]
fn golden_alert_hex_matches_encoder_and_vector() {
    let text = doc("PROTOCOL.md");
    let rows = table(&text, "Alert codes");
    let golden = rows.iter().find(|r| r[0] == "Alert(0x01)").expect("golden alert row");
    let expected = hex::encode(Frame::alert(alert::NO_MUTUAL_ALGORITHM).encode());
    assert_eq!(golden[1], expected);
    assert_eq!(doc("vectors/alert.hex").trim(), expected);
    let header = table(&text, "Frame");
    assert_eq!(header[0][3].replace('`', "").split_whitespace().take(4).collect::<String>(), hex::encode(MAGIC));
    assert_eq!(header[1][3], format!("{VERSION:02x}"));
}

#[test]
fn all_six_message_types_documented() {
    let rows = table(&doc("PROTOCOL.md"), "Message types");
    let documented: Vec<(u16, String)> = rows.iter().map(|r| (hex_code(&r[0]), r[1].clone())).collect();
    let actual: Vec<(u16, String)> = MsgType::ALL.iter().map(|m| (m.code() as u16, m.name().to_string())).collect();
    assert_eq!(documented, actual);
}

#[test]
fn alert_codes_documented() {
    let rows = table(&doc("PROTOCOL.md"), "Alert codes");
    let codes: Vec<(u8, &str)> = rows.iter().filter(|r| r[0].starts_with("0x")).map(|r| (hex_code(&r[0]) as u8, r[1].as_str())).collect();
    assert_eq!(codes.len(), 4);
    for (code, meaning) in codes {
        assert_eq!(meaning, alert::describe(code), "alert 0x{code:02x}");
    }
}

#[test]
fn field_tables_match_message_schemas() {
    let text = doc("PROTOCOL.md");
    let expected: [(MsgType, Vec<(u8, &str)>); 6] = [
        (
            MsgType::ClientHello,
            vec![
                (client_hello::MODES, "modes"),
                (client_hello::KEM_PREFS, "kem_prefs"),
                (client_hello::SIG_PREFS, "sig_prefs"),
                (client_hello::NONCE, "nonce"),
                (client_hello::KEY_SHARE_ALG, "key_share_alg"),
                (client_hello::KEY_SHARE, "key_share"),
            ],
        ),
        (
            MsgType::ServerHello,
            vec![
                (server_hello::MODE, "mode"),
                (server_hello::KEM, "kem"),
                (server_hello::SIG, "sig"),
                (server_hello::NONCE, "nonce"),
                (server_hello::KEY_MATERIAL, "key_material"),
                (server_hello::CHAIN, "chain"),
                (server_hello::SIGNATURE, "signature"),
            ],
        ),
        (MsgType::ClientKeyShare, vec![(client_key_share::CIPHERTEXT, "ciphertext")]),
        (MsgType::EncryptedCredentials, vec![(sealed::CIPHERTEXT, "ciphertext"), (sealed::TAG, "tag")]),
        (MsgType::AuthResult, vec![(sealed::CIPHERTEXT, "ciphertext"), (sealed::TAG, "tag")]),
        (MsgType::Alert, vec![(alert_fields::CODE, "code")]),
    ];
    for (msg, fields) in expected {
        let heading = format!("{} (0x{:02x})", msg.name(), msg.code());
        let rows = table(&text, &heading);
        let documented: Vec<(u8, &str)> = rows.iter().map(|r| (hex_code(&r[0]) as u8, r[1].as_str())).collect();
        assert_eq!(documented, fields, "{heading}");
    }
}

#[test]
fn algorithm_table_matches_registries() {
    let rows = table(&doc("PROTOCOL.md"), "Algorithm codes");
    let registry = KemRegistry::with_defaults();
    let mut documented = BTreeMap::new();
    for r in &rows {
        documented.insert(hex_code(&r[0]), (r[1].clone(), r[3].parse::<usize>().unwrap(), r[4].parse::<usize>().unwrap()));
    }
    let mut actual = BTreeMap::new();
    for id in registry.algorithms() {
        let d = registry.descriptor(id).unwrap();
        actual.insert(id.code(), (d.name.clone(), d.public_key_len, d.ciphertext_len));
    }
    for s in SigAlgorithmId::ALL {
        actual.insert(s.code(), (s.name().to_string(), s.public_key_len(), s.signature_len()));
    }
    assert_eq!(documented, actual);
}

#[test]
fn migration_runbook_has_seven_steps_in_order() {
    let rows = table(&doc("MIGRATION.md"), "The seven steps");
    let steps: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(steps, ["Engage", "Educate", "Examine", "Evolve", "Estimate", "Execute", "Essay"]);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (i + 1).to_string());
        assert!(r.iter().all(|c| !c.is_empty()), "row {} has an empty cell", i + 1);
    }
}
