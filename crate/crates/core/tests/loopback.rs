mod common;

use std::io::{BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::thread;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use trailpsi::crypto::{DhGroup, PaillierKeyPair, RsaKeyPair};
use trailpsi::encoding::EncodingParams;
use trailpsi::net::wire::{decode_error, read_frame, write_frame};
use trailpsi::net::{
    query_detailed, ErrorCode, FrameType, Handshake, NetError, QueryConfig, RunningServer, Server, ServerConfig,
    ServerKeys, TrailRecord, TrailStore,
};
use trailpsi::protocol::{Model, SchemeId};

struct Fixture {
    server: RunningServer,
    records: Vec<TrailRecord>,
    client: Vec<TrailRecord>,
    paillier: Arc<PaillierKeyPair>,
}

fn fixture(seed: u64, m: usize, n: usize, config: ServerConfig) -> Fixture {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (records, client) = common::trails(&mut rng, m, n, n / 2);
    let store = TrailStore::from_records(EncodingParams::default(), &records).unwrap();
    let keys = ServerKeys {
        rsa: Some(Arc::new(RsaKeyPair::generate(256, &BigUint::from(65537u32), &mut rng).unwrap())),
        group: Some(DhGroup::modp1024()),
    };
    let server = Server::bind("127.0.0.1:0", store, config, keys).unwrap().spawn().unwrap();
    let paillier = Arc::new(PaillierKeyPair::generate(256, &mut rng).unwrap());
    Fixture { server, records, client, paillier }
}

fn query_cfg(f: &Fixture, scheme: SchemeId) -> QueryConfig {
    let mut cfg = QueryConfig::new(scheme, "default");
    cfg.paillier = Some(f.paillier.clone());
    cfg
}

fn points(records: &[TrailRecord]) -> Vec<trailpsi::encoding::TrailPoint> {
    records.iter().map(TrailRecord::point).collect()
}

#[test]
fn every_scheme_matches_the_file_oracle() {
    let f = fixture(1, 300, 24, ServerConfig::default());
    let expected = common::file_oracle(&f.records, &f.client, &EncodingParams::default());
    assert!(!expected.is_empty());
    for scheme in SchemeId::ALL {
        let (report, outcome) = query_detailed(&f.server.addr.to_string(), &points(&f.client), &query_cfg(&f, scheme))
            .unwrap_or_else(|e| panic!("{scheme}: {e}"));
        assert_eq!(outcome.result.matched, expected, "{scheme}");
        assert_eq!(report.match_count as usize, expected.len(), "{scheme}");
    }
    f.server.stop().unwrap();
}

#[test]
fn frames_follow_the_scheme_model() {
    let f = fixture(2, 50, 6, ServerConfig::default());
    let addr = f.server.addr.to_string();
    for scheme in SchemeId::ALL {
        let (_, o) = query_detailed(&addr, &points(&f.client), &query_cfg(&f, scheme)).unwrap();
        assert_eq!(o.frames_sent[0], FrameType::Handshake);
        assert_eq!(o.frames_received[0], FrameType::Handshake);
        let sent = o.frames_sent.iter().filter(|t| **t == FrameType::Transcript).count();
        let received = o.frames_received.len() - 1;
        match scheme.model() {
            Model::Pull => assert_eq!((sent, received), (0, 1), "{scheme}"),
            Model::Push => {
                assert_eq!((sent, received), (1, 1), "{scheme}");
                assert_eq!(o.frames_received[1], FrameType::Result);
            }
            Model::Hybrid => assert!(sent >= 1 && received >= 1, "{scheme}"),
        }
        assert_eq!(sent + received, scheme.message_count(), "{scheme}");
    }
    f.server.stop().unwrap();
}

#[test]
fn concurrent_clients_get_their_own_results() {
    let f = fixture(3, 200, 12, ServerConfig::default());
    let mut rng = ChaCha20Rng::seed_from_u64(33);
    let (_, other) = common::trails(&mut rng, 1, 12, 0);
    let addr = f.server.addr.to_string();
    let handles: Vec<_> = [(f.client.clone(), SchemeId::DiffieHellman), (other.clone(), SchemeId::BlindRsa)]
        .into_iter()
        .map(|(trail, scheme)| {
            let addr = addr.clone();
            let cfg = query_cfg(&f, scheme);
            thread::spawn(move || query_detailed(&addr, &points(&trail), &cfg).unwrap().1.result.matched)
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    let params = EncodingParams::default();
    assert_eq!(results[0], common::file_oracle(&f.records, &f.client, &params));
    assert_eq!(results[1], common::file_oracle(&f.records, &other, &params));
    f.server.stop().unwrap();
}

#[test]
fn oversized_client_set_is_refused() {
    let config = ServerConfig { max_client_elements: 8, ..ServerConfig::default() };
    let f = fixture(4, 20, 4, config);
    // 4 points x 3 buckets = 12 digests
    let err = query_detailed(&f.server.addr.to_string(), &points(&f.client), &query_cfg(&f, SchemeId::DiffieHellman))
        .unwrap_err();
    assert!(matches!(err, NetError::Rejected { code: Some(ErrorCode::LimitExceeded), .. }), "{err}");
    f.server.stop().unwrap();
}

#[test]
fn unknown_town_and_disabled_scheme_are_refused() {
    let config = ServerConfig { schemes: vec![SchemeId::NaivePull], ..ServerConfig::default() };
    let f = fixture(5, 20, 2, config);
    let addr = f.server.addr.to_string();
    let mut cfg = query_cfg(&f, SchemeId::NaivePull);
    cfg.town = "atlantis".into();
    let err = query_detailed(&addr, &points(&f.client), &cfg).unwrap_err();
    assert!(matches!(err, NetError::Rejected { code: Some(ErrorCode::UnknownTown), .. }), "{err}");
    let err = query_detailed(&addr, &points(&f.client), &query_cfg(&f, SchemeId::DiffieHellman)).unwrap_err();
    assert!(matches!(err, NetError::Rejected { code: Some(ErrorCode::Unsupported), .. }), "{err}");
    f.server.stop().unwrap();
}

fn raw_exchange(addr: &str, ty: FrameType, payload: &[u8]) -> (FrameType, Vec<u8>) {
    let stream = TcpStream::connect(addr).unwrap();
    let mut w = BufWriter::new(stream.try_clone().unwrap());
    write_frame(&mut w, ty, payload).unwrap();
    w.flush().unwrap();
    read_frame(&mut BufReader::new(stream), 1 << 20).unwrap().expect("server replies")
}

#[test]
fn unknown_scheme_tag_gets_error_code_1() {
    let f = fixture(6, 10, 2, ServerConfig::default());
    let addr = f.server.addr.to_string();
    let mut hs = Handshake::new(SchemeId::NaivePull, "default", vec![BigUint::from(1u8)]);
    hs.scheme = 0xFF;
    let (ty, payload) = raw_exchange(&addr, FrameType::Handshake, &hs.encode());
    assert_eq!(ty, FrameType::Error);
    let (code, raw, _) = decode_error(&payload);
    assert_eq!((code, raw), (Some(ErrorCode::Unsupported), 0x01));

    // a transcript frame before any handshake is a protocol violation
    let (ty, payload) = raw_exchange(&addr, FrameType::Transcript, &[0, 0]);
    assert_eq!(ty, FrameType::Error);
    assert_eq!(decode_error(&payload).0, Some(ErrorCode::Protocol));
    f.server.stop().unwrap();
}

#[test]
fn shutdown_waits_for_idle_server() {
    let f = fixture(7, 5, 1, ServerConfig::default());
    let addr = f.server.addr;
    f.server.stop().unwrap();
    assert!(TcpStream::connect(addr).is_err());
}
