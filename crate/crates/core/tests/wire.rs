use std::io::Cursor;
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use activeloc::env::{Environment, EpisodeConfig, NoiseProfile};
use activeloc::filter::{Action, BeliefGrid};
use activeloc::grid::CellPose;
use activeloc::lidar::{raycast, Scan};
use activeloc::likelihood::{fine_block, LikelihoodProvider};
use activeloc::mapgen::{GridMap, MapSpec};
use activeloc::policy::{PolicyInput, PolicyKind, PolicyProvider};
use activeloc::wire::{
    belief_checksum, field, Connection, RemoteBlockProvider, RemoteLikelihood, RemotePolicy, Request, ServedMap,
    Server, Tensor, DEFAULT_TIMEOUT, PROTOCOL_VERSION,
};
use activeloc::ContinuousPose;
use proptest::prelude::*;
use serde_json::Value;

fn fixture_map(seed: u64) -> GridMap {
    MapSpec::for_grid(7, 7, 4).unwrap().generate(seed).unwrap()
}

fn served(n: usize) -> Vec<ServedMap> {
    (0..n).map(|i| ServedMap { id: format!("m{i}"), map: fixture_map(100 + i as u64), seed: 900 + i as u64 }).collect()
}

/// Starts a server thread that handles `connections` clients, then exits.
fn spawn_server(server: Server<f64>, connections: usize) -> (std::net::SocketAddr, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let mut server = server;
        server.serve_listener(&listener, Some(connections)).unwrap();
    });
    (addr, handle)
}

fn tensor(reply: &Value, path: &[&str]) -> Tensor {
    let mut v = reply;
    for p in path {
        v = &v[*p];
    }
    serde_json::from_value(v.clone()).unwrap()
}

#[test]
fn golden_episode_replays_exactly() {
    let cfg = EpisodeConfig::with_profile(NoiseProfile::Moderate);
    let maps = served(2);
    let actions: [i64; 11] = [2, 0, 2, 2, 1, 2, 0, 0, 2, 1, 2];

    let mut env = Environment::<f64>::new(maps[1].map.clone(), cfg, maps[1].seed).unwrap();
    let first = env.reset(41).unwrap();
    let mut expected = vec![(0.0, belief_checksum(first.belief.as_slice()))];
    for a in actions {
        let out = env.step(Action::from_index(a as usize).unwrap()).unwrap();
        expected.push((out.reward, belief_checksum(out.observation.belief.as_slice())));
    }

    let (addr, handle) = spawn_server(Server::new(maps, cfg).unwrap(), 1);
    let mut conn = Connection::tcp(addr, DEFAULT_TIMEOUT).unwrap();
    let hello = conn.hello().unwrap();
    assert_eq!(hello["geometry"]["headings"], 4);
    assert_eq!(hello["geometry"]["rows"], 7);
    assert_eq!(hello["horizon"], 11);

    let reset = conn.call(&Request::Reset { seed: 41, map_id: Some("m1".into()) }).unwrap();
    assert_eq!(reset["info"]["belief_checksum"], expected[0].1.as_str());
    let belief = tensor(&reset, &["observation", "belief"]);
    assert_eq!(belief.shape, vec![4, 7, 7]);
    let total: f32 = belief.to_f32().unwrap().iter().sum();
    assert!((total - 1.0).abs() < 1e-6);
    assert_eq!(tensor(&reset, &["observation", "map"]).shape, vec![7, 7]);

    for (k, a) in actions.iter().enumerate() {
        let r = conn.call(&Request::Step { action: *a }).unwrap();
        assert_eq!(r["reward"].as_f64().unwrap(), expected[k + 1].0, "reward at step {}", k + 1);
        assert_eq!(r["info"]["belief_checksum"], expected[k + 1].1.as_str());
        assert_eq!(r["done"].as_bool().unwrap(), k + 1 == actions.len());
        // the checksum covers exactly the tensor bytes
        let b = tensor(&r, &["observation", "belief"]).to_f32().unwrap();
        assert_eq!(belief_checksum(&b), expected[k + 1].1);
    }
    let err = conn.call(&Request::Step { action: 0 }).unwrap_err();
    assert!(err.to_string().contains("finished"), "{err}");
    // still usable after an error reply
    conn.call(&Request::Reset { seed: 41, map_id: Some("m1".into()) }).unwrap();
    conn.call(&Request::Close).unwrap();
    handle.join().unwrap();
}

#[test]
fn every_bad_request_gets_one_error_reply() {
    let mut server = Server::<f64>::new(served(1), EpisodeConfig::default()).unwrap();
    let input = [
        "not json",
        r#"{"cmd":"teleport"}"#,
        r#"{"cmd":"step","action":0}"#,
        r#"{"cmd":"hello","version":99}"#,
        r#"{"cmd":"reset","seed":1,"map_id":"nope"}"#,
        r#"{"cmd":"reset","seed":1}"#,
        r#"{"cmd":"step","action":3}"#,
        r#"{"cmd":"step","action":-1}"#,
        r#"{"cmd":"policy_query","belief":{"shape":[1],"dtype":"f32","data":"AACAPw=="},"map":{"shape":[1],"dtype":"f32","data":""},"scan":{"shape":[1],"dtype":"f32","data":""}}"#,
        r#"{"cmd":"close"}"#,
        r#"{"cmd":"hello","version":1}"#,
    ]
    .join("\n");
    let mut out = Vec::new();
    server.serve_stream(Cursor::new(input), &mut out).unwrap();
    let replies: Vec<Value> =
        String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    // the line after close is never read
    assert_eq!(replies.len(), 10);
    let oks: Vec<bool> = replies.iter().map(|r| r["ok"].as_bool().unwrap()).collect();
    assert_eq!(oks, [false, false, false, false, false, true, false, false, false, true]);
    assert!(replies[3]["error"].as_str().unwrap().contains("version"));
    assert!(replies[2]["error"].as_str().unwrap().contains("reset"));
    assert!(replies[8]["error"].as_str().unwrap().contains("policy"));
}

#[test]
fn remote_models_match_in_process_ones() {
    let cfg = EpisodeConfig::default();
    let maps = served(1);
    let map = Arc::new(maps[0].map.clone());
    let env = Environment::<f64>::new(maps[0].map.clone(), cfg, maps[0].seed).unwrap();
    let (addr, handle) = spawn_server(Server::new(maps, cfg).unwrap().with_policy(PolicyKind::Aml), 3);

    let g = *map.geometry();
    let cell = map.free_cells()[3];
    let (x, y) = g.centroid(cell.0, cell.1);
    let scan: Scan<f64> = raycast(&map, &ContinuousPose::new(x + 0.05, y, g.heading_angle(1)), &cfg.lidar).unwrap();

    let remote = RemoteLikelihood::new(Connection::tcp(addr, DEFAULT_TIMEOUT).unwrap(), Arc::clone(&map)).unwrap();
    let got = remote.likelihood(&scan).unwrap();
    let want = env.likelihood_provider().likelihood(&scan).unwrap();
    assert_eq!(got.shape(), want.shape());
    assert_eq!(got.values.argmax(), want.values.argmax());
    for (a, b) in got.values.as_slice().iter().zip(want.values.as_slice()) {
        assert!((a - b).abs() <= 1e-6 * b.max(1e-30) + 1e-12, "{a} vs {b}");
    }
    // one client at a time
    drop(remote);

    let fine = RemoteBlockProvider::new(Connection::tcp(addr, DEFAULT_TIMEOUT).unwrap());
    let target = CellPose::new(1, cell.0, cell.1);
    let h = cfg.hierarchy;
    let got = fine_block(&map, &scan, target, &h, &fine).unwrap();
    let want = fine_block(&map, &scan, target, &h, env.fine_provider().as_ref()).unwrap();
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    drop(fine);

    let policy = RemotePolicy::new(Connection::tcp(addr, DEFAULT_TIMEOUT).unwrap(), "remote-aml");
    let local = PolicyKind::Aml.build(env.matrix(), cfg.beta, cfg.noise.motion).unwrap();
    let low = map.coarse_obstacles();
    let mut belief = BeliefGrid::<f64>::new(activeloc::grid::Grid3::zeros(g.shape()));
    // a small two-way ambiguity
    let free = map.free_cells();
    belief.values.set(CellPose::new(0, free[0].0, free[0].1), 0.5);
    belief.values.set(CellPose::new(2, free[5].0, free[5].1), 0.5);
    let input = PolicyInput { belief: &belief, map: &map, map_low: &low, scan_low: &low };
    assert_eq!(PolicyProvider::<f64>::action_dist(&policy, &input).unwrap(), local.action_dist(&input).unwrap());
    assert_eq!(PolicyProvider::<f64>::name(&policy), "remote-aml");
    drop(policy);
    handle.join().unwrap();
}

#[test]
fn hello_reports_version_and_maps() {
    let mut server = Server::<f32>::new(served(2), EpisodeConfig::default()).unwrap();
    let (reply, _) = server.handle_line(&serde_json::to_string(&Request::Hello { version: PROTOCOL_VERSION }).unwrap());
    assert_eq!(reply["version"], PROTOCOL_VERSION);
    assert_eq!(field::<Vec<String>>(&reply, "maps").unwrap(), vec!["m0", "m1"]);
}

#[test]
fn mixed_geometries_are_refused() {
    let mut maps = served(1);
    maps.push(ServedMap { id: "big".into(), map: MapSpec::for_grid(9, 9, 4).unwrap().generate(1).unwrap(), seed: 0 });
    assert!(Server::<f64>::new(maps, EpisodeConfig::default()).is_err());
    assert!(Server::<f64>::new(Vec::new(), EpisodeConfig::default()).is_err());
}

proptest! {
    #[test]
    fn tensors_round_trip_bit_exact(values in prop::collection::vec(any::<f32>(), 0..300)) {
        let t = Tensor::from_f32(&[values.len()], &values).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Tensor = serde_json::from_str(&json).unwrap();
        let decoded = back.to_f32().unwrap();
        prop_assert_eq!(decoded.len(), values.len());
        for (a, b) in decoded.iter().zip(&values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
