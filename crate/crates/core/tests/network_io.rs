mod common;

use gridrisk::fixtures::{fixture, fixture_names};
use gridrisk::network::to_json;
use gridrisk::{load_network, parse_network, Error};
use proptest::prelude::*;

#[test]
fn fixtures_round_trip() {
    for name in fixture_names() {
        let prob = fixture(name).unwrap();
        assert_eq!(parse_network(&to_json(&prob)).unwrap(), prob, "{name}");
    }
}

#[test]
fn file_loading_and_missing_file() {
    let dir = std::env::temp_dir().join(format!("gridrisk-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("net.json");
    let prob = fixture("ring_asymmetric").unwrap();
    std::fs::write(&path, to_json(&prob)).unwrap();
    assert_eq!(load_network(&path).unwrap(), prob);
    assert!(matches!(load_network(dir.join("missing.json")), Err(Error::Io { .. })));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn syntax_errors_carry_location() {
    match parse_network("{\n  \"nodes\": [,]\n}") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn validation_errors_name_the_problem() {
    let base = |lines: &str, demand: f64| {
        format!(
            r#"{{"nodes":[
            {{"id":1,"role":"supply","inertia":1,"damping":1,"noise":1,"p_max":20}},
            {{"id":2,"role":"demand","inertia":1,"damping":1,"noise":1,"demand":{demand}}},
            {{"id":3,"role":"demand","inertia":1,"damping":1,"noise":1,"demand":1}}],
            "lines":[{lines}]}}"#
        )
    };
    let err = parse_network(&base(r#"{"from":1,"to":2,"capacity":5}"#, 1.0)).unwrap_err();
    assert!(err.to_string().contains("connected"), "{err}");
    let err = parse_network(&base(r#"{"from":1,"to":2,"capacity":0},{"from":2,"to":3,"capacity":1}"#, 1.0)).unwrap_err();
    assert!(err.to_string().contains("capacity"), "{err}");
    let err = parse_network(&base(r#"{"from":1,"to":2,"capacity":5},{"from":2,"to":3,"capacity":5}"#, 30.0)).unwrap_err();
    assert!(err.to_string().contains("below total demand"), "{err}");
    let err = parse_network(&base(r#"{"from":1,"to":9,"capacity":5}"#, 1.0)).unwrap_err();
    assert!(err.to_string().contains("lines[0].to"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_networks_round_trip(n in 2usize..12, extra in 0usize..10, seed in any::<u64>()) {
        let prob = common::random_network(n, seed, extra);
        prop_assert_eq!(parse_network(&to_json(&prob)).unwrap(), prob);
    }

    #[test]
    fn arbitrary_text_never_panics(text in ".{0,200}") {
        let _ = parse_network(&text);
    }
}
