use std::process::{Command, Output};

fn gridrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridrisk")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn thresholds_table() {
    let o = gridrisk(&["thresholds"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "epsilon,r_epsilon\n0.050,-1.65\n0.040,-1.76\n0.030,-1.89\n0.020,-2.06\n0.010,-2.33\n0.001,-3.08\n"
    );
}

#[test]
fn evaluate_outside_polytope_exits_2() {
    let o = gridrisk(&["evaluate", "--fixture", "eight_node", "--start", "13,12,12"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p_1 = 13 exceeds its ceiling 12"), "{}", stderr(&o));
    let o = gridrisk(&["evaluate", "--fixture", "eight_node", "--start", "12,14,16.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p_3"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        vec!["frobnicate"],
        vec!["evaluate"],
        vec!["optimize", "--fixture", "eight_node", "--max-iter", "lots"],
        vec!["evaluate", "--fixture", "eight_node", "--start", "1,2"],
        vec!["evaluate", "--fixture", "nope"],
        vec!["evaluate", "--network", "/nonexistent/net.json"],
        vec!["evaluate", "--fixture", "eight_node", "--r-epsilon", "-1"],
    ] {
        let o = gridrisk(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    assert_eq!(gridrisk(&["--help"]).status.code(), Some(0));
    assert_eq!(gridrisk(&["--version"]).status.code(), Some(0));
}

#[test]
fn evaluate_golden() {
    let o = gridrisk(&["evaluate", "--fixture", "eight_node", "--start", "11.7679,13.7632,13.5247"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,j,abs_angle,sigma,f,flow_bound,f_a,f_b,p_out_bound");
    assert_eq!(lines.len(), 11);
    assert!(lines.iter().any(|l| l.starts_with("6,7,0.527")), "{text}");
    assert!(stderr(&o).contains("f=1.3530"));
}

#[test]
fn network_file_and_fixture_agree() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("ring.json");
    std::fs::write(&net, gridrisk::fixtures::fixture_source("ring_asymmetric").unwrap()).unwrap();
    let out = dir.path().join("report.csv");
    let a = gridrisk(&["proportional", "--network", net.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert!(stdout(&a).is_empty());
    let b = gridrisk(&["proportional", "--fixture", "ring_asymmetric"]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), stdout(&b));
}

#[test]
fn malformed_network_file_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("bad.json");
    std::fs::write(&net, "{\"nodes\": [\n  {\"id\": 1, \"role\": \"boss\"}\n]}").unwrap();
    let o = gridrisk(&["evaluate", "--network", net.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn multi_start_file() {
    let dir = tempfile::tempdir().unwrap();
    let starts = dir.path().join("starts.txt");
    std::fs::write(&starts, "# eight-node starts\n12,12,12\n11,11,14\n").unwrap();
    let o = gridrisk(&["optimize", "--fixture", "eight_node", "--multi-start", starts.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("f_star=1.35"), "{}", stderr(&o));
    std::fs::write(&starts, "12,12\n").unwrap();
    let o = gridrisk(&["optimize", "--fixture", "eight_node", "--multi-start", starts.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_layout() {
    let o = gridrisk(&["compare", "--fixture", "eight_node", "--start", "12,12,12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap().len(), 13);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 10);
    // ordered by the proportional dispatch's f
    assert_eq!((&rows[0][0], &rows[0][1]), ("4", "8"));
    assert_eq!(&rows[0][2], "0.5566");
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--fixture", "eight_node", "--start", "12,12,12", "--paths", "2", "--horizon", "30", "--burn-in",
        "5", "--seed", "9",
    ];
    let a = gridrisk(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&gridrisk(&args)));
    assert!(stdout(&a).starts_with("i,j,m,sigma_theory,sigma_empirical"));
    let bad = gridrisk(&["simulate", "--fixture", "eight_node", "--dt", "0"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn grid_small() {
    let o = gridrisk(&["grid", "--fixture", "eight_node", "--steps", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("GridExhausted"));
}
