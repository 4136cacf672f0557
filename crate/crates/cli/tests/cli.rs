use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use tempfile::TempDir;

fn ppsc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ppsc"))
}

fn run(args: &[&str]) -> Output {
    ppsc().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, content).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Starts a listening party and returns it with the address it bound.
fn spawn_listener(args: &[&str]) -> (Child, String) {
    let mut child = ppsc()
        .args(args)
        .args(["--listen", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut err = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    loop {
        line.clear();
        assert!(err.read_line(&mut line).unwrap() > 0, "listener exited before binding");
        if let Some(addr) = line.trim().strip_prefix("listening on ") {
            let addr = addr.to_string();
            // keep draining so the child never blocks on a full pipe
            std::thread::spawn(move || std::io::copy(&mut err, &mut std::io::sink()));
            return (child, addr);
        }
    }
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn keygen_writes_loadable_distinct_keys() {
    let dir = TempDir::new().unwrap();
    let mut moduli = Vec::new();
    for name in ["k1", "k2"] {
        let prefix = dir.path().join(name);
        let o = run(&["keygen", "--kappa", "512", "--out", s(&prefix)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let public: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{name}.pub.json"))).unwrap()).unwrap();
        assert_eq!(public["kappa"], 512);
        assert!(public.get("p").is_none());
        let secret: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{name}.key.json"))).unwrap()).unwrap();
        assert_eq!(secret["n"], public["n"]);
        moduli.push(public["n"].as_str().unwrap().to_string());
    }
    assert_ne!(moduli[0], moduli[1]);

    let o = run(&["keygen", "--kappa", "100", "--out", s(&dir.path().join("small"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("small.pub.json").exists());
}

#[test]
fn encode_fixations_and_raw_gaze() {
    let dir = TempDir::new().unwrap();
    let fix = write(&dir, "fix.csv", "x,y\n0.05,0.05\n0.06,0.07\n0.01,0.1\n");
    let o = run(&["encode", "--input", s(&fix), "--mode", "fixation"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "AAA\n");

    // 120 Hz, 60 samples in the second cell of the top row
    let mut raw = String::from("t_ms,x,y\n");
    for k in 0..60 {
        raw.push_str(&format!("{:.3},0.2,0.05\n", k as f64 * 1000.0 / 120.0));
    }
    let raw = write(&dir, "raw.csv", &raw);
    let out = dir.path().join("raw.txt");
    let o = run(&["encode", "--input", s(&raw), "--mode", "raw", "--rate", "120", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&out).unwrap(), "BBB\n");
}

#[test]
fn encode_reports_bad_rows_and_accepts_empty_files() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "empty.csv", "");
    let o = run(&["encode", "--input", s(&empty), "--mode", "raw"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "\n");
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));

    let bad = write(&dir, "bad.csv", "x,y\n0.1,0.1\n0.2,oops\n");
    let o = run(&["encode", "--input", s(&bad), "--mode", "fixation"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn oracle_scores() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.txt", "ABCD\n");
    let empty = write(&dir, "e.txt", "");
    let o = run(&["oracle", "--a", s(&a), "--b", s(&a)]);
    assert_eq!(stdout(&o).trim(), "0");
    let o = run(&["oracle", "--a", s(&empty), "--b", s(&a), "--c-ins", "3"]);
    assert_eq!(stdout(&o).trim(), "12");
    let bad = write(&dir, "bad.txt", "AB7\n");
    assert_eq!(run(&["oracle", "--a", s(&bad), "--b", s(&a)]).status.code(), Some(2));
}

#[test]
fn compare_identical_scanpaths_over_tcp() {
    let dir = TempDir::new().unwrap();
    let ab = write(&dir, "ab.txt", "AB\n");
    let (alice, addr) = spawn_listener(&["compare", "--role", "alice", "--kappa", "512", "--scanpath", s(&ab)]);
    let bob = run(&["compare", "--role", "bob", "--kappa", "512", "--connect", &addr, "--scanpath", s(&ab)]);
    let alice = alice.wait_with_output().unwrap();
    assert!(bob.status.success(), "{}", stderr(&bob));
    assert!(alice.status.success());
    let (rb, ra) = (json(&bob), json(&alice));
    assert_eq!(rb["delta"], 0);
    assert_eq!(ra["delta"], 0);
    assert_eq!(rb["role"], "bob");
    assert_eq!(rb["mn"], 4);
    assert_eq!(rb["traffic"]["total_bytes"], ra["traffic"]["total_bytes"]);
}

#[test]
fn compare_with_oracle_check_and_key_file() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("alice");
    assert!(run(&["keygen", "--kappa", "512", "--out", s(&prefix)]).status.success());
    let key = dir.path().join("alice.key.json");
    let a = write(&dir, "a.txt", "ABCDEFGHIJKLMNOPQRST\n");
    let b = write(&dir, "b.txt", "TSRQPONMLKJIHGFEDCBA\n");
    let costs = ["--c-ins", "2", "--substitution", "grid:1"];
    let (bob, addr) = spawn_listener(
        &[&["compare", "--role", "bob", "--kappa", "512", "--scanpath", s(&b)][..], &costs[..]].concat(),
    );
    let alice = run(&[
        &["compare", "--role", "alice", "--key", s(&key), "--connect", &addr, "--scanpath", s(&a)][..],
        &["--oracle-check", "--peer-scanpath", s(&b)],
        &costs[..],
    ]
    .concat());
    let bob = bob.wait_with_output().unwrap();
    assert!(alice.status.success(), "{}", stderr(&alice));
    assert!(bob.status.success());
    let r = json(&alice);
    assert_eq!(r["oracle_delta"], r["delta"]);
    assert_eq!(r["mn"], 400);
    let oracle = run(&[&["oracle", "--a", s(&a), "--b", s(&b)][..], &costs[..]].concat());
    assert_eq!(stdout(&oracle).trim(), json(&bob)["delta"].to_string());
}

#[test]
fn mismatched_kappa_is_a_negotiation_error() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.txt", "ABC\n");
    let (alice, addr) = spawn_listener(&["compare", "--role", "alice", "--kappa", "512", "--scanpath", s(&p)]);
    let bob = run(&["compare", "--role", "bob", "--kappa", "1024", "--connect", &addr, "--scanpath", s(&p)]);
    let alice = alice.wait_with_output().unwrap();
    assert_eq!(alice.status.code(), Some(3));
    assert_eq!(bob.status.code(), Some(3), "{}", stderr(&bob));
}

#[test]
fn unreachable_peer_is_a_transport_error() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.txt", "ABC\n");
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let o = run(&["compare", "--role", "bob", "--connect", &addr, "--connect-timeout", "0", "--scanpath", s(&p)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn stats_is_reproducible_with_a_seed() {
    let a = run(&["stats", "--size", "6", "5", "--trials", "50", "--seed", "9"]);
    let b = run(&["stats", "--size", "6", "5", "--trials", "50", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().next().unwrap(), "iteration,mean_candidates,std_candidates,cum_log2");
    assert_eq!(text.lines().count(), 31);

    let one = run(&["stats", "--size", "1", "1", "--trials", "3"]);
    assert!(stderr(&one).contains("mean 1.000"), "{}", stderr(&one));
}

#[test]
fn bench_csv_header_is_stable() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench.csv");
    let o = run(&["bench", "--sizes", "2,2x3", "--kappas", "512", "--trials", "1", "--seed", "1", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "m,n,kappa,mean_s,std_s,iter_s,alice_s,bob_s,bytes_total,bytes_bob");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("2,3,512,"), "{}", rows[1]);

    assert_eq!(run(&["bench", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn help_states_defaults_and_exit_codes() {
    let o = run(&["compare", "--help"]);
    let text = stdout(&o);
    assert!(text.contains("binary:0:2"));
    assert!(text.contains("[default: 1]"));
    let o = run(&["--help"]);
    assert!(stdout(&o).contains("5 oracle-check failure"));
}
