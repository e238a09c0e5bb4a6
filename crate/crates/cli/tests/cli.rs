use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn qkdnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkdnet")).args(args).current_dir(cwd).output().expect("spawn qkdnet")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_outputs_and_status_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let o = qkdnet(&["run", "--scenario", "empty", "--duration", "10", "--seed", "5", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("audit pass"));
    for f in ["metrics.csv", "audit.jsonl", "draws.jsonl", "summary.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t_s,link_id,qber,sifted_bps,secure_bps,buffer_bits,status,alarms_open"));
    // Six links, ten ticks, no sessions.
    assert_eq!(lines.count(), 60);

    let s = qkdnet(&["status", "--out", "out"], dir.path());
    assert!(s.status.success());
    let text = stdout(&s);
    assert!(text.contains("final tick t = 10.000 s"), "{text}");
    assert!(text.contains("audit pass"));
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = qkdnet(&["run", "--duration", "15", "--seed", "9", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.csv", "audit.jsonl", "draws.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
}

#[test]
fn inject_keeps_events_ordered_and_run_accepts_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let inject = |kind: &str, at: &str| {
        let o = qkdnet(&["inject", "--scenario", "s.json", "--link", "L3", "--kind", kind, "--at", at], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    inject("attack-off", "8");
    inject("attack-on", "3");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    let kinds: Vec<&str> = v["events"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["attack_on", "attack_off"]);

    let o = qkdnet(&["run", "--scenario", "s.json", "--duration", "12", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("alarms 1"), "{}", stdout(&o));
}

#[test]
fn bad_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!qkdnet(&["run", "--topology", "nowhere", "--out", "o"], dir.path()).status.success());
    assert!(!qkdnet(&["inject", "--scenario", "s.json", "--link", "L1", "--kind", "attack-on", "--at", "-1"], dir.path())
        .status
        .success());
    assert!(!qkdnet(&["status", "--out", "missing"], dir.path()).status.success());
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_answers_control_requests() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qkdnet"))
        .args(["serve", "--port", "0", "--tick-ms", "50"])
        .stdout(Stdio::piped())
        .spawn()
        .expect("spawn serve");
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let _server = Server(child);
    let base = line.trim().strip_prefix("listening on ").expect("listen line").to_string();

    let state: serde_json::Value = ureq::get(&format!("{base}/state")).call().unwrap().into_json().unwrap();
    assert_eq!(state["links"].as_array().unwrap().len(), 6);

    let history: serde_json::Value =
        ureq::get(&format!("{base}/links/L1/history?limit=2")).call().unwrap().into_json().unwrap();
    assert_eq!(history["link_id"], "L1");

    let r = ureq::post(&format!("{base}/commands")).send_string(r#"{"kind":"set_policy","policy":"max_min_buffer"}"#);
    assert_eq!(r.unwrap().status(), 200);

    match ureq::post(&format!("{base}/commands")).send_string("{not json") {
        Err(ureq::Error::Status(400, resp)) => {
            let v: serde_json::Value = resp.into_json().unwrap();
            assert_eq!(v["error"]["code"], "malformed_json");
        }
        other => panic!("expected 400, got {other:?}"),
    }
    assert!(matches!(ureq::get(&format!("{base}/links/L9/history")).call(), Err(ureq::Error::Status(404, _))));
    assert!(matches!(ureq::delete(&format!("{base}/alarms")).call(), Err(ureq::Error::Status(405, _))));

    let status = Command::new(env!("CARGO_BIN_EXE_qkdnet")).args(["status", "--server", &base]).output().unwrap();
    assert!(status.status.success());
    assert!(stdout(&status).contains("policy max_min_buffer"), "{}", stdout(&status));
}
