mod common;

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use common::{fixture, fixture_table, write_corpus};
use lve_core::acoustic::read_wav;
use lve_core::reduction::Embedding2D;
use lve_core::synthesis::ProsodyParams;
use lve_core::table::LatentTable;

fn lve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lve")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn ingest_reduce_synth_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    let low = ProsodyParams { f0_mean: 120.0, rate: 3.0, ..Default::default() };
    let high = ProsodyParams { f0_mean: 220.0, rate: 5.0, ..Default::default() };
    write_corpus(&corpus, &[("a".into(), "la la la".into(), low), ("b".into(), "mama mia".into(), high)]);
    let table = dir.path().join("t.ltab");
    let space = dir.path().join("s.emb2");
    let wav = dir.path().join("out.wav");

    let out = lve(&["ingest", p(&corpus), "-o", p(&table)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let t = LatentTable::load(&table).unwrap();
    assert_eq!(t.ids().collect::<Vec<_>>(), ["a", "b"]);

    let out = lve(&["reduce", p(&table), "--method", "pca", "-o", p(&space)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let emb = Embedding2D::load(&space, Some(&t)).unwrap();
    let b = emb.get("b").unwrap();

    let (x, y) = (b.x.to_string(), b.y.to_string());
    let out = lve(&[
        "synth", "--table", p(&table), "--embedding", p(&space), "--text", "hello", "--x", &x, "--y", &y, "-o", p(&wav),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("b "));
    let bytes = std::fs::read(&wav).unwrap();
    assert_eq!(&bytes[..4], b"RIFF");
    assert!(read_wav(&wav).unwrap().duration_secs() > 0.2);
}

#[test]
fn tsne_reduction_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.ltab");
    fixture_table(14, 5).save(&table).unwrap();
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let out_path = dir.path().join(format!("s{i}.emb2"));
            let out = lve(&["reduce", p(&table), "--method", "tsne", "--seed", "7", "--iters", "300", "-o", p(&out_path)]);
            assert!(out.status.success(), "{}", stderr(&out));
            std::fs::read(out_path).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let out = lve(&["reduce", p(&table), "--method", "tsne", "--perplexity", "50", "-o", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ltab");
    let cases: Vec<Vec<&str>> = vec![
        vec!["ingest", p(&missing), "-o", "x.ltab"],
        vec!["reduce", p(&missing), "--method", "pca", "-o", "x.emb2"],
        vec!["reduce", "x.ltab", "--method", "umap", "-o", "x.emb2"],
        vec!["synth", "--table", p(&missing), "--embedding", p(&missing), "--text", "hi", "--x", "0", "--y", "0"],
        vec!["export-plot", "--embedding", p(&missing), "-o", "plot.svg"],
        vec!["serve", "--table", p(&missing), "--embedding", p(&missing)],
        vec!["frobnicate"],
        vec!["synth", "--text", "hi"],
    ];
    for args in cases {
        let out = lve(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        let err = stderr(&out);
        assert!(!err.trim().is_empty());
    }
}

#[test]
fn failures_print_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.ltab");
    std::fs::write(&table, "garbage\n").unwrap();
    let out = lve(&["reduce", p(&table), "--method", "pca", "-o", p(&dir.path().join("s.emb2"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "));
}

#[test]
fn serve_refuses_mismatched_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (table, _) = fixture(5);
    let (_, other) = fixture(6);
    let tp = dir.path().join("t.ltab");
    let ep = dir.path().join("s.emb2");
    table.save(&tp).unwrap();
    other.save(&ep).unwrap();
    let start = Instant::now();
    let out = lve(&["serve", "--table", p(&tp), "--embedding", p(&ep), "--port", "0"]);
    assert!(!out.status.success());
    assert!(start.elapsed() < Duration::from_secs(10));
    assert!(stderr(&out).contains("error"), "{}", stderr(&out));
}

#[test]
fn external_backend_needs_url() {
    let dir = tempfile::tempdir().unwrap();
    let (table, emb) = fixture(5);
    let tp = dir.path().join("t.ltab");
    let ep = dir.path().join("s.emb2");
    table.save(&tp).unwrap();
    emb.save(&ep).unwrap();
    let out = lve(&["serve", "--table", p(&tp), "--embedding", p(&ep), "--backend", "external"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn serve_honours_port_env() {
    let dir = tempfile::tempdir().unwrap();
    let (table, emb) = fixture(5);
    let tp = dir.path().join("t.ltab");
    let ep = dir.path().join("s.emb2");
    table.save(&tp).unwrap();
    emb.save(&ep).unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_lve"))
        .args(["serve", "--table", p(&tp), "--embedding", p(&ep), "--port", "1", "--out-dir"])
        .arg(dir.path().join("audio"))
        .env("LVE_PORT", port.to_string())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let url = format!("http://127.0.0.1:{port}/api/points");
    let deadline = Instant::now() + Duration::from_secs(20);
    let reply = loop {
        if let Ok(mut r) = common::agent().get(&url).call() {
            break Some((r.status().as_u16(), r.body_mut().read_to_string().unwrap()));
        }
        if Instant::now() > deadline {
            break None;
        }
        std::thread::sleep(Duration::from_millis(50));
    };
    child.kill().unwrap();
    let _ = child.wait();
    let (status, body) = reply.expect("server never came up");
    assert_eq!(status, 200);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 5);
}

#[test]
fn export_plot_draws_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let (_, emb) = fixture(6);
    let ep = dir.path().join("s.emb2");
    let svg = dir.path().join("plot.svg");
    emb.save(&ep).unwrap();
    let out = lve(&["export-plot", "--embedding", p(&ep), "-o", p(&svg)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<circle").count(), 6);
    for id in emb.points().iter().map(|pt| &pt.id) {
        assert!(text.contains(&format!(">{id}</text>")), "{id}");
    }
}
