use std::path::Path;

use lve_core::reduction::{pca_fit, tsne_fit, EmbeddedPoint, Embedding2D, ReductionError, ReductionMethod, TsneConfig};
use lve_core::style::{LatentVector, Scaler};
use lve_core::table::{LatentTable, RecordProblem, TableError, UtteranceRecord};
use lve_testkit::XorShift;
use proptest::prelude::*;

fn random_table(n: usize, seed: u64) -> LatentTable {
    let mut rng = XorShift::new(seed);
    // Spread magnitudes over many decades so every digit matters.
    let mut value = move || rng.normal() * 10f64.powf(rng.next_f64() * 12.0 - 6.0);
    let records = (0..n)
        .map(|i| UtteranceRecord {
            id: format!("utt-{i:03}"),
            latent: LatentVector((0..8).map(|_| value()).collect()),
            source_path: (i % 2 == 0).then(|| format!("/corpus/utt-{i:03}.wav")),
            transcript: (i % 3 == 0).then(|| "la \"quoted\" la".to_string()),
        })
        .collect();
    let scaler = Scaler {
        mean: (0..8).map(|d| d as f64 * 0.1 + 1.0 / 3.0).collect(),
        std: (0..8).map(|d| 1.0 + d as f64 / 7.0).collect(),
    };
    LatentTable::new(records, scaler).unwrap()
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn table_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.ltab");
    let table = random_table(100, 1);
    table.save(&path).unwrap();
    let back = LatentTable::load(&path).unwrap();
    assert_eq!(back, table);
    for (a, b) in table.records().iter().zip(back.records()) {
        assert_eq!(bits(a.latent.as_slice()), bits(b.latent.as_slice()));
    }
    assert_eq!(bits(&back.scaler().mean), bits(&table.scaler().mean));
    assert_eq!(bits(&back.scaler().std), bits(&table.scaler().std));
}

#[test]
fn embedding_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let table = random_table(30, 2);
    for emb in [
        pca_fit(&table).unwrap(),
        tsne_fit(&table, &TsneConfig { perplexity: 5.0, iterations: 300, ..TsneConfig::default() }).unwrap(),
    ] {
        let path = dir.path().join(format!("{}.emb2", emb.method()));
        emb.save(&path).unwrap();
        let back = Embedding2D::load(&path, Some(&table)).unwrap();
        assert_eq!(back, emb);
        for (a, b) in emb.points().iter().zip(back.points()) {
            assert_eq!((a.x.to_bits(), a.y.to_bits()), (b.x.to_bits(), b.y.to_bits()));
        }
    }
}

fn write_lines(path: &Path, lines: &[String]) {
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn table_lines(table: &LatentTable) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.ltab");
    table.save(&path).unwrap();
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn table_duplicate_id_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.ltab");
    let mut lines = table_lines(&random_table(5, 3));
    lines[4] = lines[2].clone();
    write_lines(&path, &lines);
    let err = LatentTable::load(&path).unwrap_err();
    assert_eq!(err.line(), Some(5));
    assert!(matches!(err, TableError::Line { problem: RecordProblem::DuplicateId(ref id), .. } if id == "utt-001"));
    assert!(err.to_string().starts_with("line 5:"), "{err}");
}

#[test]
fn table_problems_report_their_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ltab");
    let good = table_lines(&random_table(4, 4));

    let mut lines = good.clone();
    lines[3] = r#"{"id":"short","latent":[1.0,2.0]}"#.into();
    write_lines(&path, &lines);
    let err = LatentTable::load(&path).unwrap_err();
    assert_eq!(err.line(), Some(4));
    assert!(matches!(err, TableError::Line { problem: RecordProblem::Dimension { expected: 8, got: 2 }, .. }));

    let mut lines = good.clone();
    lines[2] = "{not json".into();
    write_lines(&path, &lines);
    assert_eq!(LatentTable::load(&path).unwrap_err().line(), Some(3));

    let mut lines = good;
    lines[0] = lines[0].replace("\"version\":1", "\"version\":9");
    write_lines(&path, &lines);
    assert_eq!(LatentTable::load(&path).unwrap_err().line(), Some(1));

    std::fs::write(&path, "").unwrap();
    assert!(matches!(LatentTable::load(&path), Err(TableError::MissingHeader)));
}

fn emb_lines(emb: &Embedding2D) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.emb2");
    emb.save(&path).unwrap();
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

fn line_of(err: &ReductionError) -> Option<usize> {
    match err {
        ReductionError::Line { line, .. } => Some(*line),
        _ => None,
    }
}

#[test]
fn embedding_duplicate_and_mismatch_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.emb2");
    let table = random_table(6, 5);
    let emb = pca_fit(&table).unwrap();
    let good = emb_lines(&emb);

    let mut lines = good.clone();
    lines[5] = lines[1].clone();
    write_lines(&path, &lines);
    let err = Embedding2D::load(&path, None).unwrap_err();
    assert_eq!(line_of(&err), Some(6), "{err}");
    assert!(err.to_string().contains("duplicate id \"utt-000\""), "{err}");

    let mut lines = good.clone();
    lines[3] = lines[3].replace("utt-002", "stranger");
    write_lines(&path, &lines);
    let err = Embedding2D::load(&path, Some(&table)).unwrap_err();
    assert_eq!(line_of(&err), Some(4), "{err}");
    assert!(err.to_string().contains("stranger"));

    let mut lines = good.clone();
    lines.pop();
    write_lines(&path, &lines);
    let err = Embedding2D::load(&path, Some(&table)).unwrap_err();
    assert!(matches!(err, ReductionError::IdMismatch(ref m) if m.contains("utt-005")), "{err}");
    assert!(Embedding2D::load(&path, None).is_err(), "stale bbox must be rejected");

    let smaller = Embedding2D::new(ReductionMethod::Pca, emb.points()[..5].to_vec(), None).unwrap();
    smaller.save(&path).unwrap();
    assert!(Embedding2D::load(&path, None).is_ok());
    assert!(matches!(Embedding2D::load(&path, Some(&table)), Err(ReductionError::IdMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_finite_points_round_trip(coords in prop::collection::vec((any::<f64>(), any::<f64>()), 1..20)) {
        let points: Vec<EmbeddedPoint> = coords
            .iter()
            .enumerate()
            .filter(|(_, (x, y))| x.is_finite() && y.is_finite())
            .map(|(i, &(x, y))| EmbeddedPoint { id: format!("p{i}"), x, y })
            .collect();
        prop_assume!(!points.is_empty());
        let emb = Embedding2D::new(ReductionMethod::Tsne, points, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.emb2");
        emb.save(&path).unwrap();
        prop_assert_eq!(Embedding2D::load(&path, None).unwrap(), emb);
    }
}
