//! The worker protocol against the toy worker binary and scripted peers.

use std::io::Cursor;

use sensemble::dataset::{Sample, Template};
use sensemble::ensemble::{
    exchange, load_score_matrix, write_logits_file, BackendKind, LoadOptions, ScorerBackend, WorkerClient,
    WorkerRequest,
};
use sensemble::scorer::synthetic::separable_validation_set;
use sensemble::scorer::{init_params, Dims};

const BIN: &str = env!("CARGO_BIN_EXE_sensemble");

fn requests(samples: &[Sample]) -> Vec<WorkerRequest> {
    samples
        .iter()
        .map(|s| WorkerRequest {
            id: s.id().to_string(),
            texts: s.reconstruct(&Template::default()).unwrap().into_iter().map(|r| r.text).collect(),
        })
        .collect()
}

#[test]
fn hundred_requests_through_the_toy_worker() {
    let dir = tempfile::tempdir().unwrap();
    let params = init_params(Dims { embedding_dim: 8, hidden_dim: 8, buckets: 64 }, 2).unwrap();
    let params_path = dir.path().join("p.json");
    params.save(&params_path, serde_json::Value::Null).unwrap();

    let samples = separable_validation_set(100, 3);
    let reqs = requests(&samples);
    let command: Vec<String> =
        vec![BIN.into(), "serve-toy".into(), "--params".into(), params_path.to_string_lossy().into()];
    let mut client = WorkerClient::spawn(&command).unwrap();
    let scores = client.score(&reqs).unwrap();
    client.finish().unwrap();

    assert_eq!(scores.len(), 100);
    for r in &reqs {
        assert_eq!(scores[&r.id].len(), r.texts.len());
    }

    // Live worker scores equal in-process scores, and a logits file exported
    // from them gives the same predictions.
    let options = LoadOptions { toy_params: Some(params), ..Default::default() };
    let toy = ScorerBackend { kind: BackendKind::Toy, id: "t".into(), source: "-".into() };
    let local = load_score_matrix(&toy, &samples, &options).unwrap();
    for id in local.ids() {
        assert_eq!(local.get(id).unwrap(), scores[id].as_slice());
    }
    let logits = dir.path().join("t.jsonl");
    write_logits_file(&logits, &local).unwrap();
    let file = ScorerBackend { kind: BackendKind::LogitsFile, id: "t".into(), source: logits.to_string_lossy().into() };
    let reread = load_score_matrix(&file, &samples, &options).unwrap();
    assert_eq!(reread.predictions(), local.predictions());
}

#[test]
fn reversed_responses_are_matched() {
    let samples = separable_validation_set(100, 4);
    let reqs = requests(&samples);
    let mut script = String::from("{\"ready\": true}\n");
    for (i, r) in reqs.iter().enumerate().rev() {
        script += &format!("{{\"id\": \"{}\", \"scores\": [{i}, -{i}]}}\n", r.id);
    }
    let scores = exchange(Cursor::new(script), std::io::sink(), &reqs).unwrap();
    for (i, r) in reqs.iter().enumerate() {
        assert_eq!(scores[&r.id], [i as f64, -(i as f64)]);
    }
}

#[test]
fn worker_that_dies_early_is_a_protocol_error() {
    let samples = separable_validation_set(3, 5);
    let mut client = WorkerClient::spawn(&["sh".into(), "-c".into(), "echo '{\"ready\":true}'".into()]).unwrap();
    let err = client.score(&requests(&samples)).unwrap_err();
    assert!(matches!(err, sensemble::Error::Protocol(_)), "{err:?}");
}
