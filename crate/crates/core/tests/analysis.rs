mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensemble::analysis::{
    overlap_analysis, parse_report, render_report, CorrectnessBitmap, EvaluationReport, ReportFormat,
};

#[test]
fn regions_match_the_subset_oracle_for_any_member_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let members = rng.gen_range(1..=4);
        let n = rng.gen_range(0..60);
        let singles: Vec<CorrectnessBitmap> =
            (0..members).map(|i| common::random_bitmap(&mut rng, &format!("m{i}"), n, 0.6)).collect();
        let ensemble = common::random_bitmap(&mut rng, "ens", n, 0.7);
        let report = overlap_analysis(&singles, &ensemble).unwrap();
        assert_eq!(report.regions.len(), 1 << members);
        assert_eq!(report.total(), n);
        let got: Vec<(usize, usize)> = report.regions.iter().map(|r| (r.alpha, r.beta)).collect();
        assert_eq!(got, common::venn_oracle(&singles, &ensemble, &report));
    }
}

#[test]
fn structured_report_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let singles: Vec<CorrectnessBitmap> =
        ["a", "b", "c"].iter().map(|s| common::random_bitmap(&mut rng, s, 40, 0.5)).collect();
    let ensemble = common::random_bitmap(&mut rng, "e", 40, 0.5);
    let report = EvaluationReport {
        accuracies: vec![],
        weights: None,
        venn: Some(overlap_analysis(&singles, &ensemble).unwrap()),
        config: serde_json::json!({"seed": 1}),
    };
    let first = render_report(&report, ReportFormat::Structured);
    let again = render_report(&parse_report(&first).unwrap(), ReportFormat::Structured);
    assert_eq!(first, again);
    let value: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert!(value["venn"]["regions"][0]["members"].is_array());
    assert!(value["venn"]["regions"][0]["alpha"].is_u64());
}
