use hmlfc::harness::{generate_synthetic, rate_at_psnr, run_sweep, write_csv, Dataset, SceneKind, SweepSpec, SyntheticScene, Variant, CSV_HEADER};
use hmlfc::EncodeParams;

fn params() -> EncodeParams {
    EncodeParams { tree_height: 2, block_size: 4, window: 4, ..EncodeParams::default() }
}

/// More parallax between neighbouring views costs more bits for the same
/// quality.
#[test]
fn wider_baseline_costs_more_at_matched_quality() {
    let rates: Vec<f64> = [0.5, 1.5, 3.0]
        .iter()
        .map(|&b| {
            let field = generate_synthetic(&SyntheticScene::new(SceneKind::TexturedQuads, 4, 32, b, 2));
            rate_at_psnr(&field, Variant::Hmlfc, &params(), 36.0).unwrap()
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[0] < w[1]), "{rates:?}");
}

#[test]
fn sweep_csv_has_one_row_per_point() {
    let spec = SweepSpec {
        dataset: Dataset::Synthetic(SyntheticScene::new(SceneKind::Checkerboard, 2, 16, 1.0, 1)),
        variants: Variant::ALL.to_vec(),
        heights: vec![1],
        block_sizes: vec![2, 4],
        taus: vec![0, 30],
        windows: vec![2],
        base: params(),
    };
    let points = run_sweep(&spec).unwrap();
    assert_eq!(points.len(), 3 * 2 * 2);
    assert!(points.iter().all(|p| p.error.is_none()));
    for p in points.iter().filter(|p| p.tau == 0) {
        assert_eq!(p.psnr, None, "{:?} should be lossless", p.variant);
    }
    let mut csv = Vec::new();
    write_csv(&points, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let cols = CSV_HEADER.split(',').count();
    assert!(lines.clone().all(|l| l.split(',').count() == cols));
    assert_eq!(lines.count(), points.len());
}
