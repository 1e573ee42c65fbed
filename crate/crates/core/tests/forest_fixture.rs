use npforest_core::datagen::sample_tree_gaussian;
use npforest_core::ingest::{read_csv, write_csv};
use npforest_core::{fit_forest, ForestConfig, ForestDensityModel};

#[test]
fn seed_seven_tree_fixture_recovers_planted_tree() {
    let (data, tree) = sample_tree_gaussian(8, 0.6, 7, 2000).unwrap();
    let cfg = ForestConfig {
        seed: 7,
        ..ForestConfig::default()
    };
    let fit = fit_forest(&data, &cfg).unwrap();
    assert_eq!(fit.selection.k_hat, 7);
    assert_eq!(fit.model.forest.edge_set(), tree.edge_set());
    assert!(!fit.stages.padded);
}

#[test]
fn model_survives_json_and_evaluates_identically() {
    let (data, _) = sample_tree_gaussian(4, 0.7, 21, 600).unwrap();
    let fit = fit_forest(&data, &ForestConfig::default()).unwrap();
    let text = serde_json::to_string(&fit.model).unwrap();
    let back: ForestDensityModel = serde_json::from_str(&text).unwrap();
    assert_eq!(back, fit.model);
    for i in 0..20 {
        let x = data.row(i);
        assert_eq!(
            back.evaluate_log_density(x).unwrap().to_bits(),
            fit.model.evaluate_log_density(x).unwrap().to_bits()
        );
    }
}

#[test]
fn csv_file_roundtrip_feeds_the_same_fit() {
    let (data, _) = sample_tree_gaussian(5, 0.5, 3, 400).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_csv(&data, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back, data);
    let cfg = ForestConfig::default();
    assert_eq!(
        fit_forest(&back, &cfg).unwrap().model,
        fit_forest(&data, &cfg).unwrap().model
    );
}
