use echoroom::estimators::{train_global_pca, train_local_pca, train_ls, Dataset, Model};
use echoroom::features::FeatureKind;
use echoroom::io::{load_dataset, load_model, save_dataset, save_model};
use echoroom::roomsim::{generate_dataset, GeneratorConfig};
use echoroom::Error;
use serde_json::Value;

fn small_config() -> GeneratorConfig {
    GeneratorConfig { nfft: 256, listeners: 4, max_order_range: [3, 3], ..Default::default() }
}

#[test]
fn dataset_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let recs = generate_dataset(&cfg, 5, 42).unwrap();
    save_dataset(dir.path(), &recs, 42, &cfg).unwrap();
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("rec_4.json").exists());
    let (manifest, back) = load_dataset::<f64>(dir.path()).unwrap();
    assert_eq!(manifest.record_count, 5);
    assert_eq!(manifest.config, cfg);
    assert_eq!(back, recs);
}

fn assert_bit_identical<T: echoroom::Real>(model: &Model<T>, ds: &Dataset<T>) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&path, model, Value::Null).unwrap();
    let loaded: Model<T> = load_model(&path).unwrap();
    for rec in ds.records() {
        let a = model.predict_record(rec).unwrap().spectrum;
        let b = loaded.predict_record(rec).unwrap().spectrum;
        for (x, y) in a.bins().iter().zip(b.bins()) {
            assert_eq!(x.as_f64().to_bits(), y.as_f64().to_bits());
        }
    }
    assert_eq!(&loaded, model);
}

#[test]
fn models_round_trip_bit_identically() {
    let recs = generate_dataset(&small_config(), 60, 9).unwrap();
    let ds = Dataset::new(recs).unwrap();
    assert_bit_identical(&Model::Ls(train_ls(&ds, 1e-3).unwrap()), &ds);
    assert_bit_identical(&Model::GlobalPca(train_global_pca(&ds, 20, 8).unwrap()), &ds);
    assert_bit_identical(&Model::LocalPca(train_local_pca(&ds, FeatureKind::Rt30, 0.22, 10, 4).unwrap()), &ds);

    let ds32 = Dataset::new(ds.records().iter().map(|r| r.cast::<f32>()).collect()).unwrap();
    assert_bit_identical(&Model::GlobalPca(train_global_pca(&ds32, 12, 6).unwrap()), &ds32);
}

#[test]
fn damaged_model_files_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, r#"{"version": 2, "kind": "ls", "nfft": 8, "sample_rate": 16000}"#).unwrap();
    assert!(matches!(load_model::<f64>(&path), Err(Error::UnsupportedVersion { found: 2, .. })));
    std::fs::write(&path, r#"{"version": 1, "kind": "ls", "nfft": 8, "sample_rate": 16000}"#).unwrap();
    assert!(matches!(load_model::<f64>(&path), Err(Error::InvalidInput(_))));
    std::fs::write(&path, "{").unwrap();
    assert!(matches!(load_model::<f64>(&path), Err(Error::Json { .. })));
}
