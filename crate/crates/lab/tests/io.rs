use sgflab::io::{
    read_alpha_csv, read_dataset, read_trajectory, write_dataset, write_text, write_trajectory, DatasetMeta,
};
use sgflab_core::dynamics::{run, Algorithm, DynamicsConfig};
use sgflab_core::model::generate_sparse_regression;

#[test]
fn dataset_round_trip_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("data.csv");
    let data = generate_sparse_regression(6, 9, 2, 4).unwrap();
    let meta = DatasetMeta { n: 6, d: 9, s: 2, seed: 4 };
    write_dataset(&path, &data, &meta).unwrap();
    let (back, got) = read_dataset(&path).unwrap();
    assert_eq!(back, data);
    assert_eq!(got, Some(meta));

    // Without the sidecar the layout is inferred from row lengths.
    std::fs::remove_file(tmp.path().join("data.json")).unwrap();
    assert_eq!(read_dataset(&path).unwrap().0, data);
}

#[test]
fn malformed_dataset_is_a_format_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    write_text(&path, "1,2\n3,x\n").unwrap();
    assert_eq!(read_dataset(&path).unwrap_err().exit_code(), 3);
    write_text(&path, "1,2,3\n4,5\n").unwrap();
    assert_eq!(read_dataset(&path).unwrap_err().exit_code(), 3);
}

#[test]
fn trajectory_round_trip_with_state() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate_sparse_regression(5, 8, 2, 1).unwrap();
    let mut cfg = DynamicsConfig::new(Algorithm::Sgf, 0.01, vec![0.5; 8]);
    cfg.dt = 1e-3;
    cfg.max_steps = 2000;
    cfg.record_every = 250;
    cfg.seed = 2;
    let traj = run(&data, &cfg).unwrap();
    let path = tmp.path().join("t.csv");
    write_trajectory(&path, &traj, true).unwrap();
    let rows = read_trajectory(&path).unwrap();
    assert_eq!(rows.len(), traj.records.len());
    for (row, rec) in rows.iter().zip(&traj.records) {
        assert_eq!(row.step, rec.step);
        assert_eq!(row.time, rec.time);
        assert_eq!(row.loss, rec.loss);
        assert_eq!(row.loss_integral, rec.loss_integral);
        assert_eq!(row.val_loss, rec.val_loss);
        assert_eq!(row.beta.as_ref(), Some(&rec.beta));
        assert_eq!(row.eta, rec.eta);
    }

    write_trajectory(&path, &traj, false).unwrap();
    let lean = read_trajectory(&path).unwrap();
    assert!(lean.iter().all(|r| r.beta.is_none() && r.eta.is_none()));
}

#[test]
fn alpha_csv_accepts_any_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("alpha.csv");
    write_text(&path, "0.1,0.2\n0.3\n\n0.4\n").unwrap();
    assert_eq!(read_alpha_csv(&path).unwrap(), vec![0.1, 0.2, 0.3, 0.4]);
    write_text(&path, "").unwrap();
    assert!(read_alpha_csv(&path).is_err());
}
