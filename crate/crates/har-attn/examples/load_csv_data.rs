//! Loading sensor CSV exports: schema mapping, gap imputation, train-split
//! standardization, and sliding-window frame extraction.
//!
//! ```bash
//! cargo run --example load_csv_data
//! ```

use har_attn::data::{extract_frames, load_csv, SchemaConfig, SplitTag};
use std::io::Write;

fn main() {
    // A small file with a sensor dropout (missing cell) in channel accel_x.
    let mut file = tempfile::NamedTempFile::new().unwrap();
    let mut rows = String::from("timestamp,accel_x,accel_y,gyro_z,label\n");
    for i in 0..60 {
        let t = i as f64 / 24.0;
        let ax = if i == 17 { String::from("NaN") } else { format!("{}", (6.3 * t).sin()) };
        let label = if i < 30 { 1 } else { 2 };
        rows.push_str(&format!("{t},{ax},{},{},{label}\n", (3.2 * t).cos(), 0.1 * t));
    }
    file.write_all(rows.as_bytes()).unwrap();

    let schema = SchemaConfig {
        delimiter: b',',
        label_column: "label".into(),
        channel_columns: vec!["accel_x".into(), "accel_y".into(), "gyro_z".into()],
        timestamp_column: Some("timestamp".into()),
    };
    let mut ds = load_csv(file.path(), &schema, SplitTag::Train, 24.0).unwrap();
    println!("loaded {} samples x {} channels", ds.len(), ds.channels());
    println!("imputed accel_x[17] = {:.4} (linear midpoint)", ds.samples.at2(17, 0));

    let stats = ds.compute_norm();
    ds.standardize(&stats).unwrap();
    println!("channel means after standardization: {:?}", ds.compute_norm().mean);

    let frames = extract_frames(&ds, 24, 0.5).unwrap();
    println!("{} frames of 24 samples at 50% overlap:", frames.len());
    for i in 0..frames.len() {
        let (s, e) = frames.ranges[i];
        println!("  frame {i}: samples [{s}, {e}), majority label {}", frames.labels[i]);
    }
}
