//! Write a small dataset (JSONL records, PNG images, manifest) and check
//! every record against the files on disk.

use visworld::cot::dataset::{check_record, read_records, write_dataset, DatasetConfig};
use visworld::cot::WmFormat;
use visworld::envs::{Params, Split, Task};

fn main() {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("visworld_demo"), Into::into);
    let cfg = DatasetConfig {
        out_dir: out.clone(),
        tasks: Task::ALL.to_vec(),
        split: Split::Train,
        count: 4,
        formats: WmFormat::ALL.to_vec(),
        master_seed: 2024,
        resolution: 256,
        params: Params::default(),
    };
    let manifest = write_dataset(&cfg).unwrap();
    for (key, e) in &manifest.entries {
        let records = read_records(&out.join(&e.path)).unwrap();
        for r in &records {
            check_record(r, &out).unwrap();
        }
        println!("{key:<40} {} records ok", records.len());
    }
    println!("{} files, digest {}", manifest.files, manifest.digest);
}
