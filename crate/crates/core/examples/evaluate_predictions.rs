//! Score a mock model against a generated dataset: answers from the records,
//! wrong on every third instance, and verbal states copied from the trace.

use visworld::cot::dataset::{write_dataset, DatasetConfig};
use visworld::cot::{CotSegment, WmFormat};
use visworld::envs::{Params, Split, Task};
use visworld::eval::{build_report, load_instances, Intermediate, Prediction};

fn main() {
    let dir = std::env::temp_dir().join("visworld_eval_demo");
    let _ = std::fs::remove_dir_all(&dir);
    write_dataset(&DatasetConfig {
        out_dir: dir.clone(),
        tasks: vec![Task::PaperFolding, Task::Sokoban, Task::Cube3View],
        split: Split::Test,
        count: 6,
        formats: vec![WmFormat::Verbal],
        master_seed: 3,
        resolution: 256,
        params: Params::default(),
    })
    .unwrap();
    let records = load_instances(&dir).unwrap();
    let predictions: Vec<Prediction> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let answer = r.cot_text.lines().last().unwrap_or_default().to_string();
            let intermediate = r
                .cot
                .iter()
                .filter_map(|s| match s {
                    CotSegment::VerbalMatrix(m) => Some(m.clone()),
                    _ => None,
                })
                .enumerate()
                .map(|(step, m)| Intermediate { step, matrix: Some(m), image: None })
                .collect();
            Prediction {
                instance_id: r.id.clone(),
                raw_text: if i % 3 == 2 { "I am not sure. Answer: 42".into() } else { answer },
                intermediate,
            }
        })
        .collect();
    let report = build_report(&records, &predictions, &dir).unwrap();
    print!("{}", report.table());
}
