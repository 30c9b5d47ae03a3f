use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use visworld::cot::dataset::{check_record, write_dataset, DatasetConfig, Record};
use visworld::cot::{render, CotSegment, StateView, WmFormat};
use visworld::envs::{Answer, CountMode, Params, Split, Task, World};
use visworld::eval::{
    build_report, ground_truth_states, load_instances, prediction_fidelity, read_predictions, verify_answer, EvalError,
    Intermediate, Prediction,
};

fn dataset(dir: &Path, tasks: &[Task], count: usize) -> Vec<Record> {
    write_dataset(&DatasetConfig {
        out_dir: dir.to_path_buf(),
        tasks: tasks.to_vec(),
        split: Split::Test,
        count,
        formats: WmFormat::ALL.to_vec(),
        master_seed: 5,
        resolution: 192,
        params: Params::default(),
    })
    .unwrap();
    load_instances(dir).unwrap()
}

fn echo(rec: &Record) -> Prediction {
    let raw_text = match (&rec.answer, &rec.world) {
        (Answer::IntegerSet(s), World::Cube3View(c)) if c.mode == CountMode::Possible => {
            format!("Answer: {}", s.iter().next().unwrap())
        }
        (Answer::IntegerSet(s), _) => format!("Answer: {}", s.iter().map(i64::to_string).collect::<Vec<_>>().join(", ")),
        (a, _) => format!("Answer: {a}"),
    };
    Prediction {
        instance_id: rec.id.clone(),
        raw_text,
        intermediate: vec![],
    }
}

#[test]
fn records_pass_structural_checks() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), &Task::ALL, 3);
    let manifest = visworld::cot::dataset::load_manifest(dir.path()).unwrap().unwrap();
    assert_eq!(manifest.entries.len(), 6 * 3 - 2);
    for e in manifest.entries.values() {
        for rec in visworld::cot::dataset::read_records(&dir.path().join(&e.path)).unwrap() {
            check_record(&rec, dir.path()).unwrap();
            assert_eq!(rec.wm_format, e.wm_format);
        }
    }
}

#[test]
fn oracle_echo_scores_one_and_wrong_answers_zero() {
    let dir = tempfile::tempdir().unwrap();
    let recs = dataset(dir.path(), &Task::ALL, 4);
    let preds: Vec<Prediction> = recs.iter().map(echo).collect();
    let r = build_report(&recs, &preds, dir.path()).unwrap();
    assert_eq!(r.overall.accuracy, Some(1.0));
    assert_eq!(r.per_task.len(), 6);
    assert!(r.per_task.values().all(|b| b.accuracy == Some(1.0)));
    // Half right, half wrong, per task.
    let mixed: Vec<Prediction> = recs
        .iter()
        .enumerate()
        .map(|(i, rec)| if i % 2 == 0 { echo(rec) } else { Prediction { raw_text: "Answer: 999".into(), ..echo(rec) } })
        .collect();
    let r = build_report(&recs, &mixed, dir.path()).unwrap();
    assert_eq!(r.overall.correct * 2, r.overall.count);
}

#[test]
fn report_is_permutation_invariant_and_empty_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let recs = dataset(dir.path(), &[Task::Maze, Task::Sokoban], 4);
    let mut preds: Vec<Prediction> = recs.iter().map(echo).collect();
    preds[1].raw_text = "no answer here".into();
    let a = build_report(&recs, &preds, dir.path()).unwrap();
    preds.reverse();
    let b = build_report(&recs, &preds, dir.path()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.parse_failures, 1);
    let empty = build_report(&recs, &[], dir.path()).unwrap();
    assert_eq!(empty.overall.count, 0);
    assert_eq!(empty.overall.accuracy, None);
    assert!(empty.per_task.is_empty());
}

#[test]
fn unknown_and_mismatched_ids_are_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let recs = dataset(dir.path(), &[Task::Maze], 2);
    let stray = Prediction {
        instance_id: "maze-nope".into(),
        raw_text: "Answer: 3".into(),
        intermediate: vec![],
    };
    match build_report(&recs, &[stray.clone()], dir.path()) {
        Err(EvalError::UnknownIds(ids)) => assert_eq!(ids, vec!["maze-nope".to_string()]),
        other => panic!("{other:?}"),
    }
    assert!(matches!(verify_answer(&recs[0], &stray), Err(EvalError::Domain(_))));
}

#[test]
fn cube_answers_follow_the_count_mode() {
    let dir = tempfile::tempdir().unwrap();
    let recs = dataset(dir.path(), &[Task::Cube3View], 12);
    for rec in &recs {
        let World::Cube3View(c) = &rec.world else { unreachable!() };
        let Answer::IntegerSet(truth) = &rec.answer else { unreachable!() };
        let all = truth.iter().map(i64::to_string).collect::<Vec<_>>().join(", ");
        let p = |t: String| Prediction {
            instance_id: rec.id.clone(),
            raw_text: t,
            intermediate: vec![],
        };
        let outside = (0..100).find(|v| !truth.contains(v)).unwrap();
        assert!(!verify_answer(rec, &p(format!("Answer: {outside}"))).unwrap());
        match c.mode {
            CountMode::Possible => {
                for v in truth {
                    assert!(verify_answer(rec, &p(format!("Answer: {v}"))).unwrap());
                }
            }
            CountMode::AllPossible => {
                assert!(verify_answer(rec, &p(format!("Answer: {all}"))).unwrap());
                if truth.len() > 1 {
                    let first = truth.iter().next().unwrap();
                    assert!(!verify_answer(rec, &p(format!("Answer: {first}"))).unwrap());
                }
            }
        }
    }
    let modes: BTreeSet<_> = recs
        .iter()
        .map(|r| match &r.world {
            World::Cube3View(c) => c.mode,
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(modes.len(), 2);
}

#[test]
fn fidelity_from_matrices_and_images() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), &[Task::PaperFolding], 3);
    let recs = visworld::cot::dataset::read_records(&dir.path().join("data/paper_folding/test_visual.jsonl")).unwrap();
    for rec in &recs {
        let truth = ground_truth_states(rec).unwrap();
        // Verbal matrices echoed from the verbal trace are exact.
        let verbal: Vec<Vec<String>> = truth.iter().map(|s| s.to_matrix()).collect();
        let steps: Vec<Intermediate> = verbal
            .iter()
            .enumerate()
            .map(|(step, m)| Intermediate {
                step,
                matrix: Some(m.clone()),
                image: None,
            })
            .collect();
        let pred = Prediction {
            instance_id: rec.id.clone(),
            raw_text: "Answer: 0".into(),
            intermediate: steps.clone(),
        };
        let f = prediction_fidelity(rec, &pred, dir.path()).unwrap().unwrap();
        assert_eq!((f.exact, f.shape_only), (1.0, 1.0));

        // Toggle one cell of the first step.
        let mut off = steps.clone();
        let row = off[0].matrix.as_mut().unwrap();
        let first: String = row[0].clone();
        let toggled = if first.starts_with(['.', '0']) { format!("1{}", &first[1..]) } else { format!("0{}", &first[1..]) };
        row[0] = toggled;
        let f = prediction_fidelity(rec, &Prediction { intermediate: off, ..pred.clone() }, dir.path())
            .unwrap()
            .unwrap();
        assert!(!f.per_step[0].exact && !f.per_step[0].shape_only);

        // Images: the dataset's own visual CoT images, plus one that is not a PNG.
        let visual_images: Vec<String> = rec.images.iter().filter(|p| p.contains("/visual_")).cloned().collect();
        assert_eq!(visual_images.len(), truth.len());
        let mut imgs: Vec<Intermediate> = visual_images
            .iter()
            .enumerate()
            .map(|(step, path)| Intermediate {
                step,
                matrix: None,
                image: Some(path.clone()),
            })
            .collect();
        fs::write(dir.path().join("garbage.png"), b"not a png").unwrap();
        imgs.push(Intermediate {
            step: 0,
            matrix: None,
            image: Some("garbage.png".into()),
        });
        let f = prediction_fidelity(rec, &Prediction { intermediate: imgs, ..pred.clone() }, dir.path())
            .unwrap()
            .unwrap();
        let n = truth.len();
        assert!(f.per_step[..n].iter().all(|s| s.exact));
        assert!(f.per_step[n].undecodable && !f.per_step[n].exact);
    }
}

#[test]
fn recolored_cube_image_keeps_shape_only_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let recs = dataset(dir.path(), &[Task::Cube3View], 4);
    for rec in &recs {
        let truth = ground_truth_states(rec).unwrap();
        let StateView::Cube(v) = &truth[0] else { unreachable!() };
        let mut swapped = v.clone();
        for c in swapped.cells.iter_mut() {
            *c = match *c {
                1 => 2,
                2 => 1,
                x => x,
            };
        }
        if swapped == *v {
            continue;
        }
        let img = render(&StateView::Cube(swapped), 256).unwrap();
        fs::write(dir.path().join("swapped.png"), img.to_png().unwrap()).unwrap();
        let pred = Prediction {
            instance_id: rec.id.clone(),
            raw_text: String::new(),
            intermediate: vec![Intermediate {
                step: 0,
                matrix: None,
                image: Some("swapped.png".into()),
            }],
        };
        let f = prediction_fidelity(rec, &pred, dir.path()).unwrap().unwrap();
        assert_eq!((f.exact, f.shape_only), (0.0, 1.0));
    }
}

#[test]
fn prediction_schema_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    fs::write(
        &path,
        "{\"instance_id\": \"a\", \"raw_text\": \"1\"}\n\n{\"instance_id\": \"b\"}\n",
    )
    .unwrap();
    match read_predictions(&path) {
        Err(EvalError::Schema { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let ok = dir.path().join("q.jsonl");
    fs::write(&ok, "{\"instance_id\": \"a\", \"raw_text\": \"x\", \"intermediate\": [{\"step\": 0, \"matrix\": [\"..\"]}]}\n").unwrap();
    assert_eq!(read_predictions(&ok).unwrap().len(), 1);
}

#[test]
fn implicit_records_mask_points() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), &[Task::Maze], 2);
    let recs = visworld::cot::dataset::read_records(&dir.path().join("data/maze/test_implicit.jsonl")).unwrap();
    for rec in recs {
        assert!(rec.cot.iter().any(|s| matches!(s, CotSegment::MaskedPoint(_))));
        assert_eq!(rec.images.len(), 1);
    }
}
