#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairrank"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fairrank")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub struct RunSpec<'a> {
    pub run_id: String,
    pub algorithm: &'a str,
    pub dataset: &'a str,
    pub attribute: &'a str,
    pub seed: i64,
    pub hparam_id: String,
    pub split: &'a str,
}

/// Writes one run directory the way the Python exporter does: a manifest and
/// a JSONL log with canonical key order.
pub fn write_run(root: &Path, spec: &RunSpec, records: &[(String, f64, u8, u32)]) -> PathBuf {
    let dir = root.join(&spec.run_id);
    fs::create_dir_all(&dir).unwrap();
    let manifest = json!({
        "run_id": spec.run_id,
        "algorithm": spec.algorithm,
        "dataset": spec.dataset,
        "attribute": spec.attribute,
        "seed": spec.seed,
        "hparam_id": spec.hparam_id,
        "split": spec.split,
        "group_names": ["g0", "g1"],
    });
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap(),
    )
    .unwrap();
    let mut log = String::new();
    for (sample_id, score, label, group) in records {
        log.push_str(
            &json!({
                "run_id": spec.run_id,
                "sample_id": sample_id,
                "score": score,
                "label": label,
                "group": group,
            })
            .to_string(),
        );
        log.push('\n');
    }
    fs::write(dir.join("predictions.jsonl"), log).unwrap();
    dir
}

pub const ALGORITHMS: [&str; 3] = ["ERM", "GroupDRO", "SWAD"];
pub const TASKS: [(&str, &str); 4] = [
    ("toy-a", "Sex"),
    ("toy-a", "Age"),
    ("toy-b", "Sex"),
    ("toy-b", "Age"),
];

/// Scores separate the classes by `strength`, which differs per algorithm,
/// subgroup, hyperparameter and seed.
fn synth_records(rng: &mut ChaCha8Rng, strength: [f64; 2], n_per_group: usize) -> Vec<(String, f64, u8, u32)> {
    let mut out = Vec::new();
    for g in 0..2u32 {
        for i in 0..n_per_group {
            let label = (i % 2) as u8;
            let signed = if label == 1 { 1.0 } else { -1.0 };
            let z = strength[g as usize] * signed + rng.gen_range(-1.0..1.0);
            let score = 1.0 / (1.0 + (-z).exp());
            out.push((format!("g{g}-{i:03}"), score, label, g));
        }
    }
    out
}

/// A full sweep: every algorithm x task x 2 hyperparameters x 2 seeds x
/// both splits.
pub fn write_corpus(root: &Path) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut count = 0;
    for (ai, alg) in ALGORITHMS.iter().enumerate() {
        for (ti, (dataset, attribute)) in TASKS.iter().enumerate() {
            for h in 0..2 {
                for seed in 0..2 {
                    for split in ["validation", "test"] {
                        let base = 0.4 + 0.35 * ai as f64 + 0.1 * ti as f64;
                        let strength = [base + 0.3 * h as f64, base + 0.15 * seed as f64];
                        let records = synth_records(&mut rng, strength, 40);
                        let spec = RunSpec {
                            run_id: format!("{alg}-{dataset}-{attribute}-h{h}-s{seed}-{split}"),
                            algorithm: alg,
                            dataset,
                            attribute,
                            seed,
                            hparam_id: format!("h{h}"),
                            split,
                        };
                        write_run(root, &spec, &records);
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}
