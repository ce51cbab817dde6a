//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::Rng;
use zoomlab::{Key, TreeMeasure, Window};

/// Sparse tree with base 2..=5, dimension 1 or 2 and an even depth keeping
/// at most 4096 cells; roughly half the cells carry mass.
pub fn random_tree(rng: &mut impl Rng) -> TreeMeasure {
    let base = rng.gen_range(2..=5u32);
    let dim = rng.gen_range(1..=2usize);
    let mut depth = 2;
    while (base as u64).pow((depth + 2) * dim as u32) <= 4096 {
        depth += 2;
    }
    let n = (base as u64).pow(depth);
    let cells = n.pow(dim as u32);
    let mut leaves = Vec::new();
    for i in 0..cells {
        if rng.gen_bool(0.5) || (i + 1 == cells && leaves.is_empty()) {
            let mut k: Key = [0; 3];
            k[0] = i % n;
            if dim == 2 {
                k[1] = i / n;
            }
            leaves.push((k, rng.gen::<f64>().powi(3) + 1e-6));
        }
    }
    TreeMeasure::from_leaves(base, depth, Window::unit(dim), leaves).expect("valid tree")
}

pub fn zoomlab(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zoomlab"))
        .args(args)
        .env("ZOOMLAB_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
}

/// Small configurations of every command.
pub fn command_configs() -> Vec<Vec<&'static str>> {
    vec![
        vec!["measure-build", "--spec", "cantor3", "--depth", "8"],
        vec![
            "scenery",
            "--spec",
            "cantor3",
            "--seed",
            "7",
            "--T",
            "2",
            "--samples",
            "3",
        ],
        vec!["scenery", "--spec", "halfline", "--seed", "7", "--T", "2"],
        vec!["dimension", "--spec", "nu10", "--depth", "8", "--seed", "3"],
        vec![
            "project",
            "--spec",
            "cantor3x3",
            "--samples",
            "2",
            "--seed",
            "2",
        ],
        vec![
            "conserve",
            "--spec",
            "cantor3x3",
            "--samples",
            "6",
            "--seed",
            "4",
        ],
        vec![
            "cp",
            "--samples",
            "512",
            "--center-atoms",
            "40",
            "--t-steps",
            "4",
            "--seed",
            "9",
        ],
        vec!["counterexample"],
        vec!["splice", "--samples", "2", "--points", "8", "--seed", "11"],
        vec!["pair-sum", "--depth", "8"],
    ]
}

fn same_files(a: &Path, b: &Path) -> bool {
    std::fs::read(a).ok() == std::fs::read(b).ok()
}

/// Runs each config at one and at four threads, plus once more at four;
/// `(config, identical)` per config. Tree output files are compared too.
pub fn reproducibility_runs() -> Vec<(String, bool)> {
    let dir = tempfile::tempdir().expect("temp dir");
    command_configs()
        .into_iter()
        .map(|args| {
            let name = args.join(" ");
            let with_out = args[0] == "measure-build";
            let mut outputs = Vec::new();
            let mut files = Vec::new();
            for (i, threads) in [1, 4, 4].into_iter().enumerate() {
                let mut a = args.clone();
                let path = dir.path().join(format!("tree{i}.txt"));
                let p = path.to_string_lossy().into_owned();
                if with_out {
                    a.extend(["--out", p.as_str()]);
                }
                let o = zoomlab(&a, threads);
                let mut text = o.stdout.clone();
                // the header echoes the path, which differs per run by design
                if with_out {
                    text = String::from_utf8_lossy(&text)
                        .replace(&p, "OUT")
                        .into_bytes();
                }
                outputs.push((o.status.success(), text));
                files.push(path);
            }
            let ok = outputs.iter().all(|o| o.0 && o.1 == outputs[0].1)
                && (!with_out || files.windows(2).all(|w| same_files(&w[0], &w[1])));
            (name, ok)
        })
        .collect()
}
