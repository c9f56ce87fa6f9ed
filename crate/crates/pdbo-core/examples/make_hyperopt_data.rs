//! Regenerates the bundled hyperparameter-optimization dataset.
//!
//! cargo run -p pdbo-core --example make_hyperopt_data -- crates/pdbo-core/data

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 500;
const TRAIN: usize = 200;
const FEATURES: usize = 40;
const INFORMATIVE: usize = 5;
const SEED: u64 = 20240501;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/pdbo-core/data".into()));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let weights: Vec<f64> =
        (0..FEATURES).map(|j| if j < INFORMATIVE { if j % 2 == 0 { 1.5 } else { -1.5 } } else { 0.0 }).collect();

    let header: Vec<String> = (0..FEATURES).map(|j| format!("f{j}")).chain(["label".to_string()]).collect();
    let mut train = header.join(",") + "\n";
    let mut val = train.clone();
    for i in 0..SAMPLES {
        let x: Vec<f64> = (0..FEATURES).map(|_| gaussian(&mut rng)).collect();
        let logit: f64 = x.iter().zip(&weights).map(|(a, b)| a * b).sum();
        let label = u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-logit).exp()));
        let out = if i < TRAIN { &mut train } else { &mut val };
        for v in &x {
            write!(out, "{v:.6},").unwrap();
        }
        writeln!(out, "{label}").unwrap();
    }
    std::fs::create_dir_all(&dir).expect("create data dir");
    std::fs::write(dir.join("hyperopt_train.csv"), train).expect("write train");
    std::fs::write(dir.join("hyperopt_val.csv"), val).expect("write val");
}
