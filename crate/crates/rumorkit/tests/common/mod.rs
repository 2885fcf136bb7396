//! Shared fixtures for the integration and acceptance suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rumorkit::model::{EmbeddingRecord, Label};
use std::path::Path;

/// Standard normal draw via Box-Muller.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// One Gaussian cluster per class label, with the cluster sigma expressed as
/// a fraction of the smallest inter-center distance.
pub fn gaussian_label_clusters(
    per_class: usize,
    dim: usize,
    sigma_ratio: f64,
    seed: u64,
) -> Vec<EmbeddingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..3).map(|_| random_unit_vector(&mut rng, dim)).collect();
    let mut min_dist = f64::INFINITY;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            min_dist = min_dist.min(euclidean(&centers[i], &centers[j]));
        }
    }
    let sigma = sigma_ratio * min_dist;
    let mut records = Vec::with_capacity(3 * per_class);
    for (class, center) in centers.iter().enumerate() {
        let label = Label::from_code(class as u8).unwrap();
        for i in 0..per_class {
            let vector: Vec<f64> = center
                .iter()
                .map(|c| c + sigma * standard_normal(&mut rng))
                .collect();
            records.push(EmbeddingRecord::new(format!("c{class}-{i:04}"), label, vector));
        }
    }
    records
}

/// Tight per-event clusters with event tags; labels cycle through the three
/// classes by event.
pub fn event_clusters(
    events: usize,
    members: usize,
    dim: usize,
    sigma_ratio: f64,
    seed: u64,
) -> Vec<EmbeddingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..events)
        .map(|_| random_unit_vector(&mut rng, dim))
        .collect();
    let mut min_dist = f64::INFINITY;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            min_dist = min_dist.min(euclidean(&centers[i], &centers[j]));
        }
    }
    let sigma = sigma_ratio * min_dist;
    let mut records = Vec::with_capacity(events * members);
    for (event, center) in centers.iter().enumerate() {
        let label = Label::from_code((event % 3) as u8).unwrap();
        for member in 0..members {
            let vector: Vec<f64> = center
                .iter()
                .map(|c| c + sigma * standard_normal(&mut rng))
                .collect();
            records.push(
                EmbeddingRecord::new(format!("e{event:03}-m{member:02}"), label, vector)
                    .with_event(format!("event-{event:03}")),
            );
        }
    }
    records
}

pub fn write_jsonl(path: &Path, records: &[EmbeddingRecord]) {
    let lines: Vec<String> = records
        .iter()
        .map(|r| serde_json::to_string(r).unwrap())
        .collect();
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

/// Splits records into (knowledge base, test) keeping `test_fraction` of each
/// class for testing.
pub fn split_per_class(
    records: &[EmbeddingRecord],
    test_fraction: f64,
) -> (Vec<EmbeddingRecord>, Vec<EmbeddingRecord>) {
    let mut base = Vec::new();
    let mut test = Vec::new();
    for label in Label::ALL {
        let class: Vec<&EmbeddingRecord> =
            records.iter().filter(|r| r.label == label).collect();
        let test_count = (class.len() as f64 * test_fraction).round() as usize;
        let split = class.len() - test_count;
        for r in &class[..split] {
            base.push((*r).clone());
        }
        for r in &class[split..] {
            test.push((*r).clone());
        }
    }
    (base, test)
}

pub fn mean_intra_class_cosine_distance(records: &[EmbeddingRecord]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, a) in records.iter().enumerate() {
        for b in &records[i + 1..] {
            if a.label == b.label {
                total += rumorkit::embed::cosine_distance(&a.vector, &b.vector).unwrap();
                count += 1;
            }
        }
    }
    total / count as f64
}
