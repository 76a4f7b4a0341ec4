//! Seeded K-means (k-means++ initialization, Lloyd iterations) shared by the
//! residual-guided cluster splitter and the codebook trainer.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// k * dim center coordinates, row-major.
    pub centers: Vec<f64>,
    /// Per-row nearest-center index (ties to the lower index).
    pub assignment: Vec<usize>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[f64], dim: usize, k: usize, row: &[f64]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for c in 0..k {
        let d = dist2(row, &centers[c * dim..(c + 1) * dim]);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// Runs seeded k-means++ / Lloyd over `n = data.len() / dim` rows.
/// Iterates until the assignment reaches a fixpoint or `max_iters`.
pub fn kmeans(data: &[f64], dim: usize, k: usize, seed: u64, max_iters: usize) -> KMeansResult {
    assert!(dim > 0 && data.len() % dim == 0);
    let n = data.len() / dim;
    assert!(n > 0 && k > 0);
    let k = k.min(n);
    let row = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<f64> = Vec::with_capacity(k * dim);
    centers.extend_from_slice(row(rng.gen_range(0..n)));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| dist2(row(i), &centers[0..dim]))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            WeightedIndex::new(&d2).unwrap().sample(&mut rng)
        } else {
            // all points coincide with chosen centers
            rng.gen_range(0..n)
        };
        centers.extend_from_slice(row(next));
        let base = c * dim;
        for i in 0..n {
            let d = dist2(row(i), &centers[base..base + dim]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let mut assignment: Vec<usize> = (0..n).map(|i| nearest(&centers, dim, k, row(i)).0).collect();
    for _ in 0..max_iters {
        // recompute centers
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignment[i];
            counts[c] += 1;
            for a in 0..dim {
                sums[c * dim + a] += data[i * dim + a];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for a in 0..dim {
                    centers[c * dim + a] = sums[c * dim + a] / counts[c] as f64;
                }
            }
        }
        let next: Vec<usize> = (0..n).map(|i| nearest(&centers, dim, k, row(i)).0).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }

    KMeansResult {
        centers,
        assignment,
    }
}

/// Non-empty member partitions in ascending center-index order.
pub fn partitions(result: &KMeansResult, k: usize) -> Vec<Vec<usize>> {
    let mut parts = vec![Vec::new(); k];
    for (i, &c) in result.assignment.iter().enumerate() {
        parts[c].push(i);
    }
    parts.retain(|p| !p.is_empty());
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    #[test]
    fn separates_two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut data = Vec::new();
        for _ in 0..50 {
            data.push(rng.gen::<f64>() * 0.1);
        }
        for _ in 0..50 {
            data.push(10.0 + rng.gen::<f64>() * 0.1);
        }
        let result = kmeans(&data, 1, 2, 42, 100);
        let parts = partitions(&result, 2);
        assert_eq!(parts.len(), 2);
        assert!(parts.iter().all(|p| p.len() == 50));
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<f64> = (0..300).map(|_| rng.gen::<f64>()).collect();
        let a = kmeans(&data, 3, 4, 7, 100);
        let b = kmeans(&data, 3, 4, 7, 100);
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.centers, b.centers);
    }

    #[test]
    fn constant_input_single_effective_center() {
        let data = vec![5.0; 20];
        let result = kmeans(&data, 1, 4, 3, 50);
        let parts = partitions(&result, 4);
        assert_eq!(parts.iter().map(|p| p.len()).sum::<usize>(), 20);
        for &c in &result.assignment {
            assert!((result.centers[c] - 5.0).abs() < 1e-12);
        }
    }
}
