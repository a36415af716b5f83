use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sift::{match_descriptors, SiftDescriptor};

/// Largest set of ratio-test matches consistent with one similarity
/// transform (RANSAC over match pairs). Used as an optional re-ranking
/// filter after index scoring.
pub fn similarity_inliers(
    query: &[SiftDescriptor],
    candidate: &[SiftDescriptor],
    tolerance: f64,
    iterations: usize,
    seed: u64,
) -> usize {
    let matches = match_descriptors(query, candidate, 0.8);
    if matches.len() < 2 {
        return matches.len();
    }
    let pts: Vec<((f64, f64), (f64, f64))> =
        matches.iter().map(|&(i, j)| ((query[i].x, query[i].y), (candidate[j].x, candidate[j].y))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 1;
    for _ in 0..iterations {
        let i = rng.random_range(0..pts.len());
        let j = rng.random_range(0..pts.len());
        let ((p0, q0), (p1, q1)) = (pts[i], pts[j]);
        let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
        let den = dx * dx + dy * dy;
        if i == j || den < 1e-9 {
            continue;
        }
        let (ex, ey) = (q1.0 - q0.0, q1.1 - q0.1);
        // q = [a -b; b a] p + t
        let a = (dx * ex + dy * ey) / den;
        let b = (dx * ey - dy * ex) / den;
        let tx = q0.0 - (a * p0.0 - b * p0.1);
        let ty = q0.1 - (b * p0.0 + a * p0.1);
        let inliers = pts
            .iter()
            .filter(|(p, q)| {
                let (x, y) = (a * p.0 - b * p.1 + tx, b * p.0 + a * p.1 + ty);
                (x - q.0).hypot(y - q.1) <= tolerance
            })
            .count();
        best = best.max(inliers);
    }
    best
}
