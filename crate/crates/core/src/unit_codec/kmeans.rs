use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{squared_distance, Codebook, FrameFeatures};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iters: 100,
            seed: 0,
        }
    }
}

/// Result of a k-means fit.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Inertia after every assignment step, starting with the seeded centroids.
    pub inertia_history: Vec<f64>,
    /// Number of Lloyd update steps performed.
    pub iterations: usize,
    /// True when the last update left every assignment unchanged.
    pub converged: bool,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().expect("history is never empty")
    }
}

/// Lloyd's k-means over all frames of all utterances.
///
/// Centroids are seeded with D²-weighted sampling (k-means++) from a ChaCha
/// stream keyed by `cfg.seed`, so a given seed always yields the same codebook.
/// Iteration stops once no assignment changes or after `cfg.max_iters` updates.
pub fn kmeans_fit(features: &[FrameFeatures], cfg: &KMeansConfig) -> Result<KMeansFit> {
    if cfg.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if cfg.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    let dim = match features.first() {
        Some(f) => f.dim(),
        None => return Err(Error::InsufficientData("no frames to cluster".into())),
    };
    if let Some(f) = features.iter().find(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: f.dim(),
        });
    }
    let points: Vec<&[f64]> = features.iter().flat_map(FrameFeatures::frames).collect();
    if points.is_empty() {
        return Err(Error::InsufficientData("no frames to cluster".into()));
    }
    if points.len() < cfg.k {
        return Err(Error::InsufficientData(format!(
            "{} frames for {} clusters",
            points.len(),
            cfg.k
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = seed_centroids(&points, cfg.k, dim, &mut rng)?;

    let mut assignment = vec![0usize; points.len()];
    let mut distances = vec![0.0; points.len()];
    let mut inertia_history = vec![assign(&points, &centroids, dim, &mut assignment, &mut distances)];
    let mut iterations = 0;
    let mut converged = false;
    let mut next = assignment.clone();

    while iterations < cfg.max_iters {
        update(&points, &assignment, &distances, &mut centroids, dim);
        iterations += 1;
        let inertia = assign(&points, &centroids, dim, &mut next, &mut distances);
        inertia_history.push(inertia);
        if next == assignment {
            converged = true;
            break;
        }
        std::mem::swap(&mut assignment, &mut next);
    }

    let codebook = Codebook::from_flat(centroids, dim)
        .map_err(|_| Error::InsufficientData("k-means collapsed two centroids onto the same point".into()))?;
    Ok(KMeansFit {
        codebook,
        inertia_history,
        iterations,
        converged,
    })
}

fn seed_centroids(points: &[&[f64]], k: usize, dim: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..points.len());
    centroids.extend_from_slice(points[first]);
    let mut nearest: Vec<f64> = points.iter().map(|p| squared_distance(p, points[first])).collect();

    for chosen in 1..k {
        let total: f64 = nearest.iter().sum();
        if total <= 0.0 {
            return Err(Error::InsufficientData(format!(
                "only {chosen} distinct frames for {k} clusters"
            )));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in nearest.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("total weight is positive");
        centroids.extend_from_slice(points[pick]);
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(squared_distance(p, points[pick]));
        }
    }
    Ok(centroids)
}

fn assign(points: &[&[f64]], centroids: &[f64], dim: usize, assignment: &mut [usize], distances: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for ((p, a), d) in points.iter().zip(assignment.iter_mut()).zip(distances.iter_mut()) {
        let mut best = (0, f64::INFINITY);
        for (j, c) in centroids.chunks_exact(dim).enumerate() {
            let dist = squared_distance(p, c);
            if dist < best.1 {
                best = (j, dist);
            }
        }
        *a = best.0;
        *d = best.1;
        inertia += best.1;
    }
    inertia
}

fn update(points: &[&[f64]], assignment: &[usize], distances: &[f64], centroids: &mut [f64], dim: usize) {
    let k = centroids.len() / dim;
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }

    // Empty clusters take over the points currently worst served, farthest first.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]).then(a.cmp(&b)));
    let mut donors = order.into_iter().filter(|&i| distances[i] > 0.0);

    for j in 0..k {
        let target = &mut centroids[j * dim..(j + 1) * dim];
        if counts[j] > 0 {
            let n = counts[j] as f64;
            for (c, s) in target.iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                *c = s / n;
            }
        } else if let Some(i) = donors.next() {
            target.copy_from_slice(points[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(points: &[[f64; 2]]) -> FrameFeatures {
        FrameFeatures::from_flat(points.iter().flatten().copied().collect(), 2, 0.02).unwrap()
    }

    #[test]
    fn three_points_three_clusters() {
        let pts = [[0.0, 0.0], [5.0, 1.0], [-3.0, 4.0]];
        let fit = kmeans_fit(&[feats(&pts)], &KMeansConfig::new(3)).unwrap();
        assert_eq!(fit.inertia(), 0.0);
        let mut got: Vec<Vec<f64>> = fit.codebook.centroids().map(<[f64]>::to_vec).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn too_few_frames() {
        let err = kmeans_fit(&[feats(&[[0.0, 0.0], [1.0, 1.0]])], &KMeansConfig::new(5)).unwrap_err();
        assert!(err.to_string().contains("insufficient data"), "{err}");
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            kmeans_fit(&[], &KMeansConfig::new(1)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn duplicate_frames_cannot_fill_codebook() {
        let pts = [[1.0, 1.0]; 10];
        assert!(matches!(
            kmeans_fit(&[feats(&pts)], &KMeansConfig::new(2)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn dimension_mismatch_across_utterances() {
        let a = feats(&[[0.0, 0.0], [1.0, 1.0]]);
        let b = FrameFeatures::from_flat(vec![1.0, 2.0, 3.0], 3, 0.02).unwrap();
        assert!(matches!(
            kmeans_fit(&[a, b], &KMeansConfig::new(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inertia_never_increases_and_seed_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<[f64; 2]> = (0..500)
            .map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0])
            .collect();
        let f = feats(&pts);
        let cfg = KMeansConfig {
            k: 12,
            max_iters: 200,
            seed: 3,
        };
        let fit = kmeans_fit(std::slice::from_ref(&f), &cfg).unwrap();
        for w in fit.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", fit.inertia_history);
        }
        let again = kmeans_fit(&[f], &cfg).unwrap();
        assert_eq!(fit.codebook, again.codebook);
        assert_eq!(fit.inertia_history, again.inertia_history);
    }
}
