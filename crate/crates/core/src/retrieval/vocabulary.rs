use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::RetrievalError;
use crate::sift::{SiftDescriptor, DESCRIPTOR_LEN};

pub type Word = u32;
pub type DescVec = [f32; DESCRIPTOR_LEN];

const VOCAB_MAGIC: &[u8; 8] = b"WSRVOCAB";
const VOCAB_VERSION: u32 = 1;
pub const KMEANS_MAX_ITERS: usize = 50;

/// `k` centroids in descriptor space.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    centroids: Vec<DescVec>,
}

#[inline]
fn dist_sq(a: &DescVec, b: &DescVec) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Vocabulary {
    pub fn from_centroids(centroids: Vec<DescVec>) -> Result<Self, RetrievalError> {
        if centroids.is_empty() {
            return Err(RetrievalError::Format("vocabulary needs at least one word".into()));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RetrievalError::Format("non-finite centroid".into()));
        }
        Ok(Self { centroids })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[DescVec] {
        &self.centroids
    }

    /// Nearest centroid, ties to the lowest id.
    pub fn quantize(&self, v: &DescVec) -> Word {
        let mut best = (f32::INFINITY, 0);
        for (i, c) in self.centroids.iter().enumerate() {
            let d = dist_sq(v, c);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1 as Word
    }

    pub fn quantize_all(&self, descs: &[SiftDescriptor]) -> Vec<Word> {
        descs.par_iter().map(|d| self.quantize(&d.v)).collect()
    }

    /// Seeded k-means++ initialisation followed by Lloyd iterations, at most
    /// [`KMEANS_MAX_ITERS`]. Empty clusters are re-seeded with the point
    /// farthest from its centroid.
    pub fn train(sample: &[DescVec], k: usize, seed: u64) -> Result<Self, RetrievalError> {
        if k == 0 || sample.len() < k {
            return Err(RetrievalError::SampleTooSmall { sample: sample.len(), k });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids = kmeans_pp(sample, k, &mut rng);
        let mut assign = vec![usize::MAX; sample.len()];
        for _ in 0..KMEANS_MAX_ITERS {
            let next: Vec<(usize, f32)> = sample
                .par_iter()
                .map(|p| {
                    let mut best = (0, f32::INFINITY);
                    for (i, c) in centroids.iter().enumerate() {
                        let d = dist_sq(p, c);
                        if d < best.1 {
                            best = (i, d);
                        }
                    }
                    best
                })
                .collect();
            let changed = next.iter().zip(&assign).any(|(n, a)| n.0 != *a);
            assign.iter_mut().zip(&next).for_each(|(a, n)| *a = n.0);
            if !changed {
                break;
            }
            let mut sums = vec![[0.0f64; DESCRIPTOR_LEN]; k];
            let mut counts = vec![0usize; k];
            for (p, &a) in sample.iter().zip(&assign) {
                counts[a] += 1;
                for (s, v) in sums[a].iter_mut().zip(p) {
                    *s += *v as f64;
                }
            }
            let mut taken = vec![false; sample.len()];
            for c in 0..k {
                if counts[c] == 0 {
                    // farthest point not already used as a replacement
                    let far = next
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !taken[*i])
                        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    taken[far] = true;
                    centroids[c] = sample[far];
                } else {
                    for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                        *dst = (*s / counts[c] as f64) as f32;
                    }
                }
            }
        }
        Ok(Self { centroids })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(VOCAB_MAGIC)?;
        w.write_all(&VOCAB_VERSION.to_le_bytes())?;
        w.write_all(&(self.k() as u32).to_le_bytes())?;
        w.write_all(&(DESCRIPTOR_LEN as u32).to_le_bytes())?;
        for c in &self.centroids {
            for v in c {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, RetrievalError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != VOCAB_MAGIC {
            return Err(RetrievalError::Format("not a vocabulary file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VOCAB_VERSION {
            return Err(RetrievalError::Format(format!("unsupported vocabulary version {version}")));
        }
        let k = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        if dim != DESCRIPTOR_LEN {
            return Err(RetrievalError::Format(format!("descriptor length {dim}, expected {DESCRIPTOR_LEN}")));
        }
        let mut centroids = Vec::with_capacity(k.min(1 << 20));
        let mut buf = [0u8; 4];
        for _ in 0..k {
            let mut c = [0.0f32; DESCRIPTOR_LEN];
            for v in &mut c {
                r.read_exact(&mut buf)?;
                *v = f32::from_le_bytes(buf);
            }
            centroids.push(c);
        }
        Self::from_centroids(centroids)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        self.write_to(BufWriter::new(File::create(path)?))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Trains on the raw vectors of `descs`.
pub fn train_vocabulary(descs: &[SiftDescriptor], k: usize, seed: u64) -> Result<Vocabulary, RetrievalError> {
    let sample: Vec<DescVec> = descs.iter().map(|d| d.v).collect();
    Vocabulary::train(&sample, k, seed)
}

pub(super) fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn kmeans_pp(sample: &[DescVec], k: usize, rng: &mut ChaCha8Rng) -> Vec<DescVec> {
    let first = rng.random_range(0..sample.len());
    let mut centroids = vec![sample[first]];
    let mut chosen = vec![false; sample.len()];
    chosen[first] = true;
    let mut d2: Vec<f64> = sample.iter().map(|p| dist_sq(p, &sample[first]) as f64).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if t < d {
                        break;
                    }
                    t -= d;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            // every remaining point duplicates a centroid
            let free: Vec<usize> = (0..sample.len()).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.push(sample[pick]);
        for (d, p) in d2.iter_mut().zip(sample) {
            *d = d.min(dist_sq(p, &sample[pick]) as f64);
        }
    }
    centroids
}
