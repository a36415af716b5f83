use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dictionary::{dot, DictionaryPair, HrTarget, Mat};
use super::omp::{Coder, SparseCode};
use super::SparseError;

/// Power-iteration steps per rank-1 atom update.
const POWER_STEPS: usize = 3;

/// One HR target (mean-removed patch or residual) and the ULR features of
/// the same window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub hr: Vec<f64>,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    /// Atom count `K`.
    pub atoms: usize,
    /// Sparsity cap `T` used while training.
    pub sparsity: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { atoms: 512, sparsity: 3, iterations: 8, seed: 0 }
    }
}

/// Trains a coupled dictionary for `patch_size` patches at `upscale`.
pub fn train_dictionary(
    pairs: &[TrainingPair],
    params: &TrainParams,
    patch_size: usize,
    upscale: u32,
    target: HrTarget,
) -> Result<DictionaryPair, SparseError> {
    let p2 = patch_size * patch_size;
    if let Some(p) = pairs.first() {
        if p.hr.len() != p2 || p.feature.len() != 4 * p2 {
            return Err(SparseError::Shape(format!(
                "pairs have n_h = {}, n_l = {}; patch {patch_size} needs {p2} and {}",
                p.hr.len(),
                p.feature.len(),
                4 * p2
            )));
        }
    }
    if params.atoms <= 4 * p2 {
        return Err(SparseError::NotOvercomplete { k: params.atoms, n_l: 4 * p2 });
    }
    let (dh, dl, _) = train_dictionary_traced(pairs, params)?;
    Ok(DictionaryPair::new(dh, dl, patch_size, upscale, target)?.normalize())
}

/// Joint training in the concatenated space
/// `z = [hr / sqrt(n_h); feature / sqrt(n_l)]`, alternating OMP coding with
/// rank-1 atom updates on each atom's support. Returns the raw `(Dh, Dl)`
/// halves (not yet normalised) and the mean squared residual before
/// training and after every iteration; the sequence is non-increasing.
pub fn train_dictionary_traced(
    pairs: &[TrainingPair],
    params: &TrainParams,
) -> Result<(Mat, Mat, Vec<f64>), SparseError> {
    let k = params.atoms;
    if k == 0 {
        return Err(SparseError::EmptyDictionary);
    }
    let needed = 5 * k;
    if pairs.len() < needed {
        return Err(SparseError::InsufficientPairs { pairs: pairs.len(), needed });
    }
    let (n_h, n_l) = (pairs[0].hr.len(), pairs[0].feature.len());
    if pairs.iter().any(|p| p.hr.len() != n_h || p.feature.len() != n_l) {
        return Err(SparseError::Shape("training pairs differ in length".into()));
    }
    let (wh, wl) = (1.0 / (n_h as f64).sqrt(), 1.0 / (n_l as f64).sqrt());
    let z: Vec<Vec<f64>> =
        pairs.iter().map(|p| p.hr.iter().map(|v| v * wh).chain(p.feature.iter().map(|v| v * wl)).collect()).collect();
    let d_len = n_h + n_l;
    let dict = initial_atoms(&z, k, params.seed)?;

    let mut state = State { dict, codes: vec![SparseCode::default(); z.len()], resid: z.clone() };
    let mut trace = vec![state.objective()];
    // rejected swaps since the last accepted one
    let mut rejected = 0;
    for it in 0..params.iterations {
        let prev = *trace.last().expect("non-empty");
        // Swap a weak atom for the worst residual direction; undone if the
        // iteration would end above the previous objective. Each rejection
        // moves on to the next weakest atom.
        let mut trial = state.clone();
        let obj = if trial.perturb(rejected % k) {
            trial.iterate(&z, params.sparsity, d_len);
            let obj = trial.objective();
            if obj <= prev {
                state = trial;
                rejected = 0;
                obj
            } else {
                rejected += 1;
                state.iterate(&z, params.sparsity, d_len);
                state.objective()
            }
        } else {
            state.iterate(&z, params.sparsity, d_len);
            state.objective()
        };
        log::debug!("dictionary iteration {}: mean residual {obj:.6}", it + 1);
        trace.push(obj);
    }
    let dict = state.dict;

    let mut dh = Mat::zeros(n_h, k);
    let mut dl = Mat::zeros(n_l, k);
    for a in 0..k {
        let col = dict.col(a);
        dh.col_mut(a).iter_mut().zip(&col[..n_h]).for_each(|(o, v)| *o = v / wh);
        dl.col_mut(a).iter_mut().zip(&col[n_h..]).for_each(|(o, v)| *o = v / wl);
    }
    Ok((dh, dl, trace))
}

#[derive(Clone)]
struct State {
    dict: Mat,
    codes: Vec<SparseCode>,
    resid: Vec<Vec<f64>>,
}

impl State {
    fn objective(&self) -> f64 {
        self.resid.iter().map(|r| dot(r, r)).sum::<f64>() / self.resid.len() as f64
    }

    /// One round of coding (keeping a vector's previous code when OMP does
    /// worse) and per-atom updates.
    fn iterate(&mut self, z: &[Vec<f64>], sparsity: usize, d_len: usize) {
        let dict = &self.dict;
        let coder = Coder::new(dict);
        let coded: Vec<(SparseCode, Vec<f64>)> = z
            .par_iter()
            .zip(self.codes.par_iter())
            .map(|(zj, old)| {
                let new = coder.code(zj, sparsity, 0.0);
                let r_new = new.residual(zj, dict);
                let r_old = old.residual(zj, dict);
                if dot(&r_new, &r_new) <= dot(&r_old, &r_old) {
                    (new, r_new)
                } else {
                    (old.clone(), r_old)
                }
            })
            .collect();
        let (codes, resid): (Vec<SparseCode>, Vec<Vec<f64>>) = coded.into_iter().unzip();
        self.codes = codes;
        self.resid = resid;

        let k = self.dict.cols();
        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
        for (j, c) in self.codes.iter().enumerate() {
            for (pos, &a) in c.support.iter().enumerate() {
                users[a].push((j, pos));
            }
        }
        let mut replaced = vec![false; z.len()];
        for (a, us) in users.iter().enumerate() {
            if us.is_empty() {
                replace_atom(&mut self.dict, a, &self.resid, &mut replaced);
            } else {
                update_atom(&mut self.dict, a, us, &mut self.codes, &mut self.resid, d_len);
            }
        }
    }

    /// Points the atom with the `rank`-th least coefficient energy along the
    /// largest residual and drops it from the codes that used it; residuals
    /// are recomputed by the next coding pass. False when there is nothing
    /// to do.
    fn perturb(&mut self, rank: usize) -> bool {
        let k = self.dict.cols();
        let mut energy = vec![0.0; k];
        for c in &self.codes {
            for (&a, &x) in c.support.iter().zip(&c.coefficients) {
                energy[a] += x * x;
            }
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| energy[a].total_cmp(&energy[b]));
        let Some(&weak) = order.get(rank) else {
            return false;
        };
        let mut replaced = vec![false; self.resid.len()];
        if !replace_atom(&mut self.dict, weak, &self.resid, &mut replaced) {
            return false;
        }
        for c in self.codes.iter_mut() {
            if let Some(pos) = c.support.iter().position(|&a| a == weak) {
                c.support.remove(pos);
                c.coefficients.remove(pos);
            }
        }
        true
    }
}

/// `K` distinct non-zero training vectors in seeded random order, unit norm.
fn initial_atoms(z: &[Vec<f64>], k: usize, seed: u64) -> Result<Mat, SparseError> {
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in order {
        let n = dot(&z[j], &z[j]).sqrt();
        if n == 0.0 {
            continue;
        }
        let atom: Vec<f64> = z[j].iter().map(|v| v / n).collect();
        if chosen.iter().any(|c| c == &atom) {
            continue;
        }
        chosen.push(atom);
        if chosen.len() == k {
            return Mat::from_columns(z[0].len(), &chosen);
        }
    }
    Err(SparseError::DegeneratePairs)
}

/// An atom takes the direction of the largest residual not already used
/// this round. Codes are unaffected.
fn replace_atom(dict: &mut Mat, a: usize, resid: &[Vec<f64>], replaced: &mut [bool]) -> bool {
    let mut best = None;
    let mut best_e = 0.0;
    for (j, r) in resid.iter().enumerate() {
        let e = dot(r, r);
        if !replaced[j] && e.is_finite() && e > best_e {
            best_e = e;
            best = Some(j);
        }
    }
    let Some(j) = best else { return false };
    replaced[j] = true;
    let n = best_e.sqrt();
    dict.col_mut(a).iter_mut().zip(&resid[j]).for_each(|(o, v)| *o = v / n);
    true
}

/// Best rank-1 refit of atom `a` and its coefficients on the vectors that
/// use it, by power iteration started from the current atom. Kept only if
/// it does not increase the residual.
fn update_atom(
    dict: &mut Mat,
    a: usize,
    users: &[(usize, usize)],
    codes: &mut [SparseCode],
    resid: &mut [Vec<f64>],
    d_len: usize,
) {
    let atom = dict.col(a).to_vec();
    // E restricted to the users: residual with atom a's contribution added back
    let e: Vec<Vec<f64>> = users
        .iter()
        .map(|&(j, pos)| {
            let c = codes[j].coefficients[pos];
            resid[j].iter().zip(&atom).map(|(r, d)| r + c * d).collect()
        })
        .collect();
    let before: f64 = users.iter().map(|&(j, _)| dot(&resid[j], &resid[j])).sum();

    let mut d = atom;
    for _ in 0..POWER_STEPS {
        let mut u = vec![0.0; d_len];
        for ej in &e {
            let v = dot(ej, &d);
            u.iter_mut().zip(ej).for_each(|(ui, x)| *ui += v * x);
        }
        let n = dot(&u, &u).sqrt();
        if n == 0.0 || !n.is_finite() {
            return;
        }
        d = u.into_iter().map(|x| x / n).collect();
    }
    let coefs: Vec<f64> = e.iter().map(|ej| dot(ej, &d)).collect();
    let new_r: Vec<Vec<f64>> =
        e.iter().zip(&coefs).map(|(ej, &c)| ej.iter().zip(&d).map(|(x, di)| x - c * di).collect()).collect();
    let after: f64 = new_r.iter().map(|r| dot(r, r)).sum();
    if after > before {
        return;
    }
    dict.col_mut(a).copy_from_slice(&d);
    for ((&(j, pos), c), r) in users.iter().zip(coefs).zip(new_r) {
        codes[j].coefficients[pos] = c;
        resid[j] = r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = dot(&v, &v).sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    /// Pairs drawn from a planted coupled dictionary with `t`-sparse codes.
    fn planted(n_h: usize, n_l: usize, k: usize, t: usize, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<TrainingPair>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms: Vec<Vec<f64>> =
            (0..k).map(|_| unit((0..n_h + n_l).map(|_| rng.sample(StandardNormal)).collect())).collect();
        let pairs = (0..n)
            .map(|_| {
                let mut z = vec![0.0; n_h + n_l];
                let mut used = Vec::new();
                while used.len() < t {
                    let a = rng.random_range(0..k);
                    if !used.contains(&a) {
                        used.push(a);
                    }
                }
                for a in used {
                    let c: f64 = rng.random_range(0.5..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                    z.iter_mut().zip(&atoms[a]).for_each(|(zi, d)| *zi += c * d);
                }
                TrainingPair {
                    hr: z[..n_h].iter().map(|v| v * (n_h as f64).sqrt()).collect(),
                    feature: z[n_h..].iter().map(|v| v * (n_l as f64).sqrt()).collect(),
                }
            })
            .collect();
        (atoms, pairs)
    }

    fn concat_unit(dh: &Mat, dl: &Mat, a: usize) -> Vec<f64> {
        let (wh, wl) = (1.0 / (dh.rows() as f64).sqrt(), 1.0 / (dl.rows() as f64).sqrt());
        unit(dh.col(a).iter().map(|v| v * wh).chain(dl.col(a).iter().map(|v| v * wl)).collect())
    }

    #[test]
    fn planted_dictionary_is_recovered() {
        let (truth, pairs) = planted(16, 6, 8, 2, 2000, 11);
        let params = TrainParams { atoms: 8, sparsity: 2, iterations: 40, seed: 5 };
        let (dh, dl, trace) = train_dictionary_traced(&pairs, &params).unwrap();
        for t in &truth {
            let best = (0..8).map(|a| dot(t, &concat_unit(&dh, &dl, a)).abs()).fold(0.0, f64::max);
            let angle = best.min(1.0).acos().to_degrees();
            assert!(angle < 5.0, "atom missed by {angle} deg; trace {trace:?}");
        }
    }

    #[test]
    fn objective_is_monotone() {
        let (_, pairs) = planted(9, 36, 12, 3, 600, 3);
        let noisy: Vec<TrainingPair> = pairs
            .iter()
            .enumerate()
            .map(|(i, p)| TrainingPair {
                hr: p.hr.iter().enumerate().map(|(j, v)| v + ((i * 31 + j * 7) % 13) as f64 * 0.01).collect(),
                feature: p.feature.clone(),
            })
            .collect();
        let params = TrainParams { atoms: 40, sparsity: 3, iterations: 8, seed: 1 };
        let (_, _, trace) = train_dictionary_traced(&noisy, &params).unwrap();
        assert_eq!(trace.len(), 9);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{trace:?}");
        }
    }

    #[test]
    fn zero_iterations_returns_normalised_seeded_init() {
        let (_, pairs) = planted(4, 16, 20, 2, 200, 9);
        let params = TrainParams { atoms: 20, sparsity: 2, iterations: 0, seed: 4 };
        let a = train_dictionary(&pairs, &params, 2, 2, HrTarget::Residual);
        // K = 20 > n_l = 16
        let a = a.unwrap();
        let b = train_dictionary(&pairs, &params, 2, 2, HrTarget::Residual).unwrap();
        assert_eq!(a, b);
        for c in 0..a.k() {
            assert!((dot(a.dl.col(c), a.dl.col(c)) - 1.0).abs() < 1e-12);
            // each atom is a rescaled training pair
            let hit = pairs.iter().any(|p| {
                let s = a.dl.col(c)[0] / p.feature[0];
                p.feature.iter().zip(a.dl.col(c)).all(|(f, d)| (f * s - d).abs() < 1e-9)
                    && p.hr.iter().zip(a.dh.col(c)).all(|(h, d)| (h * s - d).abs() < 1e-9)
            });
            assert!(hit, "atom {c}");
        }
    }

    #[test]
    fn input_errors() {
        let (_, pairs) = planted(4, 16, 20, 2, 99, 9);
        let params = TrainParams { atoms: 20, sparsity: 2, iterations: 1, seed: 0 };
        assert!(matches!(
            train_dictionary(&pairs, &params, 2, 2, HrTarget::Residual),
            Err(SparseError::InsufficientPairs { pairs: 99, needed: 100 })
        ));
        let same = vec![pairs[0].clone(); 200];
        assert!(matches!(
            train_dictionary(&same, &params, 2, 2, HrTarget::Residual),
            Err(SparseError::DegeneratePairs)
        ));
        let small = TrainParams { atoms: 16, ..params };
        assert!(matches!(
            train_dictionary(&pairs, &small, 2, 2, HrTarget::Residual),
            Err(SparseError::NotOvercomplete { k: 16, n_l: 16 })
        ));
    }
}
