//! One-dimensional Gaussian mixture fitted by expectation-maximization.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub seed: u64,
    /// Stop once the mean per-sample log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub var_floor: f64,
    /// Restarts from k-means++ seeds refined by k-means; the best final likelihood wins.
    pub n_init: usize,
}

impl Default for GmmParams {
    fn default() -> Self {
        GmmParams {
            seed: 0,
            tol: 1e-7,
            max_iter: 500,
            var_floor: 1e-6,
            n_init: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl GmmComponent {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    fn log_weighted_pdf(&self, x: f64) -> f64 {
        self.weight.ln() + log_normal_pdf(x, self.mean, self.variance)
    }
}

/// A fitted mixture; components are sorted by mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Total log-likelihood at initialization and after every EM step.
    pub trace: Vec<f64>,
}

pub fn log_normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * PI * variance).ln() + d * d / variance)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Index of the component with the highest posterior for `x`.
    pub fn assign(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (i, c) in self.components.iter().enumerate() {
            let v = c.log_weighted_pdf(x);
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        best
    }

    pub fn posteriors(&self, x: f64) -> Vec<f64> {
        let logs: Vec<f64> = self.components.iter().map(|c| c.log_weighted_pdf(x)).collect();
        let z = log_sum_exp(&logs);
        logs.iter().map(|l| (l - z).exp()).collect()
    }

    pub fn log_likelihood_of(&self, samples: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.components.len()];
        samples
            .iter()
            .map(|&x| {
                for (b, c) in buf.iter_mut().zip(&self.components) {
                    *b = c.log_weighted_pdf(x);
                }
                log_sum_exp(&buf)
            })
            .sum()
    }
}

pub fn fit_gmm_1d(samples: &[f64], n_components: usize, params: &GmmParams) -> Result<GmmModel> {
    if n_components == 0 {
        return Err(Error::Input("n_components must be positive".into()));
    }
    if samples.len() < n_components {
        return Err(Error::Input(format!(
            "{} samples are too few for {n_components} components",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("samples must be finite".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Degenerate("all samples are identical".into()));
    }
    if !(params.var_floor > 0.0) || params.tol < 0.0 || params.n_init == 0 {
        return Err(Error::Input("invalid GMM parameters".into()));
    }

    let mut best: Option<GmmModel> = None;
    for restart in 0..params.n_init {
        let seed = params.seed.wrapping_add(restart as u64);
        let model = run_em(samples, n_components, params, seed);
        let better = match &best {
            None => true,
            Some(b) => model.log_likelihood > b.log_likelihood,
        };
        if better {
            best = Some(model);
        }
    }
    let mut model = best.expect("n_init >= 1");
    model.components.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    Ok(model)
}

fn kmeans_pp_init(samples: &[f64], k: usize, var_floor: f64, rng: &mut ChaCha8Rng) -> Vec<GmmComponent> {
    let n = samples.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(samples[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = samples.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            samples[pick]
        } else {
            samples[rng.random_range(0..n)]
        };
        centers.push(next);
        for (d, x) in d2.iter_mut().zip(samples) {
            *d = d.min((x - next).powi(2));
        }
    }

    lloyd(samples, &mut centers);

    let mean_all = samples.iter().sum::<f64>() / n as f64;
    let var_all = samples.iter().map(|x| (x - mean_all).powi(2)).sum::<f64>() / n as f64;
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    let mut count = vec![0usize; k];
    for &x in samples {
        let j = nearest(x, &centers);
        sum[j] += x;
        sum_sq[j] += x * x;
        count[j] += 1;
    }
    let mut comps: Vec<GmmComponent> = (0..k)
        .map(|j| {
            if count[j] >= 2 {
                let m = sum[j] / count[j] as f64;
                let v = (sum_sq[j] / count[j] as f64 - m * m).max(var_floor);
                GmmComponent { weight: count[j] as f64, mean: m, variance: v }
            } else {
                GmmComponent {
                    weight: count[j].max(1) as f64,
                    mean: centers[j],
                    variance: (var_all / (k * k) as f64).max(var_floor),
                }
            }
        })
        .collect();
    let wsum: f64 = comps.iter().map(|c| c.weight).sum();
    for c in &mut comps {
        c.weight /= wsum;
    }
    comps
}

fn nearest(x: f64, centers: &[f64]) -> usize {
    (0..centers.len())
        .min_by(|&a, &b| (x - centers[a]).abs().total_cmp(&(x - centers[b]).abs()))
        .unwrap()
}

/// k-means refinement of seeded centers; stops when assignments settle.
fn lloyd(samples: &[f64], centers: &mut [f64]) {
    const MAX_ROUNDS: usize = 100;
    let k = centers.len();
    let mut assign = vec![usize::MAX; samples.len()];
    for _ in 0..MAX_ROUNDS {
        let mut changed = false;
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for (a, &x) in assign.iter_mut().zip(samples) {
            let j = nearest(x, centers);
            changed |= *a != j;
            *a = j;
            sum[j] += x;
            count[j] += 1;
        }
        if !changed {
            break;
        }
        for j in 0..k {
            if count[j] > 0 {
                centers[j] = sum[j] / count[j] as f64;
            }
        }
    }
}

/// E-step: fills responsibilities and returns the total log-likelihood.
fn e_step(samples: &[f64], comps: &[GmmComponent], resp: &mut [f64]) -> f64 {
    let k = comps.len();
    let mut ll = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let row = &mut resp[i * k..(i + 1) * k];
        for (r, c) in row.iter_mut().zip(comps) {
            *r = c.log_weighted_pdf(x);
        }
        let z = log_sum_exp(row);
        for r in row.iter_mut() {
            *r = (*r - z).exp();
        }
        ll += z;
    }
    ll
}

fn m_step(samples: &[f64], comps: &mut [GmmComponent], resp: &[f64], var_floor: f64) {
    let k = comps.len();
    let n = samples.len() as f64;
    for (j, c) in comps.iter_mut().enumerate() {
        let mut nk = 0.0;
        let mut sx = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let r = resp[i * k + j];
            nk += r;
            sx += r * x;
        }
        c.weight = nk / n;
        if nk <= f64::MIN_POSITIVE {
            // an empty component keeps its location; its weight is zero
            continue;
        }
        let mean = sx / nk;
        let mut sv = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            sv += resp[i * k + j] * (x - mean).powi(2);
        }
        c.mean = mean;
        c.variance = (sv / nk).max(var_floor);
    }
}

fn run_em(samples: &[f64], k: usize, params: &GmmParams, seed: u64) -> GmmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps = kmeans_pp_init(samples, k, params.var_floor, &mut rng);
    let mut resp = vec![0.0; samples.len() * k];
    let n = samples.len() as f64;
    let mut ll = e_step(samples, &comps, &mut resp);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        m_step(samples, &mut comps, &resp, params.var_floor);
        let next = e_step(samples, &comps, &mut resp);
        iterations += 1;
        trace.push(next);
        let gain = (next - ll) / n;
        ll = next;
        if gain < params.tol {
            converged = true;
            break;
        }
    }
    GmmModel {
        components: comps,
        log_likelihood: ll,
        iterations,
        converged,
        trace,
    }
}
