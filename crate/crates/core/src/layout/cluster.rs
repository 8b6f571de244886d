//! Turning a fitted mixture into key intervals.

use serde::{Deserialize, Serialize};

use super::gmm::{fit_gmm_1d, GmmModel, GmmParams};
use crate::error::{Error, Result};
use crate::geometry::{ClusterLayout, KeyInterval, Posture};

pub const MIN_CLUSTER_KEYS: usize = 6;
pub const MAX_CLUSTER_KEYS: usize = 14;

/// A cluster layout together with the model it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCandidate {
    pub layout: ClusterLayout,
    pub model: GmmModel,
    /// Samples assigned to each key by maximum posterior.
    pub counts: Vec<usize>,
    /// True when crossing points were unusable and mean midpoints were used.
    pub midpoint_fallback: bool,
}

/// Where the weighted densities of two adjacent components cross, if that
/// happens between their means.
fn crossing(a: &super::gmm::GmmComponent, b: &super::gmm::GmmComponent) -> Option<f64> {
    let (va, vb) = (a.variance, b.variance);
    let qa = -0.5 / va + 0.5 / vb;
    let qb = a.mean / va - b.mean / vb;
    let qc = -a.mean * a.mean / (2.0 * va) + b.mean * b.mean / (2.0 * vb) + a.weight.ln() - b.weight.ln()
        - 0.5 * va.ln()
        + 0.5 * vb.ln();
    let inside = |x: f64| x.is_finite() && x >= a.mean && x <= b.mean;
    if qa.abs() < 1e-12 * (1.0 / va).max(1.0 / vb) {
        if qb == 0.0 {
            return None;
        }
        let x = -qc / qb;
        return inside(x).then_some(x);
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let r1 = (-qb + s) / (2.0 * qa);
    let r2 = (-qb - s) / (2.0 * qa);
    match (inside(r1), inside(r2)) {
        (true, false) => Some(r1),
        (false, true) => Some(r2),
        // both inside: take the one nearer the midpoint
        (true, true) => {
            let mid = 0.5 * (a.mean + b.mean);
            Some(if (r1 - mid).abs() <= (r2 - mid).abs() { r1 } else { r2 })
        }
        (false, false) => None,
    }
}

fn strictly_inside_and_increasing(b: &[f64]) -> bool {
    b.iter().all(|&x| x > 0.0 && x < 1.0) && b.windows(2).all(|w| w[0] < w[1])
}

pub fn cluster_layout_from_gmm(model: &GmmModel, samples: &[f64], posture: Posture) -> Result<ClusterCandidate> {
    let comps = &model.components;
    if comps.len() < 2 {
        return Err(Error::Input("a cluster layout needs at least two components".into()));
    }
    if comps.windows(2).any(|w| w[0].mean > w[1].mean) {
        return Err(Error::Input("model components must be sorted by mean".into()));
    }
    let mut counts = vec![0usize; comps.len()];
    for &x in samples {
        counts[model.assign(x)] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Degenerate(format!(
            "component {empty} of {} has no assigned samples",
            comps.len()
        )));
    }

    let midpoints: Vec<f64> = comps.windows(2).map(|w| 0.5 * (w[0].mean + w[1].mean)).collect();
    let crossings: Option<Vec<f64>> = comps.windows(2).map(|w| crossing(&w[0], &w[1])).collect();
    let (boundaries, fallback) = match crossings {
        Some(c) if strictly_inside_and_increasing(&c) => (c, false),
        _ if strictly_inside_and_increasing(&midpoints) => (midpoints, true),
        _ => return Err(Error::Degenerate("component means do not separate into ordered keys".into())),
    };

    let mut edges = Vec::with_capacity(comps.len() + 1);
    edges.push(0.0);
    edges.extend_from_slice(&boundaries);
    edges.push(1.0);
    let keys = comps
        .iter()
        .enumerate()
        .map(|(i, c)| KeyInterval {
            lo: edges[i],
            hi: edges[i + 1],
            center: c.mean,
            sigma: c.sd(),
        })
        .collect();
    // ties go to the leftmost component
    let space = counts
        .iter()
        .enumerate()
        .fold(0, |best, (i, &c)| if c > counts[best] { i } else { best });
    Ok(ClusterCandidate {
        layout: ClusterLayout::new(posture, keys, space)?,
        model: model.clone(),
        counts,
        midpoint_fallback: fallback,
    })
}

/// Fits one cluster layout per key count in `n_min..=n_max`.
pub fn fit_cluster_layouts(
    samples: &[f64],
    posture: Posture,
    n_min: usize,
    n_max: usize,
    params: &GmmParams,
) -> Result<Vec<ClusterCandidate>> {
    if n_min < 2 || n_min > n_max {
        return Err(Error::Input(format!("invalid key-count range {n_min}..={n_max}")));
    }
    use rayon::prelude::*;
    (n_min..=n_max)
        .into_par_iter()
        .map(|n| {
            let model = fit_gmm_1d(samples, n, params)?;
            cluster_layout_from_gmm(&model, samples, posture)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub posture: Posture,
    pub n_keys: usize,
    pub space_key_index: usize,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub midpoint_fallback: bool,
    pub counts: Vec<usize>,
    pub keys: Vec<KeyInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFile {
    pub version: u32,
    pub layouts: Vec<ClusterRecord>,
}

impl ClusterFile {
    pub fn from_candidates(cands: &[ClusterCandidate]) -> Self {
        ClusterFile {
            version: 1,
            layouts: cands
                .iter()
                .map(|c| ClusterRecord {
                    posture: c.layout.posture,
                    n_keys: c.layout.n_keys(),
                    space_key_index: c.layout.space_key_index(),
                    log_likelihood: c.model.log_likelihood,
                    iterations: c.model.iterations,
                    midpoint_fallback: c.midpoint_fallback,
                    counts: c.counts.clone(),
                    keys: c.layout.keys().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("cluster file is serializable")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let f: ClusterFile = toml::from_str(s).map_err(|e| Error::Input(format!("cluster file: {e}")))?;
        if f.version != 1 {
            return Err(Error::Input(format!("unsupported cluster file version {}", f.version)));
        }
        Ok(f)
    }

    pub fn layouts(&self) -> Result<Vec<ClusterLayout>> {
        self.layouts
            .iter()
            .map(|r| ClusterLayout::new(r.posture, r.keys.clone(), r.space_key_index))
            .collect()
    }
}
