use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::finite_depth::FiniteDepthConfig;
use super::population::{population_dynamics, PopulationConfig};
use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::stats;
use crate::streams::StreamId;
use crate::tree::{
    forward_recursion_with, homogeneous_vertex_green, level_recursion, PotentialSample, SpectralPoint,
    TreeTopology,
};

/// Where the K+1 branch values of a vertex come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GreenSource {
    FiniteDepth(FiniteDepthConfig),
    Population(PopulationConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcDensity {
    /// `π⁻¹ · mean Im G(x, x)`.
    pub density: f64,
    pub density_stderr: f64,
    /// Fraction of samples with `Im G > 10η`.
    pub positive_fraction: f64,
    pub n: usize,
    pub resonances: usize,
}

/// `n` samples of the vertex Green value `G(x, x; z)` of the (K+1)-regular
/// tree, each built from K+1 independent branch values and one on-site draw.
///
/// Finite depth: sample `i` uses streams `i(K+2) + j`, `j ≤ K` for the
/// branches and `j = K+1` for the vertex potential. Population: one pool on
/// stream 0, then all draws from stream 1.
pub fn vertex_green_samples(
    k: usize,
    point: &SpectralPoint,
    source: &GreenSource,
    n: usize,
    spec: &DisorderSpec,
    seed: u64,
) -> Result<(Vec<Complex64>, usize)> {
    if n == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    spec.validate()?;
    match source {
        GreenSource::FiniteDepth(cfg) => {
            if point.lambda == 0.0 {
                let (levels, res) = level_recursion(k, &vec![0.0; cfg.depth + 1], point, cfg.boundary);
                let (g, flag) = homogeneous_vertex_green(k, point, &vec![levels[0]; k + 1], 0.0)?;
                return Ok((vec![g; n], (res + flag as usize) * n));
            }
            let t = TreeTopology::new(k, cfg.depth)?;
            let per: Vec<(Complex64, usize)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let base = (i * (k + 2)) as u64;
                    let mut res = 0;
                    let mut branches = Vec::with_capacity(k + 1);
                    for j in 0..=k {
                        let v = PotentialSample::draw(&t, spec, StreamId::new(seed, base + j as u64));
                        let s = forward_recursion_with(&t, &v, point, cfg.boundary)?;
                        res += s.resonances;
                        branches.push(s.root());
                    }
                    let v0 = spec.draw(&mut StreamId::new(seed, base + k as u64 + 1).rng());
                    let (g, flag) = homogeneous_vertex_green(k, point, &branches, v0)?;
                    Ok((g, res + flag as usize))
                })
                .collect::<Result<_>>()?;
            let res = per.iter().map(|p| p.1).sum();
            Ok((per.into_iter().map(|p| p.0).collect(), res))
        }
        GreenSource::Population(cfg) => {
            let (pool, est) = population_dynamics(k, point, cfg, spec, seed)?;
            let mut rng = StreamId::new(seed, 1).rng();
            let mut res = est.resonances;
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let branches = pool.pick(k + 1, &mut rng);
                let v0 = spec.draw(&mut rng);
                let (g, flag) = homogeneous_vertex_green(k, point, &branches, v0)?;
                res += flag as usize;
                out.push(g);
            }
            Ok((out, res))
        }
    }
}

/// Density of the ac spectral measure at `z = E + iη` from vertex Green samples.
pub fn ac_density(
    k: usize,
    point: &SpectralPoint,
    source: &GreenSource,
    n: usize,
    spec: &DisorderSpec,
    seed: u64,
) -> Result<AcDensity> {
    if !(point.eta > 0.0) {
        return Err(Error::Config("ac density needs eta > 0".into()));
    }
    let (g, resonances) = vertex_green_samples(k, point, source, n, spec, seed)?;
    let im: Vec<f64> = g.iter().map(|g| g.im.max(0.0)).collect();
    let (mean, stderr) = stats::mean_stderr(&im);
    let positive = g.iter().filter(|g| g.im > 10.0 * point.eta).count();
    Ok(AcDensity {
        density: mean / std::f64::consts::PI,
        density_stderr: stderr / std::f64::consts::PI,
        positive_fraction: positive as f64 / n as f64,
        n,
        resonances,
    })
}
