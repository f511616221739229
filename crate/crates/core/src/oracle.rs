//! Brute-force linear algebra on explicit tree Hamiltonians.
//!
//! Nothing here knows about the tree recursion: matrices are assembled from
//! the edge list and solved densely. Used as the reference for tests and for
//! the spectral-edge probability experiment.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::stats;
use crate::streams::StreamId;
use crate::tree::{spectrum_edges, PotentialSample, TreeTopology};

/// Largest dimension the oracle accepts.
pub const MAX_DIMENSION: usize = 5000;

/// `T + λV` on a finite tree: unit hopping on `edges`, `diagonal = λ·V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitHamiltonian {
    pub dimension: usize,
    pub diagonal: Vec<f64>,
    /// Each bond once, `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    /// Largest tree degree, used to place the inverse-iteration shift.
    pub branching: usize,
}

impl ExplicitHamiltonian {
    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_diagonal(&DVector::from_vec(self.diagonal.clone()));
        for &(i, j) in &self.edges {
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
        }
        m
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::from_iterator(
            self.dimension,
            self.diagonal.iter().zip(x.iter()).map(|(d, x)| d * x),
        );
        for &(i, j) in &self.edges {
            y[i] += x[j];
            y[j] += x[i];
        }
        y
    }

    /// Off-diagonal row sums (node degrees).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.dimension];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }
}

pub fn assemble(
    topology: &TreeTopology,
    potential: &PotentialSample,
    lambda: f64,
) -> Result<ExplicitHamiltonian> {
    let n = topology.node_count();
    if n > MAX_DIMENSION {
        return Err(Error::Size(format!("dimension {n} exceeds oracle cap {MAX_DIMENSION}")));
    }
    if potential.values.len() != n {
        return Err(Error::Config(format!(
            "potential has {} values, tree has {n} nodes",
            potential.values.len()
        )));
    }
    let edges = (1..n).map(|i| (topology.parent(i).expect("non-root"), i)).collect();
    Ok(ExplicitHamiltonian {
        dimension: n,
        diagonal: potential.values.iter().map(|v| lambda * v).collect(),
        edges,
        branching: topology.branching(),
    })
}

fn max_norm(v: &DVector<Complex64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.norm()))
}

fn check_solution(
    a: &DMatrix<Complex64>,
    x: &DVector<Complex64>,
    b: &DVector<Complex64>,
) -> Result<()> {
    let residual = max_norm(&(a * x - b));
    let scale = max_norm(x).max(1.0);
    if !residual.is_finite() || residual > 1e-8 * scale {
        return Err(Error::Singular(format!("dense solve residual {residual:e}")));
    }
    Ok(())
}

/// Column `site` of `(H − z)⁻¹` by dense LU with partial pivoting.
pub fn resolvent_column(h: &ExplicitHamiltonian, z: Complex64, site: usize) -> Result<Vec<Complex64>> {
    if site >= h.dimension {
        return Err(Error::Config(format!("site {site} outside dimension {}", h.dimension)));
    }
    let mut a = h.dense().map(|x| Complex64::new(x, 0.0));
    for i in 0..h.dimension {
        a[(i, i)] -= z;
    }
    let mut b = DVector::from_element(h.dimension, Complex64::new(0.0, 0.0));
    b[site] = Complex64::new(1.0, 0.0);
    let x = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular(format!("H − z singular at z = {z}")))?;
    check_solution(&a, &x, &b)?;
    Ok(x.iter().copied().collect())
}

/// Smallest eigenvalue by shifted inverse power iteration.
///
/// The shift sits at `−(2√K + max|diag|) − 1`, strictly below the spectrum.
/// Iteration stops once the residual `‖Hx − μx‖` (a bound on the distance of
/// the Rayleigh quotient μ to the spectrum) is below `tol`.
pub fn smallest_eigenvalue(h: &ExplicitHamiltonian, tol: f64) -> Result<f64> {
    const MAX_ITERATIONS: usize = 200_000;
    let n = h.dimension;
    if n > MAX_DIMENSION {
        return Err(Error::Size(format!("dimension {n} exceeds oracle cap {MAX_DIMENSION}")));
    }
    if n == 1 {
        return Ok(h.diagonal[0]);
    }
    let max_diag = h.diagonal.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let shift = -(2.0 * (h.branching as f64).sqrt() + max_diag) - 1.0;
    let mut shifted = h.dense();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu();
    let mut rng = StreamId::new(0x5eed, 0).rng();
    let mut x = DVector::from_iterator(n, (0..n).map(|_| rng.random::<f64>() - 0.5));
    x /= x.norm();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let mut y = lu
            .solve(&x)
            .ok_or_else(|| Error::Singular("shifted matrix singular".into()))?;
        y /= y.norm();
        let hy = h.apply(&y);
        let mu = y.dot(&hy);
        residual = (hy - &y * mu).norm();
        x = y;
        if residual < tol {
            return Ok(mu);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeProbability {
    pub delta_e: f64,
    pub estimate: f64,
    pub hits: usize,
    pub n: usize,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Smallest eigenvalue of `H_λ^(R)` (nodes of depth ≤ R−1) for each of `n`
/// disorder samples; sample `i` uses stream `i`.
pub fn truncated_ground_states(
    k: usize,
    r: usize,
    lambda: f64,
    n: usize,
    spec: &DisorderSpec,
    seed: u64,
) -> Result<Vec<f64>> {
    if r == 0 {
        return Err(Error::Config("truncation depth R must be >= 1".into()));
    }
    let topology = TreeTopology::new(k, r - 1)?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let v = PotentialSample::draw(&topology, spec, StreamId::new(seed, i as u64));
            smallest_eigenvalue(&assemble(&topology, &v, lambda)?, 1e-9)
        })
        .collect()
}

/// Monte Carlo estimate of `P(inf σ(H_λ^(R)) < E_λ + ΔE)` for each ΔE, on
/// common samples, with Wilson 95% intervals.
pub fn edge_probability(
    k: usize,
    r: usize,
    lambda: f64,
    delta_es: &[f64],
    n: usize,
    spec: &DisorderSpec,
    seed: u64,
) -> Result<Vec<EdgeProbability>> {
    if delta_es.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::Config("deltaE must be >= 0".into()));
    }
    let ground = truncated_ground_states(k, r, lambda, n, spec, seed)?;
    let (e_lambda, _) = spectrum_edges(k, lambda);
    Ok(delta_es
        .iter()
        .map(|&delta_e| {
            let hits = ground.iter().filter(|g| **g < e_lambda + delta_e).count();
            let (wilson_low, wilson_high) = stats::wilson_interval(hits, n);
            EdgeProbability {
                delta_e,
                estimate: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
                hits,
                n,
                wilson_low,
                wilson_high,
            }
        })
        .collect())
}

/// Reflection amplitude of a discrete half-line wire attached at `attach`.
///
/// The wire has sites `1..=wire_len` with unit hopping, on-site `u_wire`,
/// and carries `ψ(j) = e^{ikj} + R e^{−ikj}` at energy `E = u_wire + 2cos k`.
/// Tree rows use `z_tree` and an optional per-node self-energy; the unknowns
/// `(ψ_tree, ψ_wire, R)` are solved as one dense system.
pub fn wire_reflection(
    h: &ExplicitHamiltonian,
    node_self_energy: &[Complex64],
    z_tree: Complex64,
    attach: usize,
    wire_len: usize,
    k_wave: f64,
    u_wire: f64,
) -> Result<Complex64> {
    let n = h.dimension;
    if node_self_energy.len() != n || attach >= n || wire_len < 2 {
        return Err(Error::Config("inconsistent wire setup".into()));
    }
    let energy = u_wire + 2.0 * k_wave.cos();
    let dim = n + wire_len + 1;
    if dim > MAX_DIMENSION {
        return Err(Error::Size(format!("dimension {dim} exceeds oracle cap {MAX_DIMENSION}")));
    }
    let one = Complex64::new(1.0, 0.0);
    let phase = |j: f64| Complex64::from_polar(1.0, k_wave * j);
    let mut a = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let mut b = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for i in 0..n {
        a[(i, i)] = h.diagonal[i] - z_tree - node_self_energy[i];
    }
    for &(i, j) in &h.edges {
        a[(i, j)] = one;
        a[(j, i)] = one;
    }
    let wire = |j: usize| n + j - 1;
    let r_col = n + wire_len;
    a[(attach, wire(1))] = one;
    for j in 1..=wire_len {
        let row = wire(j);
        a[(row, row)] = Complex64::new(u_wire - energy, 0.0);
        if j == 1 {
            a[(row, attach)] = one;
        } else {
            a[(row, wire(j - 1))] = one;
        }
        if j < wire_len {
            a[(row, wire(j + 1))] = one;
        } else {
            let next = (wire_len + 1) as f64;
            a[(row, r_col)] = phase(-next);
            b[row] = -phase(next);
        }
    }
    // Pin the far end to the plane-wave form.
    a[(r_col, wire(wire_len))] = one;
    a[(r_col, r_col)] = -phase(-(wire_len as f64));
    b[r_col] = phase(wire_len as f64);
    let x = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("wire scattering system singular".into()))?;
    check_solution(&a, &x, &b)?;
    Ok(x[r_col])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{forward_recursion, SpectralPoint};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn assemble_star() {
        let t = TreeTopology::new(2, 1).unwrap();
        let h = assemble(&t, &PotentialSample::constant(&t, 0.0), 0.3).unwrap();
        let m = h.dense();
        let expect = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m, expect);
        let v = PotentialSample {
            values: vec![0.5, -1.0, 0.25],
            stream: None,
        };
        let h = assemble(&t, &v, 2.0).unwrap();
        assert_eq!(h.diagonal, vec![1.0, -2.0, 0.5]);
        let t3 = TreeTopology::new(3, 3).unwrap();
        let h3 = assemble(&t3, &PotentialSample::constant(&t3, 0.0), 1.0).unwrap();
        for (i, d) in h3.degrees().into_iter().enumerate() {
            let expect = t3.children(i).len() + usize::from(i > 0);
            assert_eq!(d, expect);
        }
        let big = TreeTopology::new(2, 12).unwrap();
        assert!(matches!(
            assemble(&big, &PotentialSample::constant(&big, 0.0), 1.0),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn resolvent_examples() {
        let t0 = TreeTopology::new(2, 0).unwrap();
        let v0 = PotentialSample { values: vec![0.7], stream: None };
        let h0 = assemble(&t0, &v0, 0.5).unwrap();
        let z = c(0.1, 0.2);
        let col = resolvent_column(&h0, z, 0).unwrap();
        assert!((col[0] - 1.0 / (0.35 - z)).norm() < 1e-15);

        let t = TreeTopology::new(2, 1).unwrap();
        let h = assemble(&t, &PotentialSample::constant(&t, 0.0), 0.0).unwrap();
        let col = resolvent_column(&h, c(0.0, 1.0), 0).unwrap();
        assert!((col[0] - c(0.0, 1.0 / 3.0)).norm() < 1e-14);
    }

    #[test]
    fn resolvent_residual() {
        let t = TreeTopology::new(3, 3).unwrap();
        let v = PotentialSample::draw(&t, &DisorderSpec::uniform(1.0), StreamId::new(1, 2));
        let h = assemble(&t, &v, 0.8).unwrap();
        let z = c(0.4, 1e-3);
        let col = resolvent_column(&h, z, 5).unwrap();
        let mut a = h.dense().map(|x| c(x, 0.0));
        for i in 0..h.dimension {
            a[(i, i)] -= z;
        }
        let x = DVector::from_vec(col);
        let mut e = DVector::from_element(h.dimension, c(0.0, 0.0));
        e[5] = c(1.0, 0.0);
        assert!(max_norm(&(a * x - e)) < 1e-10);
    }

    #[test]
    fn singular_resolvent_is_reported() {
        let t = TreeTopology::new(2, 1).unwrap();
        let h = assemble(&t, &PotentialSample::constant(&t, 0.0), 0.0).unwrap();
        assert!(matches!(resolvent_column(&h, c(0.0, 0.0), 0), Err(Error::Singular(_))));
    }

    #[test]
    fn smallest_eigenvalue_examples() {
        let t = TreeTopology::new(2, 1).unwrap();
        let h = assemble(&t, &PotentialSample::constant(&t, 0.0), 0.0).unwrap();
        assert!((smallest_eigenvalue(&h, 1e-10).unwrap() + 2f64.sqrt()).abs() < 1e-10);
        let t0 = TreeTopology::new(2, 0).unwrap();
        let h0 = assemble(&t0, &PotentialSample { values: vec![-0.4], stream: None }, 0.5).unwrap();
        assert_eq!(smallest_eigenvalue(&h0, 1e-10).unwrap(), -0.2);
    }

    #[test]
    fn free_ground_state_follows_radial_chain() {
        // The radial sector of the free rooted tree of depth R is a path of
        // R+1 sites with hopping √K: ground state −2√K cos(π/(R+2)).
        let k = 2usize;
        let edge = 2.0 * (k as f64).sqrt();
        let mut previous = 0.0;
        for r in 4..=10 {
            let t = TreeTopology::new(k, r).unwrap();
            let h = assemble(&t, &PotentialSample::constant(&t, 0.0), 0.0).unwrap();
            let e = smallest_eigenvalue(&h, 1e-9).unwrap();
            let radial = -edge * (std::f64::consts::PI / (r as f64 + 2.0)).cos();
            assert!((e - radial).abs() < 1e-8, "R={r}: {e} vs {radial}");
            assert!(e > -edge && e < previous);
            previous = e;
        }
    }

    #[test]
    fn ground_state_respects_variational_bound() {
        let spec = DisorderSpec::uniform(1.0);
        let g = truncated_ground_states(2, 5, 0.3, 40, &spec, 11).unwrap();
        let (e_lambda, _) = spectrum_edges(2, 0.3);
        assert!(g.iter().all(|e| *e >= e_lambda));
    }

    #[test]
    fn inertia_agrees_with_oracle_ground_state() {
        let spec = DisorderSpec::uniform(1.0);
        let t = TreeTopology::new(2, 4).unwrap();
        for i in 0..20 {
            let v = PotentialSample::draw(&t, &spec, StreamId::new(4, i));
            let h = assemble(&t, &v, 0.7).unwrap();
            let e0 = smallest_eigenvalue(&h, 1e-10).unwrap();
            assert_eq!(crate::tree::eigenvalues_below(&t, &v, 0.7, e0 - 1e-7), 0);
            assert_eq!(crate::tree::eigenvalues_below(&t, &v, 0.7, e0 + 1e-7), 1);
        }
    }

    #[test]
    fn edge_probability_properties() {
        let spec = DisorderSpec::uniform(1.0);
        let res = edge_probability(2, 4, 0.5, &[0.0, 0.5, 1.0, 1.5], 200, &spec, 3).unwrap();
        assert_eq!(res[0].estimate, 0.0);
        assert!(res.windows(2).all(|w| w[0].estimate <= w[1].estimate));
        assert!(res[3].estimate > 0.0);
        for r in &res {
            assert!(r.wilson_low <= r.estimate && r.estimate <= r.wilson_high);
        }
        assert!(edge_probability(2, 4, 0.5, &[-0.1], 10, &spec, 3).is_err());
    }

    #[test]
    fn wire_on_single_site_matches_matching_formula() {
        // Bare site at z: g = 1/(−z).
        let t = TreeTopology::new(2, 0).unwrap();
        let h = assemble(&t, &PotentialSample::constant(&t, 0.0), 0.0).unwrap();
        let z = c(0.3, 0.5);
        let k = std::f64::consts::FRAC_PI_3;
        let r = wire_reflection(&h, &[c(0.0, 0.0)], z, 0, 20, k, 0.3 - 2.0 * k.cos()).unwrap();
        let g = 1.0 / (-z);
        let e_ik = Complex64::from_polar(1.0, k);
        let expect = -(1.0 + e_ik * g) / (1.0 + g / e_ik);
        assert!((r - expect).norm() < 1e-10);
    }

    #[test]
    fn forward_recursion_matches_dense_on_a_fixed_instance() {
        let t = TreeTopology::new(3, 2).unwrap();
        let v = PotentialSample::draw(&t, &DisorderSpec::uniform(1.0), StreamId::new(9, 9));
        let p = SpectralPoint::new(0.2, 1e-3, 0.6).unwrap();
        let s = forward_recursion(&t, &v, &p).unwrap();
        let col = resolvent_column(&assemble(&t, &v, 0.6).unwrap(), p.z(), 0).unwrap();
        assert!((s.root() - col[0]).norm() < 1e-10 * col[0].norm());
    }
}
