use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::free::free_forward_green;
use super::topology::TreeTopology;
use crate::disorder::{self, DisorderSpec};
use crate::error::{Error, Result};
use crate::streams::StreamId;

/// Denominators smaller than this are resonances: clamped and counted.
pub const RESONANCE_FLOOR: f64 = 1e-300;

/// Spectral parameter `z = E + iη` together with the disorder strength λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub energy: f64,
    pub eta: f64,
    pub lambda: f64,
}

impl SpectralPoint {
    pub fn new(energy: f64, eta: f64, lambda: f64) -> Result<Self> {
        if !(eta >= 0.0) || !energy.is_finite() || !eta.is_finite() {
            return Err(Error::Config(format!("need finite E and eta >= 0, got E={energy}, eta={eta}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { energy, eta, lambda })
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.energy, self.eta)
    }
}

/// One realization of the potential `V(ω)` on a tree, tagged with its stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSample {
    pub values: Vec<f64>,
    pub stream: Option<StreamId>,
}

impl PotentialSample {
    pub fn draw(topology: &TreeTopology, spec: &DisorderSpec, stream: StreamId) -> Self {
        Self {
            values: disorder::sample(spec, stream, topology.node_count()),
            stream: Some(stream),
        }
    }

    pub fn constant(topology: &TreeTopology, value: f64) -> Self {
        Self {
            values: vec![value; topology.node_count()],
            stream: None,
        }
    }

    /// Restriction to a smaller tree (a prefix in breadth-first order).
    pub fn restricted(&self, topology: &TreeTopology) -> Self {
        Self {
            values: self.values[..topology.node_count()].to_vec(),
            stream: self.stream,
        }
    }
}

/// What the leaves see below them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Leaves are bare sites: the finite rooted operator.
    #[default]
    Open,
    /// Every leaf carries K free subtrees, i.e. self-energy `K·Γ₀(z)`.
    FreeContinuation,
}

impl Boundary {
    fn leaf_self_energy(self, k: usize, z: Complex64) -> Complex64 {
        match self {
            Boundary::Open => Complex64::new(0.0, 0.0),
            Boundary::FreeContinuation => k as f64 * free_forward_green(k, z),
        }
    }
}

/// Forward Green functions `Γ_v` of every subtree, at one spectral point.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenState {
    pub gamma: Vec<Complex64>,
    pub point: SpectralPoint,
    pub topology: TreeTopology,
    /// Number of clamped near-zero denominators.
    pub resonances: usize,
}

impl GreenState {
    /// `Γ_root = ⟨0|(H − z)⁻¹|0⟩`.
    pub fn root(&self) -> Complex64 {
        self.gamma[0]
    }
}

#[inline]
fn invert(denominator: Complex64, resonances: &mut usize) -> Complex64 {
    if denominator.norm() < RESONANCE_FLOOR {
        *resonances += 1;
        let direction = if denominator == Complex64::new(0.0, 0.0) {
            Complex64::new(1.0, 0.0)
        } else {
            denominator / denominator.norm()
        };
        direction.conj() / RESONANCE_FLOOR
    } else {
        1.0 / denominator
    }
}

/// Forward recursion on the finite rooted tree with open leaves:
/// `Γ_v = 1/(λV_v − z − Σ_children Γ_c)`.
pub fn forward_recursion(
    topology: &TreeTopology,
    potential: &PotentialSample,
    point: &SpectralPoint,
) -> Result<GreenState> {
    forward_recursion_with(topology, potential, point, Boundary::Open)
}

pub fn forward_recursion_with(
    topology: &TreeTopology,
    potential: &PotentialSample,
    point: &SpectralPoint,
    boundary: Boundary,
) -> Result<GreenState> {
    let n = topology.node_count();
    if potential.values.len() != n {
        return Err(Error::Config(format!(
            "potential has {} values, tree has {n} nodes",
            potential.values.len()
        )));
    }
    let k = topology.branching();
    let z = point.z();
    let leaf_sigma = boundary.leaf_self_energy(k, z);
    let lambda = point.lambda;
    let mut gamma = vec![Complex64::new(0.0, 0.0); n];
    let mut resonances = 0;
    // Children always carry larger indices than their parent.
    for i in (0..n).rev() {
        let children = topology.children(i);
        let sigma = if children.is_empty() {
            leaf_sigma
        } else {
            gamma[children].iter().sum()
        };
        gamma[i] = invert(lambda * potential.values[i] - z - sigma, &mut resonances);
    }
    Ok(GreenState {
        gamma,
        point: *point,
        topology: *topology,
        resonances,
    })
}

/// Forward recursion when the potential is constant on each level
/// (`level_potential[d]` at depth `d`); all nodes of a level then coincide,
/// so the cost is O(R) instead of O(K^R). Returns Γ per level, root first.
pub fn level_recursion(
    k: usize,
    level_potential: &[f64],
    point: &SpectralPoint,
    boundary: Boundary,
) -> (Vec<Complex64>, usize) {
    let z = point.z();
    let mut sigma = boundary.leaf_self_energy(k, z);
    let mut out = vec![Complex64::new(0.0, 0.0); level_potential.len()];
    let mut resonances = 0;
    for (d, v) in level_potential.iter().enumerate().rev() {
        let g = invert(point.lambda * v - z - sigma, &mut resonances);
        out[d] = g;
        sigma = k as f64 * g;
    }
    (out, resonances)
}

/// Complex first row `G(0, v)` for every node:
/// `G(0, v) = −G(0, parent(v))·Γ_v` (unit hopping).
pub fn root_row(state: &GreenState) -> Vec<Complex64> {
    let t = &state.topology;
    let mut row = vec![Complex64::new(0.0, 0.0); t.node_count()];
    row[0] = state.gamma[0];
    for i in 1..t.node_count() {
        let p = (i - 1) / t.branching();
        row[i] = -row[p] * state.gamma[i];
    }
    row
}

/// Signed `G(0, target)` by the product along the root-to-target path.
pub fn path_green(state: &GreenState, target: usize) -> Complex64 {
    let path = state.topology.path_to(target);
    path[1..]
        .iter()
        .fold(state.gamma[0], |acc, v| -acc * state.gamma[*v])
}

/// `|G(0, target)| = |Γ_root| · Π_j |Γ_{x_j}|` along the path.
pub fn path_green_magnitude(state: &GreenState, target: usize) -> f64 {
    let path = state.topology.path_to(target);
    path[1..]
        .iter()
        .fold(state.gamma[0].norm(), |acc, v| acc * state.gamma[*v].norm())
}

/// Diagonal `G(x, x)` at every node of the rooted tree.
///
/// Downward pass over upper cavities: `U_c = 1/(1/Γ_p + Γ_c − U_p)`,
/// `G(c, c) = 1/(1/Γ_c − U_c)`, with `U_root = 0`.
pub fn diagonal_green(state: &GreenState) -> Vec<Complex64> {
    let t = &state.topology;
    let n = t.node_count();
    let mut upper = vec![Complex64::new(0.0, 0.0); n];
    let mut diag = vec![Complex64::new(0.0, 0.0); n];
    diag[0] = state.gamma[0];
    for c in 1..n {
        let p = (c - 1) / t.branching();
        upper[c] = 1.0 / (1.0 / state.gamma[p] + state.gamma[c] - upper[p]);
        diag[c] = 1.0 / (1.0 / state.gamma[c] - upper[c]);
    }
    diag
}

/// `1/(λ·v0 − z − Σ gammas)`: a vertex of the (K+1)-regular tree whose
/// K+1 branches have forward values `gammas`.
pub fn homogeneous_vertex_green(
    k: usize,
    point: &SpectralPoint,
    gammas: &[Complex64],
    v0: f64,
) -> Result<(Complex64, bool)> {
    if gammas.len() != k + 1 {
        return Err(Error::Config(format!("need K+1 = {} branch values, got {}", k + 1, gammas.len())));
    }
    let sigma: Complex64 = gammas.iter().sum();
    let mut resonances = 0;
    let g = invert(point.lambda * v0 - point.z() - sigma, &mut resonances);
    Ok((g, resonances > 0))
}

/// Number of eigenvalues of the open rooted operator strictly below the real
/// energy `energy` (Sylvester inertia of the leaves-first LDLᵀ pivots).
pub fn eigenvalues_below(
    topology: &TreeTopology,
    potential: &PotentialSample,
    lambda: f64,
    energy: f64,
) -> usize {
    let n = topology.node_count();
    let mut pivots_inv = vec![0.0f64; n];
    let mut negative = 0;
    for i in (0..n).rev() {
        let coupling: f64 = pivots_inv[topology.children(i)].iter().sum();
        let mut pivot = lambda * potential.values[i] - energy - coupling;
        if pivot == 0.0 {
            pivot = f64::MIN_POSITIVE;
        }
        if pivot < 0.0 {
            negative += 1;
        }
        pivots_inv[i] = 1.0 / pivot;
    }
    negative
}

/// Smallest eigenvalue of the open rooted operator, by bisection on the
/// inertia count down to an interval of width `tol`.
pub fn ground_state_by_inertia(
    topology: &TreeTopology,
    potential: &PotentialSample,
    lambda: f64,
    tol: f64,
) -> f64 {
    let max_diag = potential.values[..topology.node_count()]
        .iter()
        .fold(0.0f64, |m, v| m.max((lambda * v).abs()));
    let mut lo = -(topology.branching() as f64 + 1.0) - max_diag - 1.0;
    // Rayleigh quotient at the root bounds the minimum from above.
    let mut hi = lambda * potential.values[0] + tol;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if eigenvalues_below(topology, potential, lambda, mid) > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::free_forward_green;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn point(e: f64, eta: f64, lambda: f64) -> SpectralPoint {
        SpectralPoint::new(e, eta, lambda).unwrap()
    }

    #[test]
    fn single_site() {
        let t = TreeTopology::new(2, 0).unwrap();
        let v = PotentialSample::constant(&t, 0.0);
        let s = forward_recursion(&t, &v, &point(0.0, 1.0, 0.0)).unwrap();
        assert!((s.root() - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn star_at_z_equals_i() {
        let t = TreeTopology::new(2, 1).unwrap();
        let v = PotentialSample::constant(&t, 0.0);
        let s = forward_recursion(&t, &v, &point(0.0, 1.0, 0.0)).unwrap();
        assert!((s.gamma[1] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((s.root() - c(0.0, 1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn star_off_diagonal_magnitude() {
        // 3-site star: G(0,1) = −z/(z²−2)·(−1/z) → |G(0,1)| = 1/|z² − 2|.
        let t = TreeTopology::new(2, 1).unwrap();
        let v = PotentialSample::constant(&t, 0.0);
        let p = point(0.3, 0.7, 0.0);
        let s = forward_recursion(&t, &v, &p).unwrap();
        let z = p.z();
        assert!((path_green_magnitude(&s, 1) - 1.0 / (z * z - 2.0).norm()).abs() < 1e-14);
        assert_eq!(path_green_magnitude(&s, 0), s.root().norm());
        assert!((path_green(&s, 2) - root_row(&s)[2]).norm() < 1e-15);
    }

    #[test]
    fn free_continuation_is_exact_at_zero_disorder() {
        let t = TreeTopology::new(2, 6).unwrap();
        let v = PotentialSample::constant(&t, 0.0);
        for e in [-3.5, -1.0, 0.0, 2.0, 2.9] {
            let p = point(e, 1e-6, 0.0);
            let s = forward_recursion_with(&t, &v, &p, Boundary::FreeContinuation).unwrap();
            let g0 = free_forward_green(2, p.z());
            assert!(s.gamma.iter().all(|g| (g - g0).norm() < 1e-12), "E={e}");
        }
    }

    #[test]
    fn open_recursion_converges_outside_band() {
        // Hyperbolic regime: geometric convergence to the free fixed point.
        let t = TreeTopology::new(2, 20).unwrap();
        let p = point(-3.0, 1e-6, 0.0);
        let (levels, _) = level_recursion(2, &[0.0; 21], &p, Boundary::Open);
        assert!((levels[0] - free_forward_green(2, p.z())).norm() < 1e-3);
        // and the level recursion agrees with the full tree on a small case
        let small = t.truncated(8).unwrap();
        let s = forward_recursion(&small, &PotentialSample::constant(&small, 0.0), &p).unwrap();
        let (lv, _) = level_recursion(2, &[0.0; 9], &p, Boundary::Open);
        assert!((s.root() - lv[0]).norm() < 1e-14);
    }

    #[test]
    fn homogeneous_vertex_examples() {
        let k = 2;
        let g = c(0.0, 1.0 / 2f64.sqrt());
        let (v, flagged) = homogeneous_vertex_green(k, &point(0.0, 0.0, 0.0), &[g; 3], 0.0).unwrap();
        assert!(!flagged);
        assert!((v - c(0.0, 2f64.sqrt() / 3.0)).norm() < 1e-15);
        let (v, _) = homogeneous_vertex_green(k, &point(-3.0, 0.0, 0.0), &[c(0.5, 0.0); 3], 0.0).unwrap();
        assert!((v - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(homogeneous_vertex_green(k, &point(0.0, 0.0, 0.0), &[g; 2], 0.0).is_err());
    }

    #[test]
    fn resonance_is_flagged() {
        let t = TreeTopology::new(2, 0).unwrap();
        let v = PotentialSample::constant(&t, 0.0);
        let s = forward_recursion(&t, &v, &point(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(s.resonances, 1);
        assert!(s.root().is_finite());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let t = TreeTopology::new(2, 2).unwrap();
        let v = PotentialSample { values: vec![0.0; 3], stream: None };
        assert!(forward_recursion(&t, &v, &point(0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn inertia_of_free_star() {
        // Star eigenvalues {−√2, 0, √2}.
        let t = TreeTopology::new(2, 1).unwrap();
        let v = PotentialSample::constant(&t, 0.0);
        assert_eq!(eigenvalues_below(&t, &v, 0.0, -1.5), 0);
        assert_eq!(eigenvalues_below(&t, &v, 0.0, -1.4), 1);
        assert_eq!(eigenvalues_below(&t, &v, 0.0, 0.1), 2);
        assert_eq!(eigenvalues_below(&t, &v, 0.0, 1.5), 3);
    }

    mod props {
        use super::super::*;
        use crate::disorder::DisorderSpec;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn herglotz(k in 2usize..4, r in 0usize..6, lambda in 0.0f64..2.0,
                        e in -5.0f64..5.0, eta in 1e-6f64..1.0, seed in any::<u64>(),
                        free in any::<bool>()) {
                let t = TreeTopology::new(k, r).unwrap();
                let v = PotentialSample::draw(&t, &DisorderSpec::uniform(1.0), StreamId::new(seed, 0));
                let p = SpectralPoint::new(e, eta, lambda).unwrap();
                let b = if free { Boundary::FreeContinuation } else { Boundary::Open };
                let s = forward_recursion_with(&t, &v, &p, b).unwrap();
                prop_assert!(s.gamma.iter().all(|g| g.im > 0.0));
                prop_assert!(diagonal_green(&s).iter().all(|g| g.im > 0.0));
            }
        }
    }
}
