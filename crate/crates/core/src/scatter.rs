//! Reflection of a plane wave sent down a half-line wire attached to one
//! vertex of the tree.
//!
//! The wire is discrete with unit hopping and on-site `u_wire`, so a wave of
//! number `k ∈ (0, π)` has energy `E = u_wire + 2cos k`. Matching at the
//! attachment vertex gives `R = −(1 + e^{ik} g)/(1 + e^{−ik} g)` where `g` is
//! the tree Green function at that vertex, and
//! `|1 + e^{−ik}g|² − |1 + e^{ik}g|² = 4 sin k · Im g`, so `|R| < 1` exactly
//! when `Im g > 0`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::lyapunov::{vertex_green_samples, GreenSource};
use crate::stats::{self, sig9};
use crate::streams::derive_seed;
use crate::tree::SpectralPoint;

fn check_inputs(g: Complex64, k: f64) -> Result<()> {
    if !(k > 0.0 && k < std::f64::consts::PI) {
        return Err(Error::Config(format!("wave number must lie in (0, pi), got {k}")));
    }
    if !g.is_finite() {
        return Err(Error::Unphysical(format!("non-finite Green value {g}")));
    }
    if g.im < 0.0 {
        return Err(Error::Unphysical(format!("Green value {g} has negative imaginary part")));
    }
    Ok(())
}

fn amplitudes(g: Complex64, k: f64) -> Result<(Complex64, Complex64)> {
    check_inputs(g, k)?;
    let e = Complex64::from_polar(1.0, k);
    let numerator = 1.0 + e * g;
    let denominator = 1.0 + e.conj() * g;
    if denominator.norm() == 0.0 {
        return Err(Error::Pole(g.to_string()));
    }
    Ok((numerator, denominator))
}

/// `R = −(1 + e^{ik} g)/(1 + e^{−ik} g)` for a boundary value `g` with `Im g ≥ 0`.
pub fn reflection_coefficient(g: Complex64, k: f64) -> Result<Complex64> {
    let (num, den) = amplitudes(g, k)?;
    Ok(-num / den)
}

/// `|R|` as a ratio of moduli; exactly 1 for real `g`.
pub fn reflection_magnitude(g: Complex64, k: f64) -> Result<f64> {
    let (num, den) = amplitudes(g, k)?;
    Ok(num.norm() / den.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireSetup {
    pub k: f64,
    pub u_wire: f64,
    pub attach_vertex: usize,
}

impl WireSetup {
    /// Wire offset that places wave number `k` at energy `energy`.
    pub fn for_energy(energy: f64, k: f64, attach_vertex: usize) -> Result<Self> {
        if !(k > 0.0 && k < std::f64::consts::PI) {
            return Err(Error::Config(format!("wave number must lie in (0, pi), got {k}")));
        }
        Ok(Self {
            k,
            u_wire: energy - 2.0 * k.cos(),
            attach_vertex,
        })
    }

    pub fn energy(&self) -> f64 {
        self.u_wire + 2.0 * self.k.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Wave number used at every energy.
    pub k_wave: f64,
    pub eta: f64,
    pub samples: usize,
    pub source: GreenSource,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    #[serde(rename = "E")]
    pub energy: f64,
    pub k: f64,
    pub u_wire: f64,
    #[serde(rename = "mean_abs_R")]
    pub mean_abs_r: f64,
    /// Fraction of samples with `|R| < 1 − 10η`.
    pub frac_subunitary: f64,
    #[serde(rename = "mean_Im_G")]
    pub mean_im_g: f64,
}

pub const PROFILE_CSV_HEADER: &str = "E,k,u_wire,mean_abs_R,frac_subunitary,mean_Im_G";

impl ProfileRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            sig9(self.energy),
            sig9(self.k),
            sig9(self.u_wire),
            sig9(self.mean_abs_r),
            sig9(self.frac_subunitary),
            sig9(self.mean_im_g)
        )
    }
}

/// Reflection statistics over an energy grid; the vertex Green values come
/// from [`vertex_green_samples`] at `E + iη`, energy `j` on seed
/// `derive_seed(seed, j)`.
pub fn transmission_profile(
    k: usize,
    lambda: f64,
    energies: &[f64],
    cfg: &ProfileConfig,
    spec: &DisorderSpec,
) -> Result<Vec<ProfileRow>> {
    if !(cfg.eta > 0.0) {
        return Err(Error::Config("transmission profile needs eta > 0".into()));
    }
    let rows: Vec<Result<ProfileRow>> = energies
        .par_iter()
        .enumerate()
        .map(|(j, &energy)| {
            let wire = WireSetup::for_energy(energy, cfg.k_wave, 0)?;
            let point = SpectralPoint::new(energy, cfg.eta, lambda)?;
            let (gs, _) =
                vertex_green_samples(k, &point, &cfg.source, cfg.samples, spec, derive_seed(cfg.seed, j as u64))?;
            let mags = gs
                .iter()
                .map(|g| reflection_magnitude(*g, wire.k))
                .collect::<Result<Vec<f64>>>()?;
            let sub = mags.iter().filter(|m| **m < 1.0 - 10.0 * cfg.eta).count();
            Ok(ProfileRow {
                energy,
                k: wire.k,
                u_wire: wire.u_wire,
                mean_abs_r: stats::compensated_sum(mags.iter().copied()) / mags.len() as f64,
                frac_subunitary: sub as f64 / mags.len() as f64,
                mean_im_g: stats::compensated_sum(gs.iter().map(|g| g.im)) / gs.len() as f64,
            })
        })
        .collect();
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderSpec;
    use crate::lyapunov::FiniteDepthConfig;
    use crate::oracle::{assemble, wire_reflection};
    use crate::streams::StreamId;
    use crate::tree::{diagonal_green, forward_recursion, PotentialSample, TreeTopology};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn examples() {
        assert!((reflection_magnitude(c(0.0, 1.0), PI / 3.0).unwrap() - 0.2679).abs() < 1e-4);
        assert!((reflection_coefficient(c(0.0, 1.0), PI / 3.0).unwrap().norm() - 0.2679).abs() < 1e-4);
        let g = c(0.0, 2f64.sqrt() / 3.0);
        let expect = (1.0 - 2f64.sqrt() / 3.0) / (1.0 + 2f64.sqrt() / 3.0);
        assert!((reflection_magnitude(g, FRAC_PI_2).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.35925).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(reflection_coefficient(c(0.0, -0.1), 1.0), Err(Error::Unphysical(_))));
        assert!(matches!(reflection_coefficient(c(0.0, 1.0), 0.0), Err(Error::Config(_))));
        assert!(matches!(reflection_coefficient(c(0.0, 1.0), PI), Err(Error::Config(_))));
    }

    #[test]
    fn free_profile() {
        let cfg = ProfileConfig {
            k_wave: FRAC_PI_2,
            eta: 1e-8,
            samples: 2,
            source: GreenSource::FiniteDepth(FiniteDepthConfig::new(30, 2)),
            seed: 1,
        };
        let rows = transmission_profile(2, 0.0, &[0.0, 3.2, -3.5], &cfg, &DisorderSpec::default()).unwrap();
        assert!((rows[0].mean_abs_r - 0.35925).abs() < 1e-4);
        assert_eq!(rows[0].frac_subunitary, 1.0);
        for r in &rows[1..] {
            assert!((1.0 - r.mean_abs_r).abs() < 1e-6, "{r:?}");
            assert_eq!(r.frac_subunitary, 0.0);
        }
        assert!((rows[0].u_wire - rows[0].energy).abs() < 1e-15);
    }

    #[test]
    fn wire_oracle_matches_matching_formula() {
        let t = TreeTopology::new(2, 6).unwrap();
        let v = PotentialSample::draw(&t, &DisorderSpec::default(), StreamId::new(4, 0));
        let lambda = 0.3;
        let h = assemble(&t, &v, lambda).unwrap();
        for (energy, k_wave, attach) in [(0.4, FRAC_PI_2, 0), (-1.1, 1.0, 9), (2.0, 2.2, 100)] {
            let p = SpectralPoint::new(energy, 1e-3, lambda).unwrap();
            let g = diagonal_green(&forward_recursion(&t, &v, &p).unwrap())[attach];
            let wire = WireSetup::for_energy(energy, k_wave, attach).unwrap();
            let dense = wire_reflection(
                &h,
                &vec![c(0.0, 0.0); t.node_count()],
                p.z(),
                attach,
                200,
                wire.k,
                wire.u_wire,
            )
            .unwrap();
            let formula = reflection_coefficient(g, wire.k).unwrap();
            assert!((dense - formula).norm() < 1e-6, "E={energy}: {dense} vs {formula}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn subunitary_iff_positive_imaginary_part(
            re in -10.0f64..10.0,
            log_im in -9.0f64..2.0,
            real in any::<bool>(),
            k in 1e-3f64..(PI - 1e-3),
        ) {
            let g = c(re, if real { 0.0 } else { 10f64.powf(log_im) });
            let m = reflection_magnitude(g, k).unwrap();
            prop_assert_eq!(m < 1.0, g.im > 0.0);
            if real {
                prop_assert_eq!(m, 1.0);
            }
        }
    }
}
