//! Potentials of depth-`p` diagonal networks (`p ≥ 3`).
//!
//! `h(z) = (α₊^{2−p} − z)^{−p/(p−2)} − (α₋^{2−p} + z)^{−p/(p−2)}` maps the
//! interval `(−α₋^{2−p}, α₊^{2−p})` increasingly onto `R`. Its inverse is the
//! gradient of the depth-`p` potential, so stationarity over `{Xβ = y}` reads
//! `h⁻¹(β) ∈ span(Xᵀ)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::config_err;
use crate::linalg::{norm2, RowSpace};
use crate::math::powf;
use crate::model::Dataset;
use crate::{Error, Result};

/// Per-coordinate scales `α±` and depth `p ≥ 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPPotential {
    alpha_plus: Vec<f64>,
    alpha_minus: Vec<f64>,
    depth: u32,
}

impl DepthPPotential {
    /// Validates the parameters and checks monotonicity of `h` on a grid.
    pub fn new(alpha_plus: Vec<f64>, alpha_minus: Vec<f64>, depth: u32) -> Result<Self> {
        if depth < 3 {
            return Err(config_err!("depth-p potential needs p >= 3, got {depth}"));
        }
        if alpha_plus.len() != alpha_minus.len() || alpha_plus.is_empty() {
            return Err(config_err!("alpha_plus and alpha_minus must have equal, nonzero length"));
        }
        if alpha_plus.iter().chain(&alpha_minus).any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(config_err!("depth-p scales must be positive and finite"));
        }
        let pot = Self { alpha_plus, alpha_minus, depth };
        for j in 0..pot.d() {
            let (lo, hi) = pot.domain(j);
            let mut prev = f64::NEG_INFINITY;
            for k in 1..64 {
                let z = lo + (hi - lo) * k as f64 / 64.0;
                let v = pot.h1(j, z);
                if !(v > prev) {
                    return Err(Error::Domain(format!("h is not increasing on coordinate {j}")));
                }
                prev = v;
            }
        }
        Ok(pot)
    }

    pub fn d(&self) -> usize {
        self.alpha_plus.len()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn alpha_plus(&self) -> &[f64] {
        &self.alpha_plus
    }

    pub fn alpha_minus(&self) -> &[f64] {
        &self.alpha_minus
    }

    fn expo(&self) -> f64 {
        let p = self.depth as f64;
        p / (p - 2.0)
    }

    /// Open interval `(−α₋^{2−p}, α₊^{2−p})` of coordinate `j`.
    fn domain(&self, j: usize) -> (f64, f64) {
        let e = 2.0 - self.depth as f64;
        (-powf(self.alpha_minus[j], e), powf(self.alpha_plus[j], e))
    }

    fn h1(&self, j: usize, z: f64) -> f64 {
        let (lo, hi) = self.domain(j);
        let e = self.expo();
        powf(hi - z, -e) - powf(z - lo, -e)
    }

    fn dh1(&self, j: usize, z: f64) -> f64 {
        let (lo, hi) = self.domain(j);
        let e = self.expo();
        e * (powf(hi - z, -e - 1.0) + powf(z - lo, -e - 1.0))
    }

    fn h1_inverse(&self, j: usize, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::Domain(format!("h⁻¹ argument {v} is not finite")));
        }
        let (dlo, dhi) = self.domain(j);
        let (mut lo, mut hi) = (dlo, dhi);
        let width = dhi - dlo;
        while hi - lo > 1e-12 * width {
            let z = 0.5 * (lo + hi);
            if z <= lo || z >= hi {
                break;
            }
            if self.h1(j, z) < v {
                lo = z;
            } else {
                hi = z;
            }
        }
        let mut z = 0.5 * (lo + hi);
        // Newton polish, kept inside the open domain.
        for _ in 0..8 {
            let f = self.h1(j, z) - v;
            if f == 0.0 {
                break;
            }
            let next = z - f / self.dh1(j, z);
            if !(next > dlo && next < dhi) || next == z {
                break;
            }
            z = next;
        }
        Ok(z)
    }
}

/// `h(z)` componentwise; `z` must lie strictly inside the domain.
pub fn depth_p_h(z: &[f64], pot: &DepthPPotential) -> Result<Vec<f64>> {
    if z.len() != pot.d() {
        return Err(config_err!("z has {} entries, expected {}", z.len(), pot.d()));
    }
    z.iter()
        .enumerate()
        .map(|(j, zj)| {
            let (lo, hi) = pot.domain(j);
            if !(*zj > lo && *zj < hi) {
                return Err(Error::Domain(format!("z[{j}] = {zj} outside ({lo}, {hi})")));
            }
            Ok(pot.h1(j, *zj))
        })
        .collect()
}

/// `h⁻¹(v)` componentwise, by bisection then Newton polish.
pub fn depth_p_h_inverse(v: &[f64], pot: &DepthPPotential) -> Result<Vec<f64>> {
    if v.len() != pot.d() {
        return Err(config_err!("v has {} entries, expected {}", v.len(), pot.d()));
    }
    v.iter().enumerate().map(|(j, vj)| pot.h1_inverse(j, *vj)).collect()
}

/// `‖P⊥ h⁻¹(β)‖ / ‖h⁻¹(β)‖` with `P⊥` the projector orthogonal to `span(Xᵀ)`.
pub fn depth_p_kkt_residual(beta: &[f64], data: &Dataset, pot: &DepthPPotential) -> Result<f64> {
    let g = depth_p_h_inverse(beta, pot)?;
    let rs = RowSpace::new(&data.x);
    let num = norm2(&rs.orthogonal_part(&g));
    Ok(num / norm2(&g).max(f64::MIN_POSITIVE))
}

/// Five-point Gauss–Legendre nodes and weights on `[−1, 1]`.
const GL_NODES: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// `Σ_i ∫₀^{β_i} h⁻¹(v) dv` by composite Gauss–Legendre quadrature.
pub fn depth_p_potential(beta: &[f64], pot: &DepthPPotential) -> Result<f64> {
    if beta.len() != pot.d() {
        return Err(config_err!("beta has {} entries, expected {}", beta.len(), pot.d()));
    }
    const PANELS: usize = 64;
    let mut total = 0.0;
    for (j, b) in beta.iter().enumerate() {
        let h = b / PANELS as f64;
        for k in 0..PANELS {
            let mid = (k as f64 + 0.5) * h;
            for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                total += 0.5 * h * w * pot.h1_inverse(j, mid + 0.5 * h * x)?;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sym(p: u32, d: usize) -> DepthPPotential {
        DepthPPotential::new(vec![1.0; d], vec![1.0; d], p).unwrap()
    }

    #[test]
    fn symmetric_origin() {
        let pot = sym(3, 2);
        assert_eq!(depth_p_h(&[0.0, 0.0], &pot).unwrap(), vec![0.0, 0.0]);
        let z = depth_p_h_inverse(&[0.0, 0.0], &pot).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn direct_value() {
        let h = depth_p_h(&[0.5], &sym(3, 1)).unwrap()[0];
        assert!((h - (8.0 - 1.0 / 3.375)).abs() < 1e-12);
        assert!((h - 7.703_703_703_7).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        let pot = sym(3, 1);
        assert!(matches!(depth_p_h(&[1.0], &pot), Err(Error::Domain(_))));
        assert!(matches!(depth_p_h(&[-1.5], &pot), Err(Error::Domain(_))));
        assert!(depth_p_h_inverse(&[f64::NAN], &pot).is_err());
        assert!(DepthPPotential::new(vec![1.0], vec![1.0], 2).is_err());
    }

    #[test]
    fn round_trip_on_grid() {
        for p in [3, 4, 6] {
            let pot = DepthPPotential::new(vec![0.3, 1.0, 2.5], vec![0.8, 1.0, 0.2], p).unwrap();
            for k in 1..40 {
                let t = k as f64 / 40.0;
                let z: Vec<f64> = (0..3)
                    .map(|j| {
                        let (lo, hi) = pot.domain(j);
                        lo + (hi - lo) * t
                    })
                    .collect();
                let v = depth_p_h(&z, &pot).unwrap();
                let back = depth_p_h(&depth_p_h_inverse(&v, &pot).unwrap(), &pot).unwrap();
                for (a, b) in v.iter().zip(&back) {
                    assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "p={p} {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn trivial_complement_gives_zero_residual() {
        let d = Dataset::new(
            crate::linalg::Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, -1.0]]).unwrap(),
            vec![1.0, 0.3],
            None,
        )
        .unwrap();
        let pot = sym(3, 2);
        let r = depth_p_kkt_residual(&[0.4, -0.7], &d, &pot).unwrap();
        assert!(r < 1e-14);
    }

    #[test]
    fn potential_derivative_is_inverse() {
        let pot = DepthPPotential::new(vec![0.7], vec![1.2], 3).unwrap();
        let (b, h) = (0.8, 1e-4);
        let fd = (depth_p_potential(&[b + h], &pot).unwrap() - depth_p_potential(&[b - h], &pot).unwrap()) / (2.0 * h);
        let g = depth_p_h_inverse(&[b], &pot).unwrap()[0];
        assert!((fd - g).abs() < 1e-7);
    }
}
