use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::Vector;

/// Absolute tolerance for membership and active-bound detection.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Closed convex sets with closed-form projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Product(Vec<FeasibleSet>),
}

impl FeasibleSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.is_empty() {
            return Err(Error::InvalidSet("empty box".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(Error::InvalidSet(format!("box bounds at {i}: [{l}, {u}]")));
            }
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    /// The box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(vec![lo; dim], vec![hi; dim])
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidSet("empty ball".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!("ball radius {radius}")));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn product(members: Vec<FeasibleSet>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidSet("empty product".into()));
        }
        Ok(FeasibleSet::Product(members))
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Product(m) => m.iter().map(|s| s.dim()).sum(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| (u - l).powi(2)).sum::<f64>().sqrt()
            }
            FeasibleSet::Ball { radius, .. } => 2.0 * radius,
            FeasibleSet::Product(m) => m.iter().map(|s| s.diameter().powi(2)).sum::<f64>().sqrt(),
        }
    }

    pub fn center(&self) -> Vector {
        let mut out = Vector::zeros(self.dim());
        self.center_into(out.as_mut_slice());
        out
    }

    fn center_into(&self, out: &mut [f64]) {
        match self {
            FeasibleSet::Box { lower, upper } => {
                for ((o, l), u) in out.iter_mut().zip(lower).zip(upper) {
                    *o = 0.5 * (l + u);
                }
            }
            FeasibleSet::Ball { center, .. } => out.copy_from_slice(center),
            FeasibleSet::Product(m) => {
                let mut off = 0;
                for s in m {
                    let n = s.dim();
                    s.center_into(&mut out[off..off + n]);
                    off += n;
                }
            }
        }
    }

    fn check_dim(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, v: &Vector) -> Result<Vector> {
        self.check_dim(v)?;
        let mut out = v.clone();
        self.project_slice(out.as_mut_slice());
        Ok(out)
    }

    /// In-place projection; the caller guarantees the dimension.
    pub(crate) fn project_in_place(&self, v: &mut Vector) {
        debug_assert_eq!(v.len(), self.dim());
        self.project_slice(v.as_mut_slice());
    }

    fn project_slice(&self, v: &mut [f64]) {
        match self {
            FeasibleSet::Box { lower, upper } => {
                for ((vi, l), u) in v.iter_mut().zip(lower).zip(upper) {
                    *vi = vi.clamp(*l, *u);
                }
            }
            FeasibleSet::Ball { center, radius } => {
                let dist = v.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
                if dist > *radius {
                    let s = radius / dist;
                    for (vi, c) in v.iter_mut().zip(center) {
                        *vi = c + s * (*vi - c);
                    }
                }
            }
            FeasibleSet::Product(m) => {
                let mut off = 0;
                for s in m {
                    let n = s.dim();
                    s.project_slice(&mut v[off..off + n]);
                    off += n;
                }
            }
        }
    }

    /// Distance from `v` to the set.
    pub fn distance(&self, v: &Vector) -> Result<f64> {
        Ok((self.project(v)? - v).norm())
    }

    pub fn contains(&self, v: &Vector) -> bool {
        v.len() == self.dim() && self.distance(v).map(|d| d <= FEASIBILITY_TOL).unwrap_or(false)
    }

    /// `dist(v, -N(z; set))` for a feasible `z`.
    pub fn normal_cone_distance(&self, z: &Vector, v: &Vector) -> Result<f64> {
        self.check_dim(z)?;
        self.check_dim(v)?;
        let d = self.distance(z)?;
        if d > FEASIBILITY_TOL {
            return Err(Error::Infeasible { distance: d });
        }
        Ok(self.cone_sq(z.as_slice(), v.as_slice()).sqrt())
    }

    fn cone_sq(&self, z: &[f64], v: &[f64]) -> f64 {
        match self {
            FeasibleSet::Box { lower, upper } => {
                let mut acc = 0.0;
                for i in 0..z.len() {
                    let at_upper = z[i] >= upper[i] - FEASIBILITY_TOL;
                    let at_lower = z[i] <= lower[i] + FEASIBILITY_TOL;
                    let c = match (at_lower, at_upper) {
                        (true, true) => 0.0,
                        (false, true) => v[i].max(0.0),
                        (true, false) => (-v[i]).max(0.0),
                        (false, false) => v[i].abs(),
                    };
                    acc += c * c;
                }
                acc
            }
            FeasibleSet::Ball { center, radius } => {
                let diff: Vec<f64> = z.iter().zip(center).map(|(a, c)| a - c).collect();
                let r = diff.iter().map(|a| a * a).sum::<f64>().sqrt();
                let vv: f64 = v.iter().map(|a| a * a).sum();
                if r < radius - FEASIBILITY_TOL {
                    return vv;
                }
                let inner: f64 = v.iter().zip(&diff).map(|(a, n)| a * n / r).sum();
                let k = inner.min(0.0);
                v.iter().zip(&diff).map(|(a, n)| (a - k * n / r).powi(2)).sum()
            }
            FeasibleSet::Product(m) => {
                let mut off = 0;
                let mut acc = 0.0;
                for s in m {
                    let n = s.dim();
                    acc += s.cone_sq(&z[off..off + n], &v[off..off + n]);
                    off += n;
                }
                acc
            }
        }
    }

    /// Uniform sample from the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let mut out = Vector::zeros(self.dim());
        self.sample_into(rng, out.as_mut_slice());
        out
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            FeasibleSet::Box { lower, upper } => {
                for ((o, l), u) in out.iter_mut().zip(lower).zip(upper) {
                    *o = l + (u - l) * rng.random::<f64>();
                }
            }
            FeasibleSet::Ball { center, radius } => {
                // Gaussian direction via Box-Muller, radius scaled by u^(1/n).
                let n = center.len();
                let mut norm = 0.0;
                for o in out.iter_mut() {
                    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                    let u2: f64 = rng.random();
                    *o = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                    norm += *o * *o;
                }
                let norm = norm.sqrt().max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                for (o, c) in out.iter_mut().zip(center) {
                    *o = c + r * *o / norm;
                }
            }
            FeasibleSet::Product(m) => {
                let mut off = 0;
                for s in m {
                    let n = s.dim();
                    s.sample_into(rng, &mut out[off..off + n]);
                    off += n;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn box_clamps() {
        let b = FeasibleSet::cube(1, -10.0, 10.0).unwrap();
        assert_eq!(b.project(&v(&[12.0])).unwrap(), v(&[10.0]));
    }

    #[test]
    fn ball_scales_radially() {
        let b = FeasibleSet::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = b.project(&v(&[3.0, 4.0])).unwrap();
        assert!((p - v(&[0.6, 0.8])).norm() < 1e-15);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let b = FeasibleSet::cube(3, -1.0, 2.0).unwrap();
        let z = v(&[0.5, -1.0, 2.0]);
        assert_eq!(b.project(&z).unwrap(), z);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let b = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
        assert!(matches!(b.project(&v(&[0.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(FeasibleSet::new_box(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleSet::new_ball(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn diameters() {
        let b = FeasibleSet::cube(3, -10.0, 10.0).unwrap();
        assert!((b.diameter() - 1200f64.sqrt()).abs() < 1e-12);
        let ball = FeasibleSet::new_ball(vec![0.0; 2], 1.5).unwrap();
        assert_eq!(ball.diameter(), 3.0);
        let p = FeasibleSet::product(vec![b, ball]).unwrap();
        assert!((p.diameter() - (1200.0f64 + 9.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cone_interior() {
        let b = FeasibleSet::cube(1, -1.0, 1.0).unwrap();
        assert_eq!(b.normal_cone_distance(&v(&[0.0]), &v(&[0.5])).unwrap(), 0.5);
    }

    #[test]
    fn cone_upper_bound() {
        let b = FeasibleSet::cube(1, -1.0, 1.0).unwrap();
        assert_eq!(b.normal_cone_distance(&v(&[1.0]), &v(&[-2.0])).unwrap(), 0.0);
        assert_eq!(b.normal_cone_distance(&v(&[1.0]), &v(&[2.0])).unwrap(), 2.0);
    }

    #[test]
    fn cone_mixed_box() {
        let b = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
        let d = b.normal_cone_distance(&v(&[1.0, 0.0]), &v(&[-2.0, 0.3])).unwrap();
        assert!((d - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cone_ball_boundary() {
        let b = FeasibleSet::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        // outward normal (1,0); v = (-3, 2): normal part removed, tangential part remains
        let d = b.normal_cone_distance(&v(&[1.0, 0.0]), &v(&[-3.0, 2.0])).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        let d = b.normal_cone_distance(&v(&[1.0, 0.0]), &v(&[3.0, 0.0])).unwrap();
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cone_rejects_infeasible() {
        let b = FeasibleSet::cube(1, -1.0, 1.0).unwrap();
        assert!(matches!(
            b.normal_cone_distance(&v(&[1.1]), &v(&[0.0])),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn samples_are_feasible() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = FeasibleSet::product(vec![
            FeasibleSet::cube(2, -1.0, 3.0).unwrap(),
            FeasibleSet::new_ball(vec![1.0, 1.0, 1.0], 0.5).unwrap(),
        ])
        .unwrap();
        for _ in 0..200 {
            assert!(s.contains(&s.sample(&mut rng)));
        }
    }
}
