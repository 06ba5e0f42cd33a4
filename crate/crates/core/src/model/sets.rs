//! Projectable convex sets for the policy parameter and the model parameter.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::vecops;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexSet {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    All { dim: usize },
}

impl ConvexSet {
    pub fn interval(lo: f64, hi: f64) -> Self {
        ConvexSet::Box {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::All { dim } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(invalid("box bounds must be non-empty and equal length"));
                }
                if !vecops::all_finite(lo) || !vecops::all_finite(hi) {
                    return Err(invalid("box bounds must be finite"));
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(invalid("box requires lo <= hi elementwise"));
                }
            }
            ConvexSet::Ball { center, radius } => {
                if center.is_empty() || !vecops::all_finite(center) {
                    return Err(invalid("ball center must be non-empty and finite"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(invalid("ball radius must be positive"));
                }
            }
            ConvexSet::All { dim } => {
                if *dim == 0 {
                    return Err(invalid("set dimension must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.dim() {
            return Err(invalid(format!(
                "projection dimension mismatch: point has {}, set has {}",
                point.len(),
                self.dim()
            )));
        }
        Ok(self.project_unchecked(point))
    }

    pub(crate) fn project_unchecked(&self, point: &[f64]) -> Vec<f64> {
        match self {
            ConvexSet::Box { lo, hi } => point
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(p, (l, h))| p.clamp(*l, *h))
                .collect(),
            ConvexSet::Ball { center, radius } => {
                let r = vecops::dist(point, center);
                if r <= *radius {
                    point.to_vec()
                } else {
                    let s = radius / r;
                    point
                        .iter()
                        .zip(center)
                        .map(|(p, c)| c + s * (p - c))
                        .collect()
                }
            }
            ConvexSet::All { .. } => point.to_vec(),
        }
    }

    /// Projection of a scalar onto a one-dimensional set.
    pub fn project_scalar(&self, value: f64) -> f64 {
        match self {
            ConvexSet::Box { lo, hi } => value.clamp(lo[0], hi[0]),
            ConvexSet::Ball { center, radius } => {
                value.clamp(center[0] - radius, center[0] + radius)
            }
            ConvexSet::All { .. } => value,
        }
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        if point.len() != self.dim() {
            return false;
        }
        match self {
            ConvexSet::Box { lo, hi } => point
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(p, (l, h))| *p >= l - tol && *p <= h + tol),
            ConvexSet::Ball { center, radius } => vecops::dist(point, center) <= radius + tol,
            ConvexSet::All { .. } => true,
        }
    }

    /// Axis-aligned bounding box, if the set is bounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ConvexSet::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            ConvexSet::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            ConvexSet::All { .. } => None,
        }
    }

    /// Largest distance between two points of the set.
    pub fn diameter(&self) -> f64 {
        match self {
            ConvexSet::Box { lo, hi } => vecops::dist(lo, hi),
            ConvexSet::Ball { radius, .. } => 2.0 * radius,
            ConvexSet::All { .. } => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_clamps() {
        let set = ConvexSet::Box {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
        };
        assert_eq!(set.project(&[2.0, 0.5]).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn ball_scales_radially() {
        let set = ConvexSet::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let p = set.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn interior_points_unchanged() {
        let sets = [
            ConvexSet::interval(-2.0, 2.0),
            ConvexSet::Ball {
                center: vec![0.5],
                radius: 3.0,
            },
            ConvexSet::All { dim: 1 },
        ];
        for s in &sets {
            assert_eq!(s.project(&[0.25]).unwrap(), vec![0.25]);
            assert_eq!(s.project_scalar(0.25), 0.25);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let set = ConvexSet::interval(0.0, 1.0);
        assert!(set.project(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn validation() {
        assert!(ConvexSet::interval(1.0, 0.0).validate().is_err());
        assert!(ConvexSet::Ball {
            center: vec![0.0],
            radius: 0.0
        }
        .validate()
        .is_err());
        assert!(ConvexSet::All { dim: 0 }.validate().is_err());
        assert!(ConvexSet::interval(0.0, 0.0).validate().is_ok());
    }

    #[test]
    fn scalar_projection_agrees_with_vector_projection() {
        let sets = [
            ConvexSet::interval(-0.5, 1.5),
            ConvexSet::Ball {
                center: vec![1.0],
                radius: 0.75,
            },
        ];
        for s in &sets {
            for v in [-3.0, -0.5, 0.0, 0.9, 1.6, 4.0] {
                assert_eq!(s.project_scalar(v), s.project(&[v]).unwrap()[0]);
            }
        }
    }
}
