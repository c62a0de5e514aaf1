//! Near-uniform sampling grids on the unit sphere.
//!
//! Every pattern integral in this crate is a plain average over a fixed
//! direction grid, so the grid is the single source of truth for direction
//! ordering and weighting. Points carry equal weight `1/N_p`; the generator is
//! the offset Fibonacci lattice, which avoids exact pole samples and keeps
//! nearest-neighbor spacing within a small factor of uniform.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A direction on the unit sphere in spherical coordinates (radians).
///
/// `theta` is the polar angle measured from +z in `[0, π]`; `phi` is the
/// azimuth in `[0, 2π)`. All angles in this crate are radians; degrees appear
/// only at I/O boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in [0, pi], got {theta}"
            )));
        }
        if !phi.is_finite() || !(0.0..TAU).contains(&phi) {
            return Err(Error::InvalidArgument(format!(
                "phi must lie in [0, 2*pi), got {phi}"
            )));
        }
        Ok(Self { theta, phi })
    }

    /// Builds a direction from degrees, normalizing the azimuth into `[0, 360)`.
    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        let phi = phi_deg.rem_euclid(360.0);
        Self::new(theta_deg.to_radians(), phi.to_radians())
    }

    /// Unit vector `(sinθ·cosφ, sinθ·sinφ, cosθ)`.
    pub fn cartesian(&self) -> [f64; 3] {
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        [st * cp, st * sp, ct]
    }

    /// Angle in radians to another direction (geodesic distance on the sphere).
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let a = self.cartesian();
        let b = other.cartesian();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        dot.clamp(-1.0, 1.0).acos()
    }
}

/// An ordered list of distinct sample directions with equal quadrature weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionGrid {
    points: Vec<Direction>,
}

impl DirectionGrid {
    /// Wraps an explicit direction list. Rejects empty lists and bitwise
    /// duplicate points (duplicates would double-count in every average).
    pub fn new(points: Vec<Direction>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("grid must contain at least one point".into()));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if !seen.insert((p.theta.to_bits(), p.phi.to_bits())) {
                return Err(Error::InvalidArgument(format!(
                    "grid contains duplicate point at index {i}"
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Direction] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Direction {
        self.points[index]
    }

    /// Writes the grid as CSV with header `index,theta_rad,phi_rad`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "theta_rad", "phi_rad"])?;
        for (i, p) in self.points.iter().enumerate() {
            w.write_record([i.to_string(), p.theta.to_string(), p.phi.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a grid written by [`DirectionGrid::write_csv`]. The index column
    /// must be contiguous from zero so row order is unambiguous.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["index", "theta_rad", "phi_rad"] {
            return Err(Error::Data(format!(
                "grid csv header must be index,theta_rad,phi_rad, got {headers:?}"
            )));
        }
        let mut points = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |field: &str, name: &str| -> Result<f64> {
                field.parse::<f64>().map_err(|_| {
                    Error::Data(format!("grid csv row {row}: bad {name} value {field:?}"))
                })
            };
            let idx = rec
                .get(0)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Data(format!("grid csv row {row}: bad index")))?;
            if idx != row {
                return Err(Error::Data(format!(
                    "grid csv row {row}: non-contiguous index {idx}"
                )));
            }
            let theta = parse(rec.get(1).unwrap_or(""), "theta_rad")?;
            let phi = parse(rec.get(2).unwrap_or(""), "phi_rad")?;
            points.push(Direction::new(theta, phi).map_err(|e| {
                Error::Data(format!("grid csv row {row}: {e}"))
            })?);
        }
        Self::new(points)
    }
}

/// Generates an `n_points` offset Fibonacci lattice on the unit sphere.
///
/// Point `i` (0-indexed) sits at `z = 1 − (2i+1)/n`, `theta = arccos(z)`,
/// `phi = 2π · frac(i·φ_g)` with `φ_g = (√5−1)/2`. The half-step offset in `z`
/// keeps samples off the exact poles, and distinct `z` values make all points
/// distinct. Deterministic: equal `n_points` always yields the identical grid.
pub fn fibonacci_grid(n_points: usize) -> Result<DirectionGrid> {
    if n_points == 0 {
        return Err(Error::InvalidArgument("fibonacci_grid requires n_points >= 1".into()));
    }
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let n = n_points as f64;
    let mut points = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n;
        let theta = z.clamp(-1.0, 1.0).acos();
        let mut phi = TAU * (i as f64 * golden).fract();
        if phi >= TAU {
            phi -= TAU;
        }
        points.push(Direction { theta, phi });
    }
    DirectionGrid::new(points)
}

/// Convenience constant: theta at the equator.
pub const EQUATOR_THETA: f64 = FRAC_PI_2;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_sits_on_equator() {
        let g = fibonacci_grid(1).unwrap();
        assert_eq!(g.n_points(), 1);
        // z = 1 - 1/1 = 0, so theta = arccos(0) = pi/2.
        assert!((g.point(0).theta - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_grid() {
        assert!(fibonacci_grid(0).is_err());
        assert!(DirectionGrid::new(vec![]).is_err());
    }

    #[test]
    fn device_scale_grid_has_requested_size() {
        let g = fibonacci_grid(10001).unwrap();
        assert_eq!(g.n_points(), 10001);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = fibonacci_grid(1234).unwrap();
        let b = fibonacci_grid(1234).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_points_are_valid_directions() {
        let g = fibonacci_grid(5000).unwrap();
        for p in g.points() {
            assert!((0.0..=PI).contains(&p.theta));
            assert!((0.0..TAU).contains(&p.phi));
        }
    }

    #[test]
    fn cartesian_axes() {
        let north = Direction::new(0.0, 0.0).unwrap().cartesian();
        assert!((north[0]).abs() < 1e-12 && (north[1]).abs() < 1e-12);
        assert!((north[2] - 1.0).abs() < 1e-12);

        let x = Direction::new(FRAC_PI_2, 0.0).unwrap().cartesian();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12 && x[2].abs() < 1e-12);

        let y = Direction::new(FRAC_PI_2, FRAC_PI_2).unwrap().cartesian();
        assert!(y[0].abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12 && y[2].abs() < 1e-12);
    }

    #[test]
    fn cartesian_outputs_are_unit_norm() {
        let g = fibonacci_grid(1000).unwrap();
        for p in g.points() {
            let u = p.cartesian();
            let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    /// Brute-force pairwise scan: the lattice never packs two points closer
    /// than half the mean spacing sqrt(4*pi/n).
    #[test]
    fn min_pairwise_distance_bound_at_1000() {
        let g = fibonacci_grid(1000).unwrap();
        let mut min_dist = f64::INFINITY;
        for i in 0..g.n_points() {
            for j in (i + 1)..g.n_points() {
                min_dist = min_dist.min(g.point(i).angle_to(&g.point(j)));
            }
        }
        let bound = 0.5 * (4.0 * PI / 1000.0).sqrt();
        assert!(
            min_dist >= bound,
            "min pairwise distance {min_dist} below bound {bound}"
        );
    }

    /// Uniformity: max/min nearest-neighbor distance stays within 2.5x.
    #[test]
    fn nearest_neighbor_ratio_is_bounded() {
        for n in [100usize, 1000] {
            let g = fibonacci_grid(n).unwrap();
            let mut max_nn = 0f64;
            let mut min_nn = f64::INFINITY;
            for i in 0..n {
                let mut nn = f64::INFINITY;
                for j in 0..n {
                    if i != j {
                        nn = nn.min(g.point(i).angle_to(&g.point(j)));
                    }
                }
                max_nn = max_nn.max(nn);
                min_nn = min_nn.min(nn);
            }
            let ratio = max_nn / min_nn;
            assert!(ratio <= 2.5, "n={n}: nn ratio {ratio} exceeds 2.5");
        }
    }

    #[test]
    fn csv_round_trip_preserves_grid() {
        let g = fibonacci_grid(257).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = DirectionGrid::read_csv(buf.as_slice()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let bad = "i,theta,phi\n0,0.5,0.5\n";
        assert!(DirectionGrid::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn direction_validation() {
        assert!(Direction::new(-0.1, 0.0).is_err());
        assert!(Direction::new(0.0, TAU).is_err());
        assert!(Direction::new(f64::NAN, 0.0).is_err());
        assert!(Direction::from_degrees(90.0, 360.0).is_ok()); // wraps to 0
    }
}
