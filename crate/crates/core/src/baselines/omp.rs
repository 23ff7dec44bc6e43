use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::BaselineError;
use crate::channel::{direction, Path, PathSet, Position};
use crate::linalg::min_norm_lstsq;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub elevation: f64,
    pub azimuth: f64,
    pub direction: [f64; 2],
}

/// Angular dictionary over elevation `[-pi/2, pi/2]` x azimuth `[-pi, pi)`.
///
/// Distinct angle pairs that project onto the same 2-D direction would give
/// identical dictionary columns, so only the first of each is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    points: Vec<GridPoint>,
}

impl AngleGrid {
    pub fn new(n_elevation: usize, n_azimuth: usize) -> Result<Self, BaselineError> {
        if n_elevation < 2 || n_azimuth == 0 {
            return Err(BaselineError::Invalid(
                "angle grid needs >= 2 elevations and >= 1 azimuth".into(),
            ));
        }
        let mut points: Vec<GridPoint> = Vec::with_capacity(n_elevation * n_azimuth);
        for i in 0..n_elevation {
            let elevation = -FRAC_PI_2 + PI * i as f64 / (n_elevation - 1) as f64;
            for j in 0..n_azimuth {
                let azimuth = -PI + TAU * j as f64 / n_azimuth as f64;
                let dir = direction(elevation, azimuth);
                let dup = points.iter().any(|p| {
                    (p.direction[0] - dir[0]).abs() < 1e-12
                        && (p.direction[1] - dir[1]).abs() < 1e-12
                });
                if !dup {
                    points.push(GridPoint {
                        elevation,
                        azimuth,
                        direction: dir,
                    });
                }
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `A[n, g] = exp(j 2pi/lambda <p_n, u_g>)`.
    pub fn dictionary(&self, positions: &[Position], wavelength: f64) -> DMatrix<Complex64> {
        let k0 = TAU / wavelength;
        DMatrix::from_fn(positions.len(), self.points.len(), |n, g| {
            let u = self.points[g].direction;
            Complex64::from_polar(1.0, k0 * (positions[n].x * u[0] + positions[n].y * u[1]))
        })
    }
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self::new(32, 32).expect("valid default grid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpOutcome {
    pub paths: PathSet,
    /// Selected grid indices in selection order.
    pub support: Vec<usize>,
    /// Residual norm after each selection, starting with `||y||`.
    pub residual_norms: Vec<f64>,
}

/// Orthogonal matching pursuit over the angular dictionary.
///
/// Stops once `||r|| <= max(residual_tol * ||y||, noise_floor)` or `k_max`
/// atoms are selected. Returns an empty path set for a zero observation.
pub fn omp_estimate(
    positions: &[Position],
    y: &[Complex64],
    grid: &AngleGrid,
    wavelength: f64,
    k_max: usize,
    residual_tol: f64,
    noise_floor: f64,
) -> Result<OmpOutcome, BaselineError> {
    if positions.is_empty() || positions.len() != y.len() {
        return Err(BaselineError::Invalid(format!(
            "need matching, non-empty positions ({}) and measurements ({})",
            positions.len(),
            y.len()
        )));
    }
    if grid.is_empty() {
        return Err(BaselineError::Invalid("empty angle grid".into()));
    }
    let dict = grid.dictionary(positions, wavelength);
    let yv = DVector::from_column_slice(y);
    let y_norm = yv.norm();
    let stop = (residual_tol * y_norm).max(noise_floor);

    let mut support: Vec<usize> = Vec::new();
    let mut residual = yv.clone();
    let mut norms = vec![y_norm];
    let mut coeffs = DVector::<Complex64>::zeros(0);

    while support.len() < k_max && residual.norm() > stop && y_norm > 0.0 {
        let corr = dict.adjoint() * &residual;
        let mut pick = None;
        let mut best = -1.0;
        for (g, c) in corr.iter().enumerate() {
            if support.contains(&g) {
                continue;
            }
            let v = c.norm();
            if v > best {
                best = v;
                pick = Some(g);
            }
        }
        let Some(g) = pick else { break };
        support.push(g);
        let sub = DMatrix::from_fn(dict.nrows(), support.len(), |n, s| dict[(n, support[s])]);
        coeffs = min_norm_lstsq(&sub, &yv).x;
        residual = &yv - &sub * &coeffs;
        norms.push(residual.norm());
    }

    let paths = support
        .iter()
        .zip(coeffs.iter())
        .map(|(&g, &gain)| {
            let p = grid.points[g];
            Path {
                gain,
                elevation: p.elevation,
                azimuth: p.azimuth,
            }
        })
        .collect();
    Ok(OmpOutcome {
        paths: PathSet::new_allow_empty(paths, wavelength)
            .map_err(|e| BaselineError::Invalid(e.to_string()))?,
        support,
        residual_norms: norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ma_channel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_positions(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<Position> {
        (0..n)
            .map(|_| Position::new(rng.random_range(0.0..side), rng.random_range(0.0..side)))
            .collect()
    }

    #[test]
    fn default_grid_covers_angles_without_duplicates() {
        let g = AngleGrid::default();
        // (el, az), (-el, az + pi) and (el, -az) share a direction
        assert!(g.len() > 250 && g.len() < 1024, "{}", g.len());
        for (i, a) in g.points().iter().enumerate() {
            for b in &g.points()[i + 1..] {
                let d = (a.direction[0] - b.direction[0]).abs()
                    + (a.direction[1] - b.direction[1]).abs();
                assert!(d > 1e-12);
            }
        }
        let el: Vec<f64> = g.points().iter().map(|p| p.elevation).collect();
        assert!(el.iter().cloned().fold(f64::MAX, f64::min) <= -FRAC_PI_2 + 1e-12);
        // every full-grid direction is still represented
        for i in 0..32 {
            for j in 0..32 {
                let d = direction(
                    -FRAC_PI_2 + PI * i as f64 / 31.0,
                    -PI + TAU * j as f64 / 32.0,
                );
                assert!(g.points().iter().any(|p| {
                    (p.direction[0] - d[0]).abs() < 1e-12 && (p.direction[1] - d[1]).abs() < 1e-12
                }));
            }
        }
    }

    #[test]
    fn zero_observation_gives_empty_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pos = random_positions(&mut rng, 8, 2.0);
        let out = omp_estimate(
            &pos,
            &[Complex64::new(0.0, 0.0); 8],
            &AngleGrid::default(),
            1.0,
            4,
            1e-3,
            0.0,
        )
        .unwrap();
        assert!(out.paths.is_empty());
        assert!(out.support.is_empty());
    }

    #[test]
    fn invalid_inputs() {
        let g = AngleGrid::default();
        assert!(omp_estimate(&[], &[], &g, 1.0, 2, 1e-3, 0.0).is_err());
        let p = [Position::new(0.0, 0.0)];
        assert!(omp_estimate(&p, &[], &g, 1.0, 2, 1e-3, 0.0).is_err());
        assert!(AngleGrid::new(1, 4).is_err());
    }

    #[test]
    fn single_on_grid_path_recovered() {
        let grid = AngleGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = rng.random_range(0..grid.len());
        let gp = grid.points()[g];
        let gain = Complex64::new(0.7, -0.4);
        let truth = PathSet::new(
            vec![Path {
                gain,
                elevation: gp.elevation,
                azimuth: gp.azimuth,
            }],
            1.0,
        )
        .unwrap();
        let pos = random_positions(&mut rng, 8, 2.0);
        let y: Vec<Complex64> = pos.iter().map(|&p| ma_channel(&truth, p)).collect();
        let out = omp_estimate(&pos, &y, &grid, 1.0, 2, 1e-3, 0.0).unwrap();
        assert_eq!(out.support, vec![g]);
        assert!((out.paths.paths()[0].gain - gain).norm() <= 1e-6 * gain.norm());
    }

    #[test]
    fn residual_strictly_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = crate::channel::gen_path_set(5, 3, 1.0).unwrap();
        let pos = random_positions(&mut rng, 24, 2.0);
        let y: Vec<Complex64> = pos.iter().map(|&p| ma_channel(&truth, p)).collect();
        let out = omp_estimate(&pos, &y, &AngleGrid::default(), 1.0, 10, 1e-6, 0.0).unwrap();
        assert!(out.residual_norms.len() >= 2);
        for w in out.residual_norms.windows(2) {
            assert!(w[1] < w[0], "{:?}", out.residual_norms);
        }
    }
}
