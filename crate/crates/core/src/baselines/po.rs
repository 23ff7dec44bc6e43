use num_complex::Complex64;

use crate::channel::Position;

/// Coarse-to-fine exhaustive search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearch {
    /// Side of the square region `[0, side]^2`.
    pub side: f64,
    pub coarse_step: f64,
    /// Rounds of 5x refinement around the incumbent.
    pub refine_levels: usize,
}

impl GridSearch {
    /// Step `lambda/50` and three refinement rounds.
    pub fn for_region(side: f64, wavelength: f64) -> Self {
        Self {
            side,
            coarse_step: wavelength / 50.0,
            refine_levels: 3,
        }
    }
}

const TIE_RTOL: f64 = 1e-12;

struct Incumbent {
    pos: Position,
    value: f64,
}

impl Incumbent {
    fn offer(&mut self, pos: Position, value: f64) {
        let tol = TIE_RTOL * self.value.abs().max(f64::MIN_POSITIVE);
        let lex_smaller = (pos.x, pos.y) < (self.pos.x, self.pos.y);
        if value > self.value + tol || ((value - self.value).abs() <= tol && lex_smaller) {
            self.pos = pos;
            self.value = value;
        }
    }
}

/// Maximize `|channel_fn(p)|^2` over the region: exhaustive coarse grid,
/// then repeated 5x local refinement around the best point. Values within
/// a relative `1e-12` count as ties and go to the lexicographically
/// smallest position.
pub fn po_grid<F: Fn(Position) -> Complex64>(channel_fn: F, search: GridSearch) -> Position {
    assert!(search.coarse_step > 0.0, "coarse step must be positive");
    let side = search.side;
    let n = (side / search.coarse_step).ceil().max(1.0) as usize;
    let at = |i: usize| side * i as f64 / n as f64;

    let origin = Position::new(0.0, 0.0);
    let mut best = Incumbent {
        pos: origin,
        value: channel_fn(origin).norm_sqr(),
    };
    for i in 0..=n {
        for j in 0..=n {
            let p = Position::new(at(i), at(j));
            best.offer(p, channel_fn(p).norm_sqr());
        }
    }

    let mut step = side / n as f64;
    for _ in 0..search.refine_levels {
        step /= 5.0;
        let center = best.pos;
        for di in -5i32..=5 {
            for dj in -5i32..=5 {
                let p = Position::new(center.x + di as f64 * step, center.y + dj as f64 * step)
                    .clamped(side);
                best.offer(p, channel_fn(p).norm_sqr());
            }
        }
    }
    best.pos
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_path_set, ma_channel, Path, PathSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn constant_magnitude_picks_origin() {
        let ps = PathSet::new(
            vec![Path {
                gain: Complex64::new(0.3, 0.9),
                elevation: 0.4,
                azimuth: -1.2,
            }],
            1.0,
        )
        .unwrap();
        let p = po_grid(|q| ma_channel(&ps, q), GridSearch::for_region(2.0, 1.0));
        assert_eq!(p, Position::new(0.0, 0.0));
    }

    #[test]
    fn two_path_standing_wave_maximizer() {
        // u1 = (0, 1), u2 = (0, 0): |h(p)| = 2 |sin(pi y / lambda)|, first peak at y = lambda/2
        for lambda in [1.0, 0.5] {
            let ps = PathSet::new(
                vec![
                    Path {
                        gain: Complex64::new(1.0, 0.0),
                        elevation: 0.0,
                        azimuth: 0.0,
                    },
                    Path {
                        gain: Complex64::new(-1.0, 0.0),
                        elevation: FRAC_PI_2,
                        azimuth: FRAC_PI_2,
                    },
                ],
                lambda,
            )
            .unwrap();
            let search = GridSearch::for_region(2.0 * lambda, lambda);
            let p = po_grid(|q| ma_channel(&ps, q), search);
            assert!(p.x.abs() < 1e-12, "{p:?}");
            assert!(
                (p.y - lambda / 2.0).abs() <= search.coarse_step / 125.0,
                "{p:?}"
            );
        }
    }

    #[test]
    fn dominates_random_probes() {
        let ps = gen_path_set(5, 12, 1.0).unwrap();
        let best = po_grid(|q| ma_channel(&ps, q), GridSearch::for_region(2.0, 1.0));
        let v = ma_channel(&ps, best).norm_sqr();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let q = Position::new(rng.random_range(0.0..=2.0), rng.random_range(0.0..=2.0));
            assert!(ma_channel(&ps, q).norm_sqr() <= v * (1.0 + 1e-9));
        }
    }
}
