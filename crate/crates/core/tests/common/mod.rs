//! Oracles shared by the integration tests. Deliberately independent of the
//! library's own numerics.

#![allow(dead_code)]

use statseg::{Mask, ScalarField};

/// Composite Simpson rule on `[a, b]` with `n` panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64);
    }
    s * h / 3.0
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub fn disk(n: usize, cx: f64, cy: f64, r: f64) -> Mask {
    Mask::from_fn(n, n, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy <= r * r
    })
}

/// Morphological dilation by a square of half-width `r`.
pub fn dilate(m: &Mask, r: usize) -> Mask {
    Mask::from_fn(m.width(), m.height(), |x, y| {
        let (x0, x1) = (x.saturating_sub(r), (x + r).min(m.width() - 1));
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(m.height() - 1));
        (y0..=y1).any(|yy| (x0..=x1).any(|xx| m[(xx, yy)]))
    })
}

/// Symmetric Hausdorff distance between two point sets, by brute force.
pub fn hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let one_way = |p: &[(f64, f64)], q: &[(f64, f64)]| {
        p.iter()
            .map(|&(x, y)| {
                q.iter()
                    .map(|&(u, v)| ((x - u).powi(2) + (y - v).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Two-value field: `inside` where the mask is set, `outside` elsewhere.
pub fn two_value(mask: &Mask, inside: f64, outside: f64) -> ScalarField {
    mask.map(|&m| if m { inside } else { outside })
}

pub mod flips {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statseg::synth::corrupt;
    use statseg::{Estimator, ExpFamily, Family, Mask, ParamVec, RegionEstimate, RegionStats, ScalarField};

    /// A fitted two-region configuration: a centred disk over a noisy field.
    pub struct Config {
        pub family: Family,
        pub estimator: Estimator,
        pub field: ScalarField,
        pub inner: Mask,
    }

    impl Config {
        pub fn new(family: Family, estimator: Estimator, fg: &[f64], bg: &[f64], seed: u64) -> Self {
            let n = 200;
            let inner = super::disk(n, 100.0, 100.0, 60.0);
            let field = corrupt(&inner, family, &ParamVec::from_slice(fg), &ParamVec::from_slice(bg), seed).unwrap();
            Config { family, estimator, field, inner }
        }

        fn values(&self, inside: bool, extra: Option<usize>, drop: Option<usize>) -> Vec<f64> {
            self.field
                .iter()
                .enumerate()
                .filter(|&(i, _)| {
                    (self.inner.as_slice()[i] == inside && Some(i) != drop) || Some(i) == extra
                })
                .map(|(_, &y)| y)
                .collect()
        }

        pub fn fit(&self, ys: &[f64]) -> RegionEstimate {
            let stats = RegionStats::from_values(&self.family, ys).unwrap();
            RegionEstimate::fit(self.family, stats, self.estimator, None).unwrap()
        }

        /// Region data energy recomputed from scratch.
        pub fn region_energy(&self, ys: &[f64]) -> f64 {
            let est = self.fit(ys);
            ys.iter().map(|&y| -self.family.log_pdf(y, &est.eta_hat).unwrap()).sum()
        }

        /// Fitted inner and outer estimates of the current partition.
        pub fn estimates(&self) -> (RegionEstimate, RegionEstimate) {
            (self.fit(&self.values(true, None, None)), self.fit(&self.values(false, None, None)))
        }

        /// Outer pixels with an inner 4-neighbour, `count` of them, chosen
        /// with a fixed seed.
        pub fn sample_boundary(&self, count: usize, seed: u64) -> Vec<usize> {
            let (w, h) = (self.field.width(), self.field.height());
            let m = &self.inner;
            let mut cands: Vec<usize> = (0..w * h)
                .filter(|&i| {
                    let (x, y) = (i % w, i / w);
                    !m.as_slice()[i]
                        && [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
                            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                            nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 && m[(nx as usize, ny as usize)]
                        })
                })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = Vec::with_capacity(count);
            while picked.len() < count && !cands.is_empty() {
                let k = rng.gen_range(0..cands.len());
                picked.push(cands.swap_remove(k));
            }
            picked
        }

        /// Exact change of the total data energy when outer pixel `i` joins
        /// the inner region, both regions refitted.
        pub fn flip_delta(&self, i: usize) -> f64 {
            let e0 = self.region_energy(&self.values(true, None, None))
                + self.region_energy(&self.values(false, None, None));
            let e1 = self.region_energy(&self.values(true, Some(i), None))
                + self.region_energy(&self.values(false, None, Some(i)));
            e1 - e0
        }
    }

    pub fn relative_error(predicted: f64, actual: f64) -> f64 {
        (predicted - actual).abs() / actual.abs().max(1e-12)
    }
}
