//! Two-phase level-set evolution.
//!
//! `phi > 0` is the inner region. One step applies
//! `phi += dt_eff * delta_eps(phi) * (speed - lambda * kappa)` where `speed` is
//! the region competition term of the selected [`SpeedLaw`] and `kappa` the
//! curvature of the inner region (positive where it is convex). Region
//! parameters are frozen during a step and refitted afterwards.

use std::f64::consts::PI;

use crate::energy::{rayleigh_moment_correction, EnergyReport, SpeedLaw};
use crate::error::{Error, Result};
use crate::expfam::{
    Estimator, ExpFamily, Family, MomentFloor, ParamVec, RegionEstimate, RegionStats,
};
use crate::grid::{Mask, ScalarField};

/// Bound on `dt_eff * |speed - lambda * kappa|` in the band.
pub const CFL_LIMIT: f64 = 0.45;

/// Consecutive quiet steps required to declare convergence.
pub const STABLE_STEPS: usize = 5;

/// Curvature bound used in the update: that of a disk one pixel across.
const KAPPA_MAX: f64 = 2.0;

const GRAD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveConfig {
    /// Weight of the contour length.
    pub lambda: f64,
    /// Requested time step, before the CFL clamp.
    pub dt: f64,
    /// Half-width of the regularized Dirac band, in pixels.
    pub epsilon: f64,
    pub max_iter: usize,
    pub reinit_every: usize,
    /// Sign-change count regarded as "no motion".
    pub converge_tol: usize,
    pub speed_law: SpeedLaw,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            lambda: 2.0,
            dt: 0.5,
            epsilon: 1.5,
            max_iter: 2000,
            reinit_every: 20,
            converge_tol: 0,
            speed_law: SpeedLaw::MlLogLikelihood(Family::Poisson),
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Spec(m.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a non-negative real");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if self.reinit_every == 0 {
            return bad("reinit_every must be positive");
        }
        Ok(())
    }
}

/// Regularized Dirac `(1 + cos(pi phi / eps)) / (2 eps)` on `|phi| <= eps`.
#[inline]
pub fn dirac(phi: f64, eps: f64) -> f64 {
    if phi.abs() > eps {
        0.0
    } else {
        (1.0 + (PI * phi / eps).cos()) / (2.0 * eps)
    }
}

/// Regularized Heaviside, the primitive of [`dirac`].
#[inline]
pub fn heaviside(phi: f64, eps: f64) -> f64 {
    if phi > eps {
        1.0
    } else if phi < -eps {
        0.0
    } else {
        0.5 * (1.0 + phi / eps + (PI * phi / eps).sin() / PI)
    }
}

/// Points where the zero level set crosses grid edges between 4-neighbours of
/// opposite sign, found by linear interpolation.
pub fn interface_points(phi: &ScalarField) -> Vec<(f64, f64)> {
    let (w, h) = (phi.width(), phi.height());
    let mut pts = Vec::new();
    let mut crossing = |ax: usize, ay: usize, bx: usize, by: usize| {
        let pa = phi[(ax, ay)];
        let pb = phi[(bx, by)];
        let (ia, ib) = (pa > 0.0, pb > 0.0);
        if ia == ib {
            return;
        }
        // walk from the inside end; t lies in (0, 1]
        let (ix, iy, ip, ox, oy, op) = if ia {
            (ax, ay, pa, bx, by, pb)
        } else {
            (bx, by, pb, ax, ay, pa)
        };
        let t = ip / (ip - op);
        pts.push((
            ix as f64 + t * (ox as f64 - ix as f64),
            iy as f64 + t * (oy as f64 - iy as f64),
        ));
    };
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                crossing(x, y, x + 1, y);
            }
            if y + 1 < h {
                crossing(x, y, x, y + 1);
            }
        }
    }
    pts
}

/// Exact Euclidean distance from every pixel to a point set, by bucketed
/// nearest-neighbour search.
fn distance_to_points(w: usize, h: usize, pts: &[(f64, f64)]) -> Vec<f64> {
    const CELL: usize = 8;
    let cw = w.div_ceil(CELL).max(1);
    let ch = h.div_ceil(CELL).max(1);
    let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cw * ch];
    for &(px, py) in pts {
        let cx = ((px.max(0.0) as usize) / CELL).min(cw - 1);
        let cy = ((py.max(0.0) as usize) / CELL).min(ch - 1);
        buckets[cy * cw + cx].push((px, py));
    }
    let max_ring = cw.max(ch);
    let mut out = vec![f64::INFINITY; w * h];
    for y in 0..h {
        let cy = (y / CELL) as isize;
        for x in 0..w {
            let cx = (x / CELL) as isize;
            let (fx, fy) = (x as f64, y as f64);
            let mut best = f64::INFINITY;
            for ring in 0..=max_ring as isize {
                for by in (cy - ring)..=(cy + ring) {
                    if by < 0 || by >= ch as isize {
                        continue;
                    }
                    for bx in (cx - ring)..=(cx + ring) {
                        if bx < 0 || bx >= cw as isize {
                            continue;
                        }
                        let on_ring = (by - cy).abs() == ring || (bx - cx).abs() == ring;
                        if !on_ring {
                            continue;
                        }
                        for &(px, py) in &buckets[by as usize * cw + bx as usize] {
                            let d2 = (px - fx) * (px - fx) + (py - fy) * (py - fy);
                            if d2 < best {
                                best = d2;
                            }
                        }
                    }
                }
                // anything in a farther ring is at least ring * CELL away
                let reach = (ring as f64) * CELL as f64;
                if best <= reach * reach {
                    break;
                }
            }
            out[y * w + x] = best.sqrt();
        }
    }
    out
}

fn signed_distance_from(phi: &ScalarField) -> ScalarField {
    let pts = interface_points(phi);
    let dist = distance_to_points(phi.width(), phi.height(), &pts);
    let data = phi
        .iter()
        .zip(dist)
        .map(|(&p, d)| if p > 0.0 { d } else { -d })
        .collect();
    ScalarField::from_vec(phi.width(), phi.height(), data).expect("shape preserved")
}

/// Signed distance to the boundary of `mask`, positive inside. The boundary
/// is placed halfway between inside and outside pixel centres.
pub fn init_phi(mask: &Mask) -> Result<ScalarField> {
    let n = mask.count();
    if n == 0 {
        return Err(Error::Init("mask is empty".into()));
    }
    if n == mask.len() {
        return Err(Error::Init("mask covers the whole grid".into()));
    }
    let seed = mask.map(|&b| if b { 0.5 } else { -0.5 });
    Ok(signed_distance_from(&seed))
}

/// Re-distances `phi` to its current zero level set, preserving every sign.
pub fn reinitialize(phi: &ScalarField) -> Result<ScalarField> {
    let inside = phi.iter().filter(|&&p| p > 0.0).count();
    if inside == 0 || inside == phi.len() {
        return Err(Error::Reinit("level-set function has a single sign".into()));
    }
    Ok(signed_distance_from(phi))
}

/// Curvature of the `phi > 0` region at `(x, y)`: `-div(grad phi / |grad phi|)`
/// by central differences, with `|grad phi|` floored at `1e-8`. Positive on
/// convex parts of the inner region. Border pixels use replicated values.
pub fn curvature(phi: &ScalarField, x: usize, y: usize) -> f64 {
    let (xi, yi) = (x as isize, y as isize);
    let at = |dx: isize, dy: isize| *phi.get_clamped(xi + dx, yi + dy);
    let c = at(0, 0);
    let px = 0.5 * (at(1, 0) - at(-1, 0));
    let py = 0.5 * (at(0, 1) - at(0, -1));
    let pxx = at(1, 0) - 2.0 * c + at(-1, 0);
    let pyy = at(0, 1) - 2.0 * c + at(0, -1);
    let pxy = 0.25 * (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1));
    let g2 = px * px + py * py;
    let g = g2.sqrt().max(GRAD_FLOOR);
    let div = (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) / (g * g * g);
    -div
}

/// Central gradients below this size mark a kink or an isolated extremum of a
/// distance function, where central differences see no slope at all.
const KINK_GRADIENT: f64 = 0.5;

/// Curvature as used by the update: [`curvature`] clamped to
/// `[-KAPPA_MAX, KAPPA_MAX]`. At kinks (for instance a one-pixel island,
/// whose central gradient vanishes) the curvature is unbounded and takes the
/// clamp value with the sign of `-laplacian(phi)`.
fn band_curvature(phi: &ScalarField, x: usize, y: usize) -> f64 {
    let (xi, yi) = (x as isize, y as isize);
    let at = |dx: isize, dy: isize| *phi.get_clamped(xi + dx, yi + dy);
    let px = 0.5 * (at(1, 0) - at(-1, 0));
    let py = 0.5 * (at(0, 1) - at(0, -1));
    if px.hypot(py) < KINK_GRADIENT {
        let lap = at(1, 0) + at(-1, 0) + at(0, 1) + at(0, -1) - 4.0 * at(0, 0);
        return if lap < 0.0 {
            KAPPA_MAX
        } else if lap > 0.0 {
            -KAPPA_MAX
        } else {
            0.0
        };
    }
    curvature(phi, x, y).clamp(-KAPPA_MAX, KAPPA_MAX)
}

/// Contour length estimate `sum |grad H_eps(phi)|`.
pub fn contour_length(phi: &ScalarField, eps: f64) -> f64 {
    let hv = phi.map(|&p| heaviside(p, eps));
    let (w, h) = (phi.width() as isize, phi.height() as isize);
    let mut len = 0.0;
    for y in 0..h {
        for x in 0..w {
            let gx = 0.5 * (hv.get_clamped(x + 1, y) - hv.get_clamped(x - 1, y));
            let gy = 0.5 * (hv.get_clamped(x, y + 1) - hv.get_clamped(x, y - 1));
            len += (gx * gx + gy * gy).sqrt();
        }
    }
    len
}

/// Per-pixel data prepared once for a given image and speed law.
#[derive(Debug, Clone)]
struct Observations {
    law: SpeedLaw,
    /// Observations projected onto the support of the law's family.
    y: Vec<f64>,
    t: Vec<ParamVec>,
    log_h: Vec<f64>,
    floor: MomentFloor,
    /// Weight of the squared-deviation terms of the piecewise-constant model.
    cv_weight: f64,
}

impl Observations {
    fn new(field: &ScalarField, law: SpeedLaw) -> Self {
        let raw = field.as_slice();
        let n = raw.len().max(1) as f64;
        let mean_abs = raw.iter().map(|v| v.abs()).sum::<f64>() / n;
        match law.family() {
            Some(family) => {
                let y: Vec<f64> = raw
                    .iter()
                    .map(|&v| family.project_to_support(v, mean_abs))
                    .collect();
                let t: Vec<ParamVec> = y.iter().map(|&v| family.stat_unchecked(v)).collect();
                let log_h = y.iter().map(|&v| family.log_carrier_unchecked(v)).collect();
                let mut global = RegionStats::new(family.dim());
                for (v, tv) in y.iter().zip(&t) {
                    global.push(*v, tv);
                }
                Observations {
                    law,
                    y,
                    t,
                    log_h,
                    floor: MomentFloor::from_global(&global),
                    cv_weight: 1.0,
                }
            }
            None => {
                let y = raw.to_vec();
                let mean = y.iter().sum::<f64>() / n;
                let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                Observations {
                    law,
                    t: vec![ParamVec::zeros(0); y.len()],
                    log_h: vec![0.0; y.len()],
                    y,
                    floor: MomentFloor::none(),
                    cv_weight: if var > 0.0 { 0.5 / var } else { 1.0 },
                }
            }
        }
    }

    fn family(&self) -> Family {
        self.law.family().unwrap_or(Family::Gaussian)
    }

    fn k(&self) -> usize {
        self.law.family().map_or(0, |f| f.dim())
    }

    fn estimator(&self) -> Estimator {
        self.law.estimator().unwrap_or(Estimator::SampleMean)
    }

    /// Sufficient statistics of both regions plus their summed `log h`.
    fn region_stats(&self, phi: &ScalarField) -> ([RegionStats; 2], [f64; 2]) {
        let k = self.k();
        let mut stats = [RegionStats::new(k), RegionStats::new(k)];
        let mut log_h = [0.0; 2];
        for (i, &p) in phi.iter().enumerate() {
            let r = if p > 0.0 { 0 } else { 1 };
            stats[r].push(self.y[i], &self.t[i]);
            log_h[r] += self.log_h[i];
        }
        (stats, log_h)
    }

    fn fit(&self, stats: RegionStats) -> Result<RegionEstimate> {
        RegionEstimate::fit(self.family(), stats, self.estimator(), Some(&self.floor))
    }

    /// Region term of the energy for a fitted region.
    fn region_energy(&self, est: &RegionEstimate, sum_log_h: f64) -> f64 {
        match self.law {
            SpeedLaw::ChanVese => {
                let s = &est.stats;
                let c = est.eta_hat[0];
                let ss = s.sum_y2 - 2.0 * c * s.sum_y + c * c * s.count as f64;
                self.cv_weight * ss.max(0.0)
            }
            _ => {
                let family = self.family();
                let a = family.log_normalizer_unchecked(&est.eta_hat);
                -(sum_log_h + est.eta_hat.dot(&est.stats.sum_t) - est.stats.count as f64 * a)
            }
        }
    }

    /// Region competition speed at pixel `i`: positive when the pixel is
    /// better explained by the inner region.
    #[inline]
    fn speed(&self, i: usize, regions: &[RegionEstimate; 2], a: &[f64; 2]) -> f64 {
        let [inner, outer] = regions;
        match self.law {
            SpeedLaw::ChanVese => {
                let y = self.y[i];
                let (ci, co) = (inner.eta_hat[0], outer.eta_hat[0]);
                self.cv_weight * ((y - co) * (y - co) - (y - ci) * (y - ci))
            }
            SpeedLaw::MlLogLikelihood(_) => {
                let t = &self.t[i];
                inner.eta_hat.dot(t) - a[0] - outer.eta_hat.dot(t) + a[1]
            }
            SpeedLaw::MomentsRayleigh => {
                let t = &self.t[i];
                let y = self.y[i];
                let base = inner.eta_hat.dot(t) - a[0] - outer.eta_hat.dot(t) + a[1];
                let corr = |r: &RegionEstimate| {
                    rayleigh_moment_correction(y, r.stats.mean_y(), r.stats.mean_y2())
                        .unwrap_or(0.0)
                };
                base + corr(inner) - corr(outer)
            }
        }
    }
}

/// Why an evolution stopped (or that it has not).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvolveStatus {
    Running,
    Converged,
    MaxIter,
    /// One of the two regions lost all its pixels.
    Collapsed,
}

/// Mutable state of one segmentation run.
#[derive(Debug, Clone)]
pub struct LevelSetState {
    pub phi: ScalarField,
    pub iter: usize,
    /// Inner then outer region.
    pub estimates: [RegionEstimate; 2],
    pub energy_trace: Vec<EnergyReport>,
    /// Pixels whose sign changed during the last step.
    pub band_changes: usize,
    /// Pixels that an unclamped step of the nominal `dt` would have flipped.
    /// Non-zero while the front is held back only by the CFL clamp.
    pub pending_changes: usize,
    /// Largest `|phi|` change applied during the last step.
    pub max_update: f64,
    pub status: EvolveStatus,
    obs: Observations,
    log_h: [f64; 2],
}

impl LevelSetState {
    /// Builds the initial state from `init_mask` (inside = `true`).
    pub fn new(field: &ScalarField, init_mask: &Mask, config: &EvolveConfig) -> Result<Self> {
        if !field.same_shape(init_mask) {
            return Err(Error::Shape(format!(
                "field is {}x{}, mask is {}x{}",
                field.width(),
                field.height(),
                init_mask.width(),
                init_mask.height()
            )));
        }
        let phi = init_phi(init_mask)?;
        Self::from_phi(field, phi, config)
    }

    /// Builds the initial state from an explicit level-set function.
    pub fn from_phi(field: &ScalarField, phi: ScalarField, config: &EvolveConfig) -> Result<Self> {
        config.validate()?;
        if !field.same_shape(&phi) {
            return Err(Error::Shape("field and level-set function differ in size".into()));
        }
        let obs = Observations::new(field, config.speed_law);
        let (stats, log_h) = obs.region_stats(&phi);
        if stats[0].count == 0 || stats[1].count == 0 {
            return Err(Error::Init("initial level set has a single sign".into()));
        }
        let estimates = [obs.fit(stats[0])?, obs.fit(stats[1])?];
        let mut state = LevelSetState {
            phi,
            iter: 0,
            estimates,
            energy_trace: Vec::new(),
            band_changes: 0,
            pending_changes: 0,
            max_update: 0.0,
            status: EvolveStatus::Running,
            obs,
            log_h,
        };
        let e = state.energy(config);
        state.energy_trace.push(e);
        Ok(state)
    }

    /// Total energy of the current partition with the current estimates.
    pub fn energy(&self, config: &EvolveConfig) -> EnergyReport {
        let r0 = self.obs.region_energy(&self.estimates[0], self.log_h[0]);
        let r1 = self.obs.region_energy(&self.estimates[1], self.log_h[1]);
        EnergyReport::new([r0, r1], contour_length(&self.phi, config.epsilon), config.lambda)
    }

    /// Inner region as a mask.
    pub fn mask(&self) -> Mask {
        self.phi.map(|&p| p > 0.0)
    }

    /// The force `speed - lambda * kappa` at every pixel of the Dirac band;
    /// zero elsewhere.
    pub fn force_field(&self, config: &EvolveConfig) -> ScalarField {
        let a = self.log_normalizers();
        let (w, h) = (self.phi.width(), self.phi.height());
        ScalarField::from_fn(w, h, |x, y| {
            let i = y * w + x;
            if self.phi.as_slice()[i].abs() > config.epsilon {
                return 0.0;
            }
            let kappa = band_curvature(&self.phi, x, y);
            self.obs.speed(i, &self.estimates, &a) - config.lambda * kappa
        })
    }

    fn log_normalizers(&self) -> [f64; 2] {
        match self.obs.law {
            SpeedLaw::ChanVese => [0.0, 0.0],
            _ => {
                let f = self.obs.family();
                [
                    f.log_normalizer_unchecked(&self.estimates[0].eta_hat),
                    f.log_normalizer_unchecked(&self.estimates[1].eta_hat),
                ]
            }
        }
    }

    /// One explicit step. Estimates are frozen during the update and refitted
    /// afterwards. If a region would vanish, `phi` is left untouched and the
    /// status becomes [`EvolveStatus::Collapsed`].
    pub fn step(&mut self, config: &EvolveConfig) -> EvolveStatus {
        let force = self.force_field(config);
        let max_force = force.iter().fold(0.0f64, |m, f| m.max(f.abs()));
        let dt_eff = if max_force > 0.0 {
            config.dt.min(CFL_LIMIT / max_force)
        } else {
            config.dt
        };

        let mut next = self.phi.clone();
        let mut changes = 0usize;
        let mut pending = 0usize;
        let mut max_update = 0.0f64;
        for ((p, &f), &old) in next
            .as_mut_slice()
            .iter_mut()
            .zip(force.iter())
            .zip(self.phi.iter())
        {
            if f == 0.0 {
                continue;
            }
            let rate = dirac(old, config.epsilon) * f;
            if (old > 0.0) != (old + config.dt * rate > 0.0) {
                pending += 1;
            }
            let du = dt_eff * rate;
            *p = old + du;
            max_update = max_update.max(du.abs());
            if (old > 0.0) != (*p > 0.0) {
                changes += 1;
            }
        }

        let (stats, log_h) = self.obs.region_stats(&next);
        if stats[0].count == 0 || stats[1].count == 0 {
            self.status = EvolveStatus::Collapsed;
            return self.status;
        }
        let fitted = match (self.obs.fit(stats[0]), self.obs.fit(stats[1])) {
            (Ok(a), Ok(b)) => [a, b],
            _ => {
                self.status = EvolveStatus::Collapsed;
                return self.status;
            }
        };
        self.phi = next;
        self.estimates = fitted;
        self.log_h = log_h;
        self.band_changes = changes;
        self.pending_changes = pending;
        self.max_update = max_update;
        self.iter += 1;
        let e = self.energy(config);
        self.energy_trace.push(e);
        self.status
    }
}

/// Advances `state` by one step and returns it (value-style wrapper around
/// [`LevelSetState::step`]).
pub fn evolve_step(mut state: LevelSetState, config: &EvolveConfig) -> LevelSetState {
    state.step(config);
    state
}

/// Outcome of [`segment`].
#[derive(Debug, Clone)]
pub struct Segmentation {
    /// Final inner region (the pre-collapse region on collapse).
    pub mask: Mask,
    /// Energy after initialization and after every step.
    pub trace: Vec<EnergyReport>,
    pub status: EvolveStatus,
    pub iterations: usize,
}

impl Segmentation {
    pub fn collapsed(&self) -> bool {
        self.status == EvolveStatus::Collapsed
    }

    pub fn initial_energy(&self) -> f64 {
        self.trace.first().map_or(f64::NAN, |e| e.total)
    }

    pub fn final_energy(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |e| e.total)
    }
}

/// Runs the evolution from `init_mask` until the sign pattern is stable for
/// [`STABLE_STEPS`] consecutive steps, the iteration budget is spent, or a
/// region collapses.
pub fn segment(field: &ScalarField, init_mask: &Mask, config: &EvolveConfig) -> Result<Segmentation> {
    let state = LevelSetState::new(field, init_mask, config)?;
    Ok(run(state, config))
}

/// Drives an already-initialized state to completion.
pub fn run(mut state: LevelSetState, config: &EvolveConfig) -> Segmentation {
    let mut quiet = 0usize;
    // sign changes leave stale distances behind the front; pixels beyond the
    // Dirac band cannot move until the next reinitialization
    let mut moved_since_reinit = false;
    while state.iter < config.max_iter {
        if state.step(config) == EvolveStatus::Collapsed {
            break;
        }
        moved_since_reinit |= state.band_changes > 0;
        if state.band_changes <= config.converge_tol && state.pending_changes <= config.converge_tol {
            quiet += 1;
        } else {
            quiet = 0;
        }
        let reinit_due = state.iter.is_multiple_of(config.reinit_every);
        if quiet >= STABLE_STEPS {
            if !moved_since_reinit {
                state.status = EvolveStatus::Converged;
                break;
            }
            quiet = 0;
        } else if !reinit_due {
            continue;
        }
        if let Ok(phi) = reinitialize(&state.phi) {
            state.phi = phi;
        }
        if moved_since_reinit {
            // the refreshed distances may release pixels the old band froze
            quiet = 0;
        }
        moved_since_reinit = false;
    }
    if state.status == EvolveStatus::Running {
        state.status = EvolveStatus::MaxIter;
    }
    Segmentation {
        mask: state.mask(),
        trace: state.energy_trace,
        status: state.status,
        iterations: state.iter,
    }
}

/// Default initialization: a lattice of small disks covering the image.
pub fn circle_grid_mask(width: usize, height: usize) -> Mask {
    let spacing = (width.min(height) / 8).max(8) as f64;
    let radius = spacing / 4.0;
    Mask::from_fn(width, height, |x, y| {
        let fx = (x as f64 + 0.5) % spacing - spacing / 2.0;
        let fy = (y as f64 + 0.5) % spacing - spacing / 2.0;
        fx * fx + fy * fy <= radius * radius
    })
}

/// Complements `mask` when its mean intensity is below that of the rest of
/// the image, so that the brighter phase starts inside.
pub fn orient_bright_inside(field: &ScalarField, mask: &Mask) -> Mask {
    let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &m) in field.iter().zip(mask.iter()) {
        if m {
            si += v;
            ni += 1;
        } else {
            so += v;
            no += 1;
        }
    }
    if ni > 0 && no > 0 && si / (ni as f64) < so / (no as f64) {
        mask.complement()
    } else {
        mask.clone()
    }
}

/// Thresholds the `(2r+1)²` local mean of `field` at its global mean. Falls
/// back to the oriented circle lattice when the result has a single phase.
pub fn local_mean_mask(field: &ScalarField, radius: usize) -> Mask {
    let (w, h) = (field.width(), field.height());
    // summed-area table with clamped borders handled by shrinking the window
    let mut sat = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += field[(x, y)];
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let global = sat[h * (w + 1) + w] / (w * h) as f64;
    let r = radius;
    let mask = Mask::from_fn(w, h, |x, y| {
        let (x0, y0) = (x.saturating_sub(r), y.saturating_sub(r));
        let (x1, y1) = ((x + r + 1).min(w), (y + r + 1).min(h));
        let s = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
            + sat[y0 * (w + 1) + x0];
        s / ((x1 - x0) * (y1 - y0)) as f64 > global
    });
    let n = mask.count();
    if n == 0 || n == mask.len() {
        orient_bright_inside(field, &circle_grid_mask(w, h))
    } else {
        mask
    }
}

/// How an automatic initial contour is built from the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initialization {
    /// [`circle_grid_mask`], oriented by [`orient_bright_inside`].
    CircleGrid,
    /// [`local_mean_mask`] with the given window radius.
    LocalMean { radius: usize },
}

impl Initialization {
    /// Initialization shared by all functionals in a sweep.
    pub const SWEEP_DEFAULT: Initialization = Initialization::LocalMean { radius: 1 };

    pub fn build(&self, field: &ScalarField) -> Mask {
        match *self {
            Initialization::CircleGrid => {
                orient_bright_inside(field, &circle_grid_mask(field.width(), field.height()))
            }
            Initialization::LocalMean { radius } => local_mean_mask(field, radius),
        }
    }

    /// Accepts `circles` and `local_mean` or `local_mean:<radius>`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None if s == "circles" => Ok(Initialization::CircleGrid),
            None if s == "local_mean" => Ok(Initialization::SWEEP_DEFAULT),
            Some(("local_mean", r)) => r
                .trim()
                .parse()
                .map(|radius| Initialization::LocalMean { radius })
                .map_err(|_| Error::Spec(format!("bad local_mean radius '{r}'"))),
            _ => Err(Error::Spec(format!("unknown initialization '{s}'"))),
        }
    }
}

impl std::fmt::Display for Initialization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Initialization::CircleGrid => f.write_str("circles"),
            Initialization::LocalMean { radius } => write!(f, "local_mean:{radius}"),
        }
    }
}
