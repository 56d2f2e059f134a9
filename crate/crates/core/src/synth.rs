//! Synthetic benchmark images: phantom geometry, contrast calibration and
//! noise corruption.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{bhattacharyya, bhattacharyya_numeric};
use crate::error::{Error, Result};
use crate::expfam::{ExpFamily, Family, ParamVec};
use crate::grid::{Mask, ScalarField};

/// Tolerance of the closed-form calibration check.
pub const CALIBRATION_TOL: f64 = 1e-9;
/// Tolerance of the quadrature cross-check performed by [`calibrate`].
pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disk { cx: f64, cy: f64, r: f64 },
    Rect { x: usize, y: usize, w: usize, h: usize },
}

impl Shape {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        match *self {
            Shape::Disk { cx, cy, r } => {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                dx * dx + dy * dy <= r * r
            }
            Shape::Rect { x: x0, y: y0, w, h } => x >= x0 && x < x0 + w && y >= y0 && y < y0 + h,
        }
    }

    fn inside_bounds(&self, width: usize, height: usize) -> bool {
        let (w, h) = (width as f64, height as f64);
        match *self {
            Shape::Disk { cx, cy, r } => {
                r > 0.0 && cx - r >= 0.0 && cy - r >= 0.0 && cx + r <= w - 1.0 && cy + r <= h - 1.0
            }
            Shape::Rect { x, y, w: sw, h: sh } => {
                sw > 0 && sh > 0 && x + sw <= width && y + sh <= height
            }
        }
    }

    /// `disk(cx,cy,r)` or `rect(x,y,w,h)`.
    pub fn parse(s: &str) -> Result<Shape> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| Error::Spec(format!("bad shape '{s}'")))?;
        if !s.ends_with(')') {
            return Err(Error::Spec(format!("bad shape '{s}'")));
        }
        let kind = s[..open].trim().to_ascii_lowercase();
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Spec(format!("bad shape arguments in '{s}'")))?;
        match (kind.as_str(), args.as_slice()) {
            ("disk", &[cx, cy, r]) => Ok(Shape::Disk { cx, cy, r }),
            ("rect", &[x, y, w, h]) if [x, y, w, h].iter().all(|v| *v >= 0.0 && v.fract() == 0.0) => {
                Ok(Shape::Rect {
                    x: x as usize,
                    y: y as usize,
                    w: w as usize,
                    h: h as usize,
                })
            }
            _ => Err(Error::Spec(format!("bad shape '{s}'"))),
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Disk { cx, cy, r } => write!(f, "disk({cx},{cy},{r})"),
            Shape::Rect { x, y, w, h } => write!(f, "rect({x},{y},{w},{h})"),
        }
    }
}

/// Geometry, noise model and contrast of one benchmark configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub width: usize,
    pub height: usize,
    pub shapes: Vec<Shape>,
    pub noise: Family,
    /// Background parameters in conventional form
    /// (Poisson: rate; Rayleigh: scale; Gaussian: mean, variance).
    pub bg_param: ParamVec,
    pub target_d: f64,
    pub realizations: usize,
    pub base_seed: u64,
}

impl BenchmarkSpec {
    /// Default 128x128 phantom with two disks and two rectangles.
    pub fn default_shapes() -> Vec<Shape> {
        vec![
            Shape::Disk { cx: 36.0, cy: 36.0, r: 18.0 },
            Shape::Rect { x: 72, y: 18, w: 38, h: 30 },
            Shape::Disk { cx: 88.0, cy: 88.0, r: 22.0 },
            Shape::Rect { x: 16, y: 74, w: 34, h: 38 },
        ]
    }

    pub fn default_bg(noise: Family) -> ParamVec {
        match noise {
            Family::Poisson => ParamVec::scalar(9.0),
            Family::Rayleigh => ParamVec::scalar(1.0),
            Family::Gaussian => ParamVec::pair(100.0, 400.0),
        }
    }

    pub fn new(noise: Family) -> Self {
        BenchmarkSpec {
            width: 128,
            height: 128,
            shapes: Self::default_shapes(),
            noise,
            bg_param: Self::default_bg(noise),
            target_d: 0.5,
            realizations: 50,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Spec("image dimensions must be positive".into()));
        }
        if !(self.target_d >= 0.0 && self.target_d.is_finite()) {
            return Err(Error::Spec(format!("target D must be >= 0, got {}", self.target_d)));
        }
        if self.realizations == 0 {
            return Err(Error::Spec("realizations must be positive".into()));
        }
        self.noise
            .natural_from_conventional(&self.bg_param)
            .map_err(|e| Error::Spec(e.to_string()))?;
        for s in &self.shapes {
            if !s.inside_bounds(self.width, self.height) {
                return Err(Error::Spec(format!("shape {s} leaves the image")));
            }
        }
        for y in 0..self.height {
            for x in 0..self.width {
                if self.shapes.iter().filter(|s| s.contains(x, y)).count() > 1 {
                    return Err(Error::Spec(format!("shapes overlap at ({x}, {y})")));
                }
            }
        }
        Ok(())
    }
}

/// Rasterizes the phantom. Returns the foreground labels and the ground-truth
/// mask, which coincide.
pub fn make_phantom(spec: &BenchmarkSpec) -> Result<(Mask, Mask)> {
    spec.validate()?;
    let labels = Mask::from_fn(spec.width, spec.height, |x, y| {
        spec.shapes.iter().any(|s| s.contains(x, y))
    });
    let gt = labels.clone();
    Ok((labels, gt))
}

/// Closed-form inverse of the Bhattacharyya distance in the foreground
/// parameter, with the foreground always the higher-parameter region.
/// Gaussian contrast is obtained by shifting the mean at fixed variance.
fn invert_distance(noise: Family, bg: &ParamVec, d: f64) -> Result<ParamVec> {
    Ok(match noise {
        Family::Poisson => {
            let r = bg[0].sqrt() + (2.0 * d).sqrt();
            ParamVec::scalar(r * r)
        }
        Family::Rayleigh => {
            let e = d.exp();
            ParamVec::scalar(bg[0] * (e + (e * e - 1.0).max(0.0).sqrt()))
        }
        Family::Gaussian => ParamVec::pair(bg[0] + bg[1].sqrt() * (8.0 * d).sqrt(), bg[1]),
    })
}

/// Foreground parameters (conventional form) at Bhattacharyya distance
/// `target_d` from the background. The result is checked against the closed
/// form and against numerical integration before it is returned.
pub fn calibrate(noise: Family, bg_param: &ParamVec, target_d: f64) -> Result<ParamVec> {
    if !(target_d >= 0.0 && target_d.is_finite()) {
        return Err(Error::Spec(format!("target D must be >= 0, got {target_d}")));
    }
    let eta_bg = noise.natural_from_conventional(bg_param)?;
    let fg = invert_distance(noise, bg_param, target_d)?;
    let eta_fg = noise.natural_from_conventional(&fg)?;
    let closed = bhattacharyya(noise, &eta_fg, &eta_bg)?;
    if (closed - target_d).abs() > CALIBRATION_TOL {
        return Err(Error::Calibration(format!(
            "closed form gives D = {closed}, wanted {target_d}"
        )));
    }
    let numeric = bhattacharyya_numeric(noise, &eta_fg, &eta_bg)?;
    if (numeric - target_d).abs() > ORACLE_TOL {
        return Err(Error::Calibration(format!(
            "numerical integration gives D = {numeric}, wanted {target_d}"
        )));
    }
    Ok(fg)
}

/// Draws every pixel independently from the family with its region's
/// parameter (conventional form). Deterministic in `seed`.
pub fn corrupt(
    labels: &Mask,
    noise: Family,
    fg_param: &ParamVec,
    bg_param: &ParamVec,
    seed: u64,
) -> Result<ScalarField> {
    let eta_fg = noise.natural_from_conventional(fg_param)?;
    let eta_bg = noise.natural_from_conventional(bg_param)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = labels
        .iter()
        .map(|&fg| {
            let eta = if fg { &eta_fg } else { &eta_bg };
            noise.sample_unchecked(eta, &mut rng)
        })
        .collect();
    Ok(ScalarField::from_vec(labels.width(), labels.height(), data).expect("shape preserved"))
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the stream addressed by `path` under `base`.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p)))
}
