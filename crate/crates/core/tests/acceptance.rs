//! Acceptance criteria. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

mod common;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use common::flips::{relative_error, Config};
use common::{disk, hausdorff, integrate, two_value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, Discrete, Normal, Poisson as SPoisson, Weibull};
use statseg::energy::{bhattacharyya, speed_ml, speed_moments_rayleigh};
use statseg::eval::{aggregate, fpf_tpf, run_sweep, AggregateRow, SweepResult};
use statseg::expfam::{ml_estimate, moments_estimate_rayleigh, Rayleigh};
use statseg::levelset::{curvature, interface_points, reinitialize, segment, Initialization};
use statseg::synth::{calibrate, make_phantom, BenchmarkSpec};
use statseg::{
    Estimator, EvolveConfig, EvolveStatus, ExpFamily, Family, LevelSetState, ParamVec, ScalarField, SpeedLaw,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, detail: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl AsRef<str>) {
        if !ok {
            self.pass = false;
        }
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        let _ = write!(self.detail, "{}{}", if ok { "" } else { "FAILED " }, what.as_ref());
    }
}

fn eta(f: Family, conventional: &[f64]) -> ParamVec {
    f.natural_from_conventional(conventional).unwrap()
}

fn loglik(f: Family, ys: &[f64], e: &[f64]) -> f64 {
    ys.iter().map(|&y| f.log_pdf(y, e).unwrap()).sum()
}

fn estimators() -> Outcome {
    let mut out = Outcome::new();
    let e = eta(Family::Rayleigh, &[2.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let ys: Vec<f64> = (0..100_000).map(|_| Rayleigh.sample(&e, &mut rng).unwrap()).collect();
    let sum_t: f64 = ys.iter().map(|y| y * y).sum();
    let ml = Rayleigh
        .conventional_from_natural(&ml_estimate(&Rayleigh, &[sum_t], ys.len()).unwrap())
        .unwrap()[0];
    let mo = moments_estimate_rayleigh(ys.iter().sum(), ys.len()).unwrap();
    out.check((ml - 2.0).abs() < 0.02, format!("rayleigh ML theta {ml:.5}"));
    out.check((mo - 2.0).abs() < 0.02, format!("moments theta {mo:.5}"));

    for (f, conv) in [
        (Family::Poisson, vec![6.0]),
        (Family::Rayleigh, vec![1.5]),
        (Family::Gaussian, vec![-1.0, 4.0]),
    ] {
        let ys: Vec<f64> = (0..2_000).map(|_| f.sample(&eta(f, &conv), &mut rng).unwrap()).collect();
        let sum_t = ys.iter().fold(ParamVec::zeros(f.dim()), |mut acc, &y| {
            acc.add_assign(&f.sufficient_stat(y).unwrap());
            acc
        });
        let best = loglik(f, &ys, &ml_estimate(&f, &sum_t, ys.len()).unwrap());
        let beaten = (0..100)
            .filter(|&i| {
                let s = 0.5 + i as f64 / 99.0;
                let cand = match f {
                    Family::Gaussian => vec![conv[0] + (s - 1.0) * 2.0, conv[1] * s],
                    _ => vec![conv[0] * s],
                };
                loglik(f, &ys, &eta(f, &cand)) > best + 1e-9
            })
            .count();
        out.check(beaten == 0, format!("{f} grid points beating ML: {beaten}"));
    }

    let mut worst: f64 = 0.0;
    for i in 0..300 {
        let (f, e) = match i % 3 {
            0 => (Family::Poisson, ParamVec::scalar(rng.gen_range(-5.0..6.0))),
            1 => (Family::Rayleigh, ParamVec::scalar(rng.gen_range(-50.0..-0.01))),
            _ => (Family::Gaussian, ParamVec::pair(rng.gen_range(-20.0..20.0), rng.gen_range(-10.0..-0.01))),
        };
        let back = f.natural_from_mean(&f.mean_of_stat(&e).unwrap()).unwrap();
        for k in 0..e.len() {
            worst = worst.max((back[k] - e[k]).abs() / (1.0 + e[k].abs()));
        }
    }
    out.check(worst <= 1e-10, format!("psi(grad A) max rel error {worst:.1e}"));
    out
}

/// Bhattacharyya distance by direct summation or quadrature of sqrt(p q),
/// using reference densities.
fn bhattacharyya_oracle(f: Family, a: &[f64], b: &[f64]) -> f64 {
    let bc = match f {
        Family::Poisson => {
            let (p, q) = (SPoisson::new(a[0]).unwrap(), SPoisson::new(b[0]).unwrap());
            let top = (a[0].max(b[0]) * 4.0 + 200.0) as u64;
            (0..=top).map(|k| (p.pmf(k) * q.pmf(k)).sqrt()).sum::<f64>()
        }
        Family::Rayleigh => {
            let p = Weibull::new(2.0, a[0] * 2f64.sqrt()).unwrap();
            let q = Weibull::new(2.0, b[0] * 2f64.sqrt()).unwrap();
            integrate(|y| (p.pdf(y) * q.pdf(y)).sqrt(), 0.0, 15.0 * a[0].max(b[0]), 40_000)
        }
        Family::Gaussian => {
            let p = Normal::new(a[0], a[1].sqrt()).unwrap();
            let q = Normal::new(b[0], b[1].sqrt()).unwrap();
            let sd = a[1].max(b[1]).sqrt();
            let (lo, hi) = (a[0].min(b[0]) - 15.0 * sd, a[0].max(b[0]) + 15.0 * sd);
            integrate(|y| (p.pdf(y) * q.pdf(y)).sqrt(), lo, hi, 40_000)
        }
    };
    -bc.ln()
}

fn bhattacharyya_check() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for f in [Family::Poisson, Family::Rayleigh, Family::Gaussian] {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            match f {
                Family::Poisson => vec![rng.gen_range(0.5..50.0)],
                Family::Rayleigh => vec![rng.gen_range(0.3..5.0)],
                Family::Gaussian => vec![rng.gen_range(-10.0..10.0), rng.gen_range(0.25..25.0)],
            }
        };
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let (a, b) = (draw(&mut rng), draw(&mut rng));
            let closed = bhattacharyya(f, &eta(f, &a), &eta(f, &b)).unwrap();
            worst = worst.max((closed - bhattacharyya_oracle(f, &a, &b)).abs());
        }
        out.check(worst < 1e-6, format!("{f} closed form vs quadrature {worst:.1e}"));

        let mut worst_rt: f64 = 0.0;
        for &d in &[0.01, 0.125, 0.25, 0.5, 1.0, 2.0] {
            let bg = BenchmarkSpec::default_bg(f);
            let fg = calibrate(f, &bg, d).unwrap();
            let back = bhattacharyya(f, &eta(f, &fg), &eta(f, &bg)).unwrap();
            worst_rt = worst_rt.max((back - d).abs());
        }
        out.check(worst_rt < 1e-9, format!("{f} calibrate round trip {worst_rt:.1e}"));
    }
    out
}

fn shape_derivative() -> Outcome {
    let mut out = Outcome::new();
    let cfg = Config::new(Family::Poisson, Estimator::Ml, &[16.0], &[9.0], 1);
    let (inner, outer) = cfg.estimates();
    let good = cfg
        .sample_boundary(50, 2)
        .into_iter()
        .filter(|&i| {
            let y = cfg.field.as_slice()[i];
            let predicted = -speed_ml(y, &inner.eta_hat, &outer.eta_hat, &Family::Poisson).unwrap();
            relative_error(predicted, cfg.flip_delta(i)) < 0.05
        })
        .count();
    out.check(good >= 45, format!("poisson flips within 5%: {good}/50"));

    let cfg = Config::new(Family::Rayleigh, Estimator::MomentsRayleigh, &[2.0], &[1.0], 5);
    let (inner, outer) = cfg.estimates();
    let (mut with, mut without) = (0.0, 0.0);
    let picks = cfg.sample_boundary(50, 6);
    for &i in &picks {
        let y = cfg.field.as_slice()[i];
        let actual = cfg.flip_delta(i);
        with += (-speed_moments_rayleigh(y, &inner, &outer).unwrap() - actual).abs();
        without += (-speed_ml(y, &inner.eta_hat, &outer.eta_hat, &Family::Rayleigh).unwrap() - actual).abs();
    }
    let n = picks.len() as f64;
    out.check(
        with < without,
        format!("rayleigh moments MAE with correction {:.2e} vs without {:.2e}", with / n, without / n),
    );
    out
}

fn geometry() -> Outcome {
    let mut out = Outcome::new();
    for &r in &[5.0, 10.0, 20.0] {
        let phi = ScalarField::from_fn(64, 64, |x, y| {
            r - ((x as f64 - 32.0).powi(2) + (y as f64 - 32.0).powi(2)).sqrt()
        });
        let k = curvature(&phi, 32 + r as usize, 32);
        out.check((k - 1.0 / r).abs() <= 0.1 / r, format!("kappa(r={r}) = {k:.4}"));
    }

    let n = 64;
    let radius = |phi: &ScalarField| {
        let pts = interface_points(phi);
        pts.iter().map(|&(x, y)| ((x - 32.0).powi(2) + (y - 32.0).powi(2)).sqrt()).sum::<f64>() / pts.len() as f64
    };
    let cfg = EvolveConfig { lambda: 1.0, speed_law: SpeedLaw::ChanVese, ..Default::default() };
    let mut st = LevelSetState::new(&ScalarField::filled(n, n, 5.0), &disk(n, 32.0, 32.0, 15.0), &cfg).unwrap();
    let r0 = radius(&st.phi);
    let mut prev = r0;
    let mut monotone = true;
    for _ in 0..50 {
        st.step(&cfg);
        let r = radius(&st.phi);
        monotone &= r < prev;
        prev = r;
    }
    out.check(monotone, format!("curvature flow radius {r0:.2} -> {prev:.2}"));

    let phi = ScalarField::from_fn(n, n, |x, y| {
        let (u, v) = (x as f64 - 30.5, y as f64 - 33.0);
        4.0 * (1.0 - (u * u / 400.0 + v * v / 144.0)) + 0.3 * (u / 5.0).sin()
    });
    let d = hausdorff(&interface_points(&phi), &interface_points(&reinitialize(&phi).unwrap()));
    out.check(d < 1.0, format!("reinitialization moves the front {d:.3} px"));
    out
}

fn noise_free() -> Outcome {
    let mut out = Outcome::new();
    for (noise, fg, bg) in [(Family::Poisson, 16.0, 9.0), (Family::Rayleigh, 2.0, 1.0)] {
        let (labels, gt) = make_phantom(&BenchmarkSpec::new(noise)).unwrap();
        let field = two_value(&labels, fg, bg);
        let cfg = EvolveConfig { speed_law: SpeedLaw::MlLogLikelihood(noise), ..Default::default() };
        let init = Initialization::SWEEP_DEFAULT;
        let seg = segment(&field, &init.build(&field), &cfg).unwrap();
        let (fpf, tpf) = fpf_tpf(&seg.mask, &gt).unwrap();
        out.check(
            fpf == 0.0 && tpf == 1.0,
            format!("{noise} from {init}: FPF {fpf} TPF {tpf} ({:?})", seg.status),
        );
    }
    out
}

const SWEEP_D: [f64; 4] = [0.125, 0.25, 0.5, 1.0];
const NOISES: [Family; 2] = [Family::Poisson, Family::Rayleigh];

fn sweep_all() -> SweepResult {
    let mut all = SweepResult::default();
    for noise in NOISES {
        let spec = BenchmarkSpec { realizations: 10, ..BenchmarkSpec::new(noise) };
        let r = run_sweep(
            &spec,
            &SWEEP_D,
            &SpeedLaw::benchmark_set(),
            &EvolveConfig::default(),
            Initialization::SWEEP_DEFAULT,
        )
        .unwrap();
        all.extend(r);
    }
    all
}

fn cell(rows: &[AggregateRow], noise: Family, d: f64, law: SpeedLaw) -> &AggregateRow {
    rows.iter()
        .find(|r| r.noise == noise && r.d == d && r.functional == law)
        .expect("aggregate cell")
}

fn qualitative(result: &SweepResult) -> Outcome {
    let mut out = Outcome::new();
    let rows = aggregate(result).unwrap();
    let laws = SpeedLaw::benchmark_set();
    for noise in NOISES {
        let matched = SpeedLaw::MlLogLikelihood(noise);
        let series: Vec<&AggregateRow> = SWEEP_D.iter().map(|&d| cell(&rows, noise, d, matched)).collect();
        let monotone = series
            .windows(2)
            .all(|w| w[1].mean_fpf <= w[0].mean_fpf && w[1].mean_tpf >= w[0].mean_tpf);
        let trend: Vec<String> = series.iter().map(|r| format!("{:.3}/{:.3}", r.mean_fpf, r.mean_tpf)).collect();
        out.check(monotone, format!("(a) {noise} matched FPF/TPF by D: {}", trend.join(" ")));

        let mut ok_b = true;
        let mut margins = Vec::new();
        for &d in &SWEEP_D[..2] {
            let m = cell(&rows, noise, d, matched);
            let m_score = m.mean_tpf - m.mean_fpf;
            for law in laws.iter().filter(|l| **l != matched && l.family().is_some()) {
                let o = cell(&rows, noise, d, *law);
                let margin = m_score - (o.mean_tpf - o.mean_fpf);
                ok_b &= margin > 0.0;
                margins.push(format!("{law}@{d} {margin:+.4}"));
            }
        }
        out.check(ok_b, format!("(b) {noise} matched TPF-FPF margins: {}", margins.join(" ")));
    }

    let d0 = SWEEP_D[0];
    let mut ok_c = false;
    let mut notes = Vec::new();
    for noise in NOISES {
        let tpfs: Vec<(SpeedLaw, f64)> = laws.iter().map(|&l| (l, cell(&rows, noise, d0, l).mean_tpf)).collect();
        let (lowest, _) = tpfs.iter().cloned().fold((laws[0], f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        ok_c |= lowest == SpeedLaw::ChanVese;
        let list: Vec<String> = tpfs.iter().map(|(l, t)| format!("{l} {t:.4}")).collect();
        notes.push(format!("{noise}: {}", list.join(" ")));
    }
    out.check(ok_c, format!("(c) lowest TPF at D={d0} is chan_vese for some noise; {}", notes.join(" | ")));
    out
}

fn descent_and_determinism(first: &SweepResult, secs: f64) -> Outcome {
    let mut out = Outcome::new();
    let bad: Vec<String> = first
        .rows
        .iter()
        .filter(|r| !(r.final_energy <= r.initial_energy))
        .map(|r| format!("{} D={} {} r{}", r.noise, r.d, r.functional, r.realization))
        .collect();
    out.check(
        bad.is_empty(),
        format!("{} of {} runs end above their initial energy {:?}", bad.len(), first.rows.len(), bad),
    );
    let collapsed = first.rows.iter().filter(|r| r.status == EvolveStatus::Collapsed).count();
    let _ = write!(out.detail, "; {collapsed} collapsed; first sweep {secs:.0} s");
    let again = sweep_all();
    out.check(first.to_csv() == again.to_csv(), "repeated sweep CSV byte-identical");
    out
}

fn report(id: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let mut o = f();
    let took = t.elapsed();
    if let Some(b) = budget {
        o.check(took <= b, format!("runtime {:.2} s (budget {} s)", took.as_secs_f64(), b.as_secs()));
    }
    println!("{} criterion {id} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= report(1, "estimators", Some(secs(10)), estimators);
    ok &= report(2, "bhattacharyya", Some(secs(5)), bhattacharyya_check);
    ok &= report(3, "shape derivative", Some(secs(30)), shape_derivative);
    ok &= report(4, "curvature and geometry", None, geometry);
    ok &= report(5, "noise-free separability", None, noise_free);

    let t = Instant::now();
    let sweep = sweep_all();
    let sweep_secs = t.elapsed().as_secs_f64();
    ok &= report(6, "qualitative sweep", None, || {
        let mut o = qualitative(&sweep);
        o.check(sweep_secs <= 900.0, format!("sweep {sweep_secs:.0} s (target 900 s)"));
        o
    });
    ok &= report(7, "energy descent and determinism", None, || descent_and_determinism(&sweep, sweep_secs));
    if !ok {
        std::process::exit(1);
    }
}
