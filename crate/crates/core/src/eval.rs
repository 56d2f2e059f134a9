//! Segmentation scoring and the contrast sweep.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::energy::SpeedLaw;
use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::grid::Mask;
use crate::levelset::{segment, EvolveConfig, EvolveStatus, Initialization};
use crate::synth::{calibrate, corrupt, derive_seed, make_phantom, BenchmarkSpec};

/// Header of the per-run CSV.
pub const SWEEP_HEADER: &str = "noise,D,functional,seed,fpf,tpf,iterations,final_energy,collapsed";
/// Header of the aggregated CSV.
pub const AGGREGATE_HEADER: &str = "noise,D,functional,mean_fpf,std_fpf,mean_tpf,std_tpf,n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_masks(seg: &Mask, gt: &Mask) -> Result<Self> {
        if !seg.same_shape(gt) {
            return Err(Error::Shape("segmentation and ground truth differ in size".into()));
        }
        let mut c = ConfusionCounts::default();
        for (&s, &g) in seg.iter().zip(gt.iter()) {
            match (s, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// `(FPF, TPF)` with `FPF = fp / (fp + tn)` and `TPF = tp / (tp + fn)`.
pub fn fpf_tpf(seg: &Mask, gt: &Mask) -> Result<(f64, f64)> {
    let c = ConfusionCounts::from_masks(seg, gt)?;
    let pos = c.tp + c.fn_;
    let neg = c.fp + c.tn;
    if pos == 0 || neg == 0 {
        return Err(Error::Eval(
            "ground truth needs at least one foreground and one background pixel".into(),
        ));
    }
    Ok((c.fp as f64 / neg as f64, c.tp as f64 / pos as f64))
}

/// One segmentation run of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub noise: Family,
    pub d: f64,
    pub functional: SpeedLaw,
    /// Realization index within its `(noise, D)` cell.
    pub realization: usize,
    /// Seed the corrupted image was drawn with.
    pub seed: u64,
    pub fpf: f64,
    pub tpf: f64,
    pub iterations: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub status: EvolveStatus,
}

impl SweepRow {
    pub fn collapsed(&self) -> bool {
        self.status == EvolveStatus::Collapsed
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn extend(&mut self, other: SweepResult) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.noise,
                r.d,
                r.functional,
                r.seed,
                r.fpf,
                r.tpf,
                r.iterations,
                r.final_energy,
                r.collapsed()
            );
        }
        out
    }
}

/// Seed of realization `r` for a given noise type. Shared across contrast
/// levels so that every `D` sees the same random stream.
pub fn realization_seed(base_seed: u64, noise: Family, r: usize) -> u64 {
    derive_seed(base_seed, &[noise as u64, r as u64])
}

/// Runs the full protocol for one noise type: for every `D` and realization,
/// calibrate, corrupt, and segment once per functional from a shared
/// initialization. Rows come back sorted by `(D, realization, functional)`.
pub fn run_sweep(
    spec: &BenchmarkSpec,
    d_values: &[f64],
    functionals: &[SpeedLaw],
    config: &EvolveConfig,
    init: Initialization,
) -> Result<SweepResult> {
    let (labels, gt) = make_phantom(spec)?;
    config.validate()?;
    let fg_params = d_values
        .iter()
        .map(|&d| calibrate(spec.noise, &spec.bg_param, d))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..d_values.len())
        .flat_map(|di| (0..spec.realizations).map(move |r| (di, r)))
        .collect();

    let per_job: Vec<Result<Vec<SweepRow>>> = jobs
        .par_iter()
        .map(|&(di, r)| {
            let seed = realization_seed(spec.base_seed, spec.noise, r);
            let field = corrupt(&labels, spec.noise, &fg_params[di], &spec.bg_param, seed)?;
            let init = init.build(&field);
            functionals
                .iter()
                .map(|&law| {
                    let cfg = EvolveConfig {
                        speed_law: law,
                        ..*config
                    };
                    let (mask, iterations, e0, e1, status) = match segment(&field, &init, &cfg) {
                        Ok(s) => {
                            let (e0, e1) = (s.initial_energy(), s.final_energy());
                            (s.mask, s.iterations, e0, e1, s.status)
                        }
                        Err(_) => (init.clone(), 0, f64::NAN, f64::NAN, EvolveStatus::Collapsed),
                    };
                    let (fpf, tpf) = fpf_tpf(&mask, &gt)?;
                    Ok(SweepRow {
                        noise: spec.noise,
                        d: d_values[di],
                        functional: law,
                        realization: r,
                        seed,
                        fpf,
                        tpf,
                        iterations,
                        initial_energy: e0,
                        final_energy: e1,
                        status,
                    })
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(jobs.len() * functionals.len());
    for chunk in per_job {
        rows.extend(chunk?);
    }
    let order = |law: &SpeedLaw| functionals.iter().position(|l| l == law).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        a.d.total_cmp(&b.d)
            .then(a.realization.cmp(&b.realization))
            .then(order(&a.functional).cmp(&order(&b.functional)))
    });
    Ok(SweepResult { rows })
}

/// Mean and spread of FPF/TPF for one `(noise, D, functional)` group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub noise: Family,
    pub d: f64,
    pub functional: SpeedLaw,
    pub mean_fpf: f64,
    pub std_fpf: f64,
    pub mean_tpf: f64,
    pub std_tpf: f64,
    pub n: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by `(noise, D, functional)`; the standard deviation is the
/// sample one (`n - 1`), zero for singleton groups.
pub fn aggregate(result: &SweepResult) -> Result<Vec<AggregateRow>> {
    if result.rows.is_empty() {
        return Err(Error::Eval("nothing to aggregate".into()));
    }
    type Key = (Family, u64, SpeedLaw);
    let mut groups: BTreeMap<Key, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &result.rows {
        let key = (r.noise, r.d.to_bits(), r.functional);
        let g = groups.entry(key).or_insert_with(|| (r.d, Vec::new(), Vec::new()));
        g.1.push(r.fpf);
        g.2.push(r.tpf);
    }
    let mut out: Vec<AggregateRow> = groups
        .into_iter()
        .map(|((noise, _, functional), (d, f, t))| {
            let (mean_fpf, std_fpf) = mean_std(&f);
            let (mean_tpf, std_tpf) = mean_std(&t);
            AggregateRow {
                noise,
                d,
                functional,
                mean_fpf,
                std_fpf,
                mean_tpf,
                std_tpf,
                n: f.len(),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.noise
            .cmp(&b.noise)
            .then(a.d.total_cmp(&b.d))
            .then(a.functional.cmp(&b.functional))
    });
    Ok(out)
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.noise, r.d, r.functional, r.mean_fpf, r.std_fpf, r.mean_tpf, r.std_tpf, r.n
        );
    }
    out
}
