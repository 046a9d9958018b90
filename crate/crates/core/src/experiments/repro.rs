//! Pinned end-to-end reproductions writing a report bundle: the instance
//! file, CSV tables, a JSON summary and one PASS/FAIL line per criterion.
//! Bundles hold no timings, so equal seeds give equal bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::builders::{build_benchmark_4state, build_slow_and_steady, SlowSteadyParams};
use crate::experiments::criteria::{self, Criterion};
use crate::experiments::sweep::{run_sweep, PolicyKind, SweepSpec};
use crate::experiments::to_csv;
use crate::instance_file::InstanceFile;
use crate::oracle::slow_steady_forms;
use crate::policies::{whittle_report, DEFAULT_GRID_POINTS};
use crate::sim::DEFAULT_SEED;
use crate::ExactRational;

pub const EXPERIMENTS: [&str; 2] = ["slow-steady", "benchmark"];
pub const SLOW_STEADY_GRID: [u64; 3] = [900, 3600, 14400];
pub const BENCHMARK_GRID: [u64; 3] = [60, 600, 6000];
pub const SWEEP_REPS: usize = 2000;
pub const DIFFUSION_ARMS: u64 = 600;
pub const DIFFUSION_REPS: usize = 500;

#[derive(Clone, Debug)]
pub struct ReproOptions {
    pub seed: u64,
    pub threads: Option<usize>,
    /// Parent directory; the bundle goes in `out/<experiment>`.
    pub out: PathBuf,
}

impl Default for ReproOptions {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, threads: None, out: PathBuf::from("repro") }
    }
}

#[derive(Clone, Debug)]
pub struct ReproReport {
    pub experiment: String,
    pub dir: PathBuf,
    pub criteria: Vec<Criterion>,
    /// Wall-clock time per stage; printed, never written to the bundle.
    pub timings: Vec<(&'static str, Duration)>,
}

impl ReproReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

struct Bundle {
    dir: PathBuf,
}

impl Bundle {
    fn create(dir: PathBuf) -> Result<Self> {
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        Ok(fs::write(self.dir.join(name), body)?)
    }

    fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        self.text(name, &to_csv(rows)?)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        body.push('\n');
        self.text(name, &body)
    }
}

fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => other.in_stage(stage),
    })
}

fn timed<T>(timings: &mut Timings, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = std::time::Instant::now();
    let out = staged(stage, f());
    timings.push((stage, start.elapsed()));
    out
}

fn finish(bundle: &Bundle, experiment: &str, seed: u64, criteria: &[Criterion], extra: serde_json::Value) -> Result<()> {
    let lines: String = criteria.iter().map(|c| format!("{c}\n")).collect();
    bundle.text("criteria.txt", &lines)?;
    bundle.json(
        "summary.json",
        &json!({
            "experiment": experiment,
            "seed": seed,
            "passed": criteria.iter().all(|c| c.passed),
            "criteria": criteria,
            "results": extra,
        }),
    )
}

type Timings = Vec<(&'static str, Duration)>;

fn slow_steady(opts: &ReproOptions, bundle: &Bundle) -> Result<(Vec<Criterion>, Timings)> {
    let mut timings = Vec::new();
    let params = SlowSteadyParams::pinned();
    let template = timed(&mut timings, "build", || {
        let exact = build_slow_and_steady::<ExactRational>(&params)?;
        InstanceFile::from_template(&exact, None)?.write(&bundle.dir.join("instance.toml"))?;
        build_slow_and_steady::<f64>(&params)
    })?;
    let forms = timed(&mut timings, "oracle", || {
        let forms = SLOW_STEADY_GRID.iter().map(|&n| slow_steady_forms(&params, n)).collect::<Result<Vec<_>>>()?;
        bundle.csv("oracle.csv", &forms)?;
        Ok(forms)
    })?;
    let (a1, lp) = timed(&mut timings, "lp", || {
        let (c, check, _) = criteria::a1_lp_closed_form(&template, &forms[0])?;
        bundle.json("lp.json", &check)?;
        Ok((c, check))
    })?;
    let (a4, report) = timed(&mut timings, "policies", || {
        let report = whittle_report(template.model(), DEFAULT_GRID_POINTS);
        let (c, values) = criteria::a4_non_indexable(template.model(), &report, &params);
        bundle.json("whittle.json", &json!({ "report": report, "penalized_values": values }))?;
        Ok((c, report))
    })?;
    let sweep = timed(&mut timings, "sweep", || {
        let mut spec = SweepSpec::new(template.clone(), SLOW_STEADY_GRID.to_vec(), vec![PolicyKind::FluidBalance]);
        spec.replications = SWEEP_REPS;
        spec.seed = opts.seed;
        let res = run_sweep(&spec)?;
        bundle.csv("sweep.csv", &res.rows)?;
        bundle.csv("slopes.csv", &res.slopes)?;
        Ok(res)
    })?;
    let a2 = criteria::a2_sqrt_law(&sweep, &forms, &params);
    let a3 = criteria::a3_fluid_value(&sweep, &forms);
    let list = vec![a1, a2, a3, a4];
    finish(
        bundle,
        "slow-steady",
        opts.seed,
        &list,
        json!({ "lp": lp, "indexable": report.indexable, "witness": report.witness, "oracle": forms }),
    )?;
    Ok((list, timings))
}

fn benchmark(opts: &ReproOptions, bundle: &Bundle) -> Result<(Vec<Criterion>, Timings)> {
    let mut timings = Vec::new();
    let template = timed(&mut timings, "build", || {
        let exact = build_benchmark_4state::<ExactRational>();
        InstanceFile::from_template(&exact, None)?.write(&bundle.dir.join("instance.toml"))?;
        Ok(build_benchmark_4state::<f64>())
    })?;
    let (a5, report) = timed(&mut timings, "policies", || {
        let report = whittle_report(template.model(), DEFAULT_GRID_POINTS);
        bundle.json("whittle.json", &report)?;
        Ok((criteria::a5_whittle_order(&report), report))
    })?;
    let (a6, sweep) = timed(&mut timings, "sweep", || {
        let mut spec =
            SweepSpec::new(template.clone(), BENCHMARK_GRID.to_vec(), vec![PolicyKind::FluidBalance, PolicyKind::Whittle]);
        spec.replications = SWEEP_REPS;
        spec.seed = opts.seed;
        let res = run_sweep(&spec)?;
        bundle.csv("sweep.csv", &res.rows)?;
        bundle.csv("slopes.csv", &res.slopes)?;
        let largest = *BENCHMARK_GRID.last().expect("grid");
        Ok((criteria::a6_scaling(&res, largest), res))
    })?;
    let a7 = timed(&mut timings, "oracle", || {
        let (c, rows) = criteria::a7_sandwich(opts.seed)?;
        bundle.csv("sandwich.csv", &rows)?;
        Ok(c)
    })?;
    let a8 = timed(&mut timings, "diffusion", || {
        let instance = template.instantiate(DIFFUSION_ARMS)?;
        let (c, rows) = criteria::a8_diffusion(&instance, DIFFUSION_REPS, opts.seed)?;
        bundle.csv("diffusion.csv", &rows)?;
        Ok(c)
    })?;
    let a9 = timed(&mut timings, "sampler", || {
        let (c, rows) = criteria::a9_sampler(opts.seed);
        bundle.csv("sampler.csv", &rows)?;
        Ok(c)
    })?;
    let list = vec![a5, a6, a7, a8, a9];
    finish(bundle, "benchmark", opts.seed, &list, json!({ "whittle": report, "slopes": sweep.slopes }))?;
    Ok((list, timings))
}

/// Run experiment `name` and write its bundle to `opts.out/name`.
pub fn repro(name: &str, opts: &ReproOptions) -> Result<ReproReport> {
    if !EXPERIMENTS.contains(&name) {
        return Err(Error::UnknownExperiment(name.to_string()));
    }
    let dir = opts.out.join(name);
    let run = || -> Result<ReproReport> {
        let bundle = Bundle::create(dir.clone())?;
        let (criteria, timings) = match name {
            "slow-steady" => slow_steady(opts, &bundle)?,
            _ => benchmark(opts, &bundle)?,
        };
        Ok(ReproReport { experiment: name.to_string(), dir: dir.clone(), criteria, timings })
    };
    match opts.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Parse(e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Relative paths of files whose bytes differ between two bundles, plus
/// files present in only one.
pub fn bundle_differences(a: &Path, b: &Path) -> Result<Vec<String>> {
    fn list(dir: &Path) -> Result<Vec<String>> {
        let mut names: Vec<String> =
            fs::read_dir(dir)?.map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned())).collect::<std::io::Result<_>>()?;
        names.sort();
        Ok(names)
    }
    let (la, lb) = (list(a)?, list(b)?);
    let mut diff: Vec<String> = la.iter().filter(|n| !lb.contains(n)).chain(lb.iter().filter(|n| !la.contains(n))).cloned().collect();
    for n in la.iter().filter(|n| lb.contains(n)) {
        if fs::read(a.join(n))? != fs::read(b.join(n))? {
            diff.push(n.clone());
        }
    }
    Ok(diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_is_rejected() {
        let err = repro("nope", &ReproOptions::default()).unwrap_err();
        assert!(err.to_string().contains("unknown experiment"));
        assert!(err.is_validation());
    }
}
