//! Canonical desk-scale reproductions with fixed seeds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use amoo_core::analysis::separation_experiment;
use amoo_core::experiments::{run_desk_experiment, throughput_benchmark, ArmSummary, DeskExperiment};
use amoo_core::optimizers::{self, Algorithm, RunConfig};
use amoo_core::parallel::Exec;
use amoo_core::problems::Preset;
use amoo_core::suites::{bound_suite, epsilon_suite, lower_bound_family, lower_bound_suite, BoundCase};
use amoo_core::Trajectory;
use clap::ValueEnum;

use crate::output::{float, loglog_svg, to_json, trajectories_csv, write_atomic, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    LowerBound,
    Bounds,
    P1,
    P2,
    P3,
    Throughput,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::LowerBound => "lower-bound",
            Target::Bounds => "bounds",
            Target::P1 => "p1",
            Target::P2 => "p2",
            Target::P3 => "p3",
            Target::Throughput => "throughput",
        }
    }
}

/// One named pass/fail line of a reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub target: Target,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    /// Human-readable table printed after the checks.
    pub table: String,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        if !self.table.is_empty() {
            s.push_str(&self.table);
            s.push('\n');
        }
        for c in &self.checks {
            writeln!(s, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail).unwrap();
        }
        for f in &self.files {
            writeln!(s, "wrote {}", f.display()).unwrap();
        }
        s
    }
}

pub fn reproduce(target: Target, out: &Path) -> anyhow::Result<Report> {
    match target {
        Target::LowerBound => lower_bound(out),
        Target::Bounds => bounds(out),
        Target::P1 => desk(Target::P1, Preset::P1, out),
        Target::P2 => desk(Target::P2, Preset::P2, out),
        Target::P3 => desk(Target::P3, Preset::P3, out),
        Target::Throughput => throughput(out),
    }
}

struct Files<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Files<'_> {
    fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let p = self.dir.join(name);
        write_atomic(&p, contents.as_bytes())?;
        self.written.push(p);
        Ok(())
    }
}

fn series(label: &str, values: &[f64]) -> Series {
    Series { label: label.into(), points: values.iter().enumerate().map(|(k, v)| ((k + 1) as f64, *v)).collect() }
}

fn lower_bound(out: &Path) -> anyhow::Result<Report> {
    let (m, k) = (16, 16);
    let suite = lower_bound_suite(m, k, &[4, 8, 16])?;
    let fam = lower_bound_family(m)?;
    let mut runs: Vec<(String, Trajectory)> = vec![("ew_polyak".into(), suite.trajectory.clone())];
    for (id, alg) in [("pamoo", Algorithm::Pamoo), ("mgamoo_polyak", Algorithm::MgamooPolyak)] {
        runs.push((id.into(), optimizers::run(&fam.set, &fam.x1, &RunConfig::new(alg, k))?));
    }
    let mgs = runs.iter().map(|(_, t)| t.prefix_average_max_gaps(&fam.set)).collect::<Result<Vec<_>, _>>()?;

    let mut files = Files { dir: out, written: vec![] };
    files.write("lower_bound.csv", &trajectories_csv(runs.iter().zip(&mgs).map(|((id, t), mg)| (id.as_str(), t, mg.as_slice()))))?;
    let plot: Vec<Series> = runs.iter().zip(&mgs).map(|((id, _), mg)| series(id, mg)).collect();
    files.write("lower_bound.svg", &loglog_svg("Lower-bound instance, m = 16", "K", "MG(average iterate)", &plot))?;

    let sep = separation_experiment(64, 32)?;
    let mut table = String::from("K  MG(x̄_K)  lower bound\n");
    for r in &suite.inequality.rows {
        writeln!(table, "{:<2} {:.6e} {:.6e}", r.k, r.empirical, r.bound).unwrap();
    }
    let checks = vec![
        Check::new(
            "closed form",
            suite.max_abs_error <= 1e-10,
            format!("max |x_k - closed form| = {:.3e} over K = {k}", suite.max_abs_error),
        ),
        Check::new(
            "lower-bound inequality",
            suite.inequality.all_pass(),
            format!("K in {{4, 8, 16}}, smallest MG/bound = {:.4}", suite.inequality.binding_ratio()),
        ),
        Check::new(
            "separation m=64 K=32",
            sep.separated,
            format!(
                "EW {:.4e} >= {:.4e}, MG-AMOO {:.4e} <= {:.4e}",
                sep.ew_mg, sep.ew_lower_bound, sep.mgamoo_mg, sep.mgamoo_upper_bound
            ),
        ),
    ];
    Ok(Report { target: Target::LowerBound, checks, files: files.written, table })
}

fn case_id(c: &BoundCase) -> String {
    let mut id = format!("{}_{}", c.family, c.algorithm.name().to_lowercase());
    if c.report.epsilon > 0.0 {
        write!(id, "_eps{}", c.report.epsilon).unwrap();
    }
    if c.stop_on_epsilon {
        id.push_str("_stop");
    }
    id
}

fn bounds(out: &Path) -> anyhow::Result<Report> {
    let k = 256;
    let mut cases = bound_suite(k, Exec::Parallel)?;
    cases.extend(epsilon_suite(0.05, k, Exec::Parallel)?);
    let mut files = Files { dir: out, written: vec![] };
    let mut csv = String::from("case,k,mg_xbar_k,bound,pass\n");
    let mut table = String::from("case  K  worst MG/bound  descent violations\n");
    let mut checks = vec![];
    for c in &cases {
        let id = case_id(c);
        for r in &c.report.rows {
            writeln!(csv, "{id},{},{},{},{}", r.k, float(r.empirical), float(r.bound), r.pass).unwrap();
        }
        let worst = c.report.binding_ratio();
        writeln!(table, "{id} {} {worst:.4} {}", c.trajectory.len(), c.descent_violations).unwrap();
        checks.push(Check::new(
            id,
            c.pass(),
            format!("worst MG/bound {worst:.4}, descent violations {}, stop point ok {}", c.descent_violations, c.stop_point_ok),
        ));
    }
    files.write("bounds.csv", &csv)?;
    for family in ["piecewise_s0", "quadratic_s0", "perturbed_s0"] {
        let plot: Vec<Series> = cases
            .iter()
            .filter(|c| c.family == family)
            .map(|c| {
                let mg: Vec<f64> = c.report.rows.iter().map(|r| r.empirical).collect();
                series(&case_id(c), &mg)
            })
            .collect();
        files.write(&format!("bounds_{family}.svg"), &loglog_svg(family, "K", "MG(average iterate)", &plot))?;
    }
    Ok(Report { target: Target::Bounds, checks, files: files.written, table })
}

fn desk(target: Target, preset: Preset, out: &Path) -> anyhow::Result<Report> {
    let exp = DeskExperiment::standard(preset);
    let arms = run_desk_experiment(&exp, Exec::Parallel)?;
    let mut files = Files { dir: out, written: vec![] };
    let name = target.name();
    files.write(&format!("{name}.csv"), &desk_csv(&arms))?;
    files.write(&format!("{name}.json"), &to_json(&arms))?;
    let plot: Vec<Series> = arms
        .iter()
        .map(|a| Series {
            label: a.label.clone(),
            points: a.median_curve.ks.iter().zip(&a.median_curve.max_loss).map(|(k, v)| (*k as f64, *v)).collect(),
        })
        .collect();
    files.write(&format!("{name}.svg"), &loglog_svg(&format!("{} median max loss", name.to_uppercase()), "k", "max_i f_i", &plot))?;

    let mut table = String::from("arm  step factor  median final max loss  per seed\n");
    for a in &arms {
        let seeds: Vec<String> = a.final_losses.iter().map(|v| format!("{v:.4e}")).collect();
        writeln!(table, "{} {} {:.4e} [{}]", a.label, a.step_factor, a.median_final, seeds.join(", ")).unwrap();
    }
    let ew = arms.iter().find(|a| a.run.algorithm.is_ew()).map(|a| a.median_final).unwrap_or(f64::NAN);
    let checks = arms
        .iter()
        .filter(|a| !a.run.algorithm.is_ew())
        .map(|a| {
            Check::new(format!("{} <= EW", a.label), a.median_final <= ew, format!("{:.4e} vs {:.4e}", a.median_final, ew))
        })
        .collect();
    Ok(Report { target, checks, files: files.written, table })
}

fn desk_csv(arms: &[ArmSummary]) -> String {
    let seeds = arms.first().map_or(0, |a| a.curves.len());
    let mut s = String::from("arm,k,median_max_loss");
    for i in 0..seeds {
        write!(s, ",seed{i}").unwrap();
    }
    s.push('\n');
    for a in arms {
        for (j, k) in a.median_curve.ks.iter().enumerate() {
            write!(s, "{},{k},{}", a.label, float(a.median_curve.max_loss[j])).unwrap();
            for c in &a.curves {
                write!(s, ",{}", c.max_loss.get(j).map_or(String::new(), |v| float(*v))).unwrap();
            }
            s.push('\n');
        }
    }
    s
}

/// Seconds each algorithm is timed for by `reproduce throughput`.
pub const THROUGHPUT_SECONDS: u64 = 4;

fn throughput(out: &Path) -> anyhow::Result<Report> {
    let records = throughput_benchmark(5, Duration::from_secs(THROUGHPUT_SECONDS))?;
    let mut files = Files { dir: out, written: vec![] };
    let mut csv = String::from("algorithm,iterations,iterations_per_sec,ratio\n");
    let mut table = String::from("algorithm  iterations/s  ratio to EW\n");
    for r in &records {
        writeln!(csv, "{},{},{},{}", r.algorithm, r.iterations, float(r.iterations_per_sec), float(r.ratio)).unwrap();
        writeln!(table, "{:<14} {:>10.1} {:>6.3}", r.algorithm.to_string(), r.iterations_per_sec, r.ratio).unwrap();
    }
    files.write("throughput.csv", &csv)?;
    let ratio = |alg| records.iter().find(|r| r.algorithm == alg).map_or(f64::NAN, |r| r.ratio);
    let (mg, pamoo) = (ratio(Algorithm::MgamooPolyak), ratio(Algorithm::Pamoo));
    let checks = vec![
        Check::new("MG-AMOO >= 0.7 EW", mg >= 0.7, format!("ratio {mg:.3}")),
        Check::new("PAMOO <= 0.5 EW", pamoo <= 0.5, format!("ratio {pamoo:.3}")),
    ];
    Ok(Report { target: Target::Throughput, checks, files: files.written, table })
}
