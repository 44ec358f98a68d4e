//! Command-line harness: TOML-configured runs, canonical reproductions and
//! the output writers they share.

pub mod config;
pub mod output;
pub mod reproduce;
pub mod run;

use std::fmt::Write as _;
use std::path::Path;

use config::{ExperimentConfig, FamilyKind};
use output::{loglog_svg, to_json, trajectories_csv, write_atomic, ResultRecord, Series};
use reproduce::Target;
use run::{run_experiment, worker_count};

/// Exit code for a completed command whose checks all passed.
pub const EXIT_OK: u8 = 0;
/// Exit code when at least one run or reproduction check failed.
pub const EXIT_CHECK_FAILED: u8 = 1;
/// Exit code for unreadable or invalid input.
pub const EXIT_USAGE: u8 = 2;

/// `amoo run <config>`.
pub fn cmd_run(path: &Path) -> u8 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}:{e}", path.display());
            return EXIT_USAGE;
        }
    };
    let outcomes = match run_experiment(&cfg, worker_count(cfg.output.threads)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    if let Err(e) = write_results(&cfg, &outcomes) {
        eprintln!("writing results to {}: {e}", cfg.output.dir.display());
        return EXIT_USAGE;
    }
    print!("{}", summary_table(&outcomes));
    let failed: Vec<&str> =
        outcomes.iter().filter(|(_, o)| !o.as_ref().is_ok_and(|r| r.pass())).map(|(id, _)| id.as_str()).collect();
    if failed.is_empty() {
        EXIT_OK
    } else {
        eprintln!("failed runs: {}", failed.join(", "));
        EXIT_CHECK_FAILED
    }
}

fn write_results(cfg: &ExperimentConfig, outcomes: &[(String, run::RunOutcome)]) -> anyhow::Result<()> {
    let out = &cfg.output;
    let ok: Vec<_> = outcomes.iter().filter_map(|(id, o)| o.as_ref().ok().map(|r| (id.as_str(), r))).collect();
    if out.csv {
        let csv = trajectories_csv(ok.iter().map(|(id, r)| (*id, &r.trajectory, r.mg_xbar.as_slice())));
        write_atomic(&out.dir.join("results.csv"), csv.as_bytes())?;
    }
    if out.json {
        let hash = cfg.hash();
        let records: Vec<ResultRecord> = outcomes.iter().map(|(id, o)| ResultRecord::new(id, &hash, o)).collect();
        write_atomic(&out.dir.join("results.json"), to_json(&records).as_bytes())?;
    }
    if out.svg {
        let series: Vec<Series> = ok
            .iter()
            .map(|(id, r)| Series {
                label: (*id).into(),
                points: r.mg_xbar.iter().enumerate().map(|(k, v)| ((k + 1) as f64, *v)).collect(),
            })
            .collect();
        let title = format!("{} problem", cfg.problem.family);
        write_atomic(&out.dir.join("plot.svg"), loglog_svg(&title, "K", "MG(average iterate)", &series).as_bytes())?;
    }
    Ok(())
}

fn summary_table(outcomes: &[(String, run::RunOutcome)]) -> String {
    let mut s = format!("{:<20} {:<14} {:>6} {:>14} {:>10}  {}\n", "run", "algorithm", "K", "MG(x̄_K)", "MG/bound", "verdict");
    for (id, o) in outcomes {
        match o {
            Ok(r) => {
                let ratio = r.verdict.bound.as_ref().map_or("-".to_string(), |b| format!("{:.4}", b.binding_ratio()));
                let last = r.mg_xbar.last().copied().unwrap_or(f64::NAN);
                let verdict = if r.pass() { "PASS" } else { "FAIL" };
                writeln!(
                    s,
                    "{id:<20} {:<14} {:>6} {last:>14.6e} {ratio:>10}  {verdict}",
                    r.spec.algorithm.to_string(),
                    r.trajectory.len()
                )
                .unwrap();
                for n in &r.verdict.notes {
                    writeln!(s, "    note: {n}").unwrap();
                }
            }
            Err(e) => writeln!(s, "{id:<20} error: {e}").unwrap(),
        }
    }
    s
}

/// `amoo reproduce <target>`.
pub fn cmd_reproduce(target: Target, out: &Path) -> u8 {
    match reproduce::reproduce(target, out) {
        Ok(report) => {
            print!("{}", report.summary());
            if report.pass() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("reproduce {}: {e}", target.name());
            EXIT_USAGE
        }
    }
}

/// `amoo list-problems`.
pub fn list_problems() -> String {
    let mut s = String::new();
    for f in FamilyKind::ALL {
        writeln!(s, "{}", f.name()).unwrap();
        writeln!(s, "    {}", f.description()).unwrap();
        writeln!(s, "    parameters: {}", f.params().join(", ")).unwrap();
    }
    s
}
