use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use credsel::data::{load_csv, standardize};
use credsel::experiment::{
    fit_select, fit_select_with_spec, replicate_dataset, reproduce, FitSelectOutput, FitSettings, ReproduceOptions,
    Table,
};
use credsel::rng::Purpose;
use credsel::samplers::DlSweepOrder;
use credsel::sim::{score_ordering, score_prefix};
use credsel::tuning::{default_grid, derived_gamma, tune_by_grid};
use credsel::{Method, PriorFamily, PriorSpec, R2Target, RngState, SimDesign, TruthPattern, TuneFamily};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::RunConfig;

/// A replicate (or unit of work) that did not complete.
pub struct Failure {
    pub replicate: String,
    pub label: String,
    pub message: String,
}

pub fn run(cfg: &RunConfig) -> Result<Vec<Failure>> {
    let out = PathBuf::from(cfg.required("out")?);
    fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let failures = match cfg.command.as_str() {
        "simulate" => simulate(cfg, &out)?,
        "tune" => tune(cfg, &out)?,
        "fit-select" => fit_select_cmd(cfg, &out)?,
        "evaluate" => evaluate(cfg, &out)?,
        "reproduce" => reproduce_cmd(cfg, &out)?,
        other => bail!("unknown command {other}"),
    };
    write(&out.join("manifest.txt"), cfg.manifest())?;
    Ok(failures)
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn seed(cfg: &RunConfig) -> Result<u64> {
    Ok(cfg.get("seed")?)
}

fn target(cfg: &RunConfig) -> Result<R2Target> {
    Ok(R2Target::new(cfg.get("target_a")?, cfg.get("target_b")?)?)
}

fn fit_settings(cfg: &RunConfig) -> Result<FitSettings> {
    let dl_order = match cfg.raw("dl_order") {
        "blocked" => DlSweepOrder::Blocked,
        "as_listed" => DlSweepOrder::AsListed,
        other => bail!("dl_order must be blocked or as_listed, got {other:?}"),
    };
    Ok(FitSettings {
        n_iter: cfg.get("n_iter")?,
        n_burn: cfg.get("n_burn")?,
        thin: cfg.get("thin")?,
        target: target(cfg)?,
        tune_draws: cfg.get("tune_draws")?,
        dl_grid_points: cfg.get("dl_grid_points")?,
        dl_order,
    })
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<Failure>> {
    let (n, p, rho): (usize, usize, f64) = (cfg.get("n")?, cfg.get("p")?, cfg.get("rho")?);
    let reps: usize = cfg.get("reps")?;
    let seed = seed(cfg)?;
    SimDesign::new(n, p, rho, RngState::new(seed)).context("invalid design")?;
    let results: Vec<Result<()>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let (data, truth, _) = replicate_dataset(seed, n, p, rho, r)?;
            data.write_csv(out.join(format!("dataset_{r:03}.csv")), "y")?;
            let mut t = String::from("index,beta0\n");
            for (j, b) in truth.beta0.iter().enumerate() {
                writeln!(t, "{},{b}", j + 1).unwrap();
            }
            write(&out.join(format!("truth_{r:03}.csv")), t)?;
            eprintln!("replicate {r}: written");
            Ok(())
        })
        .collect();
    Ok(results
        .into_iter()
        .enumerate()
        .filter_map(|(r, res)| {
            res.err().map(|e| Failure {
                replicate: r.to_string(),
                label: "simulate".into(),
                message: format!("{e:#}"),
            })
        })
        .collect())
}

fn parse_family(s: &str) -> Result<TuneFamily> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "normal" => TuneFamily::Normal,
        "laplace" => TuneFamily::Laplace,
        "dl" => TuneFamily::Dl,
        _ => bail!("family must be normal, laplace or dl, got {s:?}"),
    })
}

fn tune(cfg: &RunConfig, out: &Path) -> Result<Vec<Failure>> {
    let family = parse_family(cfg.raw("family"))?;
    let target = target(cfg)?;
    let mut grid: Vec<f64> = cfg.list("grid")?;
    for &h in &grid {
        family.check(h).context("invalid grid")?;
    }
    let d = standardize(&load_csv(cfg.required("data")?, cfg.raw("response"))?)?;
    if grid.is_empty() {
        grid = default_grid(family, d.n(), d.p());
    }
    let result = tune_by_grid(&d, family, &grid, target, cfg.get("draws")?, RngState::new(seed(cfg)?))?;
    result.write_csv(out.join("tune_grid.csv"))?;
    let closed = match family {
        TuneFamily::Normal => derived_gamma(&d, target)?.to_string(),
        _ => String::new(),
    };
    write(
        &out.join("tune_summary.csv"),
        format!(
            "family,grid_optimum,ks_statistic,closed_form\n{},{},{},{closed}\n",
            cfg.raw("family").to_ascii_lowercase(),
            result.hyperparameter,
            result.ks_statistic
        ),
    )?;
    println!("grid optimum {} (KS {:.4})", result.hyperparameter, result.ks_statistic);
    if !closed.is_empty() {
        println!("closed form {closed}");
    }
    Ok(Vec::new())
}

fn fit_select_cmd(cfg: &RunConfig, out: &Path) -> Result<Vec<Failure>> {
    let method: Method = cfg.raw("method").parse()?;
    if method == Method::Lasso {
        bail!("fit-select needs a Bayesian method; the lasso is only available through reproduce");
    }
    let settings = fit_settings(cfg)?;
    let max_size: usize = cfg.get("max_size")?;
    let raw = load_csv(cfg.required("data")?, cfg.raw("response"))?;
    let rng = RngState::new(seed(cfg)?);
    let fs_out: FitSelectOutput = match cfg.optional::<f64>("hyper")? {
        None => fit_select(&raw, method, &settings, max_size, rng)?,
        Some(h) => {
            let family = match method {
                Method::NormalTune => PriorFamily::NormalFixed { gamma: h },
                Method::LaplaceTune => PriorFamily::LaplaceFixed { lambda: h },
                Method::DlTune => PriorFamily::DlFixed { a: h },
                _ => bail!("hyper only applies to the *_tune methods, not {method}"),
            };
            let spec = PriorSpec::new(family)?;
            fit_select_with_spec(standardize(&raw)?, spec, Some(h), &settings, max_size, rng.derive(0, Purpose::Chain, 0))?
        }
    };
    write_fit_outputs(&fs_out, out)?;
    if let Some(t) = fs_out.tuned {
        println!("hyperparameter {t}");
    }
    let names = fs_out.standardized.names();
    let sel: Vec<&str> = fs_out.selected.iter().map(|&j| names[j].as_str()).collect();
    println!("selected {} of {}: {}", sel.len(), names.len(), sel.join(" "));
    Ok(Vec::new())
}

fn write_fit_outputs(f: &FitSelectOutput, out: &Path) -> Result<()> {
    let names = f.standardized.names();
    let s = &f.fit.summary;
    let mut summary = String::from("index,name,mean,sd\n");
    for j in 0..names.len() {
        writeln!(summary, "{},{},{},{}", j + 1, names[j], s.beta_mean[j], s.beta_cov[(j, j)].max(0.0).sqrt()).unwrap();
    }
    writeln!(summary, ",sigma2,{},", s.sigma2_mean).unwrap();
    write(&out.join("posterior_summary.csv"), summary)?;
    f.fit.path.write_csv(out.join("path.csv"))?;
    let mut selected = String::from("index,name\n");
    for &j in &f.selected {
        writeln!(selected, "{},{}", j + 1, names[j]).unwrap();
    }
    write(&out.join("selected.csv"), selected)?;
    let mut ordering = String::from("rank,index,name\n");
    for (k, j) in f.fit.ordering().into_iter().enumerate() {
        writeln!(ordering, "{},{},{}", k + 1, j + 1, names[j]).unwrap();
    }
    write(&out.join("ordering.csv"), ordering)
}

/// Values of the named column of a small comma-separated file.
fn read_column(path: &str, column: &str) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {path}"))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let c = header
        .iter()
        .position(|h| *h == column)
        .with_context(|| format!("{path} has no {column:?} column"))?;
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let cell = l.split(',').nth(c).unwrap_or("").trim();
            cell.parse::<f64>()
                .with_context(|| format!("{path} row {}: bad {column} value {cell:?}", i + 2))
        })
        .collect()
}

fn evaluate(cfg: &RunConfig, out: &Path) -> Result<Vec<Failure>> {
    let beta0 = DVector::from_vec(read_column(cfg.required("truth")?, "beta0")?);
    let support = (0..beta0.len()).filter(|&j| beta0[j] != 0.0).collect();
    let truth = TruthPattern { beta0, support };
    let ordering = read_column(cfg.required("ordering")?, "index")?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize - 1)
            } else {
                bail!("ordering indices are 1-based integers, got {v}")
            }
        })
        .collect::<Result<Vec<usize>>>()?;
    let c = if ordering.len() < truth.p() {
        score_prefix(&ordering, &truth)?
    } else {
        score_ordering(&ordering, &truth)?
    };
    write(
        &out.join("evaluation.csv"),
        format!("roc_area,prc_area,partial_flag\n{},{},{}\n", c.roc_area, c.prc_area, c.partial as u8),
    )?;
    let mut curve = String::from("step,fpr,tpr,recall,precision\n");
    for (k, ((f, t), (r, p))) in c.roc_points.iter().zip(&c.prc_points).enumerate() {
        writeln!(curve, "{k},{f},{t},{r},{p}").unwrap();
    }
    write(&out.join("curve.csv"), curve)?;
    println!("roc_area {:.4} prc_area {:.4}{}", c.roc_area, c.prc_area, if c.partial { " (partial)" } else { "" });
    Ok(Vec::new())
}

fn reproduce_cmd(cfg: &RunConfig, out: &Path) -> Result<Vec<Failure>> {
    let table: Table = cfg.raw("table").parse()?;
    let mut o = ReproduceOptions::new(table, cfg.get("reps")?, seed(cfg)?);
    o.n = cfg.get("n")?;
    if let Some(p) = cfg.optional("p")? {
        o.p = p;
    }
    o.rhos = cfg.list("rho")?;
    if o.rhos.is_empty() {
        bail!("rho needs at least one value");
    }
    let methods: Vec<Method> = cfg.list("methods")?;
    if !methods.is_empty() {
        o.methods = methods;
    }
    o.fit = fit_settings(cfg)?;
    let report = reproduce(&o)?;
    report.write_results_csv(out.join("results.csv"))?;
    report.write_summary_csv(out.join("summary.csv"))?;
    if !report.curves.is_empty() {
        report.write_curves_csv(out.join("curves.csv"))?;
    }
    if !report.failures.is_empty() {
        report.write_failures_csv(out.join("failures.csv"))?;
    }
    println!("{:<14} {:>5} {:<12} {:>10} {:>9} {:>4}", "method", "rho", "metric", "mean", "se", "n");
    for s in report.summary() {
        println!("{:<14} {:>5} {:<12} {:>10.4} {:>9.4} {:>4}", s.label, s.rho, s.metric, s.mean, s.se, s.n);
    }
    Ok(report
        .failures
        .into_iter()
        .map(|f| Failure {
            replicate: f.replicate.to_string(),
            label: format!("{} rho={}", f.label, f.rho),
            message: f.message,
        })
        .collect())
}
