//! One function per subcommand. Each resolves its configuration, writes its
//! artifacts atomically plus a manifest, and prints a JSON summary.

use std::path::{Path, PathBuf};

use kac_core::fourier::{integrate_ode_at, wild_series_eval, wild_terms};
use kac_core::io::{batch_to_binary, batch_to_csv, write_atomic};
use kac_core::simulate::{moment_diagnostics, simulate_batch};
use kac_core::stats::{
    esseen_chain, m_of_t, rate_study, t0, theorem2_bound_berry_esseen, theorem2_bound_general,
    theorem2_constant_a, RateStudyOptions,
};
use kac_core::tree::{
    catalan, depth_moment_exact, enumerate_trees, enumeration_csv, leaf_depths, sample_tree,
    tree_probability,
};
use kac_core::verify::{run_all, table, VerifyOptions};
use kac_core::{lemma1_bound, CharGrid64, Error, Result, SimulationConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, SampleFormat, SolveMethod};
use crate::exit;
use crate::plot::{emit_grid_plot, emit_rate_plot};

pub fn run(command: &str, cfg: RunConfig) -> Result<u8> {
    match command {
        "simulate" => simulate(cfg),
        "solve" => solve(cfg),
        "tree-stats" => tree_stats(cfg),
        "bounds" => bounds(cfg),
        "rate-study" => rate(cfg),
        "verify" => verify(cfg),
        other => Err(Error::Argument(format!("unknown command {other}"))),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    artifacts: Vec<String>,
}

/// Writes `<name>.manifest.json` next to the artifacts.
fn finish(
    dir: &Path,
    name: &str,
    cfg: &RunConfig,
    artifacts: &[PathBuf],
    summary: Option<Value>,
) -> Result<()> {
    let mut names: Vec<String> = artifacts
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let manifest_path = dir.join(format!("{name}.manifest.json"));
    names.push(format!("{name}.manifest.json"));
    let manifest = Manifest {
        tool: "kac",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        artifacts: names,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&manifest_path, text.as_bytes())?;
    if let Some(summary) = summary {
        emit(&format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
    }
    Ok(())
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn prepare_dir(cfg: &mut RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn simulate(mut cfg: RunConfig) -> Result<u8> {
    let law = cfg.require_law()?;
    let t = cfg.require_t()?;
    let size = cfg.require_size()?;
    let seed = cfg.require_seed()?;
    cfg.fill_simulation_defaults();
    let format = *cfg.format.get_or_insert(SampleFormat::Csv);
    let dir = prepare_dir(&mut cfg)?;
    let name = cfg.name("simulate");
    let sim = SimulationConfig {
        t,
        size,
        seed,
        nu_cap: cfg.nu_cap.expect("filled"),
        chunk_size: cfg.chunk_size.expect("filled"),
    };
    let batch = simulate_batch(&sim, &law)?;
    let (path, bytes) = match format {
        SampleFormat::Csv => (
            dir.join(format!("{name}.csv")),
            batch_to_csv(&batch).into_bytes(),
        ),
        SampleFormat::Bin => (dir.join(format!("{name}.bin")), batch_to_binary(&batch)),
    };
    write_atomic(&path, &bytes)?;
    let summary = json!({
        "samples": path,
        "size": batch.size(),
        "t": t,
        "seed": seed,
        "law": batch.law,
        "wall_clock_secs": batch.wall_clock_secs,
        "moments": moment_diagnostics(&batch, &law),
    });
    finish(&dir, &name, &cfg, &[path], Some(summary))?;
    Ok(exit::OK)
}

fn solve(mut cfg: RunConfig) -> Result<u8> {
    let law = cfg.require_law()?;
    let times = cfg.t_grid()?;
    if times.iter().any(|&t| t.is_nan() || t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument(
            "times must be nonnegative and nondecreasing".into(),
        ));
    }
    let method = *cfg.method.get_or_insert(SolveMethod::Both);
    let solver = cfg.solver(&law)?;
    let dir = prepare_dir(&mut cfg)?;
    let name = cfg.name("solve");
    let xi_max = solver.xi_max.expect("resolved");
    let phi0 = CharGrid64::from_law(&law, xi_max, solver.n_points)?;

    let wild = if matches!(method, SolveMethod::Wild | SolveMethod::Both) {
        let state = wild_terms(&phi0, solver.wild_terms, solver.theta_nodes)?;
        Some(
            times
                .iter()
                .map(|&t| wild_series_eval(&state, t))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let ode = if matches!(method, SolveMethod::Ode | SolveMethod::Both) {
        Some(integrate_ode_at(
            &phi0,
            &times,
            solver.step,
            solver.theta_nodes,
        )?)
    } else {
        None
    };

    let mut artifacts = Vec::new();
    let mut results = Vec::new();
    let mut labelled: Vec<(String, &CharGrid64)> = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let mut entry = json!({ "t": t });
        if let Some(w) = &wild {
            let path = dir.join(format!("{name}-wild-t{t}.csv"));
            write_atomic(&path, w[i].grid.to_csv().as_bytes())?;
            entry["wild"] = json!({ "file": path, "truncation_bound": w[i].truncation_bound });
            artifacts.push(path);
            labelled.push((format!("wild t={t}"), &w[i].grid));
        }
        if let Some(o) = &ode {
            let path = dir.join(format!("{name}-ode-t{t}.csv"));
            write_atomic(&path, o[i].to_csv().as_bytes())?;
            entry["ode"] = json!({ "file": path, "second_moment": o[i].second_moment() });
            artifacts.push(path);
            labelled.push((format!("ode t={t}"), &o[i]));
        }
        if let (Some(w), Some(o)) = (&wild, &ode) {
            let sup = w[i].grid.sup_distance(&o[i])?;
            entry["sup_discrepancy"] = json!(sup);
            eprintln!(
                "t = {t}: sup |wild - ode| = {sup:.3e} (truncation bound {:.3e})",
                w[i].truncation_bound
            );
        }
        results.push(entry);
    }
    let refs: Vec<(&str, &CharGrid64)> = labelled.iter().map(|(l, g)| (l.as_str(), *g)).collect();
    artifacts.extend(emit_grid_plot(&refs, &dir, &name)?);
    finish(
        &dir,
        &name,
        &cfg,
        &artifacts,
        Some(json!({ "results": results })),
    )?;
    Ok(exit::OK)
}

fn tree_stats(mut cfg: RunConfig) -> Result<u8> {
    let n = cfg
        .n
        .ok_or_else(|| Error::Argument("--n is required".into()))?;
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let samples = *cfg.samples.get_or_insert(0);
    let seed = if samples > 0 {
        Some(cfg.require_seed()?)
    } else {
        None
    };
    let dir = prepare_dir(&mut cfg)?;
    let name = cfg.name("tree-stats");
    let xs: Vec<f64> = match cfg.x {
        Some(x) if x > 0.0 => vec![x],
        Some(x) => return Err(Error::Domain(format!("x = {x} must be positive"))),
        None => vec![0.375, 0.5, 1.0],
    };
    let mut artifacts = Vec::new();
    let trees = if n <= kac_core::tree::DEFAULT_ENUMERATION_CAP {
        let trees = enumerate_trees(n)?;
        let path = dir.join(format!("{name}.csv"));
        write_atomic(&path, enumeration_csv(&trees).as_bytes())?;
        artifacts.push(path);
        Some(trees)
    } else {
        None
    };
    let sampled = seed.map(|seed| {
        use rayon::prelude::*;
        (0..samples)
            .into_par_iter()
            .map(|i| {
                leaf_depths(&sample_tree(
                    n,
                    &mut kac_core::simulate::substream(seed, i as u64),
                ))
            })
            .collect::<Vec<_>>()
    });
    let moments: Vec<Value> = xs
        .iter()
        .map(|&x| {
            let enumerated = trees.as_ref().map(|ts| {
                ts.iter()
                    .map(|t| tree_probability(t).value() * leaf_depths(t).power_sum(x))
                    .sum::<f64>()
            });
            let mc = sampled.as_ref().map(|ds| {
                let values: Vec<f64> = ds.iter().map(|d| d.power_sum(x)).collect();
                let est =
                    kac_core::simulate::Estimate::from_samples(&values, depth_moment_exact(x, n));
                json!({ "mean": est.empirical, "standard_error": est.standard_error })
            });
            json!({
                "x": x,
                "exact": depth_moment_exact(x, n),
                "enumeration": enumerated,
                "monte_carlo": mc,
            })
        })
        .collect();
    let catalan_count = catalan(n - 1).ok();
    let summary = json!({
        "n": n,
        "trees": catalan_count,
        "depth_moments": moments,
    });
    finish(&dir, &name, &cfg, &artifacts, Some(summary))?;
    Ok(exit::OK)
}

fn bounds(mut cfg: RunConfig) -> Result<u8> {
    let law = cfg.require_law()?;
    let times = cfg.t_grid()?;
    let params = cfg.theorem2_params()?;
    let delta = cfg.delta.expect("filled");
    let c_delta = cfg.c_delta.expect("filled");
    let dir = prepare_dir(&mut cfg)?;
    let name = cfg.name("bounds");
    let start = t0(&law, &params)?;
    let sigma = law.sigma().expect("t0 checked the variance");
    let mut rows = Vec::new();
    for &t in &times {
        if t < start {
            return Err(Error::Domain(format!("t = {t} is below t0 = {start}")));
        }
        let m = m_of_t(t, &law, &params)?;
        let general = theorem2_bound_general(t, &law, &params)?;
        let chain = esseen_chain(t, &law, &params)?;
        let be = theorem2_bound_berry_esseen(t, &law, delta, c_delta);
        let lemma = cfg.x.map(|x| lemma1_bound(x, params.p(), t)).transpose()?;
        rows.push(json!({
            "t": t,
            "m": m,
            "bound_general": general,
            "esseen_chain": chain.chain(),
            "bound_berry_esseen": be.as_ref().ok(),
            "berry_esseen_note": be.err().map(|e| e.to_string()),
            "lemma1": lemma,
        }));
    }
    let summary = json!({
        "law": law.to_string(),
        "sigma": sigma,
        "t0": start,
        "constant_a": theorem2_constant_a(sigma),
        "b1": params.b1(),
        "b2": params.b2(),
        "rows": rows,
    });
    let path = dir.join(format!("{name}.json"));
    write_atomic(
        &path,
        format!("{}\n", serde_json::to_string_pretty(&summary)?).as_bytes(),
    )?;
    finish(&dir, &name, &cfg, &[path], Some(summary))?;
    Ok(exit::OK)
}

fn rate(mut cfg: RunConfig) -> Result<u8> {
    let law = cfg.require_law()?;
    let times = cfg
        .t_grid
        .clone()
        .ok_or_else(|| Error::Argument("--t-grid is required".into()))?;
    let size = cfg.require_size()?;
    let seed = cfg.require_seed()?;
    cfg.fill_simulation_defaults();
    let params = cfg.theorem2_params()?;
    let svg = *cfg.svg.get_or_insert(true);
    let dir = prepare_dir(&mut cfg)?;
    let name = cfg.name("rate-study");
    let options = RateStudyOptions {
        sigma: cfg.sigma,
        params: Some(params),
        berry_esseen_c1: cfg.c_delta.expect("filled"),
        nu_cap: cfg.nu_cap.expect("filled"),
        ..RateStudyOptions::default()
    };
    let report = rate_study(&law, &times, size, seed, &options)?;
    let csv = dir.join(format!("{name}.csv"));
    write_atomic(&csv, report.to_csv().as_bytes())?;
    let json_path = dir.join(format!("{name}.json"));
    write_atomic(
        &json_path,
        format!("{}\n", serde_json::to_string_pretty(&report)?).as_bytes(),
    )?;
    let mut artifacts = vec![csv, json_path];
    artifacts.extend(emit_rate_plot(&report, &dir, &name, svg)?);
    finish(
        &dir,
        &name,
        &cfg,
        &artifacts,
        Some(serde_json::to_value(&report)?),
    )?;
    Ok(exit::OK)
}

fn verify(mut cfg: RunConfig) -> Result<u8> {
    let defaults = VerifyOptions::default();
    let seed = *cfg.seed.get_or_insert(defaults.seed);
    let quick = *cfg.quick.get_or_insert(false);
    let opts = if quick {
        VerifyOptions {
            seed,
            energy_pairs: 1_000,
            energy_max_leaves: 1_000,
            tree_samples: 10_000,
            time_samples: 10_000,
            lemma_draws: 10_000,
            decomposition_max_n: 4,
        }
    } else {
        VerifyOptions { seed, ..defaults }
    };
    let dir = prepare_dir(&mut cfg)?;
    let name = cfg.name("verify");
    let results = run_all(&opts)?;
    emit(&table(&results))?;
    let path = dir.join(format!("{name}.json"));
    let body = json!({ "options": opts, "results": results });
    write_atomic(
        &path,
        format!("{}\n", serde_json::to_string_pretty(&body)?).as_bytes(),
    )?;
    let all = results.iter().all(|r| r.passed);
    finish(&dir, &name, &cfg, &[path], None)?;
    Ok(if all { exit::OK } else { exit::CHECK_FAILED })
}
