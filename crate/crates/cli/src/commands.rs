use std::path::{Path, PathBuf};

use altruist::admm::{self, Estimate};
use altruist::io::{read_raster, write_atomic, write_raster, Raster};
use altruist::metrics::{self, cnr_histogram, histogram_mean, paired_ttest, Measure, MetricsReport, SsimConfig};
use altruist::phantom::generate;
use altruist::{dp_seed, strain_from_displacement, DisplacementField, FrameMeta, RfFrame, SolverMode, StrainImage};
use ndarray::Array2;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::preview::{to_gray, value_range, write_png};
use crate::windows::WindowSet;

/// Runs `body` with a fresh manifest and writes the manifest whether or not it succeeds.
fn run_command(
    name: &str,
    cfg: &RunConfig,
    body: impl FnOnce(&mut Manifest, &Path) -> Result<(), CliError>,
) -> Result<Manifest, CliError> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let mut manifest = Manifest::new(name, cfg);
    let result = body(&mut manifest, &out);
    if let Err(e) = &result {
        manifest.fail(e);
    }
    let written = manifest.write(&out);
    result?;
    written?;
    Ok(manifest)
}

fn save_raster(m: &mut Manifest, path: PathBuf, values: &Array2<f64>, meta: Option<&FrameMeta>) -> Result<(), CliError> {
    write_raster(&path, values, meta)?;
    m.add_output(&path);
    Ok(())
}

fn save_text(m: &mut Manifest, path: PathBuf, text: &str) -> Result<(), CliError> {
    write_atomic(&path, text.as_bytes())?;
    m.add_output(&path);
    Ok(())
}

fn load(m: &mut Manifest, path: &Path) -> Result<Raster<f64>, CliError> {
    m.add_input(path)?;
    Ok(read_raster(path)?)
}

fn load_frames(m: &mut Manifest, pre: &Path, post: &Path) -> Result<(RfFrame<f64>, RfFrame<f64>), CliError> {
    let a = load(m, pre)?;
    let b = load(m, post)?;
    if a.values.dim() != b.values.dim() {
        return Err(CliError::Invalid(format!("frame shapes differ: {:?} vs {:?}", a.values.dim(), b.values.dim())));
    }
    let meta = a.meta.or(b.meta).unwrap_or_default();
    Ok((RfFrame::new(a.values, meta.clone())?, RfFrame::new(b.values, meta)?))
}

fn measure_str(m: Option<Measure<f64>>) -> String {
    m.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_str(v: Option<f64>) -> String {
    v.map(num_str).unwrap_or_default()
}

fn num_str(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Generates a phantom and writes frames plus ground truth.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Manifest, CliError> {
    run_command("simulate", cfg, |m, out| {
        let spec = cfg.phantom_spec()?;
        let p = m.time("generate", || generate::<f64>(&spec))?;
        let meta = p.pre.meta().clone();
        save_raster(m, out.join("pre.raw"), p.pre.samples(), Some(&meta))?;
        save_raster(m, out.join("post.raw"), p.post.samples(), Some(&meta))?;
        save_raster(m, out.join("truth_axial.raw"), &p.truth.displacement.axial_raster(), Some(&meta))?;
        save_raster(m, out.join("truth_lateral.raw"), &p.truth.displacement.lateral_raster(), Some(&meta))?;
        save_raster(m, out.join("truth_strain.raw"), p.truth.strain.values(), Some(&meta))?;
        m.detail("phantom", &spec);
        m.detail("noise_sigma", [p.noise_sigma.0, p.noise_sigma.1]);
        Ok(())
    })
}

fn refine(
    m: &mut Manifest,
    cfg: &RunConfig,
    pre: &RfFrame<f64>,
    post: &RfFrame<f64>,
    seed: &DisplacementField<f64>,
    mode: SolverMode,
) -> Result<Estimate<f64>, CliError> {
    let solver = cfg.solver_config()?.with_mode(mode);
    m.time(&format!("admm_{mode}"), || admm::run(pre, post, seed, &solver)).map_err(CliError::from)
}

/// Seed, refine and differentiate one frame pair.
pub fn cmd_estimate(cfg: &RunConfig, pre: &Path, post: &Path) -> Result<Manifest, CliError> {
    run_command("estimate", cfg, |m, out| {
        let (f1, f2) = load_frames(m, pre, post)?;
        let seed_params = cfg.seed_params()?;
        let seed = m.time("seed", || dp_seed(&f1, &f2, &seed_params))?;
        let mode = cfg.solver_config()?.mode;
        let est = refine(m, cfg, &f1, &f2, &seed, mode)?;
        let kernel = cfg.kernel()?;
        let strain = m.time("strain", || strain_from_displacement(&est.displacement, kernel))?;
        let meta = f1.meta().clone();
        save_raster(m, out.join("axial.raw"), &est.displacement.axial_raster(), Some(&meta))?;
        save_raster(m, out.join("lateral.raw"), &est.displacement.lateral_raster(), Some(&meta))?;
        save_raster(m, out.join("strain.raw"), strain.values(), Some(&meta))?;
        let mut trace = Vec::new();
        est.trace.write_csv(&mut trace).map_err(|e| CliError::Io(e.to_string()))?;
        save_text(m, out.join("trace.csv"), &String::from_utf8_lossy(&trace))?;
        m.detail("mode", mode.to_string());
        m.detail("iterations", est.trace.len());
        if let Some(last) = est.trace.last() {
            m.detail("final_primal_residual", last.primal_residual);
            m.detail("final_objective", last.objective);
        }
        Ok(())
    })
}

struct Evaluation {
    report: MetricsReport,
    histogram: Option<Vec<Measure<f64>>>,
    notes: Vec<String>,
}

fn evaluate(
    cfg: &RunConfig,
    strain: &StrainImage<f64>,
    truth: Option<&StrainImage<f64>>,
    windows: &WindowSet,
) -> Result<Evaluation, CliError> {
    windows.validate(strain.dim())?;
    let mut notes = Vec::new();
    let mut report = MetricsReport::default();
    let (t0, b0) = (windows.targets.first(), windows.backgrounds.first());
    if let Some(b) = b0 {
        report.snr = Some(metrics::snr(strain, b)?);
    }
    if let (Some(t), Some(b)) = (t0, b0) {
        report.cnr = Some(metrics::cnr(strain, t, b)?);
        match metrics::strain_ratio(strain, t, b) {
            Ok(v) => report.strain_ratio = Some(v),
            Err(e) => notes.push(format!("sr omitted: {e}")),
        }
    }
    if let Some(truth) = truth {
        report.rmse = Some(metrics::rmse(strain, truth)?);
        match metrics::mssim(strain, truth, &SsimConfig::default()) {
            Ok(v) => report.mssim = Some(v),
            Err(e) => notes.push(format!("mssim omitted: {e}")),
        }
    }
    let histogram = if windows.targets.is_empty() || windows.backgrounds.is_empty() {
        None
    } else {
        let h = cnr_histogram(strain, &windows.targets, &windows.backgrounds)?;
        report.cnr_histogram_mean = histogram_mean(&h);
        Some(h)
    };
    if let Some((start, end)) = cfg.esf_line()? {
        report.esf_width = Some(metrics::esf(strain, start, end, cfg.esf_samples()?)?.width_10_90);
    }
    Ok(Evaluation { report, histogram, notes })
}

fn load_strain(m: &mut Manifest, path: &Path, kernel: usize) -> Result<StrainImage<f64>, CliError> {
    Ok(StrainImage::new(load(m, path)?.values, kernel))
}

/// Quality metrics for one strain raster.
pub fn cmd_metrics(cfg: &RunConfig, strain: &Path, truth: Option<&Path>, windows: &Path) -> Result<Manifest, CliError> {
    run_command("metrics", cfg, |m, out| {
        let kernel = cfg.kernel()?;
        let s = load_strain(m, strain, kernel)?;
        let t = truth.map(|p| load_strain(m, p, kernel)).transpose()?;
        m.add_input(windows)?;
        let set = WindowSet::load(windows)?;
        if let Some((r, c)) = cfg.histogram()? {
            if set.targets.len() != r || set.backgrounds.len() != c {
                return Err(CliError::Invalid(format!(
                    "--histogram {r}x{c} needs {r} target and {c} background windows, found {} and {}",
                    set.targets.len(),
                    set.backgrounds.len()
                )));
            }
        }
        let eval = m.time("metrics", || evaluate(cfg, &s, t.as_ref(), &set))?;
        save_text(m, out.join("metrics.csv"), &eval.report.to_csv())?;
        save_text(m, out.join("metrics.txt"), &eval.report.to_text())?;
        if let (Some(_), Some(h)) = (cfg.histogram()?, &eval.histogram) {
            let mut csv = String::from("cnr\n");
            h.iter().for_each(|v| csv.push_str(&format!("{v}\n")));
            save_text(m, out.join("histogram.csv"), &csv)?;
        }
        m.detail("report", &eval.report);
        m.detail("notes", &eval.notes);
        Ok(())
    })
}

/// Header of the consolidated comparison table.
pub const COMPARE_HEADER: &str = "mode,kernel,snr,cnr,sr,rmse,mssim,cnr_hist_mean,esf_width,ttest_p";

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    }
}

/// Both solver modes over a kernel sweep, scored against ground truth.
pub fn cmd_compare(cfg: &RunConfig, pre: &Path, post: &Path, truth: &Path, windows: &Path) -> Result<Manifest, CliError> {
    run_command("compare", cfg, |m, out| {
        let (f1, f2) = load_frames(m, pre, post)?;
        let kernels = cfg.kernels()?;
        let truth_img = load_strain(m, truth, kernels[0])?;
        if truth_img.dim() != f1.dim() {
            return Err(CliError::Invalid("truth raster does not match the frames".into()));
        }
        m.add_input(windows)?;
        let set = WindowSet::load(windows)?;
        set.validate(f1.dim())?;
        let seed_params = cfg.seed_params()?;
        let seed = m.time("seed", || dp_seed(&f1, &f2, &seed_params))?;

        let modes = [SolverMode::Altruist, SolverMode::L2Baseline];
        let solvers = modes.map(|mode| cfg.solver_config().map(|c| c.with_mode(mode)));
        let start = std::time::Instant::now();
        let estimates: Vec<Result<Estimate<f64>, altruist::Error>> = std::thread::scope(|s| {
            let handles: Vec<_> = solvers
                .iter()
                .map(|c| {
                    let (f1, f2, seed) = (&f1, &f2, &seed);
                    s.spawn(move || match c {
                        Ok(c) => admm::run(f1, f2, seed, c),
                        Err(e) => Err(altruist::Error::InvalidArgument(e.to_string())),
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
        });
        m.timings_ms.insert("admm".into(), start.elapsed().as_secs_f64() * 1e3);
        let estimates: Vec<Estimate<f64>> = estimates.into_iter().collect::<Result<_, _>>()?;

        let display = cfg.display_range()?.or_else(|| value_range(truth_img.values()));
        write_png(&out.join("preview_truth.png"), &to_gray(truth_img.values(), display))?;
        m.add_output(&out.join("preview_truth.png"));

        let mut table = format!("{COMPARE_HEADER}\n");
        let mut ratios = Vec::new();
        for &k in &kernels {
            let mut evals = Vec::new();
            for (mode, est) in modes.iter().zip(&estimates) {
                let strain = m.time("strain", || strain_from_displacement(&est.displacement, k))?;
                let eval = m.time("metrics", || evaluate(cfg, &strain, Some(&truth_img), &set))?;
                let stem = format!("{mode}_k{k}");
                save_raster(m, out.join(format!("strain_{stem}.raw")), strain.values(), Some(f1.meta()))?;
                let png = out.join(format!("preview_{stem}.png"));
                write_png(&png, &to_gray(strain.values(), display))?;
                m.add_output(&png);
                evals.push(eval);
            }
            let p_value = match (&evals[0].histogram, &evals[1].histogram) {
                (Some(a), Some(b)) => {
                    let (x, y): (Vec<f64>, Vec<f64>) =
                        a.iter().zip(b).filter_map(|(a, b)| Some((a.value()?, b.value()?))).unzip();
                    paired_ttest(&x, &y).ok().map(|t| t.p_value)
                }
                _ => None,
            };
            for (mode, e) in modes.iter().zip(&evals) {
                let r = &e.report;
                table.push_str(&format!(
                    "{mode},{k},{},{},{},{},{},{},{},{}\n",
                    measure_str(r.snr),
                    measure_str(r.cnr),
                    opt_str(r.strain_ratio),
                    opt_str(r.rmse),
                    opt_str(r.mssim),
                    opt_str(r.cnr_histogram_mean),
                    measure_str(r.esf_width),
                    opt_str(p_value),
                ));
            }
            let (a, b) = (&evals[0].report, &evals[1].report);
            ratios.push(serde_json::json!({
                "kernel": k,
                "cnr_ratio": ratio(a.cnr.and_then(Measure::value), b.cnr.and_then(Measure::value)),
                "cnr_hist_ratio": ratio(a.cnr_histogram_mean, b.cnr_histogram_mean),
                "esf_width_ratio": ratio(a.esf_width.and_then(Measure::value), b.esf_width.and_then(Measure::value)),
                "rmse_ratio": ratio(a.rmse, b.rmse),
                "ttest_p": p_value,
            }));
        }
        save_text(m, out.join("compare.csv"), &table)?;
        m.detail("ratios", ratios);
        m.detail("iterations", estimates.iter().map(|e| e.trace.len()).collect::<Vec<_>>());
        Ok(())
    })
}
