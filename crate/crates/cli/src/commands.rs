//! The `estimate`, `warp`, `synth` and `bench` commands.

use std::fs;
use std::path::{Path, PathBuf};

use ffdga::ffd::ControlLattice;
use ffdga::fitness::warp;
use ffdga::io::{lattice_from_json, lattice_to_json, write_landmarks};
use ffdga::pbo::write_log_csv;
use ffdga::pyramid::{run_coarse_to_fine, CoarseToFine, PyramidSchedule};
use ffdga::synth::{generate_case, render_overlay, run_benchmark, texture, write_diversity_csv, BenchReport};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::imageio::{load_gray, save_gray, save_rgb};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))
}

fn create(path: PathBuf) -> Result<fs::File> {
    fs::File::create(&path).map_err(|e| CliError::io(path.display(), e))
}

fn write_level_logs(out: &Path, prefix: &str, run: &CoarseToFine) -> Result<()> {
    for (n, level) in run.levels.iter().enumerate() {
        write_log_csv(create(out.join(format!("{prefix}level{n}.csv")))?, &level.log)?;
    }
    Ok(())
}

/// Estimates the deformation taking `source` onto `target`. Writes
/// `lattice.json`, `warped.png` and `level<n>.csv` into `out`.
pub fn estimate(source: &Path, target: &Path, cfg: &RunConfig, out: &Path) -> Result<CoarseToFine> {
    cfg.validate()?;
    let src = load_gray(source)?;
    let tgt = load_gray(target)?;
    if (src.width(), src.height()) != (tgt.width(), tgt.height()) {
        return Err(CliError::Usage(format!(
            "source is {}x{} but target is {}x{}",
            src.width(),
            src.height(),
            tgt.width(),
            tgt.height()
        )));
    }
    let sched = PyramidSchedule::new(
        src.width(),
        src.height(),
        cfg.levels,
        cfg.base_k,
        cfg.base_l,
        cfg.g_size,
        cfg.population,
    )?;
    let optimizer = ffdga::pyramid::Optimizer::Pbo {
        pbo: cfg.pbo(),
        anneal: cfg.anneal(),
    };
    let result = run_coarse_to_fine(&src, &tgt, &sched, &optimizer, &cfg.encoding(), cfg.seed)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let warped = warp(&src, &result.lattice)?;

    create_dir(out)?;
    write(out.join("lattice.json"), lattice_to_json(&result.lattice))?;
    save_gray(&out.join("warped.png"), &warped)?;
    write_level_logs(out, "", &result)?;
    Ok(result)
}

pub fn read_lattice(path: &Path) -> Result<ControlLattice> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    lattice_from_json(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Warps `source` by the lattice in `lattice`; writes `warped.png`.
pub fn warp_cmd(source: &Path, lattice: &Path, out: &Path) -> Result<PathBuf> {
    let src = load_gray(source)?;
    let lat = read_lattice(lattice)?;
    let warped = warp(&src, &lat)?;
    create_dir(out)?;
    let path = out.join("warped.png");
    save_gray(&path, &warped)?;
    Ok(path)
}

/// Writes one synthetic case: `source.png`, `target.png`,
/// `gt_lattice.json` and `landmarks.csv`. Without an input image a
/// procedural texture of `image_size` pixels is used.
pub fn synth(image: Option<&Path>, cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let img = match image {
        Some(p) => load_gray(p)?,
        None => texture(cfg.seed, cfg.image_size, cfg.image_size)?,
    };
    let case = generate_case(cfg.seed, 0, &img, cfg.gt_k, cfg.gt_l, cfg.gt_radius)?;
    create_dir(out)?;
    save_gray(&out.join("source.png"), &case.source)?;
    save_gray(&out.join("target.png"), &case.target)?;
    write(out.join("gt_lattice.json"), lattice_to_json(&case.gt_lattice))?;
    write_landmarks(create(out.join("landmarks.csv"))?, &case.landmarks)?;
    Ok(())
}

/// Runs the synthetic benchmark and writes `report.csv`, `timings.csv`,
/// `diversity_<id>.csv`, `overlay_<id>.png` and per-level GA logs.
pub fn bench(cfg: &RunConfig, out: &Path) -> Result<BenchReport> {
    cfg.validate()?;
    let report = run_benchmark(&cfg.bench())?;
    create_dir(out)?;
    report.write_csv(create(out.join("report.csv"))?)?;
    report.write_timings_csv(create(out.join("timings.csv"))?)?;
    for o in report.successes() {
        let id = o.case.case_id;
        write_diversity_csv(create(out.join(format!("diversity_{id}.csv")))?, o)?;
        let (w, h, rgb) = render_overlay(o);
        save_rgb(&out.join(format!("overlay_{id}.png")), w, h, &rgb)?;
        write_level_logs(out, &format!("pbo_case{id}_"), &o.pbo)?;
        write_level_logs(out, &format!("baseline_case{id}_"), &o.baseline)?;
    }
    Ok(report)
}
