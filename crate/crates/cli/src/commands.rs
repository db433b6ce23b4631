//! The five experiment commands. Each validates its inputs, runs the
//! computation through the deterministic seed-splitting machinery, writes
//! digest-stamped result files under `out_dir/<command>/`, prints a one-line
//! verdict, and reports whether its assertions passed (exit 0) or failed
//! (exit 1). Configuration and input problems surface as errors (exit 2).

use std::path::PathBuf;

use rand::Rng;

use stablelab_core::error::Error as CoreError;
use stablelab_core::kernel::kernel_rescale;
use stablelab_core::limits::{orthant_probs_all, LimitKernelLaw};
use stablelab_core::network::{forward_bounded, forward_rescaled, init_weights, InputSet};
use stablelab_core::report::{write_kv, write_table};
use stablelab_core::rng::stream_rng;
use stablelab_core::training::{per_step_decay_holds, train, EtaMode, TrainConfig};
use stablelab_core::verify::{
    calibrate_prefactor, grid_1d, grid_2d, kernel_limit_sweep, limit_process_sweep,
    min_eigenvalue_quantiles,
};

use crate::config::{ExperimentConfig, InvalidInput, Result, TargetSpec};
use crate::svg::heatmap_svg;

/// CF evaluation grid for a k-dimensional output law: the committed 1-d and
/// 2-d grids, and an axes grid (the 1-d points embedded along each
/// coordinate axis) for larger k, keeping the point count linear in k.
fn cf_grid(k: usize) -> Vec<Vec<f64>> {
    match k {
        1 => grid_1d(),
        2 => grid_2d(),
        _ => {
            let axis = grid_1d();
            let mut grid = Vec::with_capacity(axis.len() * k);
            for coord in 0..k {
                for point in &axis {
                    let mut v = vec![0.0; k];
                    v[coord] = point[0];
                    grid.push(v);
                }
            }
            grid
        }
    }
}

fn command_dir(cfg: &ExperimentConfig, command: &str) -> PathBuf {
    cfg.out_dir.join(command)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Width sweep of the rescaled output law against its limiting law.
/// Passes iff the sup CF distance trends downward across widths.
pub fn cmd_limit_dist(cfg: &ExperimentConfig) -> Result<bool> {
    let section = &cfg.limit_dist;
    let inputs = section.inputs.realize(cfg.master_seed, "limit-dist/inputs")?;
    let grid = cf_grid(inputs.num_inputs());
    let sweep = limit_process_sweep(
        &inputs,
        section.alpha,
        &section.widths,
        section.n_samples,
        &grid,
        cfg.master_seed,
        cfg.workers,
    )?;

    let dir = command_dir(cfg, "limit-dist");
    let digest = cfg.digest();
    write_table(&dir, "sweep", &digest, &sweep.sweep.to_table())?;
    for (report, &m) in sweep.reports.iter().zip(section.widths.iter()) {
        write_table(&dir, &format!("ecf_m{m}"), &digest, &report.to_table())?;
    }
    let pass = sweep.sweep.is_decreasing();
    let mut summary = vec![
        ("alpha".to_string(), format!("{}", section.alpha)),
        ("widths".to_string(), format!("{:?}", section.widths)),
        ("n_samples".to_string(), format!("{}", section.n_samples)),
    ];
    for (m, stat) in section.widths.iter().zip(sweep.sweep.stats()) {
        summary.push((format!("sup_distance_m{m}"), format!("{stat}")));
    }
    summary.push((
        "slope_log_width".to_string(),
        format!("{}", sweep.sweep.slope_log_width()),
    ));
    summary.push(("decreasing".to_string(), format!("{pass}")));
    write_kv(&dir, "summary", &digest, &summary)?;

    println!(
        "{} limit-dist: sup distances {:?}, slope {:.4} ({})",
        verdict(pass),
        sweep.sweep.stats(),
        sweep.sweep.slope_log_width(),
        dir.display()
    );
    Ok(pass)
}

/// Kernel width sweep against the limiting kernel law under the calibrated
/// prefactor convention, plus minimum-eigenvalue quantiles. Passes iff the
/// calibration is conclusive, the KS trend is downward, and the 5% quantile
/// of the minimum eigenvalue is positive.
pub fn cmd_ntk_limit(cfg: &ExperimentConfig) -> Result<bool> {
    let section = &cfg.ntk_limit;
    let inputs = section.inputs.realize(cfg.master_seed, "ntk-limit/inputs")?;
    let dir = command_dir(cfg, "ntk-limit");
    let digest = cfg.digest();

    let calibration = calibrate_prefactor(
        &inputs,
        section.alpha,
        section.calibration_width,
        section.calibration_samples,
        cfg.master_seed,
        cfg.workers,
    )?;
    write_kv(&dir, "calibration", &digest, &calibration.to_kv())?;
    println!(
        "calibration: selected {:?} (tail-consistent distance {:.4}, nominal {:.4}, threshold {:.4}{})",
        calibration.selected,
        calibration.distance_tail_consistent,
        calibration.distance_nominal,
        calibration.threshold,
        if calibration.inconclusive {
            ", INCONCLUSIVE"
        } else {
            ""
        }
    );

    let mut rng = stream_rng(cfg.master_seed, "ntk-limit/orthants", 0);
    let probs = orthant_probs_all(&inputs, section.alpha, section.orthant_samples, &mut rng)?;
    let law = LimitKernelLaw::new(&inputs, section.alpha, &probs, calibration.selected)?;
    let sweep = kernel_limit_sweep(
        &inputs,
        section.alpha,
        &section.widths,
        section.n_samples,
        &law,
        section.n_limit,
        cfg.master_seed,
        cfg.workers,
    )?;
    write_table(&dir, "kernel_sweep", &digest, &sweep.sweep.to_table())?;
    let k = inputs.num_inputs();
    for (dist, &m) in sweep.entry_distances.iter().zip(section.widths.iter()) {
        let mut body = String::from("i j ks_distance\n");
        for i in 0..k {
            for j in i..k {
                body.push_str(&format!("{i} {j} {}\n", dist[(i, j)]));
            }
        }
        write_table(&dir, &format!("entry_distances_m{m}"), &digest, &body)?;
    }

    let eigen = min_eigenvalue_quantiles(
        &inputs,
        section.alpha,
        section.eigen_width,
        section.eigen_seeds,
        cfg.master_seed,
        cfg.workers,
    )?;
    write_table(&dir, "eigen_quantiles", &digest, &eigen.to_table())?;

    let q05 = eigen.quantile(0.05)?;
    let pass = sweep.sweep.is_decreasing() && q05 > 0.0 && !calibration.inconclusive;
    let summary = vec![
        ("alpha".to_string(), format!("{}", section.alpha)),
        (
            "ks_slope_log_width".to_string(),
            format!("{}", sweep.sweep.slope_log_width()),
        ),
        (
            "ks_decreasing".to_string(),
            format!("{}", sweep.sweep.is_decreasing()),
        ),
        ("eigen_min".to_string(), format!("{}", eigen.min())),
        ("eigen_q05".to_string(), format!("{q05}")),
        (
            "calibration_selected".to_string(),
            format!("{:?}", calibration.selected),
        ),
        ("pass".to_string(), format!("{pass}")),
    ];
    write_kv(&dir, "summary", &digest, &summary)?;

    println!(
        "{} ntk-limit: KS distances {:?}, slope {:.4}, eigen 5% quantile {:.4} ({})",
        verdict(pass),
        sweep.sweep.stats(),
        sweep.sweep.slope_log_width(),
        q05,
        dir.display()
    );
    Ok(pass)
}

/// Trains one batch per seed, emitting a trajectory table and certificate
/// verdict for each. A diverged seed is reported and counted, never fatal.
/// Passes iff no seed diverged and the certified fraction reaches the
/// configured minimum.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<bool> {
    let section = &cfg.train;
    let inputs = section.inputs.realize(cfg.master_seed, "train/inputs")?;
    let k = inputs.num_inputs();
    let d = inputs.input_dim();
    if let TargetSpec::Explicit { values } = &section.targets {
        if values.len() != k {
            return Err(InvalidInput(format!(
                "train.targets: {} values for {k} inputs",
                values.len()
            )));
        }
    }
    let eta_mode = match section.eta {
        Some(eta) => EtaMode::Custom(eta),
        None => EtaMode::KernelRescale,
    };
    let tcfg = TrainConfig::new(section.dt, section.t_max, section.record_every, eta_mode)?;

    let dir = command_dir(cfg, "train");
    let digest = cfg.digest();
    let mut seed_rows = String::from("seed status certified final_over_initial max_weight_drift records\n");
    let (mut completed, mut diverged, mut certified) = (0u64, 0u64, 0u64);
    let mut max_drift_all = 0.0f64;
    for rep in 0..section.seeds {
        let mut rng = stream_rng(cfg.master_seed, "train/init", rep);
        let w0 = init_weights(section.width, d, section.alpha, &mut rng)?;
        let y = match &section.targets {
            TargetSpec::Random => {
                let mut trng = stream_rng(cfg.master_seed, "train/targets", rep);
                (0..k).map(|_| trng.random_range(-1.0..1.0)).collect()
            }
            TargetSpec::Explicit { values } => values.clone(),
            TargetSpec::NetworkOutput => forward_rescaled(&w0, &inputs, section.alpha)?,
        };
        match train(&w0, &inputs, &y, section.alpha, &tcfg) {
            Ok((traj, _)) => {
                write_table(
                    &dir,
                    &format!("trajectory_seed{rep}"),
                    &digest,
                    &traj.table(),
                )?;
                let ok = per_step_decay_holds(&traj);
                let ratio = traj.final_residual_sq() / traj.residual_sq[0].max(f64::MIN_POSITIVE);
                let max_drift = traj.weight_drift.iter().cloned().fold(0.0, f64::max);
                seed_rows.push_str(&format!(
                    "{rep} completed {ok} {ratio} {max_drift} {}\n",
                    traj.len()
                ));
                completed += 1;
                certified += ok as u64;
                max_drift_all = max_drift_all.max(max_drift);
            }
            Err(e @ (CoreError::Diverged { .. } | CoreError::UnstableStep { .. })) => {
                println!("seed {rep}: {e}");
                seed_rows.push_str(&format!("{rep} diverged false nan nan 0\n"));
                diverged += 1;
            }
            Err(other) => return Err(other.into()),
        }
    }
    write_table(&dir, "seed_summary", &digest, &seed_rows)?;

    let certified_fraction = certified as f64 / section.seeds as f64;
    let pass = diverged == 0 && certified_fraction >= section.min_certified_fraction;
    let summary = vec![
        ("alpha".to_string(), format!("{}", section.alpha)),
        ("width".to_string(), format!("{}", section.width)),
        ("seeds".to_string(), format!("{}", section.seeds)),
        ("completed".to_string(), format!("{completed}")),
        ("diverged".to_string(), format!("{diverged}")),
        ("certified".to_string(), format!("{certified}")),
        (
            "certified_fraction".to_string(),
            format!("{certified_fraction}"),
        ),
        (
            "max_weight_drift".to_string(),
            format!("{max_drift_all}"),
        ),
        (
            "weight_drift_bound".to_string(),
            format!("{}", kernel_rescale(section.width, section.alpha)?),
        ),
        ("pass".to_string(), format!("{pass}")),
    ];
    write_kv(&dir, "summary", &digest, &summary)?;

    println!(
        "{} train: {completed}/{} completed, {diverged} diverged, certified fraction {:.2} (need {:.2}) ({})",
        verdict(pass),
        section.seeds,
        certified_fraction,
        section.min_certified_fraction,
        dir.display()
    );
    Ok(pass)
}

/// Renders one bounded-activation surface per stability index over a grid
/// on the unit square at fixed width: a table of values and an SVG heatmap
/// each.
pub fn cmd_paths(cfg: &ExperimentConfig) -> Result<bool> {
    let section = &cfg.paths;
    let g = section.grid_points;
    let coords: Vec<f64> = if g == 1 {
        vec![0.0]
    } else {
        (0..g).map(|i| i as f64 / (g - 1) as f64).collect()
    };
    // Row-major over (y, x): the surface value at (x, y) sits at index
    // row * g + col with y = coords[row], x = coords[col].
    let mut columns = Vec::with_capacity(g * g);
    for &y in &coords {
        for &x in &coords {
            columns.push(vec![x, y]);
        }
    }
    let grid_inputs = InputSet::with_dependent_columns(columns, false)?;

    let dir = command_dir(cfg, "paths");
    let digest = cfg.digest();
    for &alpha in &section.alphas {
        let mut rng = stream_rng(cfg.master_seed, "paths/init", alpha.to_bits());
        let weights = init_weights(section.width, 2, alpha, &mut rng)?;
        let values = forward_bounded(&weights, &grid_inputs, alpha)?;

        let mut body = String::from("x y f\n");
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(g);
        for (r, &y) in coords.iter().enumerate() {
            let mut row = Vec::with_capacity(g);
            for (c, &x) in coords.iter().enumerate() {
                let v = values[r * g + c];
                body.push_str(&format!("{x} {y} {v}\n"));
                row.push(v);
            }
            rows.push(row);
        }
        write_table(&dir, &format!("surface_alpha{alpha}"), &digest, &body)?;

        let title = format!("bounded-activation surface, alpha = {alpha}, m = {}", section.width);
        let svg = heatmap_svg(&title, &rows).replacen(
            ">\n",
            &format!(">\n<!-- config {digest} -->\n"),
            1,
        );
        let path = dir.join(format!("surface_alpha{alpha}.svg"));
        std::fs::write(&path, svg)
            .map_err(|e| InvalidInput(format!("writing {}: {e}", path.display())))?;
    }
    println!(
        "PASS paths: {} surfaces at width {} over a {g}x{g} grid ({})",
        section.alphas.len(),
        section.width,
        dir.display()
    );
    Ok(true)
}

/// Standalone prefactor calibration against finite-width kernel samples.
/// Passes iff the selection is conclusive.
pub fn cmd_calibrate(cfg: &ExperimentConfig) -> Result<bool> {
    let section = &cfg.calibrate;
    let inputs = section.inputs.realize(cfg.master_seed, "calibrate/inputs")?;
    let report = calibrate_prefactor(
        &inputs,
        section.alpha,
        section.width,
        section.n_samples,
        cfg.master_seed,
        cfg.workers,
    )?;
    let dir = command_dir(cfg, "calibrate");
    write_kv(&dir, "calibration", &cfg.digest(), &report.to_kv())?;
    let pass = !report.inconclusive;
    println!(
        "{} calibrate: selected {:?} (tail-consistent {:.4} vs nominal {:.4}, threshold {:.4}) ({})",
        verdict(pass),
        report.selected,
        report.distance_tail_consistent,
        report.distance_nominal,
        report.threshold,
        dir.display()
    );
    Ok(pass)
}
