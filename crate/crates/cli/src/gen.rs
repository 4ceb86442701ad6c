use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ssop_dynsys::{
    gen_deeponet_horizon, gen_forced_system, gen_izhikevich, gen_lorenz_ivp, gen_pk_only,
    gen_pkpd, ForcingSpec, ScheduleSpace, Split, TrajectoryDataset,
};

use crate::artifacts::{atomic_write, guard_overwrite, write_dataset_atomic};
use crate::config::{ExperimentConfig, SystemChoice};
use crate::error::{CliError, Result};

/// The dataset files `gen` produces for this config, in write order.
pub fn dataset_files(cfg: &ExperimentConfig) -> Vec<&'static str> {
    match cfg.system {
        SystemChoice::Forced(_) => vec!["train.ds", "val.ds", "test.ds"],
        _ => vec!["train.ds", "test.ds"],
    }
}

fn forcing_spec(cfg: &ExperimentConfig, split: Split) -> Result<ForcingSpec> {
    match cfg.forcing.as_str() {
        "ood" => Ok(ForcingSpec::ood(split)),
        "long_time" => Ok(ForcingSpec::long_time(split)),
        other => Err(CliError::Usage(format!(
            "system.forcing must be `ood` or `long_time`, got `{other}`"
        ))),
    }
}

fn generate(cfg: &ExperimentConfig) -> Result<Vec<(&'static str, TrajectoryDataset)>> {
    Ok(match &cfg.system {
        SystemChoice::Driven(kind) => {
            let train = gen_deeponet_horizon(kind, cfg.n_train, cfg.length_scale, cfg.horizon, cfg.seed)?;
            let test =
                gen_deeponet_horizon(kind, cfg.n_test, cfg.length_scale, cfg.horizon, cfg.seed + 1)?;
            vec![("train.ds", train), ("test.ds", test)]
        }
        SystemChoice::Izhikevich => {
            let full = gen_izhikevich(cfg.n_train, cfg.n_test, cfg.seed)?;
            let train = full.subset(0..cfg.n_train)?;
            let test = full.subset(cfg.n_train..cfg.n_train + cfg.n_test)?;
            vec![("train.ds", train), ("test.ds", test)]
        }
        SystemChoice::Forced(kind) => {
            let mut out = Vec::with_capacity(3);
            for (file, split) in [
                ("train.ds", Split::Train),
                ("val.ds", Split::Validation),
                ("test.ds", Split::Test),
            ] {
                let spec = forcing_spec(cfg, split)?;
                out.push((file, gen_forced_system(kind, &spec, split, cfg.seq_len)?));
            }
            out
        }
        SystemChoice::LorenzIvp => {
            let horizon = cfg.horizon as f64;
            let train = gen_lorenz_ivp(cfg.n_train, horizon, cfg.seed)?;
            let test = gen_lorenz_ivp(cfg.n_test, horizon, cfg.seed + 1)?;
            vec![("train.ds", train), ("test.ds", test)]
        }
        SystemChoice::Pkpd => {
            let space = ScheduleSpace::default();
            let train = gen_pkpd(cfg.n_train, cfg.seed, &space)?;
            let test = gen_pkpd(cfg.n_test, cfg.seed + 1, &space)?;
            vec![("train.ds", train), ("test.ds", test)]
        }
        SystemChoice::PkOnly => {
            let space = ScheduleSpace::default();
            let train = gen_pk_only(cfg.n_train, cfg.seed, &space)?;
            let test = gen_pk_only(cfg.n_test, cfg.seed + 1, &space)?;
            vec![("train.ds", train), ("test.ds", test)]
        }
    })
}

pub fn render_manifest(cfg: &ExperimentConfig, files: &[&str]) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "config_hash = {:016x}", cfg.hash());
    let _ = writeln!(text, "seed = {}", cfg.seed);
    let _ = writeln!(text, "files = {}", files.join(","));
    for (k, v) in &cfg.raw {
        let _ = writeln!(text, "{k} = {v}");
    }
    text
}

/// Generates the datasets a config asks for, plus a manifest recording the
/// seed and the config fingerprint. Existing files abort unless forced.
pub fn cmd_gen(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<Vec<PathBuf>> {
    let files = dataset_files(cfg);
    let manifest = out.join("manifest.txt");
    guard_overwrite(&manifest, force)?;
    for file in &files {
        guard_overwrite(&out.join(file), force)?;
    }
    let mut written = Vec::new();
    for (file, ds) in generate(cfg)? {
        let path = out.join(file);
        write_dataset_atomic(&ds, &path)?;
        written.push(path);
    }
    atomic_write(&manifest, render_manifest(cfg, &files).as_bytes())?;
    written.push(manifest);
    Ok(written)
}
