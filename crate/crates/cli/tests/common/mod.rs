#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use pcdet_cli::config::toy_scene_spec;
use pcdet_cli::ExperimentConfig;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn pcdet(args: &[&str]) -> Run {
    pcdet_env(args, &[])
}

pub fn pcdet_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pcdet"));
    cmd.args(args).env_remove("PCDET_OUT_DIR").env_remove("PCDET_DATA_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Two small synthetic scenes and a shrunken toy detector.
pub fn tiny_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.out = out.to_path_buf();
    cfg.data.scenes = 2;
    cfg.data.synthetic = toy_scene_spec();
    cfg.data.synthetic.total_points = Some(512);
    cfg.sampling.schedule = vec![
        pcdet_core::sampling::LayerSpec::new(pcdet_core::sampling::Strategy::DFps, 256),
        pcdet_core::sampling::LayerSpec::new(pcdet_core::sampling::Strategy::CtrAware, 64),
    ];
    cfg.sampling.k = 64;
    cfg.sampling.runs = 2;
    cfg.detector.layers[0].k = 128;
    cfg.detector.layers[1].k = 64;
    cfg.detector.layers[2].k = 32;
    cfg.train.steps = 4;
    cfg.train.batch = 1;
    cfg.bench.n = 2048;
    cfg.bench.k = 64;
    cfg.bench.fit_ks = vec![32, 64];
    cfg.bench.runs = 2;
    cfg.bench.warmup = 0;
    cfg.bench.boxes = 20;
    cfg
}

pub fn write_config(cfg: &ExperimentConfig, dir: &Path) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path.display().to_string()
}
