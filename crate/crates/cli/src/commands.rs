use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use motion_prep::masking::Provenance;
use motion_prep::pipeline::stats::audit;
use motion_prep::pipeline::{
    build_sample_with_artifacts, generate, resolve_workers, work_items, ClipSource, PipelineConfig,
    SampleEnv, SampleRequest, Variant,
};
use motion_prep::preview::write_preview;
use motion_prep::{Error, Result};
use serde_json::json;

use crate::args::VariantArg;
use crate::log::Logger;

fn prepare(cfg: PipelineConfig, log: &Logger) -> Result<(SampleEnv, ClipSource)> {
    log.debug("config", json!({ "hash": cfg.hash(), "config": &cfg }));
    let source = ClipSource::from_config(&cfg)?;
    let env = SampleEnv::new(cfg)?;
    Ok((env, source))
}

pub fn gen(cfg: PipelineConfig, out: &Path, shard_size: usize, workers: Option<usize>, log: &Logger) -> Result<()> {
    if shard_size == 0 {
        return Err(Error::Config("shard size must be positive".into()));
    }
    let (env, source) = prepare(cfg, log)?;
    let workers = resolve_workers(workers);
    let started = Instant::now();
    log.info(
        "gen.start",
        json!({
            "out": out.display().to_string(),
            "videos": source.len(),
            "epochs": env.config.schedule.epochs,
            "samples_per_video": env.config.samples_per_video,
            "workers": workers,
            "config_hash": env.config.hash(),
        }),
    );
    let manifest = generate(&env, &source, out, shard_size, workers)?;
    for shard in &manifest.shards {
        log.debug("gen.shard", json!({ "file": shard.file, "samples": shard.samples, "bytes": shard.bytes }));
    }
    log.info(
        "gen.done",
        json!({
            "samples": manifest.total_samples,
            "shards": manifest.shards.len(),
            "effective_epochs": manifest.effective_epochs,
            "seconds": started.elapsed().as_secs_f64(),
        }),
    );
    Ok(())
}

pub fn mask(cfg: PipelineConfig, count: usize, out: Option<&Path>, log: &Logger) -> Result<()> {
    let (env, source) = prepare(cfg, log)?;
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut written = 0;
    for item in work_items(&env.config, &source).take(count) {
        let clip = source.load(item.video)?;
        let (sample, art) = build_sample_with_artifacts(&env, &clip, &item.request)?;
        let line = json!({
            "sample_id": sample.header.sample_id,
            "mask_kind": sample.header.mask_kind,
            "token_count": art.mask.token_count,
            "masked_count": art.mask.masked.len(),
            "ratio": art.mask.ratio(),
            "trajectory_count": art.mask.count(Provenance::Trajectory),
            "tube_count": art.mask.count(Provenance::Tube),
            "masked": art.mask.masked,
            "trajectory": sample.header.trajectory_indices,
        });
        writeln!(sink, "{line}")?;
        written += 1;
    }
    sink.flush()?;
    log.info("mask.done", json!({ "samples": written }));
    Ok(())
}

/// Prints the audit; returns whether every sample passed.
pub fn stats(dir: &Path, log: &Logger) -> Result<bool> {
    let report = audit(dir)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
    stdout.flush()?;
    if !report.ok() {
        for v in &report.violations {
            log.error("stats.violation", json!({ "detail": v }));
        }
        return Ok(false);
    }
    log.info("stats.done", json!({ "samples": report.total_samples, "effective_epochs": report.effective_epochs }));
    Ok(true)
}

pub fn preview(
    cfg: PipelineConfig,
    out: &Path,
    video: usize,
    epoch: u32,
    sample_index: u32,
    variant: VariantArg,
    log: &Logger,
) -> Result<()> {
    let (env, source) = prepare(cfg, log)?;
    if video >= source.len() {
        return Err(Error::OutOfRange { index: video, len: source.len() });
    }
    let variant = match variant {
        VariantArg::Augmented => Variant::Augmented,
        VariantArg::Original => Variant::Original,
    };
    let clip = source.load(video)?;
    let req = SampleRequest { epoch, sample_index, variant, pair: None };
    let (sample, art) = build_sample_with_artifacts(&env, &clip, &req)?;
    let files = write_preview(&art.clip, &art.mask, &env.config.geometry, out)?;
    log.info(
        "preview.done",
        json!({
            "sample_id": sample.header.sample_id,
            "files": files.len(),
            "masked": art.mask.masked.len(),
            "trajectory": art.mask.count(Provenance::Trajectory),
        }),
    );
    Ok(())
}
