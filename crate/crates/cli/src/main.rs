mod args;
mod commands;
mod log;
mod overrides;

use std::process::ExitCode;

use clap::Parser;
use motion_prep::{Error, ErrorClass};
use serde_json::json;

use crate::args::{Cli, Command};
use crate::log::Logger;
use crate::overrides::load_config;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INTEGRITY: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Io => EXIT_IO,
        ErrorClass::Integrity => EXIT_INTEGRITY,
    }
}

fn run(cli: Cli) -> (Logger, motion_prep::Result<bool>) {
    match cli.command {
        Command::Gen { common, out, shard_size, workers } => {
            let log = Logger::new(common.verbose);
            let result = load_config(common.config.as_deref(), &common.overrides, common.seed)
                .and_then(|cfg| commands::gen(cfg, &out, shard_size, workers, &log))
                .map(|()| true);
            (log, result)
        }
        Command::Mask { common, count, out } => {
            let log = Logger::new(common.verbose);
            let result = load_config(common.config.as_deref(), &common.overrides, common.seed)
                .and_then(|cfg| commands::mask(cfg, count, out.as_deref(), &log))
                .map(|()| true);
            (log, result)
        }
        Command::Stats { dir, verbose } => {
            let log = Logger::new(verbose);
            let result = commands::stats(&dir, &log);
            (log, result)
        }
        Command::Preview { common, out, video, epoch, sample_index, variant } => {
            let log = Logger::new(common.verbose);
            let result = load_config(common.config.as_deref(), &common.overrides, common.seed)
                .and_then(|cfg| commands::preview(cfg, &out, video, epoch, sample_index, variant, &log))
                .map(|()| true);
            (log, result)
        }
    }
}

fn main() -> ExitCode {
    let (log, result) = run(Cli::parse());
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_INTEGRITY),
        Err(e) => {
            let code = exit_code(&e);
            log.error("failed", json!({ "error": e.to_string(), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}
