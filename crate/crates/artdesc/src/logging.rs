//! Line-delimited JSON log records on stderr.

use std::io::Write;
use std::sync::Mutex;

use log::{LevelFilter, Log, Metadata, Record};
use serde::Serialize;

#[derive(Serialize)]
struct Line<'a> {
    level: &'a str,
    target: &'a str,
    msg: String,
}

/// Formats one record as a JSON object without a trailing newline.
pub fn format_record(record: &Record<'_>) -> String {
    let line = Line {
        level: record.level().as_str(),
        target: record.target(),
        msg: record.args().to_string(),
    };
    serde_json::to_string(&line).expect("serializable")
}

struct JsonLogger {
    level: LevelFilter,
    out: Mutex<std::io::Stderr>,
}

impl Log for JsonLogger {
    fn enabled(&self, metadata: &Metadata<'_>) -> bool {
        metadata.level() <= self.level
    }

    fn log(&self, record: &Record<'_>) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let line = format_record(record);
        if let Ok(mut out) = self.out.lock() {
            let _ = writeln!(out, "{line}");
        }
    }

    fn flush(&self) {
        if let Ok(mut out) = self.out.lock() {
            let _ = out.flush();
        }
    }
}

/// Installs the logger once; later calls only adjust the level.
pub fn init(level: LevelFilter) {
    let logger = Box::new(JsonLogger {
        level: LevelFilter::Trace,
        out: Mutex::new(std::io::stderr()),
    });
    let _ = log::set_boxed_logger(logger);
    log::set_max_level(level);
}
