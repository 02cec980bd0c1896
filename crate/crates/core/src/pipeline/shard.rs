//! Binary shard files.
//!
//! A shard is a sequence of records. Each record, little-endian:
//!
//! | field          | type                                   |
//! |----------------|----------------------------------------|
//! | magic          | `b"SMLS"`                              |
//! | version        | `u16` (= 1)                            |
//! | header length  | `u32`                                  |
//! | header         | JSON [`SampleHeader`]                  |
//! | unmasked       | `f32 x (N - masked_count) x block_len` |
//! | masked indices | `u32 x masked_count`                   |
//! | targets        | `f32 x masked_count x target_dim`      |
//! | checksum       | `u64` XXH64 (seed 0) of all bytes above |
//!
//! `manifest.json` lists shards, their record offsets, the generating
//! config and its hash.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use crate::error::{Error, Result};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::sample::{SampleHeader, TrainingSample};
use crate::tokenizer::FLATTENING_ORDER;

pub const RECORD_MAGIC: &[u8; 4] = b"SMLS";
pub const RECORD_VERSION: u16 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const PREFIX_LEN: usize = 4 + 2 + 4;

pub fn encode_record(sample: &TrainingSample) -> Result<Vec<u8>> {
    let h = &sample.header;
    let expect = |what: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(Error::Shape(format!("sample {}: {what} has {got} values, header implies {want}", h.sample_id)))
        }
    };
    expect("masked", sample.masked.len(), h.masked_count)?;
    expect("unmasked", sample.unmasked.len(), h.unmasked_count() * h.block_len())?;
    expect("targets", sample.targets.len(), h.masked_count * h.target_dim)?;

    let header = serde_json::to_vec(h)?;
    let payload = 4 * (sample.unmasked.len() + sample.masked.len() + sample.targets.len());
    let mut buf = Vec::with_capacity(PREFIX_LEN + header.len() + payload + 8);
    buf.extend_from_slice(RECORD_MAGIC);
    buf.extend_from_slice(&RECORD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in &sample.unmasked {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for i in &sample.masked {
        buf.extend_from_slice(&i.to_le_bytes());
    }
    for v in &sample.targets {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let checksum = xxh64(&buf, 0);
    buf.extend_from_slice(&checksum.to_le_bytes());
    Ok(buf)
}

/// Decodes the record at the start of `bytes`; returns it and its length.
pub fn decode_record(bytes: &[u8], record: usize) -> Result<(TrainingSample, usize)> {
    let corrupt = |reason: String| Error::Corrupt { record, reason };
    if bytes.len() < PREFIX_LEN {
        return Err(corrupt(format!("truncated prefix ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != RECORD_MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != RECORD_VERSION {
        return Err(Error::Version { found: version.into(), expected: RECORD_VERSION.into() });
    }
    let header_len = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let header_end = PREFIX_LEN + header_len;
    if bytes.len() < header_end {
        return Err(corrupt("truncated header".into()));
    }
    let header: SampleHeader =
        serde_json::from_slice(&bytes[PREFIX_LEN..header_end]).map_err(|e| corrupt(format!("header: {e}")))?;
    let n_unmasked = header
        .token_count
        .checked_sub(header.masked_count)
        .ok_or_else(|| corrupt("masked count exceeds token count".into()))?
        * header.block_len();
    let n_masked = header.masked_count;
    let n_targets = header.masked_count * header.target_dim;
    let body_end = header_end + 4 * (n_unmasked + n_masked + n_targets);
    let total = body_end + 8;
    if bytes.len() < total {
        return Err(corrupt(format!("truncated record: need {total} bytes, have {}", bytes.len())));
    }
    let stored = u64::from_le_bytes(bytes[body_end..total].try_into().expect("8 bytes"));
    if stored != xxh64(&bytes[..body_end], 0) {
        return Err(corrupt("checksum mismatch".into()));
    }

    let words = |start: usize, count: usize| bytes[start..start + 4 * count].chunks_exact(4).map(|b| <[u8; 4]>::try_from(b).expect("4 bytes"));
    let unmasked = words(header_end, n_unmasked).map(f32::from_le_bytes).collect();
    let masked_at = header_end + 4 * n_unmasked;
    let masked = words(masked_at, n_masked).map(u32::from_le_bytes).collect();
    let targets = words(masked_at + 4 * n_masked, n_targets).map(f32::from_le_bytes).collect();
    Ok((TrainingSample { header, unmasked, masked, targets }, total))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub file: String,
    pub samples: usize,
    pub bytes: u64,
    /// Byte offset of each record.
    pub offsets: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShardManifest {
    pub format_version: u32,
    pub record_magic: String,
    pub record_version: u16,
    pub checksum: String,
    pub flattening_order: String,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub effective_epochs: u64,
    pub total_samples: usize,
    pub shards: Vec<ShardEntry>,
}

impl ShardManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let manifest: ShardManifest = serde_json::from_slice(&fs::read(path)?)?;
        if manifest.format_version != MANIFEST_VERSION {
            return Err(Error::Version { found: manifest.format_version, expected: MANIFEST_VERSION });
        }
        if manifest.config_hash != manifest.config.hash() {
            return Err(Error::Corrupt { record: 0, reason: "manifest config hash does not match its config".into() });
        }
        let counted: usize = manifest.shards.iter().map(|s| s.samples).sum();
        if counted != manifest.total_samples || manifest.shards.iter().any(|s| s.offsets.len() != s.samples) {
            return Err(Error::Corrupt { record: 0, reason: "manifest sample counts are inconsistent".into() });
        }
        Ok(manifest)
    }
}

/// Streams samples into fixed-size shard files inside one directory.
pub struct ShardWriter {
    dir: PathBuf,
    shard_size: usize,
    current: Option<(BufWriter<fs::File>, ShardEntry)>,
    done: Vec<ShardEntry>,
}

impl ShardWriter {
    pub fn create(dir: &Path, shard_size: usize) -> Result<Self> {
        if shard_size == 0 {
            return Err(Error::Config("shard size must be positive".into()));
        }
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), shard_size, current: None, done: Vec::new() })
    }

    pub fn push(&mut self, sample: &TrainingSample) -> Result<()> {
        let record = encode_record(sample)?;
        if self.current.is_none() {
            let name = format!("shard-{:05}.smls", self.done.len());
            let file = BufWriter::new(fs::File::create(self.dir.join(&name))?);
            self.current = Some((file, ShardEntry { file: name, samples: 0, bytes: 0, offsets: Vec::new() }));
        }
        let (file, entry) = self.current.as_mut().expect("shard opened above");
        file.write_all(&record)?;
        entry.offsets.push(entry.bytes);
        entry.bytes += record.len() as u64;
        entry.samples += 1;
        if entry.samples == self.shard_size {
            self.close_current()?;
        }
        Ok(())
    }

    fn close_current(&mut self) -> Result<()> {
        if let Some((mut file, entry)) = self.current.take() {
            file.flush()?;
            self.done.push(entry);
        }
        Ok(())
    }

    /// Closes the open shard and writes `manifest.json`.
    pub fn finish(mut self, config: &PipelineConfig, effective_epochs: u64) -> Result<ShardManifest> {
        self.close_current()?;
        let manifest = ShardManifest {
            format_version: MANIFEST_VERSION,
            record_magic: String::from_utf8_lossy(RECORD_MAGIC).into_owned(),
            record_version: RECORD_VERSION,
            checksum: "xxh64".into(),
            flattening_order: FLATTENING_ORDER.into(),
            config_hash: config.hash(),
            config: config.clone(),
            effective_epochs,
            total_samples: self.done.iter().map(|s| s.samples).sum(),
            shards: std::mem::take(&mut self.done),
        };
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        fs::write(self.dir.join(MANIFEST_FILE), json)?;
        Ok(manifest)
    }
}

pub fn write_shards<I>(samples: I, dir: &Path, shard_size: usize, config: &PipelineConfig, effective_epochs: u64) -> Result<ShardManifest>
where
    I: IntoIterator<Item = TrainingSample>,
{
    let mut writer = ShardWriter::create(dir, shard_size)?;
    for s in samples {
        writer.push(&s)?;
    }
    writer.finish(config, effective_epochs)
}

/// Iterates every record of every shard in manifest order. Record indices in
/// errors are global across shards.
pub struct ShardReader {
    dir: PathBuf,
    shards: std::vec::IntoIter<ShardEntry>,
    buffer: Vec<u8>,
    cursor: usize,
    remaining: usize,
    record: usize,
    failed: bool,
}

impl Iterator for ShardReader {
    type Item = Result<TrainingSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        while self.remaining == 0 {
            let entry = self.shards.next()?;
            // size mismatches surface as a decode error on the damaged record
            match fs::read(self.dir.join(&entry.file)) {
                Ok(bytes) => {
                    self.buffer = bytes;
                    self.cursor = 0;
                    self.remaining = entry.samples;
                }
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            }
        }
        match decode_record(&self.buffer[self.cursor..], self.record) {
            Ok((sample, used)) => {
                self.cursor += used;
                self.remaining -= 1;
                self.record += 1;
                if self.remaining == 0 && self.cursor != self.buffer.len() {
                    self.failed = true;
                    return Some(Err(Error::Corrupt {
                        record: self.record - 1,
                        reason: format!("{} trailing bytes after the last record", self.buffer.len() - self.cursor),
                    }));
                }
                Some(Ok(sample))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

pub fn read_shards(manifest: &ShardManifest, dir: &Path) -> ShardReader {
    ShardReader {
        dir: dir.to_path_buf(),
        shards: manifest.shards.clone().into_iter(),
        buffer: Vec::new(),
        cursor: 0,
        remaining: 0,
        record: 0,
        failed: false,
    }
}

/// Loads `dir/manifest.json` and returns a reader over its shards.
pub fn open_shards(dir: &Path) -> Result<(ShardManifest, ShardReader)> {
    let manifest = ShardManifest::load(&dir.join(MANIFEST_FILE))?;
    let reader = read_shards(&manifest, dir);
    Ok((manifest, reader))
}
