//! Checkpoint files.
//!
//! Layout:
//!
//! ```text
//! CCPN1
//! embed <E>
//! hidden <H>
//! process_rounds <P>
//! step <training steps taken>
//! config <TrainConfig as single-line JSON>
//! block <name> <rows> <cols>      one line per parameter block
//! ...
//! data
//! <little-endian f64 values, blocks in header order, row-major>
//! ```
//!
//! Blocks are the actor's parameters followed by the critic's, each in
//! `ParamSet` order. Adam moments are not stored.

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::ptrnet::{CriticModel, ModelConfig, PtrNetModel};
use crate::rng::RngStream;
use std::fmt::Write as _;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &str = "CCPN1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub actor: PtrNetModel,
    pub critic: CriticModel,
    pub config: TrainConfig,
    pub step: usize,
}

fn ck(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn encode_checkpoint(actor: &PtrNetModel, critic: &CriticModel, config: &TrainConfig, step: usize) -> Result<Vec<u8>> {
    let mut header = String::new();
    let _ = writeln!(header, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(header, "embed {}", actor.config.embed);
    let _ = writeln!(header, "hidden {}", actor.config.hidden);
    let _ = writeln!(header, "process_rounds {}", critic.config.process_rounds);
    let _ = writeln!(header, "step {step}");
    let json = serde_json::to_string(config).map_err(|e| ck(format!("config encoding: {e}")))?;
    let _ = writeln!(header, "config {json}");
    let blocks: Vec<_> = actor.params().into_iter().chain(critic.params()).collect();
    for p in &blocks {
        let _ = writeln!(header, "block {} {} {}", p.name, p.rows, p.cols);
    }
    header.push_str("data\n");
    let mut bytes = header.into_bytes();
    for p in blocks {
        for v in &p.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(bytes)
}

/// Writes through a temporary file and renames it into place.
pub fn save_checkpoint(
    path: &Path,
    actor: &PtrNetModel,
    critic: &CriticModel,
    config: &TrainConfig,
    step: usize,
) -> Result<()> {
    let bytes = encode_checkpoint(actor, critic, config, step)?;
    crate::bench::write_atomic(path, &bytes)
}

struct Header {
    config: TrainConfig,
    step: usize,
    blocks: Vec<(String, usize, usize)>,
    data_offset: usize,
}

fn read_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ck("truncated header"))?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).map_err(|_| ck("header is not UTF-8"))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let magic = read_line(bytes, &mut pos).map_err(|_| ck("missing magic line"))?;
    if magic != CHECKPOINT_MAGIC {
        return Err(ck(format!("unsupported version `{magic}`, expected `{CHECKPOINT_MAGIC}`")));
    }
    let mut config = None;
    let mut step = None;
    let mut dims = (None, None, None);
    let mut blocks = Vec::new();
    loop {
        let line = read_line(bytes, &mut pos)?;
        if line == "data" {
            break;
        }
        let (key, value) = line.split_once(' ').ok_or_else(|| ck(format!("bad header line `{line}`")))?;
        let num = |v: &str| v.parse::<usize>().map_err(|_| ck(format!("bad number in `{line}`")));
        match key {
            "embed" => dims.0 = Some(num(value)?),
            "hidden" => dims.1 = Some(num(value)?),
            "process_rounds" => dims.2 = Some(num(value)?),
            "step" => step = Some(num(value)?),
            "config" => {
                config = Some(serde_json::from_str::<TrainConfig>(value).map_err(|e| ck(format!("config: {e}")))?)
            }
            "block" => {
                let parts: Vec<&str> = value.split(' ').collect();
                let [name, rows, cols] = parts[..] else {
                    return Err(ck(format!("bad block line `{line}`")));
                };
                blocks.push((name.to_string(), num(rows)?, num(cols)?));
            }
            _ => return Err(ck(format!("unknown header key `{key}`"))),
        }
    }
    let mut config = config.ok_or_else(|| ck("missing config"))?;
    let (Some(e), Some(h), Some(p)) = dims else {
        return Err(ck("missing model dimensions"));
    };
    config.model.embed = e;
    config.model.hidden = h;
    config.model.process_rounds = p;
    Ok(Header {
        config,
        step: step.ok_or_else(|| ck("missing step"))?,
        blocks,
        data_offset: pos,
    })
}

fn fill(bytes: &[u8], header: &Header, model_cfg: ModelConfig) -> Result<(PtrNetModel, CriticModel)> {
    let mut rng = RngStream::new(0);
    let mut actor = PtrNetModel::new(model_cfg, &mut rng);
    let mut critic = CriticModel::new(model_cfg, &mut rng);
    let mut params: Vec<_> = actor.params_mut();
    params.extend(critic.params_mut());
    if params.len() != header.blocks.len() {
        return Err(ck(format!(
            "expected {} parameter blocks, file has {}",
            params.len(),
            header.blocks.len()
        )));
    }
    let mut pos = header.data_offset;
    for (p, (name, rows, cols)) in params.into_iter().zip(&header.blocks) {
        if &p.name != name {
            return Err(ck(format!("block order mismatch: expected `{}`, found `{name}`", p.name)));
        }
        if (p.rows, p.cols) != (*rows, *cols) {
            return Err(Error::Shape {
                context: format!("checkpoint block `{name}`"),
                expected: vec![p.rows, p.cols],
                actual: vec![*rows, *cols],
            });
        }
        let need = p.len() * 8;
        let chunk = bytes
            .get(pos..pos + need)
            .ok_or_else(|| ck(format!("truncated data in block `{name}`")))?;
        for (v, b) in p.values.iter_mut().zip(chunk.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
        }
        pos += need;
    }
    if pos != bytes.len() {
        return Err(ck(format!("{} trailing bytes after data", bytes.len() - pos)));
    }
    Ok((actor, critic))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let header = parse_header(bytes)?;
    let (actor, critic) = fill(bytes, &header, header.config.model)?;
    Ok(Checkpoint {
        actor,
        critic,
        config: header.config,
        step: header.step,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}

/// Loads into models built for `expected`; a mismatch is reported against
/// the first block whose shape differs.
pub fn load_checkpoint_expecting(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    let header = parse_header(&bytes)?;
    let model_cfg = ModelConfig {
        logit_clip: header.config.model.logit_clip,
        ..*expected
    };
    let (actor, critic) = fill(&bytes, &header, model_cfg)?;
    Ok(Checkpoint {
        actor,
        critic,
        config: header.config,
        step: header.step,
    })
}
