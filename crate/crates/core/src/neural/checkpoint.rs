//! Plain-text parameter checkpoints.
//!
//! ```text
//! phase-rl-checkpoint 1
//! arch <mlp|gru> <input> <hidden> <output>
//! params <count>
//! <one value per line, shortest round-trip decimal>
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{Architecture, NetworkParams, NeuralError};

const MAGIC: &str = "phase-rl-checkpoint";
const VERSION: u32 = 1;

fn err(msg: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(params: &NetworkParams, mut out: W) -> Result<(), NeuralError> {
    let arch = params.arch();
    let io = |e: std::io::Error| err(e.to_string());
    writeln!(out, "{MAGIC} {VERSION}").map_err(io)?;
    writeln!(
        out,
        "arch {} {} {} {}",
        arch.name(),
        arch.input(),
        arch.hidden(),
        arch.output()
    )
    .map_err(io)?;
    writeln!(out, "params {}", params.len()).map_err(io)?;
    for v in params.as_slice() {
        writeln!(out, "{v:?}").map_err(io)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<NetworkParams, NeuralError> {
    let mut lines = BufReader::new(input).lines();
    let mut next = |what: &str| -> Result<String, NeuralError> {
        lines
            .next()
            .ok_or_else(|| err(format!("missing {what}")))?
            .map_err(|e| err(e.to_string()))
    };

    let header = next("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(err("not a checkpoint file"));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err("bad version"))?;
    if version != VERSION {
        return Err(err(format!("unsupported version {version}")));
    }

    let arch_line = next("arch line")?;
    let fields: Vec<&str> = arch_line.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "arch" {
        return Err(err(format!("bad arch line '{arch_line}'")));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad size '{s}'")));
    let (input, hidden, output) = (num(fields[2])?, num(fields[3])?, num(fields[4])?);
    let arch = match fields[1] {
        "mlp" => Architecture::Mlp {
            input,
            hidden,
            output,
        },
        "gru" => Architecture::Gru {
            input,
            hidden,
            output,
        },
        other => return Err(err(format!("unknown architecture '{other}'"))),
    };

    let count_line = next("params line")?;
    let count = count_line
        .strip_prefix("params ")
        .and_then(|c| c.trim().parse::<usize>().ok())
        .ok_or_else(|| err(format!("bad params line '{count_line}'")))?;
    if count != arch.num_params() {
        return Err(err(format!(
            "architecture needs {} parameters, header says {count}",
            arch.num_params()
        )));
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let line = next("parameter value")?;
        data.push(
            line.trim()
                .parse::<f64>()
                .map_err(|_| err(format!("bad value '{line}'")))?,
        );
    }
    NetworkParams::from_vec(arch, data)
}

pub fn save_checkpoint(params: &NetworkParams, path: &Path) -> Result<(), NeuralError> {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf)?;
    fs::write(path, buf).map_err(|e| err(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParams, NeuralError> {
    let file = fs::File::open(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    read_checkpoint(file)
}
