//! A stdio adapter that answers every request with the gold action of the
//! instruction, read from a dataset file. Useful to check a protocol setup
//! end to end: evaluating its answers gives EM 1 everywhere.
//!
//! Usage: `stateval-replay-adapter DATASET [AGENT_ID]`

use std::io::{self, BufWriter};
use std::path::PathBuf;

use anyhow::{Context, Result};

use stateval_core::dataset::format::Dataset;
use stateval_core::harness::protocol::serve;
use stateval_core::harness::{Handshake, ImageMode, ReplayAdapter, PROTOCOL_VERSION};
use stateval_core::Dimension;

fn main() -> Result<()> {
    let mut args = std::env::args_os().skip(1);
    let path = PathBuf::from(args.next().context("usage: stateval-replay-adapter DATASET [AGENT_ID]")?);
    let agent_id = args.next().map_or_else(|| "replay".to_string(), |a| a.to_string_lossy().into_owned());
    let ds = Dataset::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let mut groups = ds.state_groups(Dimension::Mwam)?;
    groups.extend(ds.state_groups(Dimension::Uwiu)?);
    let replay = ReplayAdapter::new(&groups);
    let handshake = Handshake { protocol_version: PROTOCOL_VERSION, agent_id, image_mode: ImageMode::Path };
    let stdin = io::stdin().lock();
    let stdout = BufWriter::new(io::stdout().lock());
    serve(stdin, stdout, handshake, |req| {
        replay.answer(&req.instruction_id).map(str::to_string).ok_or_else(|| format!("unknown instruction {}", req.instruction_id))
    })?;
    Ok(())
}
