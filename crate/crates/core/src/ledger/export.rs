//! Line-delimited JSON chain export: one block per line, fields in
//! declaration order.

use std::io::{BufRead, Write};

use super::{Block, Chain, ChainConfig, LedgerError};

pub fn write_jsonl<W: Write>(blocks: &[Block], mut out: W) -> std::io::Result<()> {
    for b in blocks {
        serde_json::to_writer(&mut out, b)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Block>, LedgerError> {
    let mut blocks = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| LedgerError::Import {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let block = serde_json::from_str(&line).map_err(|e| LedgerError::Import {
            line: i + 1,
            message: e.to_string(),
        })?;
        blocks.push(block);
    }
    Ok(blocks)
}

/// Parse and re-validate an exported chain.
pub fn import_chain<R: BufRead>(config: ChainConfig, input: R) -> Result<Chain, LedgerError> {
    Chain::from_blocks(config, read_jsonl(input)?)
}
