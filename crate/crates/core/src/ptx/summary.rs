//! Block-summary file: one record per (kernel, block).

use super::{BasicBlock, InstructionClassCounts, KernelCode, MemoryAccessStats, PtxModule};
use crate::tabular::{write_table, FormatError, Header, Table};

pub const BLOCK_SUMMARY_FORMAT: &str = "gpucost-blocks";
const VERSION: u32 = 1;
const COLUMNS: &[&str] = &[
    "source",
    "kernel",
    "kernel_param_bytes",
    "block",
    "total",
    "arithmetic",
    "special",
    "logic",
    "control",
    "sync",
    "global_bytes",
    "shared_bytes",
    "param_bytes",
    "local_bytes",
];

pub fn write_block_summary(modules: &[PtxModule]) -> String {
    let header = Header::new(BLOCK_SUMMARY_FORMAT, VERSION, COLUMNS);
    let rows = modules.iter().flat_map(|m| {
        m.kernels.iter().flat_map(move |k| {
            k.blocks.iter().map(move |b| {
                vec![
                    m.source_id.clone(),
                    k.name.clone(),
                    k.param_bytes.to_string(),
                    b.id.to_string(),
                    b.counts.total.to_string(),
                    b.counts.arithmetic.to_string(),
                    b.counts.special.to_string(),
                    b.counts.logic.to_string(),
                    b.counts.control.to_string(),
                    b.counts.sync.to_string(),
                    b.mem.global_bytes.to_string(),
                    b.mem.shared_bytes.to_string(),
                    b.mem.param_bytes.to_string(),
                    b.mem.local_bytes.to_string(),
                ]
            })
        })
    });
    write_table(&header, rows)
}

/// Reads kernels back from a block summary, in file order.
///
/// Rows of one kernel must be contiguous with block ids `0, 1, 2, ...`.
/// Loaded blocks carry no instruction list.
pub fn read_block_summary(text: &str) -> Result<Vec<KernelCode>, FormatError> {
    let table = Table::read(text, BLOCK_SUMMARY_FORMAT, VERSION, COLUMNS)?;
    let mut kernels: Vec<(String, KernelCode)> = Vec::new();
    for rec in table.records() {
        let source = rec.get("source");
        let name = rec.get("kernel");
        let block: usize = rec.parse("block")?;
        let counts = InstructionClassCounts {
            arithmetic: rec.parse("arithmetic")?,
            special: rec.parse("special")?,
            logic: rec.parse("logic")?,
            control: rec.parse("control")?,
            sync: rec.parse("sync")?,
            total: rec.parse("total")?,
        };
        if counts.total < counts.grouped() {
            return Err(rec.bad("total"));
        }
        let mem = MemoryAccessStats {
            global_bytes: rec.parse("global_bytes")?,
            shared_bytes: rec.parse("shared_bytes")?,
            param_bytes: rec.parse("param_bytes")?,
            local_bytes: rec.parse("local_bytes")?,
        };
        let bb = BasicBlock { id: block, counts, mem, instructions: Vec::new() };
        match kernels.last_mut() {
            Some((src, k)) if src == source && k.name == name => {
                if block != k.blocks.len() {
                    return Err(rec.bad("block"));
                }
                k.blocks.push(bb);
            }
            _ => {
                if block != 0 || kernels.iter().any(|(s, k)| s == source && k.name == name) {
                    return Err(rec.bad("block"));
                }
                let kernel = KernelCode {
                    name: name.to_string(),
                    blocks: vec![bb],
                    param_bytes: rec.parse("kernel_param_bytes")?,
                };
                kernels.push((source.to_string(), kernel));
            }
        }
    }
    Ok(kernels.into_iter().map(|(_, k)| k).collect())
}
