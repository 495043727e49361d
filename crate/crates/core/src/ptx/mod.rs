//! PTX frontend: parses kernel assembly into basic blocks and classifies
//! every instruction into the feature groups used by the cost model.

mod classify;
mod parse;
mod summary;

pub use classify::{classify_instruction, is_texture_opcode, memory_type_width};
pub use parse::parse_ptx;
pub use summary::{read_block_summary, write_block_summary, BLOCK_SUMMARY_FORMAT};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PtxError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unsupported PTX feature `{0}` (texture workloads are not modeled)")]
    UnsupportedFeature(String),
}

impl PtxError {
    pub(crate) fn syntax(line: usize, message: impl Into<String>) -> Self {
        PtxError::Syntax { line, message: message.into() }
    }
}

/// State spaces whose traffic is tracked as a data volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MemorySpace {
    Global,
    Shared,
    Param,
    Local,
}

/// Feature group of a single PTX instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstructionClass {
    Arithmetic,
    Special,
    Logic,
    Control,
    Sync,
    /// A load or store; `bytes` is element width times vector arity.
    Memory { space: MemorySpace, bytes: u64 },
    /// Recognized syntax without a group; counted in `total` only.
    Other,
}

impl InstructionClass {
    /// Branches, calls, returns and exits end a basic block.
    pub fn ends_block(self) -> bool {
        self == InstructionClass::Control
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InstructionClassCounts {
    pub arithmetic: u64,
    pub special: u64,
    pub logic: u64,
    pub control: u64,
    pub sync: u64,
    /// Every instruction in the block, including memory and unclassified ones.
    pub total: u64,
}

impl InstructionClassCounts {
    pub fn grouped(&self) -> u64 {
        self.arithmetic + self.special + self.logic + self.control + self.sync
    }
}

/// Bytes moved per single execution of a block, by state space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MemoryAccessStats {
    pub global_bytes: u64,
    pub shared_bytes: u64,
    pub param_bytes: u64,
    pub local_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub opcode: String,
    pub predicated: bool,
    /// 1-based source line.
    pub line: usize,
    pub class: InstructionClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    pub counts: InstructionClassCounts,
    pub mem: MemoryAccessStats,
    /// Source instructions; empty when the block was loaded from a summary file.
    pub instructions: Vec<Instruction>,
}

impl BasicBlock {
    pub fn from_instructions(id: usize, instructions: Vec<Instruction>) -> Self {
        let classes: Vec<_> = instructions.iter().map(|i| i.class).collect();
        let (counts, mem) = summarize_block(&classes);
        BasicBlock { id, counts, mem, instructions }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelCode {
    /// Mangled entry name.
    pub name: String,
    /// Block 0 is the entry block; ids equal positions.
    pub blocks: Vec<BasicBlock>,
    /// Total size of the `.param` declarations of the entry.
    pub param_bytes: u64,
}

/// Things the parser skipped without failing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub skipped_directives: usize,
    pub skipped_functions: usize,
    pub unclassified_instructions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PtxModule {
    pub source_id: String,
    pub kernels: Vec<KernelCode>,
    pub report: ParseReport,
}

impl PtxModule {
    pub fn kernel(&self, name: &str) -> Option<&KernelCode> {
        self.kernels.iter().find(|k| k.name == name)
    }
}

/// Componentwise sum of a block's instruction classes.
pub fn summarize_block(classes: &[InstructionClass]) -> (InstructionClassCounts, MemoryAccessStats) {
    let mut counts = InstructionClassCounts::default();
    let mut mem = MemoryAccessStats::default();
    for class in classes {
        counts.total += 1;
        match *class {
            InstructionClass::Arithmetic => counts.arithmetic += 1,
            InstructionClass::Special => counts.special += 1,
            InstructionClass::Logic => counts.logic += 1,
            InstructionClass::Control => counts.control += 1,
            InstructionClass::Sync => counts.sync += 1,
            InstructionClass::Memory { space, bytes } => match space {
                MemorySpace::Global => mem.global_bytes += bytes,
                MemorySpace::Shared => mem.shared_bytes += bytes,
                MemorySpace::Param => mem.param_bytes += bytes,
                MemorySpace::Local => mem.local_bytes += bytes,
            },
            InstructionClass::Other => {}
        }
    }
    (counts, mem)
}
