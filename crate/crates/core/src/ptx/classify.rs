use super::{InstructionClass, MemorySpace};

/// Maps a dot-separated PTX mnemonic to its feature group.
///
/// Only the base mnemonic decides the group; the bit width of computational
/// instructions is ignored. Loads and stores are keyed by their state-space
/// modifier and carry element width times vector arity. `mov` is grouped as
/// arithmetic. Generic-address and `.const` loads have no tracked space and
/// fall into [`InstructionClass::Other`].
pub fn classify_instruction(opcode: &str) -> InstructionClass {
    let mut parts = opcode.split('.');
    let base = parts.next().unwrap_or_default();
    match base {
        "add" | "sub" | "mul" | "mad" | "fma" | "div" | "rem" | "neg" | "abs" | "min" | "max"
        | "cvt" | "cvta" | "mov" => InstructionClass::Arithmetic,
        "sqrt" | "rsqrt" | "rcp" | "sin" | "cos" | "lg2" | "ex2" | "tanh" => InstructionClass::Special,
        "and" | "or" | "xor" | "not" | "shl" | "shr" | "setp" | "set" | "selp" | "slct" => {
            InstructionClass::Logic
        }
        "bra" | "call" | "ret" | "exit" => InstructionClass::Control,
        "bar" | "barrier" | "membar" | "fence" | "atom" | "red" => InstructionClass::Sync,
        "ld" | "st" => memory_class(parts),
        _ => InstructionClass::Other,
    }
}

fn memory_class<'a>(modifiers: impl Iterator<Item = &'a str>) -> InstructionClass {
    let mut space = None;
    let mut arity = 1u64;
    let mut width = 0u64;
    for m in modifiers {
        // `.shared::cta`, `.L1::evict_last`
        let m = m.split("::").next().unwrap_or_default();
        match m {
            "global" => space = Some(MemorySpace::Global),
            "shared" => space = Some(MemorySpace::Shared),
            "param" => space = Some(MemorySpace::Param),
            "local" => space = Some(MemorySpace::Local),
            "v2" => arity = 2,
            "v4" => arity = 4,
            "v8" => arity = 8,
            other => {
                if let Some(w) = memory_type_width(other) {
                    width = w;
                }
            }
        }
    }
    match space {
        Some(space) => InstructionClass::Memory { space, bytes: width * arity },
        None => InstructionClass::Other,
    }
}

/// Byte width of a PTX type suffix (without the leading dot).
pub fn memory_type_width(suffix: &str) -> Option<u64> {
    Some(match suffix {
        "b8" | "s8" | "u8" => 1,
        "b16" | "s16" | "u16" | "f16" | "bf16" => 2,
        "b32" | "s32" | "u32" | "f32" | "f16x2" | "bf16x2" => 4,
        "b64" | "s64" | "u64" | "f64" => 8,
        "b128" => 16,
        _ => return None,
    })
}

/// Texture fetches and queries, which the model does not support.
pub fn is_texture_opcode(opcode: &str) -> bool {
    matches!(opcode.split('.').next(), Some("tex" | "tld4" | "txq"))
}
