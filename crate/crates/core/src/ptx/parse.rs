use super::classify::{classify_instruction, is_texture_opcode, memory_type_width};
use super::{BasicBlock, Instruction, InstructionClass, KernelCode, ParseReport, PtxError, PtxModule};

/// Directives terminated by a newline rather than `;`.
const LINE_DIRECTIVES: &[&str] = &[".version", ".target", ".address_size", ".file", ".loc"];

#[derive(Debug, PartialEq)]
enum Item {
    Statement { text: String, line: usize },
    Label { line: usize },
    /// Text preceding a `{` that opens a function or section body.
    Header { text: String, line: usize },
    /// A `.section` body, dropped wholesale.
    Section,
    Open { line: usize },
    Close { line: usize },
}

/// Splits comment-free PTX text into statements, labels and scope braces.
struct Lexer {
    items: Vec<Item>,
    buf: String,
    buf_line: usize,
    operand_braces: usize,
}

impl Lexer {
    fn flush(&mut self) {
        let text = self.buf.trim();
        if !text.is_empty() {
            self.items.push(Item::Statement { text: text.to_string(), line: self.buf_line });
        }
        self.buf.clear();
    }

    fn push(&mut self, c: char, line: usize) {
        if self.buf.trim().is_empty() && !c.is_whitespace() {
            self.buf.clear();
            self.buf_line = line;
        }
        self.buf.push(c);
    }

    fn run(text: &str) -> Result<Vec<Item>, PtxError> {
        let mut lx = Lexer { items: Vec::new(), buf: String::new(), buf_line: 1, operand_braces: 0 };
        let chars: Vec<char> = text.chars().collect();
        let mut line = 1;
        let mut i = 0;
        let mut in_string = false;
        // Depth of a `.section` body being skipped.
        let mut section_depth = 0usize;
        while i < chars.len() {
            let c = chars[i];
            let next = chars.get(i + 1).copied();
            if c == '\n' {
                line += 1;
            }
            if in_string {
                if c == '"' {
                    in_string = false;
                }
                lx.push(c, line);
                i += 1;
                continue;
            }
            if c == '/' && next == Some('/') {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            if c == '/' && next == Some('*') {
                let start = line;
                i += 2;
                loop {
                    match chars.get(i) {
                        None => return Err(PtxError::syntax(start, "unterminated block comment")),
                        Some('*') if chars.get(i + 1) == Some(&'/') => {
                            i += 2;
                            break;
                        }
                        Some('\n') => line += 1,
                        _ => {}
                    }
                    i += 1;
                }
                lx.push(' ', line);
                continue;
            }
            if section_depth > 0 {
                match c {
                    '{' => section_depth += 1,
                    '}' => section_depth -= 1,
                    _ => {}
                }
                i += 1;
                continue;
            }
            match c {
                '"' => {
                    in_string = true;
                    lx.push(c, line);
                }
                '\n' => {
                    let t = lx.buf.trim_start();
                    if LINE_DIRECTIVES.iter().any(|d| first_word(t) == *d) {
                        lx.flush();
                    } else {
                        lx.push(' ', line);
                    }
                }
                ';' if lx.operand_braces == 0 => lx.flush(),
                '{' => {
                    let t = lx.buf.trim();
                    if t.is_empty() {
                        lx.items.push(Item::Open { line });
                    } else if t.starts_with('.') && !t.contains('=') {
                        let header = t.to_string();
                        let header_line = lx.buf_line;
                        lx.buf.clear();
                        if first_word(&header) == ".section" {
                            lx.items.push(Item::Section);
                            section_depth = 1;
                        } else {
                            lx.items.push(Item::Header { text: header, line: header_line });
                            lx.items.push(Item::Open { line });
                        }
                    } else {
                        lx.operand_braces += 1;
                        lx.push(c, line);
                    }
                }
                '}' => {
                    if lx.operand_braces > 0 {
                        lx.operand_braces -= 1;
                        lx.push(c, line);
                    } else if !lx.buf.trim().is_empty() {
                        return Err(PtxError::syntax(lx.buf_line, "statement is missing its `;`"));
                    } else {
                        lx.items.push(Item::Close { line });
                    }
                }
                ':' if next != Some(':') && is_label(lx.buf.trim()) => {
                    lx.items.push(Item::Label { line: lx.buf_line });
                    lx.buf.clear();
                }
                _ => lx.push(c, line),
            }
            i += 1;
        }
        if in_string {
            return Err(PtxError::syntax(line, "unterminated string literal"));
        }
        if section_depth > 0 {
            return Err(PtxError::syntax(line, "unterminated `.section` body"));
        }
        if !lx.buf.trim().is_empty() {
            let t = lx.buf.trim_start();
            if LINE_DIRECTIVES.iter().any(|d| first_word(t) == *d) {
                lx.flush();
            } else {
                return Err(PtxError::syntax(lx.buf_line, "unterminated statement at end of input"));
            }
        }
        Ok(lx.items)
    }
}

fn first_word(s: &str) -> &str {
    s.split_whitespace().next().unwrap_or_default()
}

fn is_label(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$' || c == '%' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

fn is_opcode(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_lowercase())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | ':'))
}

/// Parses PTX source into kernels and basic blocks.
///
/// Blocks start at every label and after every branch, call, return or
/// exit. Directives other than `.entry` are skipped and tallied in the
/// module's [`ParseReport`]; `.func` bodies are skipped whole.
pub fn parse_ptx(source_id: &str, text: &str) -> Result<PtxModule, PtxError> {
    let items = Lexer::run(text)?;
    let mut report = ParseReport::default();
    let mut kernels: Vec<KernelCode> = Vec::new();
    let mut iter = items.into_iter().peekable();

    while let Some(item) = iter.next() {
        match item {
            Item::Statement { text, line } => {
                if text.starts_with('.') {
                    report.skipped_directives += 1;
                } else {
                    return Err(PtxError::syntax(line, format!("`{}` outside of a function body", first_word(&text))));
                }
            }
            Item::Section => report.skipped_directives += 1,
            Item::Header { text, line } => {
                match iter.next() {
                    Some(Item::Open { .. }) => {}
                    _ => return Err(PtxError::syntax(line, "expected `{` after header")),
                }
                let words: Vec<&str> = text.split(|c: char| c.is_whitespace() || c == '(').collect();
                if words.contains(&".entry") {
                    let (name, param_bytes) = parse_entry_header(&text, line)?;
                    if kernels.iter().any(|k| k.name == name) {
                        return Err(PtxError::syntax(line, format!("duplicate kernel `{name}`")));
                    }
                    let blocks = parse_body(&mut iter, line, &mut report)?;
                    kernels.push(KernelCode { name, blocks, param_bytes });
                } else {
                    skip_body(&mut iter, line)?;
                    if words.contains(&".func") {
                        report.skipped_functions += 1;
                    } else {
                        report.skipped_directives += 1;
                    }
                }
            }
            Item::Label { line } => return Err(PtxError::syntax(line, "label outside of a function body")),
            Item::Open { line } => return Err(PtxError::syntax(line, "unexpected `{` at module scope")),
            Item::Close { line } => return Err(PtxError::syntax(line, "unbalanced `}`")),
        }
    }
    Ok(PtxModule { source_id: source_id.to_string(), kernels, report })
}

fn skip_body(iter: &mut impl Iterator<Item = Item>, line: usize) -> Result<(), PtxError> {
    let mut depth = 1;
    for item in iter {
        match item {
            Item::Open { .. } | Item::Header { .. } => depth += 1,
            Item::Close { .. } => {
                depth -= 1;
                if depth == 0 {
                    return Ok(());
                }
            }
            _ => {}
        }
    }
    Err(PtxError::syntax(line, "unterminated function body"))
}

fn parse_body(
    iter: &mut impl Iterator<Item = Item>,
    header_line: usize,
    report: &mut ParseReport,
) -> Result<Vec<BasicBlock>, PtxError> {
    let mut depth = 1;
    let mut blocks: Vec<Vec<Instruction>> = Vec::new();
    let mut current: Vec<Instruction> = Vec::new();
    for item in iter {
        match item {
            Item::Open { .. } => depth += 1,
            Item::Close { .. } => {
                depth -= 1;
                if depth == 0 {
                    if !current.is_empty() || blocks.is_empty() {
                        blocks.push(current);
                    }
                    let blocks = blocks
                        .into_iter()
                        .enumerate()
                        .map(|(id, instrs)| BasicBlock::from_instructions(id, instrs))
                        .collect();
                    return Ok(blocks);
                }
            }
            Item::Label { .. } => {
                if !current.is_empty() {
                    blocks.push(std::mem::take(&mut current));
                }
            }
            Item::Header { line, .. } => {
                return Err(PtxError::syntax(line, "nested function definition"));
            }
            Item::Section => report.skipped_directives += 1,
            Item::Statement { text, line } => {
                if text.starts_with('.') {
                    report.skipped_directives += 1;
                    continue;
                }
                let instr = parse_instruction(&text, line)?;
                if instr.class == InstructionClass::Other {
                    report.unclassified_instructions += 1;
                }
                let ends = instr.class.ends_block();
                current.push(instr);
                if ends {
                    blocks.push(std::mem::take(&mut current));
                }
            }
        }
    }
    Err(PtxError::syntax(header_line, "unterminated kernel body"))
}

fn parse_instruction(text: &str, line: usize) -> Result<Instruction, PtxError> {
    let mut rest = text.trim();
    let mut predicated = false;
    if let Some(after) = rest.strip_prefix('@') {
        let end = after.find(char::is_whitespace).ok_or_else(|| PtxError::syntax(line, "predicate without instruction"))?;
        let guard = &after[..end];
        if guard.trim_start_matches('!').is_empty() {
            return Err(PtxError::syntax(line, "empty predicate guard"));
        }
        predicated = true;
        rest = after[end..].trim_start();
    }
    let opcode = first_word(rest);
    if !is_opcode(opcode) {
        return Err(PtxError::syntax(line, format!("malformed instruction `{text}`")));
    }
    if is_texture_opcode(opcode) {
        return Err(PtxError::UnsupportedFeature(opcode.to_string()));
    }
    Ok(Instruction { opcode: opcode.to_string(), predicated, line, class: classify_instruction(opcode) })
}

/// Returns the entry name and the summed size of its parameter declarations.
fn parse_entry_header(text: &str, line: usize) -> Result<(String, u64), PtxError> {
    let pos = text.find(".entry").expect("caller checked for .entry");
    let after = text[pos + ".entry".len()..].trim_start();
    let name_end = after.find(|c: char| c == '(' || c.is_whitespace()).unwrap_or(after.len());
    let name = &after[..name_end];
    if !is_label(name) {
        return Err(PtxError::syntax(line, format!("invalid kernel name `{name}`")));
    }
    let rest = after[name_end..].trim_start();
    let mut param_bytes = 0;
    if let Some(params) = rest.strip_prefix('(') {
        let close = params.find(')').ok_or_else(|| PtxError::syntax(line, "unclosed parameter list"))?;
        for decl in params[..close].split(',').filter(|d| !d.trim().is_empty()) {
            param_bytes += param_decl_bytes(decl).ok_or_else(|| {
                PtxError::syntax(line, format!("malformed parameter declaration `{}`", decl.trim()))
            })?;
        }
    }
    Ok((name.to_string(), param_bytes))
}

fn param_decl_bytes(decl: &str) -> Option<u64> {
    let words: Vec<&str> = decl.split_whitespace().collect();
    if words.first() != Some(&".param") {
        return None;
    }
    let width = words
        .iter()
        .filter_map(|w| w.strip_prefix('.'))
        .find_map(memory_type_width)?;
    let name = words.last()?;
    let count = match name.find('[') {
        Some(open) => name[open + 1..].strip_suffix(']')?.parse::<u64>().ok()?,
        None => 1,
    };
    Some(width * count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ptx::MemorySpace;

    const HEADER: &str = ".version 6.4\n.target sm_70\n.address_size 64\n\n";

    fn parse(body: &str) -> PtxModule {
        parse_ptx("test.ptx", &format!("{HEADER}{body}")).unwrap()
    }

    #[test]
    fn empty_module_has_no_kernels() {
        let m = parse("");
        assert!(m.kernels.is_empty());
        assert_eq!(m.report.skipped_directives, 3);
        assert!(parse_ptx("e", "").unwrap().kernels.is_empty());
    }

    #[test]
    fn straight_line_kernel_is_one_block() {
        let m = parse(
            ".visible .entry k(\n  .param .u64 k_param_0\n)\n{\n  .reg .f32 %f<4>;\n  add.f32 %f1, %f2, %f3;\n  mul.f32 %f1, %f1, %f2;\n  ld.param.u64 %rd1, [k_param_0];\n  ret;\n}\n",
        );
        let k = &m.kernels[0];
        assert_eq!(k.name, "k");
        assert_eq!(k.param_bytes, 8);
        assert_eq!(k.blocks.len(), 1);
        assert_eq!(k.blocks[0].counts.total, 4);
        assert_eq!(k.blocks[0].counts.arithmetic, 2);
        assert_eq!(k.blocks[0].counts.control, 1);
        assert_eq!(k.blocks[0].mem.param_bytes, 8);
    }

    // Hand-derived structure (line numbers after the 4-line header):
    //   block 0: mov, mov                 (falls into the loop label)
    //   block 1: $L_loop: add, setp, @p bra (ends at the branch)
    //   block 2: st.global, ret
    #[test]
    fn loop_splits_at_label_and_after_branch() {
        let m = parse(
            ".visible .entry loop()\n{\n  mov.u32 %r1, 0;\n  mov.u32 %r2, 10;\n$L_loop:\n  add.s32 %r1, %r1, 1;\n  setp.lt.s32 %p1, %r1, %r2;\n  @%p1 bra $L_loop;\n  st.global.u32 [%rd1], %r1;\n  ret;\n}\n",
        );
        let k = &m.kernels[0];
        let sizes: Vec<u64> = k.blocks.iter().map(|b| b.counts.total).collect();
        assert_eq!(sizes, vec![2, 3, 2]);
        assert_eq!(k.blocks[1].instructions[0].opcode, "add.s32");
        assert_eq!(k.blocks[1].instructions[0].line, 10);
        let last = k.blocks[1].instructions.last().unwrap();
        assert_eq!(last.opcode, "bra");
        assert!(last.predicated);
        assert_eq!(k.blocks[2].mem.global_bytes, 4);
        assert_eq!(k.blocks.iter().map(|b| b.id).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn vector_operands_and_comments() {
        let m = parse(
            "// leading comment\n.visible .entry v(.param .align 8 .b8 v_param_0[16], .param .u32 n)\n{\n  /* block\n comment */ ld.global.v4.f32 {%f1, %f2, %f3, %f4}, [%rd1]; // tail\n  ld.shared::cta.b32 %r1, [%rd2];\n  exit;\n}\n",
        );
        let k = &m.kernels[0];
        assert_eq!(k.param_bytes, 20);
        assert_eq!(k.blocks.len(), 1);
        assert_eq!(k.blocks[0].mem.global_bytes, 16);
        assert_eq!(k.blocks[0].mem.shared_bytes, 4);
        assert_eq!(k.blocks[0].instructions[0].line, 9);
        assert_eq!(k.blocks[0].instructions[0].class, InstructionClass::Memory { space: MemorySpace::Global, bytes: 16 });
    }

    #[test]
    fn functions_and_sections_are_skipped() {
        let m = parse(
            ".func (.param .b32 r) helper(.param .b32 a)\n{\n  ret;\n}\n.global .align 4 .b8 table[4] = {1, 2, 3, 4};\n.visible .entry k()\n{\n  call.uni helper, (1);\n  { .reg .b32 t;\n    add.s32 t, t, 1;\n  }\n  ret;\n}\n.section .debug_info\n{\n.b8 1\n.b8 2\n}\n",
        );
        assert_eq!(m.kernels.len(), 1);
        assert_eq!(m.report.skipped_functions, 1);
        let sizes: Vec<u64> = m.kernels[0].blocks.iter().map(|b| b.counts.total).collect();
        assert_eq!(sizes, vec![1, 2]);
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let bad = |body: &str| parse_ptx("bad", &format!("{HEADER}{body}")).unwrap_err();
        assert!(matches!(bad("add.f32 %f1, %f2, %f3;"), PtxError::Syntax { line: 5, .. }));
        assert!(matches!(bad(".entry k()\n{\n  add.f32 %f1, %f2, %f3\n}\n"), PtxError::Syntax { line: 7, .. }));
        assert!(matches!(bad(".entry k()\n{\n  ret;\n"), PtxError::Syntax { .. }));
        assert!(matches!(bad("}\n"), PtxError::Syntax { .. }));
        assert!(matches!(bad(".entry k()\n{\n  123 %r1;\n}\n"), PtxError::Syntax { line: 7, .. }));
        assert!(matches!(
            bad(".entry k()\n{\n ret;\n}\n.entry k()\n{\n ret;\n}\n"),
            PtxError::Syntax { line: 9, .. }
        ));
    }

    #[test]
    fn texture_is_unsupported() {
        let err = parse_ptx("t", ".entry k()\n{\n  tex.2d.v4.f32.f32 {%f1,%f2,%f3,%f4}, [tex0, {%f5, %f6}];\n  ret;\n}\n")
            .unwrap_err();
        assert_eq!(err, PtxError::UnsupportedFeature("tex.2d.v4.f32.f32".into()));
    }

    #[test]
    fn code_after_ret_starts_a_new_block() {
        let m = parse(".entry k()\n{\n  ret;\n  add.s32 %r1, %r1, 1;\n  exit;\n}\n");
        let sizes: Vec<u64> = m.kernels[0].blocks.iter().map(|b| b.counts.total).collect();
        assert_eq!(sizes, vec![1, 2]);
    }

    #[test]
    fn empty_body_still_has_an_entry_block() {
        let m = parse(".entry k()\n{\n}\n");
        assert_eq!(m.kernels[0].blocks.len(), 1);
        assert_eq!(m.kernels[0].blocks[0].counts.total, 0);
    }
}
