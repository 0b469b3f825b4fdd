use std::fmt;

use super::register::Register;
use super::spec::{Access, ImplicitOperand, IsaSpec};
use super::IsaError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Register(Register),
    Constant,
    Memory {
        components: Vec<Register>,
        has_displacement: bool,
    },
}

impl Operand {
    pub fn reg(name: &str) -> Operand {
        Operand::Register(Register::from_name(name).expect("known register"))
    }

    pub fn mem(components: &[&str], has_displacement: bool) -> Operand {
        Operand::Memory {
            components: components
                .iter()
                .map(|n| Register::from_name(n).expect("known register"))
                .collect(),
            has_displacement,
        }
    }

    /// Registers read to form a memory address.
    pub fn address_registers(&self) -> &[Register] {
        match self {
            Operand::Memory { components, .. } => components,
            _ => &[],
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Register(r) => write!(f, "{r}"),
            Operand::Constant => f.write_str("CONST"),
            Operand::Memory { components, has_displacement } => {
                f.write_str("[")?;
                let mut parts: Vec<String> = components.iter().map(|r| r.to_string()).collect();
                if *has_displacement {
                    parts.push("CONST".into());
                }
                write!(f, "{}]", parts.join("+"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Unknown opcodes and arity mismatches are errors.
    Strict,
    /// Unknown opcodes are kept (and later tokenized as UNK) with default
    /// operand roles: first operand read-write, the rest read.
    #[default]
    Lenient,
}

/// One assembly instruction with its explicit and implicit operands.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub opcode: String,
    pub explicit_sources: Vec<Operand>,
    pub explicit_dests: Vec<Operand>,
    pub implicit_sources: Vec<Operand>,
    pub implicit_dests: Vec<Operand>,
    /// False when the opcode was absent from the ISA table.
    pub known: bool,
    pub reads_memory: bool,
    pub writes_memory: bool,
}

impl Instruction {
    /// Sources in canonical order: implicit first, then explicit.
    pub fn sources(&self) -> impl Iterator<Item = &Operand> {
        self.implicit_sources.iter().chain(&self.explicit_sources)
    }

    pub fn dests(&self) -> impl Iterator<Item = &Operand> {
        self.implicit_dests.iter().chain(&self.explicit_dests)
    }

    pub fn touches_memory(&self) -> bool {
        self.reads_memory || self.writes_memory
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |ops: Vec<&Operand>| ops.iter().map(|o| o.to_string()).collect::<Vec<_>>();
        write!(
            f,
            "{} src=[{}] dst=[{}]",
            self.opcode,
            list(self.sources().collect()).join(", "),
            list(self.dests().collect()).join(", ")
        )
    }
}

const PREFIXES: &[&str] = &[
    "lock", "rep", "repe", "repz", "repne", "repnz", "notrack", "data16", "addr32",
];

const SIZE_WORDS: &[(&str, u16)] = &[
    ("byte", 8),
    ("word", 16),
    ("dword", 32),
    ("fword", 48),
    ("qword", 64),
    ("mmword", 64),
    ("tbyte", 80),
    ("xmmword", 128),
    ("oword", 128),
    ("ymmword", 256),
    ("zmmword", 512),
];

/// Opcodes that end a basic block.
pub fn is_branch_opcode(opcode: &str) -> bool {
    let op = opcode.to_ascii_lowercase();
    op.starts_with('j')
        || op.starts_with("loop")
        || matches!(
            op.as_str(),
            "call" | "ret" | "retn" | "retf" | "iret" | "iretq" | "syscall" | "sysret"
                | "sysenter" | "sysexit" | "int" | "int3" | "into"
        )
}

/// Splits a line into (opcode, operand texts), dropping prefixes and comments.
pub(crate) fn split_line(text: &str) -> (String, Vec<String>) {
    let text = text.split('#').next().unwrap_or("").trim().to_ascii_lowercase();
    let mut rest = text.as_str();
    let mut opcode = "";
    while !rest.is_empty() {
        let (word, tail) = match rest.find(char::is_whitespace) {
            Some(i) => (&rest[..i], rest[i..].trim_start()),
            None => (rest, ""),
        };
        rest = tail;
        if PREFIXES.contains(&word) && !tail.is_empty() {
            continue;
        }
        opcode = word;
        break;
    }
    let mut operands = Vec::new();
    if !rest.trim().is_empty() {
        let mut depth = 0i32;
        let mut cur = String::new();
        for ch in rest.chars() {
            match ch {
                '[' => depth += 1,
                ']' => depth -= 1,
                ',' if depth == 0 => {
                    operands.push(cur.trim().to_string());
                    cur.clear();
                    continue;
                }
                _ => {}
            }
            cur.push(ch);
        }
        operands.push(cur.trim().to_string());
    }
    (opcode.to_string(), operands)
}

fn malformed(text: &str, reason: &'static str) -> IsaError {
    IsaError::MalformedOperand { operand: text.to_string(), reason }
}

fn parse_number(s: &str) -> bool {
    let s = s.trim();
    let s = s.strip_prefix('-').or_else(|| s.strip_prefix('+')).unwrap_or(s).trim();
    if s.is_empty() {
        return false;
    }
    if let Some(hex) = s.strip_prefix("0x") {
        return !hex.is_empty() && hex.chars().all(|c| c.is_ascii_hexdigit());
    }
    if let Some(hex) = s.strip_suffix('h') {
        return !hex.is_empty()
            && hex.starts_with(|c: char| c.is_ascii_digit())
            && hex.chars().all(|c| c.is_ascii_hexdigit());
    }
    s.chars().all(|c| c.is_ascii_digit())
}

fn is_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.' || c == '$')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '@'))
}

/// Parses one operand. Returns the operand and, when evident, its bit width.
pub(crate) fn parse_operand(text: &str) -> Result<(Operand, Option<u16>), IsaError> {
    let original = text;
    let mut s = text.trim();
    if s.is_empty() {
        return Err(malformed(original, "empty operand"));
    }
    let mut width = None;
    for (word, w) in SIZE_WORDS {
        if let Some(rest) = s.strip_prefix(word) {
            let rest = rest.trim_start();
            if let Some(rest) = rest.strip_prefix("ptr") {
                width = Some(*w);
                s = rest.trim_start();
                break;
            }
        }
    }
    if s.contains('[') || s.contains(']') {
        let open = s.find('[').ok_or_else(|| malformed(original, "unbalanced brackets"))?;
        let close = s.rfind(']').ok_or_else(|| malformed(original, "unbalanced brackets"))?;
        if close < open || !s[close + 1..].trim().is_empty() {
            return Err(malformed(original, "unbalanced brackets"));
        }
        let mut components = Vec::new();
        let mut has_displacement = false;
        let prefix = s[..open].trim();
        if !prefix.is_empty() {
            let seg = prefix
                .strip_suffix(':')
                .map(str::trim)
                .ok_or_else(|| malformed(original, "unexpected text before memory operand"))?;
            let reg = Register::from_name(seg)
                .ok_or_else(|| malformed(original, "unknown segment register"))?;
            components.push(reg);
        }
        let inner = &s[open + 1..close];
        if inner.contains('[') {
            return Err(malformed(original, "nested memory operand"));
        }
        let inner = inner.replace('-', "+");
        for term in inner.split('+').map(str::trim) {
            if term.is_empty() {
                if components.is_empty() && !has_displacement && inner.trim_start().starts_with('+')
                {
                    continue;
                }
                return Err(malformed(original, "empty address term"));
            }
            let factors: Vec<&str> = term.split('*').map(str::trim).collect();
            if factors.len() > 2 {
                return Err(malformed(original, "bad scaled index"));
            }
            let regs: Vec<Register> =
                factors.iter().filter_map(|f| Register::from_name(f)).collect();
            match (factors.len(), regs.len()) {
                (1, 1) | (2, 1) => {
                    if factors.len() == 2 && !factors.iter().any(|f| parse_number(f)) {
                        return Err(malformed(original, "bad scale"));
                    }
                    if !components.contains(&regs[0]) {
                        components.push(regs[0]);
                    }
                }
                (1, 0) if parse_number(term) || is_symbol(term) => has_displacement = true,
                (2, 0) if factors.iter().all(|f| parse_number(f)) => has_displacement = true,
                _ => return Err(malformed(original, "unparseable address term")),
            }
        }
        if components.is_empty() && !has_displacement {
            return Err(malformed(original, "empty memory operand"));
        }
        return Ok((Operand::Memory { components, has_displacement }, width));
    }
    if let Some(reg) = Register::from_name(s) {
        return Ok((Operand::Register(reg), Some(reg.width())));
    }
    let s = s.strip_prefix("offset").map(str::trim).unwrap_or(s);
    if parse_number(s) || is_symbol(s) {
        return Ok((Operand::Constant, width));
    }
    Err(malformed(original, "not a register, constant or memory operand"))
}

fn resolve_implicit(op: ImplicitOperand, width: u16) -> Operand {
    match op {
        ImplicitOperand::Reg(r) => Operand::Register(r),
        ImplicitOperand::Mem(r) => Operand::Memory { components: vec![r], has_displacement: false },
        ImplicitOperand::Sized { family } => {
            let reg = match width {
                // 8-bit multiply/divide keep the high half in ah.
                8 if family == 2 => Register::high_byte(0),
                8 | 16 | 32 | 64 => Register::in_family(family, width),
                _ => None,
            }
            .or_else(|| Register::in_family(family, 64))
            .expect("GPR family exists");
            Operand::Register(reg)
        }
    }
}

fn push_unique(list: &mut Vec<Operand>, taken: &[Operand], op: Operand) {
    if !list.contains(&op) && !taken.contains(&op) {
        list.push(op);
    }
}

/// Parses one Intel-syntax instruction and expands its implicit operands.
pub fn parse_instruction(
    text: &str,
    spec: &IsaSpec,
    mode: ParseMode,
) -> Result<Instruction, IsaError> {
    let (opcode, operand_texts) = split_line(text);
    if opcode.is_empty() {
        return Err(IsaError::EmptyInstruction);
    }
    let entry = spec.get(&opcode);
    if entry.is_none() && mode == ParseMode::Strict {
        return Err(IsaError::UnknownOpcode(opcode));
    }
    let parsed: Vec<(Operand, Option<u16>)> =
        operand_texts.iter().map(|t| parse_operand(t)).collect::<Result<_, _>>()?;

    let default_access = |i: usize| if i == 0 { Access::ReadWrite } else { Access::Read };
    let accesses: Vec<Access> = match entry.map(|e| e.form_for_arity(parsed.len())) {
        Some(Some(form)) => form.0.iter().map(|s| s.access).collect(),
        Some(None) if mode == ParseMode::Strict => {
            return Err(IsaError::OperandCount { opcode, got: parsed.len() });
        }
        _ => (0..parsed.len()).map(default_access).collect(),
    };

    let width = parsed.first().and_then(|(_, w)| *w).unwrap_or(64);
    let mut instr = Instruction {
        opcode,
        explicit_sources: Vec::new(),
        explicit_dests: Vec::new(),
        implicit_sources: Vec::new(),
        implicit_dests: Vec::new(),
        known: entry.is_some(),
        reads_memory: false,
        writes_memory: false,
    };
    if let Some(e) = entry {
        for op in &e.implicit_src {
            let op = resolve_implicit(*op, width);
            instr.reads_memory |= matches!(op, Operand::Memory { .. });
            push_unique(&mut instr.implicit_sources, &[], op);
        }
        for op in &e.implicit_dst {
            let op = resolve_implicit(*op, width);
            instr.writes_memory |= matches!(op, Operand::Memory { .. });
            push_unique(&mut instr.implicit_dests, &[], op);
        }
    }
    for ((op, _), access) in parsed.into_iter().zip(accesses) {
        let is_mem = matches!(op, Operand::Memory { .. });
        if access.reads() {
            instr.reads_memory |= is_mem && access != Access::Address;
            push_unique(&mut instr.explicit_sources, &instr.implicit_sources, op.clone());
        }
        if access.writes() {
            instr.writes_memory |= is_mem;
            push_unique(&mut instr.explicit_dests, &instr.implicit_dests, op);
        }
    }
    Ok(instr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> IsaSpec {
        IsaSpec::bundled()
    }

    #[test]
    fn mul_expands_implicit_accumulator() {
        let i = parse_instruction("mul ecx", &spec(), ParseMode::Strict).unwrap();
        let srcs: Vec<_> = i.sources().cloned().collect();
        assert_eq!(srcs, vec![Operand::reg("eax"), Operand::reg("ecx")]);
        let dsts: Vec<_> = i.dests().filter(|o| **o != Operand::reg("flags")).cloned().collect();
        assert_eq!(dsts, vec![Operand::reg("edx"), Operand::reg("eax")]);
    }

    #[test]
    fn mul_width_follows_operand() {
        let i = parse_instruction("mul rcx", &spec(), ParseMode::Strict).unwrap();
        assert_eq!(i.implicit_sources, vec![Operand::reg("rax")]);
        let i = parse_instruction("mul byte ptr [rbx]", &spec(), ParseMode::Strict).unwrap();
        assert_eq!(i.implicit_sources, vec![Operand::reg("al")]);
        assert!(i.reads_memory);
    }

    #[test]
    fn nop_has_no_operands() {
        let i = parse_instruction("nop", &spec(), ParseMode::Strict).unwrap();
        assert_eq!(i.opcode, "nop");
        assert_eq!(i.sources().count(), 0);
        assert_eq!(i.dests().count(), 0);
    }

    #[test]
    fn add_with_memory_source() {
        let i = parse_instruction("add rax, qword ptr [rbx+8]", &spec(), ParseMode::Strict)
            .unwrap();
        assert_eq!(i.explicit_sources, vec![Operand::reg("rax"), Operand::mem(&["rbx"], true)]);
        assert_eq!(i.explicit_dests, vec![Operand::reg("rax")]);
        assert!(i.reads_memory && !i.writes_memory);
    }

    #[test]
    fn lea_does_not_read_memory() {
        let i = parse_instruction("lea rax, [rbx+rcx*4-0x10]", &spec(), ParseMode::Strict)
            .unwrap();
        assert_eq!(i.explicit_sources, vec![Operand::mem(&["rbx", "rcx"], true)]);
        assert!(!i.reads_memory);
    }

    #[test]
    fn store_and_push() {
        let i = parse_instruction("mov qword ptr [rsp+8], rdi", &spec(), ParseMode::Strict)
            .unwrap();
        assert!(i.writes_memory && !i.reads_memory);
        assert_eq!(i.explicit_dests, vec![Operand::mem(&["rsp"], true)]);
        let p = parse_instruction("push rax", &spec(), ParseMode::Strict).unwrap();
        assert_eq!(p.implicit_sources, vec![Operand::reg("rsp")]);
        assert_eq!(p.implicit_dests, vec![Operand::reg("rsp"), Operand::mem(&["rsp"], false)]);
        assert!(p.writes_memory);
    }

    #[test]
    fn duplicates_collapse() {
        let i = parse_instruction("xor eax, eax", &spec(), ParseMode::Strict).unwrap();
        assert_eq!(i.explicit_sources, vec![Operand::reg("eax")]);
        let m = parse_instruction("mul eax", &spec(), ParseMode::Strict).unwrap();
        assert_eq!(m.sources().count(), 1);
    }

    #[test]
    fn unknown_opcode_modes() {
        let err = parse_instruction("frobnicate rax", &spec(), ParseMode::Strict).unwrap_err();
        assert!(matches!(err, IsaError::UnknownOpcode(ref o) if o == "frobnicate"));
        let i = parse_instruction("frobnicate rax, rbx", &spec(), ParseMode::Lenient).unwrap();
        assert!(!i.known);
        assert_eq!(i.explicit_dests, vec![Operand::reg("rax")]);
        assert_eq!(i.explicit_sources.len(), 2);
    }

    #[test]
    fn arity_mismatch_is_strict_error() {
        let err = parse_instruction("add rax", &spec(), ParseMode::Strict).unwrap_err();
        assert!(matches!(err, IsaError::OperandCount { got: 1, .. }));
        assert!(parse_instruction("add rax", &spec(), ParseMode::Lenient).is_ok());
    }

    #[test]
    fn malformed_operands() {
        for bad in ["add rax, [rbx+", "add rax, ]", "add rax, @@", "add rax, [rbx*rcx]", "add , rax"]
        {
            let err = parse_instruction(bad, &spec(), ParseMode::Lenient).unwrap_err();
            assert!(matches!(err, IsaError::MalformedOperand { .. }), "{bad}: {err:?}");
        }
    }

    #[test]
    fn constants_and_segments() {
        let (op, _) = parse_operand("0ffh").unwrap();
        assert_eq!(op, Operand::Constant);
        let (op, _) = parse_operand("-0x10").unwrap();
        assert_eq!(op, Operand::Constant);
        let (op, w) = parse_operand("qword ptr fs:[0x28]").unwrap();
        assert_eq!(op, Operand::mem(&["fs"], true));
        assert_eq!(w, Some(64));
        let (op, _) = parse_operand("[rip+counter]").unwrap();
        assert_eq!(op, Operand::mem(&["rip"], true));
        let (op, _) = parse_operand("[-8+rbp]").unwrap();
        assert_eq!(op, Operand::mem(&["rbp"], true));
    }

    #[test]
    fn prefixes_are_dropped() {
        let i = parse_instruction("lock add dword ptr [rax], 1", &spec(), ParseMode::Strict)
            .unwrap();
        assert_eq!(i.opcode, "add");
        assert!(i.reads_memory && i.writes_memory);
    }

    #[test]
    fn branch_detection() {
        for op in ["jmp", "jne", "call", "ret", "loopne", "JE"] {
            assert!(is_branch_opcode(op), "{op}");
        }
        for op in ["mov", "add", "cmovne", "sete"] {
            assert!(!is_branch_opcode(op), "{op}");
        }
    }
}
