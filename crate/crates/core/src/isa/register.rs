//! The closed x86-64 register set understood by the parser.
//!
//! Every register belongs to an alias family. Sub-registers (`rax`, `eax`,
//! `ax`, `al`, `ah`) share one family, as do `xmmN`/`ymmN`. Dependency
//! analysis works on families; tokens keep the syntactic name.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

/// Family indices below 16 are the general-purpose registers in encoding
/// order (`rax`, `rcx`, `rdx`, `rbx`, `rsp`, `rbp`, `rsi`, `rdi`, `r8`..`r15`).
pub const GPR_FAMILIES: u8 = 16;
pub const RIP_FAMILY: u8 = 16;
pub const VEC_FAMILY_BASE: u8 = 17;
pub const SEG_FAMILY_BASE: u8 = 33;
pub const FLAGS_FAMILY: u8 = 39;
pub const NUM_FAMILIES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegClass {
    General,
    InstructionPointer,
    Vector,
    Segment,
    Flags,
}

struct RegInfo {
    name: &'static str,
    family: u8,
    width: u16,
}

const GPR64: [&str; 16] = [
    "rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi", "r8", "r9", "r10", "r11", "r12", "r13",
    "r14", "r15",
];
const GPR32: [&str; 16] = [
    "eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi", "r8d", "r9d", "r10d", "r11d", "r12d",
    "r13d", "r14d", "r15d",
];
const GPR16: [&str; 16] = [
    "ax", "cx", "dx", "bx", "sp", "bp", "si", "di", "r8w", "r9w", "r10w", "r11w", "r12w", "r13w",
    "r14w", "r15w",
];
const GPR8: [&str; 16] = [
    "al", "cl", "dl", "bl", "spl", "bpl", "sil", "dil", "r8b", "r9b", "r10b", "r11b", "r12b",
    "r13b", "r14b", "r15b",
];
const GPR8_HIGH: [&str; 4] = ["ah", "ch", "dh", "bh"];
const XMM: [&str; 16] = [
    "xmm0", "xmm1", "xmm2", "xmm3", "xmm4", "xmm5", "xmm6", "xmm7", "xmm8", "xmm9", "xmm10",
    "xmm11", "xmm12", "xmm13", "xmm14", "xmm15",
];
const YMM: [&str; 16] = [
    "ymm0", "ymm1", "ymm2", "ymm3", "ymm4", "ymm5", "ymm6", "ymm7", "ymm8", "ymm9", "ymm10",
    "ymm11", "ymm12", "ymm13", "ymm14", "ymm15",
];
const SEGMENTS: [&str; 6] = ["es", "cs", "ss", "ds", "fs", "gs"];

fn table() -> &'static [RegInfo] {
    static TABLE: OnceLock<Vec<RegInfo>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(128);
        for (width, names) in [(64, &GPR64), (32, &GPR32), (16, &GPR16), (8, &GPR8)] {
            for (family, name) in names.iter().enumerate() {
                t.push(RegInfo { name, family: family as u8, width });
            }
        }
        for (family, name) in GPR8_HIGH.iter().enumerate() {
            t.push(RegInfo { name, family: family as u8, width: 8 });
        }
        t.push(RegInfo { name: "rip", family: RIP_FAMILY, width: 64 });
        for (width, names) in [(128, &XMM), (256, &YMM)] {
            for (i, name) in names.iter().enumerate() {
                t.push(RegInfo { name, family: VEC_FAMILY_BASE + i as u8, width });
            }
        }
        for (i, name) in SEGMENTS.iter().enumerate() {
            t.push(RegInfo { name, family: SEG_FAMILY_BASE + i as u8, width: 16 });
        }
        t.push(RegInfo { name: "flags", family: FLAGS_FAMILY, width: 64 });
        t
    })
}

fn by_name() -> &'static HashMap<&'static str, u8> {
    static MAP: OnceLock<HashMap<&'static str, u8>> = OnceLock::new();
    MAP.get_or_init(|| {
        let mut m: HashMap<&'static str, u8> =
            table().iter().enumerate().map(|(i, r)| (r.name, i as u8)).collect();
        // Alternate spellings of the flags register.
        let flags = m["flags"];
        m.insert("rflags", flags);
        m.insert("eflags", flags);
        m
    })
}

/// A register from the supported set.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Register(u8);

impl Register {
    pub fn from_name(name: &str) -> Option<Register> {
        let lower;
        let key = if name.bytes().any(|b| b.is_ascii_uppercase()) {
            lower = name.to_ascii_lowercase();
            lower.as_str()
        } else {
            name
        };
        by_name().get(key).copied().map(Register)
    }

    /// The register of `family` with the given bit width, if one exists.
    /// Width 8 resolves to the low byte register.
    pub fn in_family(family: u8, width: u16) -> Option<Register> {
        table()
            .iter()
            .position(|r| r.family == family && r.width == width)
            .map(|i| Register(i as u8))
    }

    /// High-byte register (`ah`, `ch`, `dh`, `bh`) of one of the first four
    /// families.
    pub fn high_byte(family: u8) -> Option<Register> {
        GPR8_HIGH.get(family as usize).and_then(|n| Register::from_name(n))
    }

    pub fn name(self) -> &'static str {
        table()[self.0 as usize].name
    }

    pub fn family(self) -> u8 {
        table()[self.0 as usize].family
    }

    pub fn width(self) -> u16 {
        table()[self.0 as usize].width
    }

    pub fn class(self) -> RegClass {
        match self.family() {
            f if f < GPR_FAMILIES => RegClass::General,
            RIP_FAMILY => RegClass::InstructionPointer,
            f if f < SEG_FAMILY_BASE => RegClass::Vector,
            FLAGS_FAMILY => RegClass::Flags,
            _ => RegClass::Segment,
        }
    }

    pub fn is_flags(self) -> bool {
        self.family() == FLAGS_FAMILY
    }

    pub fn aliases(self, other: Register) -> bool {
        self.family() == other.family()
    }

    pub fn all() -> impl Iterator<Item = Register> {
        (0..table().len() as u8).map(Register)
    }
}

impl fmt::Debug for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
