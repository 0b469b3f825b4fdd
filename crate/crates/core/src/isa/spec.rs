//! ISA description table: implicit operands, explicit operand signatures and
//! the latency/port metadata consumed by the synthetic machine model.
//!
//! One opcode per line:
//!
//! ```text
//! mul ; implicit_src=%a ; implicit_dst=%d,%a,flags ; ops=r:gm ; lat=3 ; ports=1
//! ```
//!
//! `implicit_src`/`implicit_dst` list register names, `[reg]` for an implicit
//! memory operand, or `%a`/`%b`/`%c`/`%d` for the accumulator-style family
//! sized to the width of the first explicit operand. `ops` lists the accepted
//! explicit operand forms separated by `|` (`none` for zero operands); each
//! slot is `access[:kinds]` where access is one of `r`, `w`, `rw`, `a`
//! (address only, e.g. `lea`) and kinds draws from `g` (32/64-bit GPR),
//! `b` (8-bit GPR), `c` (`cl`), `x` (xmm), `y` (ymm), `i` (immediate),
//! `m` (memory). Kinds only steer the synthetic generator.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use super::register::Register;
use super::IsaError;

const BUNDLED: &str = include_str!("../../data/isa.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    Write,
    ReadWrite,
    /// Memory operand whose address is computed but not dereferenced.
    Address,
}

impl Access {
    pub fn reads(self) -> bool {
        matches!(self, Access::Read | Access::ReadWrite | Access::Address)
    }

    pub fn writes(self) -> bool {
        matches!(self, Access::Write | Access::ReadWrite)
    }
}

/// Operand kinds a slot admits, as a bit set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KindSet(u8);

impl KindSet {
    pub const GPR: KindSet = KindSet(1);
    pub const GPR8: KindSet = KindSet(2);
    pub const CL: KindSet = KindSet(4);
    pub const XMM: KindSet = KindSet(8);
    pub const YMM: KindSet = KindSet(16);
    pub const IMM: KindSet = KindSet(32);
    pub const MEM: KindSet = KindSet(64);
    pub const ANY: KindSet = KindSet(127);

    pub fn contains(self, other: KindSet) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    pub fn without(self, other: KindSet) -> KindSet {
        KindSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The individual kinds in this set.
    pub fn members(self) -> impl Iterator<Item = KindSet> {
        (0..7).map(|b| KindSet(1 << b)).filter(move |k| self.contains(*k))
    }

    fn parse(s: &str) -> Option<KindSet> {
        let mut bits = 0u8;
        for ch in s.chars() {
            bits |= match ch {
                'g' => 1,
                'b' => 2,
                'c' => 4,
                'x' => 8,
                'y' => 16,
                'i' => 32,
                'm' => 64,
                _ => return None,
            };
        }
        Some(KindSet(bits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperandSlot {
    pub access: Access,
    pub kinds: KindSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperandForm(pub Vec<OperandSlot>);

impl OperandForm {
    pub fn arity(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImplicitOperand {
    Reg(Register),
    /// A register family resolved to the explicit operand width.
    Sized { family: u8 },
    /// Memory addressed through a register, e.g. `[rsp]` for `push`.
    Mem(Register),
}

impl ImplicitOperand {
    fn parse(s: &str) -> Option<ImplicitOperand> {
        if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            return Register::from_name(inner.trim()).map(ImplicitOperand::Mem);
        }
        if let Some(letter) = s.strip_prefix('%') {
            let family = match letter {
                "a" => 0,
                "c" => 1,
                "d" => 2,
                "b" => 3,
                _ => return None,
            };
            return Some(ImplicitOperand::Sized { family });
        }
        Register::from_name(s).map(ImplicitOperand::Reg)
    }
}

impl fmt::Display for ImplicitOperand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImplicitOperand::Reg(r) => write!(f, "{r}"),
            ImplicitOperand::Sized { family } => {
                let letter = ["a", "c", "d", "b"][*family as usize];
                write!(f, "%{letter}")
            }
            ImplicitOperand::Mem(r) => write!(f, "[{r}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpcodeEntry {
    pub opcode: String,
    pub implicit_src: Vec<ImplicitOperand>,
    pub implicit_dst: Vec<ImplicitOperand>,
    pub forms: Vec<OperandForm>,
    pub latency: Option<u32>,
    pub ports: Option<Vec<u8>>,
}

impl OpcodeEntry {
    pub fn form_for_arity(&self, arity: usize) -> Option<&OperandForm> {
        self.forms.iter().find(|f| f.arity() == arity)
    }
}

#[derive(Debug, Clone, Default)]
pub struct IsaSpec {
    entries: HashMap<String, OpcodeEntry>,
    order: Vec<String>,
}

impl IsaSpec {
    /// The opcode table shipped with the crate.
    pub fn bundled() -> IsaSpec {
        IsaSpec::parse(BUNDLED).expect("bundled ISA table is well formed")
    }

    pub fn load(path: &Path) -> Result<IsaSpec, IsaError> {
        let text = std::fs::read_to_string(path).map_err(|e| IsaError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        IsaSpec::parse(&text)
    }

    pub fn parse(text: &str) -> Result<IsaSpec, IsaError> {
        let mut spec = IsaSpec::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let entry = parse_entry(line).map_err(|msg| IsaError::SpecSyntax {
                line: lineno + 1,
                msg,
            })?;
            if spec.entries.contains_key(&entry.opcode) {
                return Err(IsaError::SpecSyntax {
                    line: lineno + 1,
                    msg: format!("duplicate opcode `{}`", entry.opcode),
                });
            }
            spec.order.push(entry.opcode.clone());
            spec.entries.insert(entry.opcode.clone(), entry);
        }
        Ok(spec)
    }

    pub fn get(&self, opcode: &str) -> Option<&OpcodeEntry> {
        self.entries.get(opcode)
    }

    pub fn contains(&self, opcode: &str) -> bool {
        self.entries.contains_key(opcode)
    }

    /// Entries in file order.
    pub fn entries(&self) -> impl Iterator<Item = &OpcodeEntry> {
        self.order.iter().map(move |k| &self.entries[k])
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Serializes back to the line format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in self.entries() {
            let join = |ops: &[ImplicitOperand]| {
                ops.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(",")
            };
            out.push_str(&format!(
                "{} ; implicit_src={} ; implicit_dst={} ; ops={}",
                e.opcode,
                join(&e.implicit_src),
                join(&e.implicit_dst),
                format_forms(&e.forms)
            ));
            if let Some(lat) = e.latency {
                out.push_str(&format!(" ; lat={lat}"));
            }
            if let Some(ports) = &e.ports {
                let p: Vec<String> = ports.iter().map(|p| p.to_string()).collect();
                out.push_str(&format!(" ; ports={}", p.join(",")));
            }
            out.push('\n');
        }
        out
    }
}

fn format_forms(forms: &[OperandForm]) -> String {
    let fmt_kinds = |k: KindSet| -> String {
        if k == KindSet::ANY {
            return String::new();
        }
        let letters = ['g', 'b', 'c', 'x', 'y', 'i', 'm'];
        let s: String = (0..7).filter(|b| k.0 & (1 << b) != 0).map(|b| letters[b]).collect();
        format!(":{s}")
    };
    forms
        .iter()
        .map(|form| {
            if form.0.is_empty() {
                return "none".to_string();
            }
            form.0
                .iter()
                .map(|slot| {
                    let a = match slot.access {
                        Access::Read => "r",
                        Access::Write => "w",
                        Access::ReadWrite => "rw",
                        Access::Address => "a",
                    };
                    format!("{a}{}", fmt_kinds(slot.kinds))
                })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("|")
}

fn parse_entry(line: &str) -> Result<OpcodeEntry, String> {
    let mut fields = line.split(';').map(str::trim);
    let opcode = fields.next().unwrap_or("").to_ascii_lowercase();
    if opcode.is_empty() || opcode.contains(char::is_whitespace) {
        return Err(format!("bad opcode field `{opcode}`"));
    }
    let mut entry = OpcodeEntry {
        opcode,
        implicit_src: Vec::new(),
        implicit_dst: Vec::new(),
        forms: vec![OperandForm(Vec::new())],
        latency: None,
        ports: None,
    };
    for field in fields {
        if field.is_empty() {
            continue;
        }
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("field `{field}` is not key=value"))?;
        let value = value.trim();
        match key.trim() {
            "implicit_src" => entry.implicit_src = parse_implicit(value)?,
            "implicit_dst" => entry.implicit_dst = parse_implicit(value)?,
            "ops" => entry.forms = parse_forms(value)?,
            "lat" => {
                entry.latency =
                    Some(value.parse().map_err(|_| format!("bad latency `{value}`"))?)
            }
            "ports" => {
                let ports: Result<Vec<u8>, _> =
                    value.split(',').map(|p| p.trim().parse::<u8>()).collect();
                let ports = ports.map_err(|_| format!("bad port list `{value}`"))?;
                if ports.is_empty() {
                    return Err("empty port list".into());
                }
                entry.ports = Some(ports);
            }
            other => return Err(format!("unknown field `{other}`")),
        }
    }
    for (what, list) in [("implicit_src", &entry.implicit_src), ("implicit_dst", &entry.implicit_dst)]
    {
        for (i, a) in list.iter().enumerate() {
            if list[..i].contains(a) {
                return Err(format!("{what} lists `{a}` twice"));
            }
        }
    }
    Ok(entry)
}

fn parse_implicit(value: &str) -> Result<Vec<ImplicitOperand>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| ImplicitOperand::parse(s).ok_or_else(|| format!("unknown implicit operand `{s}`")))
        .collect()
}

fn parse_forms(value: &str) -> Result<Vec<OperandForm>, String> {
    let mut forms = Vec::new();
    for alt in value.split('|').map(str::trim) {
        if alt.is_empty() || alt == "none" {
            forms.push(OperandForm(Vec::new()));
            continue;
        }
        let mut slots = Vec::new();
        for slot in alt.split(',').map(str::trim) {
            let (acc, kinds) = match slot.split_once(':') {
                Some((a, k)) => (a, Some(k)),
                None => (slot, None),
            };
            let access = match acc {
                "r" => Access::Read,
                "w" => Access::Write,
                "rw" => Access::ReadWrite,
                "a" => Access::Address,
                _ => return Err(format!("bad access `{acc}` in `{slot}`")),
            };
            let kinds = match kinds {
                Some(k) => KindSet::parse(k).ok_or_else(|| format!("bad kinds in `{slot}`"))?,
                None => KindSet::ANY,
            };
            slots.push(OperandSlot { access, kinds });
        }
        forms.push(OperandForm(slots));
    }
    for (i, f) in forms.iter().enumerate() {
        if forms[..i].iter().any(|g| g.arity() == f.arity()) {
            return Err(format!("two forms with arity {}", f.arity()));
        }
    }
    Ok(forms)
}
