//! Recursive-descent recognizer for canonical token strings.
//!
//! ```text
//! <block> ::= <instr>+
//! <instr> ::= opcode <S> <opnd>* <D> <opnd>* <E>
//! <opnd>  ::= register | <M> register* [CONST] </M> | CONST
//! ```
//!
//! Memory operands may carry a trailing `CONST` for their displacement and
//! must contain at least one inner token. The recognizer works on spellings
//! alone so it shares nothing with the tokenizer beyond the register names.

use crate::isa::Register;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarViolation {
    pub position: usize,
    pub expected: &'static str,
    pub found: Option<String>,
}

impl std::fmt::Display for GrammarViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.found {
            Some(t) => write!(f, "at token {}: expected {}, found `{t}`", self.position, self.expected),
            None => write!(f, "at token {}: expected {}, found end of input", self.position, self.expected),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Src,
    Dst,
    End,
    MemOpen,
    MemClose,
    Const,
    Register,
    Opcode,
}

fn classify(s: &str) -> Class {
    match s {
        "<S>" => Class::Src,
        "<D>" => Class::Dst,
        "<E>" => Class::End,
        "<M>" => Class::MemOpen,
        "</M>" => Class::MemClose,
        "CONST" => Class::Const,
        _ if Register::from_name(s).is_some() => Class::Register,
        _ => Class::Opcode,
    }
}

struct Parser<'a, S: AsRef<str>> {
    toks: &'a [S],
    pos: usize,
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn peek(&self) -> Option<Class> {
        self.toks.get(self.pos).map(|t| classify(t.as_ref()))
    }

    fn fail(&self, expected: &'static str) -> GrammarViolation {
        GrammarViolation {
            position: self.pos,
            expected,
            found: self.toks.get(self.pos).map(|t| t.as_ref().to_string()),
        }
    }

    fn expect(&mut self, class: Class, what: &'static str) -> Result<(), GrammarViolation> {
        if self.peek() == Some(class) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.fail(what))
        }
    }

    fn block(&mut self) -> Result<(), GrammarViolation> {
        self.instr()?;
        while self.pos < self.toks.len() {
            self.instr()?;
        }
        Ok(())
    }

    fn instr(&mut self) -> Result<(), GrammarViolation> {
        self.expect(Class::Opcode, "opcode")?;
        self.expect(Class::Src, "<S>")?;
        while self.opnd()? {}
        self.expect(Class::Dst, "<D>")?;
        while self.opnd()? {}
        self.expect(Class::End, "<E>")
    }

    /// Returns false without consuming when no operand starts here.
    fn opnd(&mut self) -> Result<bool, GrammarViolation> {
        match self.peek() {
            Some(Class::Register) | Some(Class::Const) => {
                self.pos += 1;
                Ok(true)
            }
            Some(Class::MemOpen) => {
                self.pos += 1;
                let start = self.pos;
                while self.peek() == Some(Class::Register) {
                    self.pos += 1;
                }
                if self.peek() == Some(Class::Const) {
                    self.pos += 1;
                }
                if self.pos == start {
                    return Err(self.fail("register or CONST inside memory operand"));
                }
                self.expect(Class::MemClose, "</M>")?;
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Checks a single instruction's token spellings.
pub fn check_instruction<S: AsRef<str>>(tokens: &[S]) -> Result<(), GrammarViolation> {
    let mut p = Parser { toks: tokens, pos: 0 };
    p.instr()?;
    if p.pos != tokens.len() {
        return Err(p.fail("end of instruction"));
    }
    Ok(())
}

/// Checks a whole block given as one flat spelling stream.
pub fn check_block<S: AsRef<str>>(tokens: &[S]) -> Result<(), GrammarViolation> {
    Parser { toks: tokens, pos: 0 }.block()
}
