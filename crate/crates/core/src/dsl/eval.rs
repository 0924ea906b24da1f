//! Slot-resolved program form and its interpreter.

use super::ast::{BinaryOp, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Code {
    Const(i64),
    Slot(usize),
    Unary(UnaryOp, Box<Code>),
    Binary(BinaryOp, Box<Code>, Box<Code>),
    Ite(Box<Code>, Box<Code>, Box<Code>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Instr {
    Assign(usize, Code),
    If(Code, Vec<Instr>, Vec<Instr>),
    Return(Code),
}

pub(crate) fn apply_binary(op: BinaryOp, a: i64, b: i64) -> i64 {
    match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Eq => (a == b) as i64,
        BinaryOp::Ne => (a != b) as i64,
        BinaryOp::Lt => (a < b) as i64,
        BinaryOp::Le => (a <= b) as i64,
        BinaryOp::Gt => (a > b) as i64,
        BinaryOp::Ge => (a >= b) as i64,
        BinaryOp::And => (a != 0 && b != 0) as i64,
        BinaryOp::Or => (a != 0 || b != 0) as i64,
    }
}

pub(crate) fn apply_unary(op: UnaryOp, a: i64) -> i64 {
    match op {
        UnaryOp::Neg => -a,
        UnaryOp::Not => (a == 0) as i64,
    }
}

impl Code {
    pub(crate) fn eval(&self, env: &[i64]) -> i64 {
        match self {
            Code::Const(v) => *v,
            Code::Slot(s) => env[*s],
            Code::Unary(op, e) => apply_unary(*op, e.eval(env)),
            Code::Binary(op, a, b) => apply_binary(*op, a.eval(env), b.eval(env)),
            Code::Ite(c, a, b) => {
                if c.eval(env) != 0 {
                    a.eval(env)
                } else {
                    b.eval(env)
                }
            }
        }
    }
}

/// Runs `body`; `None` only if control falls off the end, which the
/// typechecker rules out.
pub(crate) fn exec(body: &[Instr], env: &mut [i64]) -> Option<i64> {
    for instr in body {
        match instr {
            Instr::Assign(slot, e) => env[*slot] = e.eval(env),
            Instr::If(c, then_branch, else_branch) => {
                let branch = if c.eval(env) != 0 { then_branch } else { else_branch };
                if let Some(v) = exec(branch, env) {
                    return Some(v);
                }
            }
            Instr::Return(e) => return Some(e.eval(env)),
        }
    }
    None
}
