use super::circuit::{Bit, Circuit, Role, Word, FALSE, TRUE};
use crate::dsl::eval::{Code, Instr};
use crate::dsl::{BinaryOp, UnaryOp, ValidatedProgram};
use crate::error::{Error, Result};
use crate::grid::ensure_matches;
use crate::spaces::{Domain, InputSpace};

fn encodable(name: &str, v: i64) -> Result<()> {
    if i32::try_from(v).is_err() {
        return Err(Error::WidthOverflow {
            name: name.to_string(),
            value: v,
        });
    }
    Ok(())
}

fn in_domain(c: &mut Circuit, x: &[Bit], d: &Domain) -> Bit {
    match d {
        Domain::Range { lo, hi } => {
            let lo = c.const_word(*lo);
            let hi = c.const_word(*hi);
            let below = c.slt(x, &lo);
            let above = c.slt(&hi, x);
            let out = c.or(below, above);
            c.not(out)
        }
        Domain::Set(values) => {
            let mut any = FALSE;
            for v in values {
                let k = c.const_word(*v);
                let e = c.eq(x, &k);
                any = c.or(any, e);
            }
            any
        }
    }
}

struct Blaster<'c> {
    c: &'c mut Circuit,
    result: Word,
}

impl Blaster<'_> {
    fn expr(&mut self, e: &Code, env: &[Word]) -> Word {
        match e {
            Code::Const(v) => self.c.const_word(*v),
            Code::Slot(s) => env[*s].clone(),
            Code::Unary(op, a) => {
                let a = self.expr(a, env);
                match op {
                    UnaryOp::Neg => self.c.neg(&a),
                    UnaryOp::Not => {
                        let nz = self.c.nonzero(&a);
                        let z = self.c.not(nz);
                        self.c.bool_word(z)
                    }
                }
            }
            Code::Binary(op, a, b) => {
                let a = self.expr(a, env);
                let b = self.expr(b, env);
                let c = &mut *self.c;
                match op {
                    BinaryOp::Add => c.add(&a, &b),
                    BinaryOp::Sub => c.sub(&a, &b),
                    BinaryOp::Mul => c.mul(&a, &b),
                    _ => {
                        let bit = match op {
                            BinaryOp::Eq => c.eq(&a, &b),
                            BinaryOp::Ne => {
                                let e = c.eq(&a, &b);
                                c.not(e)
                            }
                            BinaryOp::Lt => c.slt(&a, &b),
                            BinaryOp::Gt => c.slt(&b, &a),
                            BinaryOp::Le => {
                                let gt = c.slt(&b, &a);
                                c.not(gt)
                            }
                            BinaryOp::Ge => {
                                let lt = c.slt(&a, &b);
                                c.not(lt)
                            }
                            BinaryOp::And => {
                                let x = c.nonzero(&a);
                                let y = c.nonzero(&b);
                                c.and(x, y)
                            }
                            BinaryOp::Or => {
                                let x = c.nonzero(&a);
                                let y = c.nonzero(&b);
                                c.or(x, y)
                            }
                            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul => unreachable!(),
                        };
                        c.bool_word(bit)
                    }
                }
            }
            Code::Ite(cond, a, b) => {
                let cw = self.expr(cond, env);
                let a = self.expr(a, env);
                let b = self.expr(b, env);
                let cb = self.c.nonzero(&cw);
                self.c.mux_word(cb, &a, &b)
            }
        }
    }

    /// Returns the condition under which control falls through the block.
    fn block(&mut self, body: &[Instr], env: &mut Vec<Word>, live: Bit) -> Bit {
        let mut live = live;
        for instr in body {
            if live == FALSE {
                break;
            }
            match instr {
                Instr::Assign(slot, e) => env[*slot] = self.expr(e, env),
                Instr::Return(e) => {
                    let v = self.expr(e, env);
                    self.result = self.c.mux_word(live, &v, &self.result.clone());
                    return FALSE;
                }
                Instr::If(cond, then_branch, else_branch) => {
                    let cw = self.expr(cond, env);
                    let cb = self.c.nonzero(&cw);
                    let ncb = self.c.not(cb);
                    let mut then_env = env.clone();
                    let t_live = self.c.and(live, cb);
                    let t_out = self.block(then_branch, &mut then_env, t_live);
                    let e_live = self.c.and(live, ncb);
                    let e_out = self.block(else_branch, env, e_live);
                    for (slot, w) in then_env.into_iter().enumerate() {
                        if w != env[slot] {
                            env[slot] = self.c.mux_word(cb, &w, &env[slot].clone());
                        }
                    }
                    live = self.c.or(t_out, e_out);
                }
            }
        }
        live
    }
}

/// Compiles a program checked against `space` into a circuit whose inputs
/// are the space's variables (protected first) and whose output word is the
/// decision.
pub fn bitblast(p: &ValidatedProgram, space: &InputSpace) -> Result<Circuit> {
    ensure_matches(p, space)?;
    for (name, d) in p.inputs() {
        encodable(name, d.min())?;
        encodable(name, d.max())?;
    }
    let mut c = Circuit::new();
    let mut env: Vec<Word> = vec![c.const_word(0); p.slots().len()];
    for (k, (name, domain)) in p.inputs().iter().enumerate() {
        let role = if k == 0 { Role::Group } else { Role::Unprotected };
        let w = c.add_input(name, role);
        let ok = in_domain(&mut c, &w, domain);
        if ok != TRUE {
            c.side_conditions.push(ok);
        }
        env[p.layout()[k]] = w;
    }
    let mut b = Blaster {
        result: c.const_word(0),
        c: &mut c,
    };
    b.block(p.body(), &mut env, TRUE);
    let result = b.result;
    c.outputs = result;
    Ok(c)
}
