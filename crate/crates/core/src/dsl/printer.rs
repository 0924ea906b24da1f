//! Pretty-printing back into concrete syntax. Re-parsing the output yields
//! the same AST.

use std::fmt::{self, Write};

use super::ast::{DecisionProgram, Expr, Stmt, UnaryOp};

const UNARY_PREC: u8 = 6;

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Int(v) if *v < 0 => UNARY_PREC,
        Expr::Int(_) | Expr::Var(_) => 7,
        Expr::Unary(..) => UNARY_PREC,
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Ite(..) => 0,
    }
}

fn write_operand(out: &mut String, e: &Expr, parenthesize: bool) {
    if parenthesize {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

pub fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(name) => out.push_str(name),
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Not => '!',
            });
            // `-3` would re-parse as a literal, and `--x` is fine but `- -3` is not
            let wrap = expr_prec(inner) < UNARY_PREC || matches!(**inner, Expr::Int(_));
            write_operand(out, inner, wrap);
        }
        Expr::Binary(op, lhs, rhs) => {
            let prec = op.precedence();
            let left_wrap = if op.is_comparison() {
                expr_prec(lhs) <= prec
            } else {
                expr_prec(lhs) < prec
            };
            write_operand(out, lhs, left_wrap);
            let _ = write!(out, " {} ", op.symbol());
            write_operand(out, rhs, expr_prec(rhs) <= prec);
        }
        Expr::Ite(c, a, b) => {
            out.push_str("if ");
            write_expr(out, c);
            out.push_str(" then ");
            write_expr(out, a);
            out.push_str(" else ");
            write_expr(out, b);
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self);
        f.write_str(&s)
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    match s {
        Stmt::Assign { name, value } => {
            let _ = writeln!(out, "{pad}let {name} = {value};");
        }
        Stmt::Return(e) => {
            let _ = writeln!(out, "{pad}return {e};");
        }
        Stmt::If { .. } => {
            out.push_str(&pad);
            write_if(out, s, depth);
            out.push('\n');
        }
    }
}

fn write_if(out: &mut String, s: &Stmt, depth: usize) {
    let Stmt::If {
        cond,
        then_branch,
        else_branch,
    } = s
    else {
        unreachable!()
    };
    let pad = "  ".repeat(depth);
    // a leading `if` inside the condition would be read as a conditional expression
    let _ = writeln!(out, "if ({cond}) {{");
    write_block(out, then_branch, depth + 1);
    out.push_str(&pad);
    out.push('}');
    match else_branch.as_slice() {
        [] => {}
        [nested @ Stmt::If { .. }] => {
            out.push_str(" else ");
            write_if(out, nested, depth);
        }
        other => {
            out.push_str(" else {\n");
            write_block(out, other, depth + 1);
            out.push_str(&pad);
            out.push('}');
        }
    }
}

impl fmt::Display for DecisionProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for (name, value) in &self.consts {
            let _ = writeln!(out, "const {name} = {value};");
        }
        if !self.consts.is_empty() {
            out.push('\n');
        }
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| match &p.domain {
                Some(d) => format!("{}: {d}", p.name),
                None => p.name.clone(),
            })
            .collect();
        let _ = writeln!(out, "program {}({}) {{", self.name, params.join(", "));
        write_block(&mut out, &self.body, 1);
        out.push_str("}\n");
        f.write_str(&out)
    }
}
