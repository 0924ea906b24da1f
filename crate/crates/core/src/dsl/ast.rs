use crate::spaces::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    pub const ALL: [BinaryOp; 11] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
        BinaryOp::And,
        BinaryOp::Or,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// `if c then a else b`
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn ite(cond: Expr, then: Expr, otherwise: Expr) -> Expr {
        Expr::Ite(Box::new(cond), Box::new(then), Box::new(otherwise))
    }

    /// Rewrites every variable reference through `f`.
    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Expr {
        match self {
            Expr::Int(v) => Expr::Int(*v),
            Expr::Var(name) => Expr::Var(f(name)),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.rename(f))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.rename(f)), Box::new(b.rename(f))),
            Expr::Ite(c, a, b) => Expr::Ite(
                Box::new(c.rename(f)),
                Box::new(a.rename(f)),
                Box::new(b.rename(f)),
            ),
        }
    }

    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(name) => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Unary(_, e) => e.variables(out),
            Expr::Binary(_, a, b) => {
                a.variables(out);
                b.variables(out);
            }
            Expr::Ite(c, a, b) => {
                c.variables(out);
                a.variables(out);
                b.variables(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Assign {
        name: String,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    Return(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    /// Optional declared domain; the analysis space must stay inside it.
    pub domain: Option<Domain>,
}

/// Parsed, not yet checked, decision program.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecisionProgram {
    pub name: String,
    pub consts: Vec<(String, i64)>,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
}

impl DecisionProgram {
    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    /// Overrides the values of declared constants.
    pub fn with_constants<'a>(
        &self,
        overrides: impl IntoIterator<Item = (&'a str, i64)>,
    ) -> crate::Result<DecisionProgram> {
        let mut out = self.clone();
        for (name, value) in overrides {
            match out.consts.iter_mut().find(|(n, _)| n == name) {
                Some(slot) => slot.1 = value,
                None => {
                    return Err(crate::Error::Config(format!(
                        "program `{}` declares no constant `{name}`",
                        self.name
                    )))
                }
            }
        }
        Ok(out)
    }
}
