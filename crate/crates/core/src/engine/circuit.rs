//! Hash-consed boolean circuits with 32-bit two's-complement word operations.

use std::collections::{BTreeSet, HashMap};

pub const WIDTH: usize = 32;

/// Index of a gate in its circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bit(pub u32);

pub const FALSE: Bit = Bit(0);
pub const TRUE: Bit = Bit(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    Const(bool),
    Input { input: usize, bit: usize },
    Not(Bit),
    And(Bit, Bit),
    Or(Bit, Bit),
    Xor(Bit, Bit),
}

/// Which projection set an input's bits belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Group,
    Unprotected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputWord {
    pub name: String,
    pub role: Role,
    pub bits: Vec<Bit>,
}

/// Least significant bit first.
pub type Word = Vec<Bit>;

/// Operands always precede the gates that use them, so the gate list is a
/// topological order.
#[derive(Debug, Clone, Default)]
pub struct Circuit {
    gates: Vec<Gate>,
    cache: HashMap<Gate, Bit>,
    pub inputs: Vec<InputWord>,
    /// The decision word.
    pub outputs: Word,
    /// Bits that must be true for the inputs to lie in their domains.
    pub side_conditions: Vec<Bit>,
}

impl Circuit {
    pub fn new() -> Self {
        let mut c = Circuit::default();
        c.intern(Gate::Const(false));
        c.intern(Gate::Const(true));
        c
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, b: Bit) -> Gate {
        self.gates[b.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.len() <= 2
    }

    fn intern(&mut self, g: Gate) -> Bit {
        if let Some(b) = self.cache.get(&g) {
            return *b;
        }
        let b = Bit(self.gates.len() as u32);
        self.gates.push(g);
        self.cache.insert(g, b);
        b
    }

    pub fn constant(&self, v: bool) -> Bit {
        if v {
            TRUE
        } else {
            FALSE
        }
    }

    pub fn add_input(&mut self, name: &str, role: Role) -> Word {
        let input = self.inputs.len();
        let bits: Word = (0..WIDTH).map(|bit| self.intern(Gate::Input { input, bit })).collect();
        self.inputs.push(InputWord {
            name: name.to_string(),
            role,
            bits: bits.clone(),
        });
        bits
    }

    pub fn not(&mut self, a: Bit) -> Bit {
        match self.gate(a) {
            Gate::Const(v) => self.constant(!v),
            Gate::Not(x) => x,
            _ => self.intern(Gate::Not(a)),
        }
    }

    fn is_negation(&self, a: Bit, b: Bit) -> bool {
        self.gate(a) == Gate::Not(b) || self.gate(b) == Gate::Not(a)
    }

    pub fn and(&mut self, a: Bit, b: Bit) -> Bit {
        let (a, b) = (a.min(b), a.max(b));
        match (self.gate(a), self.gate(b)) {
            (Gate::Const(false), _) | (_, Gate::Const(false)) => FALSE,
            (Gate::Const(true), _) => b,
            (_, Gate::Const(true)) => a,
            _ if a == b => a,
            _ if self.is_negation(a, b) => FALSE,
            _ => self.intern(Gate::And(a, b)),
        }
    }

    pub fn or(&mut self, a: Bit, b: Bit) -> Bit {
        let (a, b) = (a.min(b), a.max(b));
        match (self.gate(a), self.gate(b)) {
            (Gate::Const(true), _) | (_, Gate::Const(true)) => TRUE,
            (Gate::Const(false), _) => b,
            (_, Gate::Const(false)) => a,
            _ if a == b => a,
            _ if self.is_negation(a, b) => TRUE,
            _ => self.intern(Gate::Or(a, b)),
        }
    }

    pub fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        let (a, b) = (a.min(b), a.max(b));
        match (self.gate(a), self.gate(b)) {
            (Gate::Const(false), _) => b,
            (_, Gate::Const(false)) => a,
            (Gate::Const(true), _) => self.not(b),
            (_, Gate::Const(true)) => self.not(a),
            _ if a == b => FALSE,
            _ if self.is_negation(a, b) => TRUE,
            _ => self.intern(Gate::Xor(a, b)),
        }
    }

    pub fn mux(&mut self, c: Bit, a: Bit, b: Bit) -> Bit {
        if a == b {
            return a;
        }
        let nc = self.not(c);
        let x = self.and(c, a);
        let y = self.and(nc, b);
        self.or(x, y)
    }

    pub fn const_word(&self, v: i64) -> Word {
        (0..WIDTH).map(|i| self.constant((v >> i) & 1 == 1)).collect()
    }

    /// A boolean as the word 0 or 1.
    pub fn bool_word(&self, b: Bit) -> Word {
        let mut w = vec![FALSE; WIDTH];
        w[0] = b;
        w
    }

    fn full_add(&mut self, a: Bit, b: Bit, c: Bit) -> (Bit, Bit) {
        let ab = self.xor(a, b);
        let sum = self.xor(ab, c);
        let x = self.and(a, b);
        let y = self.and(ab, c);
        (sum, self.or(x, y))
    }

    fn add_with_carry(&mut self, a: &[Bit], b: &[Bit], mut carry: Bit) -> Word {
        let mut out = Vec::with_capacity(WIDTH);
        for i in 0..WIDTH {
            let (s, c) = self.full_add(a[i], b[i], carry);
            out.push(s);
            carry = c;
        }
        out
    }

    pub fn add(&mut self, a: &[Bit], b: &[Bit]) -> Word {
        self.add_with_carry(a, b, FALSE)
    }

    pub fn not_word(&mut self, a: &[Bit]) -> Word {
        a.iter().map(|x| self.not(*x)).collect()
    }

    pub fn sub(&mut self, a: &[Bit], b: &[Bit]) -> Word {
        let nb = self.not_word(b);
        self.add_with_carry(a, &nb, TRUE)
    }

    pub fn neg(&mut self, a: &[Bit]) -> Word {
        let zero = self.const_word(0);
        self.sub(&zero, a)
    }

    /// Product modulo 2³², by shift-and-add.
    pub fn mul(&mut self, a: &[Bit], b: &[Bit]) -> Word {
        let mut acc = self.const_word(0);
        for (i, bi) in b.iter().enumerate() {
            if *bi == FALSE {
                continue;
            }
            let mut partial = vec![FALSE; WIDTH];
            for j in 0..WIDTH - i {
                partial[i + j] = self.and(a[j], *bi);
            }
            acc = self.add(&acc, &partial);
        }
        acc
    }

    pub fn eq(&mut self, a: &[Bit], b: &[Bit]) -> Bit {
        let mut acc = TRUE;
        for i in 0..WIDTH {
            let d = self.xor(a[i], b[i]);
            let same = self.not(d);
            acc = self.and(acc, same);
        }
        acc
    }

    /// Signed `a < b`.
    pub fn slt(&mut self, a: &[Bit], b: &[Bit]) -> Bit {
        let diff = self.sub(a, b);
        let sa = a[WIDTH - 1];
        let sb = b[WIDTH - 1];
        let signs_differ = self.xor(sa, sb);
        self.mux(signs_differ, sa, diff[WIDTH - 1])
    }

    pub fn nonzero(&mut self, a: &[Bit]) -> Bit {
        a.iter().fold(FALSE, |acc, x| self.or(acc, *x))
    }

    pub fn mux_word(&mut self, c: Bit, a: &[Bit], b: &[Bit]) -> Word {
        (0..WIDTH).map(|i| self.mux(c, a[i], b[i])).collect()
    }

    /// Values of every gate under 64 input assignments at once; `inputs[k]`
    /// holds 64 values of input word `k`.
    pub fn simulate64(&self, inputs: &[[i64; 64]]) -> Vec<u64> {
        let mut values = vec![0u64; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            values[i] = match *g {
                Gate::Const(v) => {
                    if v {
                        !0
                    } else {
                        0
                    }
                }
                Gate::Input { input, bit } => {
                    let mut m = 0u64;
                    for (lane, v) in inputs[input].iter().enumerate() {
                        m |= (((*v >> bit) & 1) as u64) << lane;
                    }
                    m
                }
                Gate::Not(a) => !values[a.0 as usize],
                Gate::And(a, b) => values[a.0 as usize] & values[b.0 as usize],
                Gate::Or(a, b) => values[a.0 as usize] | values[b.0 as usize],
                Gate::Xor(a, b) => values[a.0 as usize] ^ values[b.0 as usize],
            };
        }
        values
    }

    /// Decodes a word from simulated gate values at one lane.
    pub fn word_value(values: &[u64], word: &[Bit], lane: usize) -> i64 {
        let mut v: u32 = 0;
        for (i, b) in word.iter().enumerate() {
            v |= (((values[b.0 as usize] >> lane) & 1) as u32) << i;
        }
        v as i32 as i64
    }

    /// The decision and side-condition value for one assignment of the inputs.
    pub fn simulate(&self, inputs: &[i64]) -> (i64, bool) {
        let lanes: Vec<[i64; 64]> = inputs.iter().map(|v| [*v; 64]).collect();
        let values = self.simulate64(&lanes);
        let ok = self
            .side_conditions
            .iter()
            .all(|b| values[b.0 as usize] & 1 == 1);
        (Self::word_value(&values, &self.outputs, 0), ok)
    }

    /// Input words the given bit depends on.
    pub fn support(&self, b: Bit) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut seen = vec![false; self.gates.len()];
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            if std::mem::replace(&mut seen[x.0 as usize], true) {
                continue;
            }
            match self.gate(x) {
                Gate::Const(_) => {}
                Gate::Input { input, .. } => {
                    out.insert(input);
                }
                Gate::Not(a) => stack.push(a),
                Gate::And(a, c) | Gate::Or(a, c) | Gate::Xor(a, c) => {
                    stack.push(a);
                    stack.push(c);
                }
            }
        }
        out
    }

    /// Flips the decision's low bit exactly at the given input assignment,
    /// to exercise the cross-checking harness.
    pub fn inject_fault(&mut self, at: &[i64]) {
        let words: Vec<Word> = self.inputs.iter().map(|w| w.bits.clone()).collect();
        let mut hit = TRUE;
        for (w, v) in words.iter().zip(at) {
            let k = self.const_word(*v);
            let e = self.eq(w, &k);
            hit = self.and(hit, e);
        }
        self.outputs[0] = self.xor(self.outputs[0], hit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word_eval(c: &Circuit, w: &[Bit], inputs: &[i64]) -> i64 {
        let lanes: Vec<[i64; 64]> = inputs.iter().map(|v| [*v; 64]).collect();
        Circuit::word_value(&c.simulate64(&lanes), w, 0)
    }

    #[test]
    fn arithmetic_matches_i32() {
        let mut c = Circuit::new();
        let a = c.add_input("a", Role::Unprotected);
        let b = c.add_input("b", Role::Unprotected);
        let sum = c.add(&a, &b);
        let diff = c.sub(&a, &b);
        let prod = c.mul(&a, &b);
        let neg = c.neg(&a);
        let lt = c.slt(&a, &b);
        let eq = c.eq(&a, &b);
        let samples = [-70000, -3, -1, 0, 1, 2, 7, 46340, i32::MAX as i64, i32::MIN as i64];
        for &x in &samples {
            for &y in &samples {
                let (x32, y32) = (x as i32, y as i32);
                assert_eq!(word_eval(&c, &sum, &[x, y]), x32.wrapping_add(y32) as i64);
                assert_eq!(word_eval(&c, &diff, &[x, y]), x32.wrapping_sub(y32) as i64);
                assert_eq!(word_eval(&c, &prod, &[x, y]), x32.wrapping_mul(y32) as i64);
                assert_eq!(word_eval(&c, &neg, &[x, y]), x32.wrapping_neg() as i64);
                assert_eq!(word_eval(&c, &c.bool_word(lt), &[x, y]), (x32 < y32) as i64);
                assert_eq!(word_eval(&c, &c.bool_word(eq), &[x, y]), (x32 == y32) as i64);
            }
        }
    }

    #[test]
    fn constant_folding_and_sharing() {
        let mut c = Circuit::new();
        let a = c.add_input("a", Role::Group)[0];
        let n = c.not(a);
        assert_eq!(c.not(n), a);
        assert_eq!(c.and(a, n), FALSE);
        assert_eq!(c.or(a, TRUE), TRUE);
        assert_eq!(c.xor(a, a), FALSE);
        let before = c.len();
        let x = c.and(a, n);
        let y = c.and(n, a);
        assert_eq!(x, y);
        assert_eq!(c.len(), before);
        let k = c.const_word(12);
        let m = c.mul(&k, &k);
        assert!(m.iter().all(|b| matches!(c.gate(*b), Gate::Const(_))));
    }
}
