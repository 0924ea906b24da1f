use std::collections::BTreeSet;

use super::cnf::CnfFormula;
use super::sat::Solver;
use crate::error::Result;

/// The projected models found by the solver, as `(u, d)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedCount {
    pub pairs: BTreeSet<(Vec<i64>, i64)>,
    pub solver_calls: u64,
    pub conflicts: u64,
}

impl ProjectedCount {
    pub fn count(&self) -> u64 {
        self.pairs.len() as u64
    }
}

/// `|{(u, d) : ∃ g-bits. f}|` by blocking-clause enumeration over the U and
/// D bits. Every model is checked against the original clauses.
pub fn projected_count(f: &CnfFormula, budget: Option<u64>) -> Result<ProjectedCount> {
    let mut solver = Solver::new(f.num_vars);
    solver.set_budget(budget);
    for cl in &f.clauses {
        solver.add_clause(cl);
    }
    let projection = f.projection();
    let mut pairs = BTreeSet::new();
    let mut calls = 0;
    loop {
        calls += 1;
        let Some(model) = solver.solve()? else { break };
        assert!(
            f.satisfied_by(&model),
            "solver returned an assignment that violates the formula"
        );
        let u: Vec<i64> = f.u_vars.iter().map(|(_, vars)| CnfFormula::decode(&model, vars)).collect();
        let d = CnfFormula::decode(&model, &f.d_vars);
        let fresh = pairs.insert((u, d));
        assert!(fresh, "blocking clause failed to exclude a projected model");
        let block: Vec<i32> = projection
            .iter()
            .map(|v| if model[*v as usize] { -(*v as i32) } else { *v as i32 })
            .collect();
        if !solver.add_clause(&block) {
            break;
        }
    }
    Ok(ProjectedCount {
        pairs,
        solver_calls: calls,
        conflicts: solver.conflicts,
    })
}
