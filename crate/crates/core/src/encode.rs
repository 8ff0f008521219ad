//! CNF and pseudo-Boolean encodings of the grammar and automaton
//! constraints.
//!
//! The grammar encoding follows the AND/OR graph: one variable per node,
//! value literals shared with the terminal nodes. The automaton encoding
//! uses one variable per state and per transition. Each comes in a strong
//! variant, where unit propagation mirrors the domain-consistency
//! propagator, and a weak variant that only detects dis-entailment: the
//! strong-only clauses are the upward/backward support direction.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::automata::LayeredAutomaton;
use crate::cyk::{AndOrGraph, NodeSymbol};
use crate::grammar::{DomainVector, Grammar, OpenHours, TermId};

#[derive(Error, Debug, PartialEq, Eq)]
pub enum EncodeError {
    #[error("dimacs line {line}: {msg}")]
    DimacsParse { line: usize, msg: String },
    #[error("opb line {line}: {msg}")]
    OpbParse { line: usize, msg: String },
    #[error("demand table must be {n} x {a}, got {got_rows} x {got_cols}")]
    DemandShape {
        n: usize,
        a: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error(transparent)]
    Grammar(#[from] crate::grammar::GrammarError),
    #[error(transparent)]
    Cyk(#[from] crate::cyk::CykError),
    #[error(transparent)]
    Automata(#[from] crate::automata::AutomataError),
    #[error(transparent)]
    Reformulate(#[from] crate::reformulate::ReformulateError),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Strength {
    Strong,
    Weak,
}

/// Clause set with named variables. Variables are 1-based; literals are
/// signed variable indices as in DIMACS.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct CnfFormula {
    atoms: Vec<String>,
    atom_index: HashMap<String, usize>,
    pub clauses: Vec<Vec<i32>>,
}

impl CnfFormula {
    pub fn new() -> Self {
        CnfFormula::default()
    }

    pub fn num_vars(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Intern an atom, returning its positive literal.
    pub fn var(&mut self, name: &str) -> i32 {
        if let Some(&v) = self.atom_index.get(name) {
            return v as i32;
        }
        self.atoms.push(name.to_string());
        let v = self.atoms.len();
        self.atom_index.insert(name.to_string(), v);
        v as i32
    }

    pub fn lookup(&self, name: &str) -> Option<i32> {
        self.atom_index.get(name).map(|&v| v as i32)
    }

    pub fn atom_name(&self, var: i32) -> &str {
        &self.atoms[var.unsigned_abs() as usize - 1]
    }

    pub fn add_clause(&mut self, lits: Vec<i32>) {
        self.clauses.push(lits);
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars(), self.num_clauses());
        for c in &self.clauses {
            for l in c {
                out.push_str(&format!("{l} "));
            }
            out.push_str("0\n");
        }
        out
    }

    /// `atom <name> <index>` sidecar for every named literal.
    pub fn atom_map(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.atoms.iter().enumerate() {
            out.push_str(&format!("atom {} {}\n", name, i + 1));
        }
        out
    }

    pub fn from_dimacs(text: &str) -> Result<CnfFormula, EncodeError> {
        let mut f = CnfFormula::new();
        let mut declared: Option<(usize, usize)> = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("p cnf") {
                let nums: Vec<usize> = rest
                    .split_whitespace()
                    .map(|t| {
                        t.parse().map_err(|_| EncodeError::DimacsParse {
                            line: line_no,
                            msg: format!("bad header number `{t}`"),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if nums.len() != 2 {
                    return Err(EncodeError::DimacsParse {
                        line: line_no,
                        msg: "header needs two numbers".into(),
                    });
                }
                declared = Some((nums[0], nums[1]));
                for v in 1..=nums[0] {
                    f.var(&format!("x{v}"));
                }
                continue;
            }
            let Some((vars, _)) = declared else {
                return Err(EncodeError::DimacsParse {
                    line: line_no,
                    msg: "clause before `p cnf` header".into(),
                });
            };
            let mut clause = Vec::new();
            for t in line.split_whitespace() {
                let l: i32 = t.parse().map_err(|_| EncodeError::DimacsParse {
                    line: line_no,
                    msg: format!("bad literal `{t}`"),
                })?;
                if l == 0 {
                    break;
                }
                if l.unsigned_abs() as usize > vars {
                    return Err(EncodeError::DimacsParse {
                        line: line_no,
                        msg: format!("literal {l} out of the declared {vars} variables"),
                    });
                }
                clause.push(l);
            }
            f.add_clause(clause);
        }
        if let Some((vars, clauses)) = declared {
            if f.num_clauses() != clauses || f.num_vars() < vars {
                return Err(EncodeError::DimacsParse {
                    line: 1,
                    msg: format!(
                        "header {vars}/{clauses} does not match body {}/{}",
                        f.num_vars(),
                        f.num_clauses()
                    ),
                });
            }
        }
        Ok(f)
    }

    /// Rename variables from an `atom` sidecar produced by [`atom_map`].
    pub fn apply_atom_map(&mut self, text: &str) -> Result<(), EncodeError> {
        for (idx, line) in text.lines().enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            if toks.len() != 3 || toks[0] != "atom" {
                return Err(EncodeError::DimacsParse {
                    line: idx + 1,
                    msg: "expected `atom <name> <index>`".into(),
                });
            }
            let v: usize = toks[2].parse().map_err(|_| EncodeError::DimacsParse {
                line: idx + 1,
                msg: format!("bad index `{}`", toks[2]),
            })?;
            if v == 0 || v > self.atoms.len() {
                return Err(EncodeError::DimacsParse {
                    line: idx + 1,
                    msg: format!("index {v} out of range"),
                });
            }
            self.atom_index.remove(&self.atoms[v - 1]);
            self.atoms[v - 1] = toks[1].to_string();
            self.atom_index.insert(toks[1].to_string(), v);
        }
        Ok(())
    }
}

/// Result of unit propagation: per-variable assignment (`0` unassigned,
/// `1` true, `-1` false) and whether a conflict was derived.
#[derive(Clone, Debug)]
pub struct UpOutcome {
    pub assignment: Vec<i8>,
    pub conflict: bool,
}

impl UpOutcome {
    pub fn value(&self, var: i32) -> i8 {
        self.assignment[var.unsigned_abs() as usize - 1]
    }
}

/// Queue-based unit propagation from the given assumption literals.
pub fn unit_propagate(f: &CnfFormula, assumptions: &[i32]) -> UpOutcome {
    let mut assignment = vec![0i8; f.num_vars()];
    let mut queue: Vec<i32> = Vec::new();
    let mut conflict = false;
    let assign = |lit: i32, assignment: &mut Vec<i8>, queue: &mut Vec<i32>| -> bool {
        let v = lit.unsigned_abs() as usize - 1;
        let val = if lit > 0 { 1 } else { -1 };
        match assignment[v] {
            0 => {
                assignment[v] = val;
                queue.push(lit);
                true
            }
            x => x == val,
        }
    };
    for &l in assumptions {
        if !assign(l, &mut assignment, &mut queue) {
            return UpOutcome {
                assignment,
                conflict: true,
            };
        }
    }
    // Naive fixpoint loop; formulas here are small.
    loop {
        let mut changed = false;
        for clause in &f.clauses {
            let mut unassigned = None;
            let mut count_unassigned = 0;
            let mut satisfied = false;
            for &l in clause {
                match assignment[l.unsigned_abs() as usize - 1] {
                    0 => {
                        count_unassigned += 1;
                        unassigned = Some(l);
                    }
                    v => {
                        if (v == 1) == (l > 0) {
                            satisfied = true;
                            break;
                        }
                    }
                }
            }
            if satisfied {
                continue;
            }
            match count_unassigned {
                0 => {
                    conflict = true;
                }
                1 => {
                    if !assign(unassigned.unwrap(), &mut assignment, &mut queue) {
                        conflict = true;
                    } else {
                        changed = true;
                    }
                }
                _ => {}
            }
            if conflict {
                return UpOutcome {
                    assignment,
                    conflict,
                };
            }
        }
        if !changed {
            return UpOutcome {
                assignment,
                conflict,
            };
        }
    }
}

fn value_atom(i: usize, name: &str) -> String {
    format!("x{i}.{name}")
}

/// Value literals for every position and in-domain value, with
/// at-least-one and at-most-one clauses per position.
fn add_value_grid(f: &mut CnfFormula, g: &Grammar, d: &DomainVector) -> Vec<Vec<i32>> {
    let n = d.len();
    let mut vars = vec![Vec::new(); n + 1];
    for i in 1..=n {
        for t in d.at(i).iter() {
            let v = f.var(&value_atom(i, g.term_name(TermId(t as u32))));
            vars[i].push(v);
        }
    }
    for i in 1..=n {
        f.add_clause(vars[i].clone());
        for (ai, &a) in vars[i].iter().enumerate() {
            for &b in &vars[i][ai + 1..] {
                f.add_clause(vec![-a, -b]);
            }
        }
    }
    vars
}

/// CNF encoding of the grammar constraint over its AND/OR graph.
///
/// Strong: unit propagation enforces domain consistency. Weak: the upward
/// support clauses are dropped; unit propagation still refutes dis-entailed
/// instances. A dis-entailed instance (empty graph) encodes to a formula
/// containing the empty clause.
pub fn encode_grammar_cnf(
    graph: &AndOrGraph,
    g: &Grammar,
    d: &DomainVector,
    strength: Strength,
) -> CnfFormula {
    let mut f = CnfFormula::new();
    add_value_grid(&mut f, g, d);
    if graph.is_empty() {
        f.add_clause(vec![]);
        return f;
    }
    let strong = strength == Strength::Strong;

    // Node variables. Terminal OR-nodes reuse their value literal.
    let or_var: Vec<i32> = (0..graph.or_nodes.len())
        .map(|id| {
            let o = &graph.or_nodes[id];
            match o.symbol {
                NodeSymbol::Term(t) => {
                    f.var(&value_atom(o.start, g.term_name(t)))
                }
                NodeSymbol::Nt(_) => f.var(&format!("n.{}", graph.or_label(g, id))),
            }
        })
        .collect();
    let and_var: Vec<i32> = (0..graph.and_nodes.len())
        .map(|id| {
            let a = &graph.and_nodes[id];
            f.var(&format!(
                "p{}.{}.{}",
                id,
                graph.or_label(g, a.parent),
                a.split
            ))
        })
        .collect();

    // The start entry holds.
    f.add_clause(vec![or_var[graph.root.unwrap()]]);
    for (id, o) in graph.or_nodes.iter().enumerate() {
        if !o.is_terminal() {
            // An entry needs one of its derivations.
            let mut c = vec![-or_var[id]];
            c.extend(o.and_children.iter().map(|&a| and_var[a]));
            f.add_clause(c);
        }
        if strong && Some(id) != graph.root {
            // An entry needs a derivation above it (terminal nodes too).
            let mut c = vec![-or_var[id]];
            c.extend(o.and_parents.iter().map(|&a| and_var[a]));
            f.add_clause(c);
        }
    }
    for (id, a) in graph.and_nodes.iter().enumerate() {
        f.add_clause(vec![-and_var[id], or_var[a.left]]);
        if let Some(r) = a.right {
            f.add_clause(vec![-and_var[id], or_var[r]]);
        }
        if strong {
            f.add_clause(vec![-and_var[id], or_var[a.parent]]);
        }
    }
    if strong {
        // Values with no surviving terminal node are out.
        for i in 1..=d.len() {
            for t in d.at(i).iter() {
                let t = TermId(t as u32);
                if graph.or_id(NodeSymbol::Term(t), i, 1).is_none() {
                    let v = f.lookup(&value_atom(i, g.term_name(t))).unwrap();
                    f.add_clause(vec![-v]);
                }
            }
        }
    }
    f
}

/// CNF encoding of the automaton constraint with state and transition
/// variables.
///
/// Strong: forward and backward state-support clauses; unit propagation
/// enforces domain consistency. Weak: the backward clauses are dropped.
pub fn encode_regular_cnf(
    a: &LayeredAutomaton,
    g: &Grammar,
    d: &DomainVector,
    strength: Strength,
) -> CnfFormula {
    let n = a.n();
    assert_eq!(d.len(), n);
    let mut f = CnfFormula::new();
    add_value_grid(&mut f, g, d);
    let Some(init) = a.initial() else {
        f.add_clause(vec![]);
        return f;
    };
    let strong = strength == Strength::Strong;
    let allowed: Vec<crate::bitset::BitSet> = crate::automata::domain_masks(a, g, d);

    let state_var: Vec<i32> = (0..a.num_states())
        .map(|q| f.var(&format!("s{}.{}", a.layer(q as u32), q)))
        .collect();
    // Transition variables in deterministic order.
    let trans: Vec<(u32, u32, u32)> = a.transitions().collect();
    let trans_var: Vec<i32> = trans
        .iter()
        .map(|&(src, sym, dst)| {
            f.var(&format!(
                "t{}.{}.{}",
                src,
                &a.symbols()[sym as usize],
                dst
            ))
        })
        .collect();

    f.add_clause(vec![state_var[init as usize]]);
    f.add_clause(a.finals().iter().map(|&q| state_var[q as usize]).collect());

    let mut out_of: Vec<Vec<usize>> = vec![Vec::new(); a.num_states()];
    let mut into: Vec<Vec<usize>> = vec![Vec::new(); a.num_states()];
    for (ti, &(src, _, dst)) in trans.iter().enumerate() {
        out_of[src as usize].push(ti);
        into[dst as usize].push(ti);
    }
    for q in 0..a.num_states() {
        if a.layer(q as u32) < n {
            let mut c = vec![-state_var[q]];
            c.extend(out_of[q].iter().map(|&t| trans_var[t]));
            f.add_clause(c);
        }
        if strong && a.layer(q as u32) > 0 {
            let mut c = vec![-state_var[q]];
            c.extend(into[q].iter().map(|&t| trans_var[t]));
            f.add_clause(c);
        }
    }
    for (ti, &(src, sym, dst)) in trans.iter().enumerate() {
        f.add_clause(vec![-trans_var[ti], state_var[src as usize]]);
        f.add_clause(vec![-trans_var[ti], state_var[dst as usize]]);
        let layer = a.layer(src);
        if allowed[layer].contains(sym as usize) {
            let name = &a.symbols()[sym as usize];
            let x = f.lookup(&value_atom(layer + 1, name)).unwrap();
            f.add_clause(vec![-trans_var[ti], x]);
        } else {
            // Transition label removed from the domain.
            f.add_clause(vec![-trans_var[ti]]);
        }
    }
    // Value support: a value needs a transition carrying it.
    let sym_of_name: HashMap<&str, u32> = a
        .symbols()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    for i in 1..=n {
        for t in d.at(i).iter() {
            let name = g.term_name(TermId(t as u32));
            let x = f.lookup(&value_atom(i, name)).unwrap();
            let mut c = vec![-x];
            if let Some(&sym) = sym_of_name.get(name) {
                for (ti, &(src, s, _)) in trans.iter().enumerate() {
                    if s == sym && a.layer(src) == i - 1 {
                        c.push(trans_var[ti]);
                    }
                }
            }
            f.add_clause(c);
        }
    }
    f
}

/// Basic DPLL satisfiability over raw clauses, for test-scale formulas.
pub fn sat_dpll(clauses: &[Vec<i32>], num_vars: usize, assumptions: &[i32]) -> bool {
    fn up(
        clauses: &[Vec<i32>],
        assignment: &mut Vec<i8>,
    ) -> Option<bool> {
        loop {
            let mut changed = false;
            for clause in clauses {
                let mut unassigned = None;
                let mut count = 0;
                let mut satisfied = false;
                for &l in clause {
                    match assignment[l.unsigned_abs() as usize - 1] {
                        0 => {
                            count += 1;
                            unassigned = Some(l);
                        }
                        v => {
                            if (v == 1) == (l > 0) {
                                satisfied = true;
                                break;
                            }
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                match count {
                    0 => return Some(false),
                    1 => {
                        let l = unassigned.unwrap();
                        assignment[l.unsigned_abs() as usize - 1] =
                            if l > 0 { 1 } else { -1 };
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return None;
            }
        }
    }
    fn solve(clauses: &[Vec<i32>], assignment: &mut Vec<i8>) -> bool {
        if let Some(result) = up(clauses, assignment) {
            return result;
        }
        let Some(v) = assignment.iter().position(|&x| x == 0) else {
            return true;
        };
        for val in [1i8, -1] {
            let mut trial = assignment.clone();
            trial[v] = val;
            if solve(clauses, &mut trial) {
                return true;
            }
        }
        false
    }
    let mut assignment = vec![0i8; num_vars];
    for &l in assumptions {
        let v = l.unsigned_abs() as usize - 1;
        let val = if l > 0 { 1 } else { -1 };
        if assignment[v] == -val {
            return false;
        }
        assignment[v] = val;
    }
    solve(clauses, &mut assignment)
}

/// Enumerate the distinct projections of the formula's models onto the
/// given variables. Returns None when more than `cap` projections exist.
pub fn enumerate_projected_models(
    f: &CnfFormula,
    projection: &[i32],
    cap: usize,
) -> Option<BTreeSet<Vec<bool>>> {
    fn recurse(
        f: &CnfFormula,
        projection: &[i32],
        fixed: &mut Vec<i32>,
        out: &mut BTreeSet<Vec<bool>>,
        cap: usize,
    ) -> bool {
        // Prune with unit propagation before branching.
        let up = unit_propagate(f, fixed);
        if up.conflict {
            return true;
        }
        let branch_var = projection
            .iter()
            .find(|&&v| up.value(v) == 0)
            .copied();
        match branch_var {
            None => {
                // All projection vars decided; check completability.
                let mut assumptions = fixed.clone();
                for &v in projection {
                    if up.value(v) != 0 && !assumptions.iter().any(|l| l.unsigned_abs() == v.unsigned_abs() as u32)
                    {
                        assumptions.push(if up.value(v) == 1 { v } else { -v });
                    }
                }
                if sat_dpll(&f.clauses, f.num_vars(), &assumptions) {
                    let model: Vec<bool> =
                        projection.iter().map(|&v| up.value(v) == 1).collect();
                    out.insert(model);
                    if out.len() > cap {
                        return false;
                    }
                }
                true
            }
            Some(v) => {
                for lit in [v, -v] {
                    fixed.push(lit);
                    let ok = recurse(f, projection, fixed, out, cap);
                    fixed.pop();
                    if !ok {
                        return false;
                    }
                }
                true
            }
        }
    }
    let mut out = BTreeSet::new();
    let mut fixed = Vec::new();
    if recurse(f, projection, &mut fixed, &mut out, cap) {
        Some(out)
    } else {
        None
    }
}

/// Count complete models of the formula; None when over `cap`.
pub fn count_models(f: &CnfFormula, cap: u64) -> Option<u64> {
    fn recurse(f: &CnfFormula, assignment: &mut Vec<i8>, cap: u64) -> Option<u64> {
        // Plain enumeration without propagation: every variable is decided,
        // so each leaf is one model.
        let satisfiable_now = |assignment: &Vec<i8>| {
            f.clauses.iter().all(|c| {
                c.iter().any(|&l| {
                    let v = assignment[l.unsigned_abs() as usize - 1];
                    v == 0 || (v == 1) == (l > 0)
                })
            })
        };
        if !satisfiable_now(assignment) {
            return Some(0);
        }
        let Some(v) = assignment.iter().position(|&x| x == 0) else {
            return Some(1);
        };
        let mut total = 0u64;
        for val in [1i8, -1] {
            assignment[v] = val;
            total += recurse(f, assignment, cap)?;
            assignment[v] = 0;
            if total > cap {
                return None;
            }
        }
        Some(total)
    }
    let mut assignment = vec![0i8; f.num_vars()];
    recurse(f, &mut assignment, cap)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PbOp {
    Ge,
    Gt,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PbTerm {
    pub coeff: i64,
    /// Signed literal: negative index means the negated variable.
    pub lit: i32,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PbConstraint {
    pub terms: Vec<PbTerm>,
    pub op: PbOp,
    pub rhs: i64,
}

/// Pseudo-Boolean optimization model with named variables.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PbModel {
    atoms: Vec<String>,
    atom_index: HashMap<String, usize>,
    pub objective: Vec<PbTerm>,
    pub constraints: Vec<PbConstraint>,
}

impl PbModel {
    pub fn new() -> Self {
        PbModel::default()
    }

    pub fn num_vars(&self) -> usize {
        self.atoms.len()
    }

    pub fn var(&mut self, name: &str) -> i32 {
        if let Some(&v) = self.atom_index.get(name) {
            return v as i32;
        }
        self.atoms.push(name.to_string());
        let v = self.atoms.len();
        self.atom_index.insert(name.to_string(), v);
        v as i32
    }

    pub fn lookup(&self, name: &str) -> Option<i32> {
        self.atom_index.get(name).map(|&v| v as i32)
    }

    pub fn atom_name(&self, var: i32) -> &str {
        &self.atoms[var.unsigned_abs() as usize - 1]
    }

    pub fn add_clause(&mut self, lits: Vec<i32>) {
        self.constraints.push(PbConstraint {
            terms: lits.into_iter().map(|l| PbTerm { coeff: 1, lit: l }).collect(),
            op: PbOp::Ge,
            rhs: 1,
        });
    }

    /// Constraints that are plain clauses (all coefficients 1, `>= 1`).
    pub fn clause_view(&self) -> Vec<Vec<i32>> {
        self.constraints
            .iter()
            .filter(|c| {
                c.op == PbOp::Ge && c.rhs == 1 && c.terms.iter().all(|t| t.coeff == 1)
            })
            .map(|c| c.terms.iter().map(|t| t.lit).collect())
            .collect()
    }

    pub fn atom_map(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.atoms.iter().enumerate() {
            out.push_str(&format!("atom {} {}\n", name, i + 1));
        }
        out
    }

    fn term_text(t: &PbTerm) -> String {
        let var = if t.lit > 0 {
            format!("x{}", t.lit)
        } else {
            format!("~x{}", -t.lit)
        };
        format!("{:+} {}", t.coeff, var)
    }

    pub fn to_opb(&self) -> String {
        let mut out = format!(
            "* #variable= {} #constraint= {}\n",
            self.num_vars(),
            self.constraints.len()
        );
        if !self.objective.is_empty() {
            let terms: Vec<String> = self.objective.iter().map(Self::term_text).collect();
            out.push_str(&format!("min: {} ;\n", terms.join(" ")));
        }
        for c in &self.constraints {
            let terms: Vec<String> = c.terms.iter().map(Self::term_text).collect();
            let op = match c.op {
                PbOp::Ge => ">=",
                PbOp::Gt => ">",
            };
            out.push_str(&format!("{} {} {} ;\n", terms.join(" "), op, c.rhs));
        }
        out
    }

    pub fn from_opb(text: &str) -> Result<PbModel, EncodeError> {
        let mut m = PbModel::new();
        let mut declared_vars = 0usize;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('*') {
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("#variable=") {
                        declared_vars = v.parse().unwrap_or(0);
                    }
                }
                if declared_vars == 0 {
                    if let Some(pos) = rest.find("#variable=") {
                        let tail = &rest[pos + "#variable=".len()..];
                        declared_vars = tail
                            .split_whitespace()
                            .next()
                            .and_then(|t| t.parse().ok())
                            .unwrap_or(0);
                    }
                }
                continue;
            }
            let body = line.strip_suffix(';').ok_or(EncodeError::OpbParse {
                line: line_no,
                msg: "missing trailing `;`".into(),
            })?;
            let (is_obj, body) = match body.trim().strip_prefix("min:") {
                Some(rest) => (true, rest.trim()),
                None => (false, body.trim()),
            };
            let mut terms = Vec::new();
            let mut op = None;
            let mut rhs = 0i64;
            let toks: Vec<&str> = body.split_whitespace().collect();
            let mut i = 0;
            while i < toks.len() {
                match toks[i] {
                    ">=" | ">" => {
                        op = Some(if toks[i] == ">=" { PbOp::Ge } else { PbOp::Gt });
                        rhs = toks
                            .get(i + 1)
                            .and_then(|t| t.parse().ok())
                            .ok_or(EncodeError::OpbParse {
                                line: line_no,
                                msg: "missing right-hand side".into(),
                            })?;
                        i += 2;
                    }
                    t => {
                        let coeff: i64 =
                            t.parse().map_err(|_| EncodeError::OpbParse {
                                line: line_no,
                                msg: format!("bad coefficient `{t}`"),
                            })?;
                        let vt = toks.get(i + 1).ok_or(EncodeError::OpbParse {
                            line: line_no,
                            msg: "coefficient without variable".into(),
                        })?;
                        let (neg, name) = match vt.strip_prefix('~') {
                            Some(n) => (true, n),
                            None => (false, *vt),
                        };
                        let idx: i32 = name
                            .strip_prefix('x')
                            .and_then(|s| s.parse().ok())
                            .ok_or(EncodeError::OpbParse {
                                line: line_no,
                                msg: format!("bad variable `{vt}`"),
                            })?;
                        terms.push(PbTerm {
                            coeff,
                            lit: if neg { -idx } else { idx },
                        });
                        i += 2;
                    }
                }
            }
            if is_obj {
                m.objective = terms;
            } else {
                let op = op.ok_or(EncodeError::OpbParse {
                    line: line_no,
                    msg: "constraint without relation".into(),
                })?;
                m.constraints.push(PbConstraint { terms, op, rhs });
            }
        }
        let max_mentioned = m
            .constraints
            .iter()
            .flat_map(|c| c.terms.iter())
            .chain(m.objective.iter())
            .map(|t| t.lit.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        if declared_vars > 0 && max_mentioned > declared_vars {
            return Err(EncodeError::OpbParse {
                line: 1,
                msg: format!(
                    "x{max_mentioned} used but only {declared_vars} variables declared"
                ),
            });
        }
        for v in 1..=declared_vars.max(max_mentioned) {
            m.var(&format!("x{v}"));
        }
        Ok(m)
    }

    /// Evaluate a full assignment (indexed by variable, 1-based at index 0
    /// unused) against all constraints.
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.constraints.iter().all(|c| {
            let sum: i64 = c
                .terms
                .iter()
                .map(|t| {
                    let val = assignment[t.lit.unsigned_abs() as usize];
                    let lit_true = if t.lit > 0 { val } else { !val };
                    if lit_true {
                        t.coeff
                    } else {
                        0
                    }
                })
                .sum();
            match c.op {
                PbOp::Ge => sum >= c.rhs,
                PbOp::Gt => sum > c.rhs,
            }
        })
    }

    pub fn objective_value(&self, assignment: &[bool]) -> i64 {
        self.objective
            .iter()
            .map(|t| {
                let val = assignment[t.lit.unsigned_abs() as usize];
                let lit_true = if t.lit > 0 { val } else { !val };
                if lit_true {
                    t.coeff
                } else {
                    0
                }
            })
            .sum()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum WorkerEncoding {
    GrammarCnf,
    RegularCnf,
}

/// Configuration of the shift-scheduling pseudo-Boolean model.
#[derive(Clone, Debug)]
pub struct ShiftPbConfig {
    pub slots: usize,
    pub workers: usize,
    pub activities: usize,
    pub open: OpenHours,
    /// `demands[i][k]`: workers required on activity `k+1` in slot `i+1`.
    pub demands: Vec<Vec<usize>>,
    pub encoding: WorkerEncoding,
    pub strength: Strength,
    /// Read the demand relation literally as `> d` instead of `>= d`.
    pub strict_demands: bool,
    pub budget: usize,
}

/// Build the shift-scheduling PB model: per-worker constraint blocks with
/// disjoint variables, channelling literals `b(i,j,k)`, demand constraints
/// and the work-minimization objective.
pub fn build_shift_pb(cfg: &ShiftPbConfig) -> Result<PbModel, EncodeError> {
    if cfg.demands.len() != cfg.slots
        || cfg.demands.iter().any(|row| row.len() != cfg.activities)
    {
        return Err(EncodeError::DemandShape {
            n: cfg.slots,
            a: cfg.activities,
            got_rows: cfg.demands.len(),
            got_cols: cfg.demands.first().map_or(0, |r| r.len()),
        });
    }
    let g = crate::grammar::shift_scheduling_grammar(cfg.activities)?;
    let g = g.to_cnf()?;
    let d = DomainVector::full(&g, cfg.slots);
    let block = worker_block(&g, &d, cfg)?;

    let mut m = PbModel::new();
    // Per-worker copies of the block with prefixed atom names.
    let mut worker_var: Vec<Vec<i32>> = Vec::new();
    for j in 1..=cfg.workers {
        let map: Vec<i32> = (1..=block.num_vars() as i32)
            .map(|v| m.var(&format!("w{j}.{}", block.atom_name(v))))
            .collect();
        for clause in &block.clauses {
            let lits: Vec<i32> = clause
                .iter()
                .map(|&l| {
                    let nv = map[l.unsigned_abs() as usize - 1];
                    if l > 0 {
                        nv
                    } else {
                        -nv
                    }
                })
                .collect();
            m.add_clause(lits);
        }
        worker_var.push(map);
    }
    // Channelling: b(i,j,k) <-> worker j's value literal for activity k.
    let mut b_var = vec![vec![vec![0i32; cfg.activities]; cfg.workers]; cfg.slots];
    for i in 1..=cfg.slots {
        for j in 1..=cfg.workers {
            for k in 1..=cfg.activities {
                let b = m.var(&format!("b{i}.{j}.{k}"));
                b_var[i - 1][j - 1][k - 1] = b;
                let x_name = format!("w{j}.{}", value_atom(i, &format!("a{k}")));
                let x = m.lookup(&x_name).expect("value literal exists");
                m.add_clause(vec![-b, x]);
                m.add_clause(vec![-x, b]);
            }
        }
    }
    // Demands.
    for i in 1..=cfg.slots {
        for k in 1..=cfg.activities {
            let need = cfg.demands[i - 1][k - 1];
            if !cfg.strict_demands && need == 0 {
                continue;
            }
            let terms: Vec<PbTerm> = (1..=cfg.workers)
                .map(|j| PbTerm {
                    coeff: 1,
                    lit: b_var[i - 1][j - 1][k - 1],
                })
                .collect();
            m.constraints.push(PbConstraint {
                terms,
                op: if cfg.strict_demands {
                    PbOp::Gt
                } else {
                    PbOp::Ge
                },
                rhs: need as i64,
            });
        }
    }
    // Objective: total worked slots.
    for i in 1..=cfg.slots {
        for j in 1..=cfg.workers {
            for k in 1..=cfg.activities {
                m.objective.push(PbTerm {
                    coeff: 1,
                    lit: b_var[i - 1][j - 1][k - 1],
                });
            }
        }
    }
    Ok(m)
}

fn worker_block(
    g: &Grammar,
    d: &DomainVector,
    cfg: &ShiftPbConfig,
) -> Result<CnfFormula, EncodeError> {
    let (table, graph) = crate::cyk::cyk_build(g, d, Some(&cfg.open))?;
    match cfg.encoding {
        WorkerEncoding::GrammarCnf => Ok(encode_grammar_cnf(&graph, g, d, cfg.strength)),
        WorkerEncoding::RegularCnf => {
            if table.is_empty() {
                let mut f = CnfFormula::new();
                add_value_grid(&mut f, g, d);
                f.add_clause(vec![]);
                return Ok(f);
            }
            let ga =
                crate::reformulate::construct_acyclic_grammar(&table, g, d, Some(&cfg.open))?;
            let nfa = crate::reformulate::pda_to_nfa(
                &crate::reformulate::grammar_to_pda(&ga),
                &ga,
                cfg.budget,
            )?;
            let layered = crate::reformulate::epsilon_closure(&nfa);
            let reduced = crate::automata::heuristic_minimize_nfa(&layered);
            let det = crate::automata::subset_construction(&reduced, cfg.budget)?;
            let min = crate::automata::minimize_layered(&det);
            Ok(encode_regular_cnf(&min, g, d, cfg.strength))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyk::{cyk_build, enumerate_solutions, propagate_grammar};
    use crate::gen::ab_blocks_grammar;
    use crate::propagate::regular_propagate;

    fn example() -> (Grammar, DomainVector, AndOrGraph) {
        let g = ab_blocks_grammar();
        let d = DomainVector::parse("a\na,b\nb\n", &g, 3).unwrap();
        let (_, graph) = cyk_build(&g, &d, None).unwrap();
        (g, d, graph)
    }

    fn min_dfa(g: &Grammar, d: &DomainVector) -> LayeredAutomaton {
        let (table, _) = cyk_build(g, d, None).unwrap();
        let ga =
            crate::reformulate::construct_acyclic_grammar(&table, g, d, None).unwrap();
        let nfa = crate::reformulate::pda_to_nfa(
            &crate::reformulate::grammar_to_pda(&ga),
            &ga,
            100_000,
        )
        .unwrap();
        let layered = crate::reformulate::epsilon_closure(&nfa);
        let det = crate::automata::subset_construction(&layered, 100_000).unwrap();
        crate::automata::minimize_layered(&det)
    }

    fn value_vars(f: &CnfFormula, g: &Grammar, d: &DomainVector) -> Vec<i32> {
        let mut out = Vec::new();
        for i in 1..=d.len() {
            for t in d.at(i).iter() {
                out.push(
                    f.lookup(&value_atom(i, g.term_name(TermId(t as u32))))
                        .unwrap(),
                );
            }
        }
        out
    }

    /// Projected models decoded as strings, one symbol per position.
    fn projected_strings(
        f: &CnfFormula,
        g: &Grammar,
        d: &DomainVector,
    ) -> BTreeSet<String> {
        let proj = value_vars(f, g, d);
        let models = enumerate_projected_models(f, &proj, 10_000).unwrap();
        let mut names = Vec::new();
        for i in 1..=d.len() {
            for t in d.at(i).iter() {
                names.push((i, g.term_name(TermId(t as u32)).to_string()));
            }
        }
        models
            .into_iter()
            .map(|m| {
                let mut word = vec![String::new(); d.len()];
                for (bit, (i, name)) in m.iter().zip(&names) {
                    if *bit {
                        assert!(word[*i - 1].is_empty(), "two values at position {i}");
                        word[*i - 1] = name.clone();
                    }
                }
                word.join("")
            })
            .collect()
    }

    fn oracle_strings(g: &Grammar, d: &DomainVector) -> BTreeSet<String> {
        enumerate_solutions(g, d, None, None)
            .unwrap()
            .into_iter()
            .map(|w| w.iter().map(|t| g.term_name(*t)).collect::<String>())
            .collect()
    }

    #[test]
    fn grammar_cnf_projects_to_solutions() {
        let (g, d, graph) = example();
        for strength in [Strength::Strong, Strength::Weak] {
            let f = encode_grammar_cnf(&graph, &g, &d, strength);
            assert_eq!(projected_strings(&f, &g, &d), oracle_strings(&g, &d));
        }
    }

    #[test]
    fn regular_cnf_projects_to_solutions() {
        let (g, d, _) = example();
        let dfa = min_dfa(&g, &d);
        for strength in [Strength::Strong, Strength::Weak] {
            let f = encode_regular_cnf(&dfa, &g, &d, strength);
            assert_eq!(projected_strings(&f, &g, &d), oracle_strings(&g, &d));
        }
    }

    #[test]
    fn model_count_equals_solution_count_on_injective_fixtures() {
        // Unambiguous grammar and deterministic automaton: structural
        // variables are functions of the value literals.
        let (g, d, graph) = example();
        let solutions = oracle_strings(&g, &d).len() as u64;
        for strength in [Strength::Strong, Strength::Weak] {
            let f = encode_grammar_cnf(&graph, &g, &d, strength);
            assert_eq!(count_models(&f, 100_000), Some(solutions));
        }
        let dfa = min_dfa(&g, &d);
        for strength in [Strength::Strong, Strength::Weak] {
            let f = encode_regular_cnf(&dfa, &g, &d, strength);
            assert_eq!(count_models(&f, 100_000), Some(solutions));
        }
    }

    #[test]
    fn disentailed_instance_is_up_refutable() {
        let g = ab_blocks_grammar();
        let d = DomainVector::parse("b\na,b\nb\n", &g, 3).unwrap();
        let (_, graph) = cyk_build(&g, &d, None).unwrap();
        let f = encode_grammar_cnf(&graph, &g, &d, Strength::Weak);
        assert!(unit_propagate(&f, &[]).conflict);
    }

    #[test]
    fn single_word_automaton_fixes_all_values_by_up() {
        let g = Grammar::parse("S -> A B\nA -> 'a'\nB -> 'b'").unwrap();
        let d = DomainVector::full(&g, 2);
        let dfa = min_dfa(&g, &d);
        let f = encode_regular_cnf(&dfa, &g, &d, Strength::Strong);
        let up = unit_propagate(&f, &[]);
        assert!(!up.conflict);
        let xa = f.lookup(&value_atom(1, "a")).unwrap();
        let xb = f.lookup(&value_atom(2, "b")).unwrap();
        let xb1 = f.lookup(&value_atom(1, "b")).unwrap();
        assert_eq!(up.value(xa), 1);
        assert_eq!(up.value(xb), 1);
        assert_eq!(up.value(xb1), -1);
    }

    /// UP on the strong encoding after one extra pruning fixes exactly the
    /// literals the propagator fixes.
    fn up_matches_propagator(
        f: &CnfFormula,
        g: &Grammar,
        d: &DomainVector,
        prune: (usize, TermId),
        propagated: &DomainVector,
    ) {
        let x = f
            .lookup(&value_atom(prune.0, g.term_name(prune.1)))
            .unwrap();
        let up = unit_propagate(f, &[-x]);
        if propagated.any_empty() {
            assert!(up.conflict, "propagator wiped out but UP did not refute");
            return;
        }
        assert!(!up.conflict);
        for i in 1..=d.len() {
            for t in d.at(i).iter() {
                let t = TermId(t as u32);
                let v = f.lookup(&value_atom(i, g.term_name(t))).unwrap();
                let expected = if !propagated.allows(i, t) {
                    -1
                } else if propagated.at(i).len() == 1 {
                    1
                } else {
                    0
                };
                assert_eq!(
                    up.value(v),
                    expected,
                    "position {i} value {} after pruning {:?}",
                    g.term_name(t),
                    (prune.0, g.term_name(prune.1))
                );
            }
        }
    }

    #[test]
    fn strong_up_equals_propagator_on_single_prunings() {
        let (g, d, graph) = example();
        let f = encode_grammar_cnf(&graph, &g, &d, Strength::Strong);
        let dfa = min_dfa(&g, &d);
        let fr = encode_regular_cnf(&dfa, &g, &d, Strength::Strong);
        for i in 1..=3 {
            for t in d.at(i).iter() {
                let t = TermId(t as u32);
                let mut pruned = d.clone();
                pruned.remove(i, t);
                let after_g = propagate_grammar(&g, &pruned, None).unwrap();
                up_matches_propagator(&f, &g, &d, (i, t), &after_g);
                let after_r = regular_propagate(&dfa, &g, &pruned);
                assert_eq!(after_g, after_r);
                up_matches_propagator(&fr, &g, &d, (i, t), &after_r);
            }
        }
    }

    #[test]
    fn weak_up_refutes_exactly_wipeouts() {
        let (g, d, graph) = example();
        let fw = encode_grammar_cnf(&graph, &g, &d, Strength::Weak);
        let dfa = min_dfa(&g, &d);
        let frw = encode_regular_cnf(&dfa, &g, &d, Strength::Weak);
        for i in 1..=3 {
            for t in d.at(i).iter() {
                let t = TermId(t as u32);
                let mut pruned = d.clone();
                pruned.remove(i, t);
                let wiped = propagate_grammar(&g, &pruned, None).unwrap().any_empty();
                for f in [&fw, &frw] {
                    let x = f.lookup(&value_atom(i, g.term_name(t))).unwrap();
                    let up = unit_propagate(f, &[-x]);
                    assert_eq!(up.conflict, wiped);
                }
            }
        }
    }

    #[test]
    fn parsers_reject_out_of_range_literals() {
        assert!(matches!(
            CnfFormula::from_dimacs("p cnf 2 1\n1 -3 0\n"),
            Err(EncodeError::DimacsParse { .. })
        ));
        assert!(matches!(
            CnfFormula::from_dimacs("1 2 0\n"),
            Err(EncodeError::DimacsParse { .. })
        ));
        assert!(matches!(
            PbModel::from_opb("* #variable= 2 #constraint= 1\n+1 x5 >= 1 ;\n"),
            Err(EncodeError::OpbParse { .. })
        ));
    }

    #[test]
    fn dimacs_roundtrip() {
        let (g, d, graph) = example();
        let f = encode_grammar_cnf(&graph, &g, &d, Strength::Strong);
        let text = f.to_dimacs();
        let parsed = CnfFormula::from_dimacs(&text).unwrap();
        assert_eq!(parsed.clauses, f.clauses);
        assert_eq!(parsed.num_vars(), f.num_vars());
        assert_eq!(parsed.to_dimacs(), text);
        // Atom sidecar restores names.
        let mut named = parsed;
        named.apply_atom_map(&f.atom_map()).unwrap();
        assert_eq!(named.atom_map(), f.atom_map());
    }

    #[test]
    fn opb_roundtrip() {
        let cfg = ShiftPbConfig {
            slots: 12,
            workers: 2,
            activities: 1,
            open: OpenHours::all_open(12),
            demands: vec![vec![0]; 12],
            encoding: WorkerEncoding::GrammarCnf,
            strength: Strength::Weak,
            strict_demands: false,
            budget: 100_000,
        };
        let m = build_shift_pb(&cfg).unwrap();
        let text = m.to_opb();
        let parsed = PbModel::from_opb(&text).unwrap();
        assert_eq!(parsed.constraints, m.constraints);
        assert_eq!(parsed.objective, m.objective);
        assert_eq!(parsed.to_opb(), text);
    }

    #[test]
    fn shift_pb_infeasible_when_language_empty() {
        // At 12 slots no schedule satisfies the minimum shift length, so the
        // worker blocks are UP-refutable and the oracle agrees.
        let g = crate::grammar::shift_scheduling_grammar(1)
            .unwrap()
            .to_cnf()
            .unwrap();
        let open = OpenHours::all_open(12);
        let d = DomainVector::full(&g, 12);
        let sols =
            crate::cyk::derive_strings(&g, &d, Some(&open), 100_000).unwrap();
        assert!(sols.is_empty());
        for encoding in [WorkerEncoding::GrammarCnf, WorkerEncoding::RegularCnf] {
            let cfg = ShiftPbConfig {
                slots: 12,
                workers: 1,
                activities: 1,
                open: open.clone(),
                demands: vec![vec![0]; 12],
                encoding,
                strength: Strength::Weak,
                strict_demands: false,
                budget: 100_000,
            };
            let m = build_shift_pb(&cfg).unwrap();
            let clauses = m.clause_view();
            let has_empty = clauses.iter().any(|c| c.is_empty());
            assert!(has_empty, "worker block should be dis-entailed");
        }
    }

    #[test]
    fn shift_pb_optimum_matches_language_enumeration() {
        // 15 slots is the shortest feasible horizon; enumerate the worker
        // language, complete each string through the strong block by unit
        // propagation, and minimize the objective subject to demands.
        let slots = 15;
        let open = OpenHours::all_open(slots);
        let g = crate::grammar::shift_scheduling_grammar(1)
            .unwrap()
            .to_cnf()
            .unwrap();
        let d = DomainVector::full(&g, slots);
        let lang = crate::cyk::derive_strings(&g, &d, Some(&open), 100_000).unwrap();
        assert!(!lang.is_empty());
        let mut demands = vec![vec![0usize]; slots];
        demands[7][0] = 1; // one worker on activity 1 in slot 8
        let cfg = ShiftPbConfig {
            slots,
            workers: 1,
            activities: 1,
            open,
            demands: demands.clone(),
            encoding: WorkerEncoding::RegularCnf,
            strength: Strength::Strong,
            strict_demands: false,
            budget: 100_000,
        };
        let m = build_shift_pb(&cfg).unwrap();
        let clauses = m.clause_view();
        let mut best: Option<i64> = None;
        let a1 = g.term_id("a1").unwrap();
        for word in &lang {
            // Assume the word's value literals inside worker 1's block.
            let mut assumptions = Vec::new();
            for (pos, t) in word.iter().enumerate() {
                for u in d.at(pos + 1).iter() {
                    let name = format!(
                        "w1.{}",
                        value_atom(pos + 1, g.term_name(TermId(u as u32)))
                    );
                    let v = m.lookup(&name).unwrap();
                    assumptions.push(if TermId(u as u32) == *t { v } else { -v });
                }
            }
            // The strong block completes by unit propagation alone.
            let pseudo = CnfFormula {
                atoms: (1..=m.num_vars()).map(|v| format!("x{v}")).collect(),
                atom_index: HashMap::new(),
                clauses: clauses.clone(),
            };
            let up = unit_propagate(&pseudo, &assumptions);
            if up.conflict {
                // Demand constraints are clause-shaped here, so only words
                // missing the demanded slot may be rejected.
                assert_ne!(word[7], a1, "covering word rejected by block");
                continue;
            }
            let mut assignment = vec![false; m.num_vars() + 1];
            for v in 1..=m.num_vars() {
                assignment[v] = up.assignment[v - 1] == 1;
            }
            if m.satisfied_by(&assignment) {
                let obj = m.objective_value(&assignment);
                best = Some(best.map_or(obj, |b: i64| b.min(obj)));
            }
        }
        // Demand forces work in slot 8; the sparsest schedule still works
        // at least 12 slots (two 6-slot stretches around the break).
        let brute: i64 = lang
            .iter()
            .filter(|w| w[7] == a1)
            .map(|w| w.iter().filter(|t| **t == a1).count() as i64)
            .min()
            .unwrap();
        assert_eq!(best, Some(brute));
    }

    #[test]
    fn demand_shape_checked() {
        let cfg = ShiftPbConfig {
            slots: 12,
            workers: 1,
            activities: 2,
            open: OpenHours::all_open(12),
            demands: vec![vec![0]; 12],
            encoding: WorkerEncoding::GrammarCnf,
            strength: Strength::Weak,
            strict_demands: false,
            budget: 100_000,
        };
        assert!(matches!(
            build_shift_pb(&cfg),
            Err(EncodeError::DemandShape { .. })
        ));
    }

    #[test]
    fn strict_demand_flag_emits_gt() {
        let cfg = ShiftPbConfig {
            slots: 12,
            workers: 2,
            activities: 1,
            open: OpenHours::all_open(12),
            demands: vec![vec![0]; 12],
            encoding: WorkerEncoding::GrammarCnf,
            strength: Strength::Weak,
            strict_demands: true,
            budget: 100_000,
        };
        let m = build_shift_pb(&cfg).unwrap();
        assert!(m.constraints.iter().any(|c| c.op == PbOp::Gt));
        assert!(m.to_opb().contains(" > 0 ;"));
    }
}
