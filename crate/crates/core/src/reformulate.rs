//! Reformulation of a grammar constraint into a layered NFA, in three steps:
//! read the surviving CYK table as an acyclic grammar, encode that grammar
//! as a single-state pushdown automaton doing leftmost derivations, then
//! unfold the PDA's reachable stack configurations into an acyclic NFA whose
//! ε-transitions are contracted away.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::automata::{LayeredAutomaton, LayeredBuilder};
use crate::cyk::CykTable;
use crate::grammar::{eval_pred, CnfShape, DomainVector, Grammar, OpenHours, TermId};

#[derive(Error, Debug, PartialEq, Eq)]
pub enum ReformulateError {
    #[error("the table is empty; the constraint is dis-entailed")]
    EmptyTable,
    #[error("NFA construction exceeded the budget of {budget} states")]
    Budget { budget: usize },
}

/// Symbol of the acyclic grammar: index into its nonterminal or terminal
/// tables.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum GaSym {
    Nt(u32),
    Term(u32),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GaRhs {
    Binary(u32, u32),
    Terminal(u32),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct GaProduction {
    pub lhs: u32,
    pub rhs: GaRhs,
}

#[derive(Clone, Debug)]
pub struct GaNonterminal {
    pub label: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug)]
pub struct GaTerminal {
    pub base: TermId,
    pub name: String,
    pub pos: usize,
}

/// Position-indexed acyclic grammar; its language is exactly the solution
/// set of the constraint it was built from.
#[derive(Clone, Debug)]
pub struct AcyclicGrammar {
    pub n: usize,
    pub nonterminals: Vec<GaNonterminal>,
    pub terminals: Vec<GaTerminal>,
    pub productions: Vec<GaProduction>,
    prods_of: Vec<Vec<usize>>,
    pub start: u32,
}

impl AcyclicGrammar {
    pub fn nt_label(&self, id: u32) -> &str {
        &self.nonterminals[id as usize].label
    }

    pub fn term_label(&self, id: u32) -> String {
        let t = &self.terminals[id as usize];
        format!("{}_{}", t.name, t.pos)
    }

    pub fn find_nt(&self, label: &str) -> Option<u32> {
        self.nonterminals
            .iter()
            .position(|n| n.label == label)
            .map(|i| i as u32)
    }

    pub fn find_term(&self, name: &str, pos: usize) -> Option<u32> {
        self.terminals
            .iter()
            .position(|t| t.name == name && t.pos == pos)
            .map(|i| i as u32)
    }

    pub fn productions_of(&self, nt: u32) -> &[usize] {
        &self.prods_of[nt as usize]
    }

    pub fn sym_span(&self, s: GaSym) -> (usize, usize) {
        match s {
            GaSym::Nt(id) => {
                let n = &self.nonterminals[id as usize];
                (n.start, n.len)
            }
            GaSym::Term(id) => (self.terminals[id as usize].pos, 1),
        }
    }

    /// Emit as a grammar file; nonterminals are `Base_i_j`, terminals
    /// `'base_i'`.
    pub fn to_grammar_text(&self) -> String {
        let mut order: Vec<u32> = Vec::new();
        let mut seen = vec![false; self.nonterminals.len()];
        order.push(self.start);
        seen[self.start as usize] = true;
        for p in &self.productions {
            if !seen[p.lhs as usize] {
                seen[p.lhs as usize] = true;
                order.push(p.lhs);
            }
        }
        let mut out = String::new();
        for nt in order {
            let alts: Vec<String> = self.prods_of[nt as usize]
                .iter()
                .map(|&pi| match self.productions[pi].rhs {
                    GaRhs::Binary(b, c) => {
                        format!("{} {}", self.nt_label(b), self.nt_label(c))
                    }
                    GaRhs::Terminal(t) => format!("'{}'", self.term_label(t)),
                })
                .collect();
            out.push_str(&format!("{} -> {}\n", self.nt_label(nt), alts.join(" | ")));
        }
        out
    }
}

/// Algorithm-style construction of the acyclic grammar from the filtered
/// table: one indexed nonterminal per surviving entry, one production per
/// supported derivation.
pub fn construct_acyclic_grammar(
    table: &CykTable,
    g: &Grammar,
    d: &DomainVector,
    open: Option<&OpenHours>,
) -> Result<AcyclicGrammar, ReformulateError> {
    let n = table.n();
    if table.is_empty() || !table.contains(g.start, 1, n) {
        return Err(ReformulateError::EmptyTable);
    }
    let mut nonterminals: Vec<GaNonterminal> = Vec::new();
    let mut terminals: Vec<GaTerminal> = Vec::new();
    let mut nt_index: HashMap<(u32, usize, usize), u32> = HashMap::new();
    let mut term_index: HashMap<(u32, usize), u32> = HashMap::new();
    let mut productions: Vec<GaProduction> = Vec::new();

    let mut intern_nt = |nt: crate::grammar::NtId,
                         i: usize,
                         j: usize,
                         nonterminals: &mut Vec<GaNonterminal>|
     -> u32 {
        *nt_index.entry((nt.0, i, j)).or_insert_with(|| {
            nonterminals.push(GaNonterminal {
                label: format!("{}_{}_{}", g.nt_name(nt), i, j),
                start: i,
                len: j,
            });
            (nonterminals.len() - 1) as u32
        })
    };

    for i in 1..=n {
        for a in table.cell(i, 1).iter() {
            let nt = crate::grammar::NtId(a as u32);
            for (_, p) in g.productions_of(nt) {
                if let Some(CnfShape::Terminal(t)) = p.cnf_shape() {
                    if d.allows(i, t) && eval_pred(&p.predicate, i, 1, open) {
                        let lhs = intern_nt(nt, i, 1, &mut nonterminals);
                        let term = *term_index.entry((t.0, i)).or_insert_with(|| {
                            terminals.push(GaTerminal {
                                base: t,
                                name: g.term_name(t).to_string(),
                                pos: i,
                            });
                            (terminals.len() - 1) as u32
                        });
                        productions.push(GaProduction {
                            lhs,
                            rhs: GaRhs::Terminal(term),
                        });
                    }
                }
            }
        }
    }
    for j in 2..=n {
        for i in 1..=(n - j + 1) {
            for a in table.cell(i, j).iter() {
                let nt = crate::grammar::NtId(a as u32);
                for k in 1..j {
                    for (_, p) in g.productions_of(nt) {
                        if let Some(CnfShape::Binary(b, c)) = p.cnf_shape() {
                            if table.contains(b, i, k)
                                && table.contains(c, i + k, j - k)
                                && eval_pred(&p.predicate, i, j, open)
                            {
                                let lhs = intern_nt(nt, i, j, &mut nonterminals);
                                let lb = intern_nt(b, i, k, &mut nonterminals);
                                let rc = intern_nt(c, i + k, j - k, &mut nonterminals);
                                productions.push(GaProduction {
                                    lhs,
                                    rhs: GaRhs::Binary(lb, rc),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    let start = nt_index[&(g.start.0, 1, n)];
    let mut prods_of = vec![Vec::new(); nonterminals.len()];
    for (pi, p) in productions.iter().enumerate() {
        prods_of[p.lhs as usize].push(pi);
    }
    Ok(AcyclicGrammar {
        n,
        nonterminals,
        terminals,
        productions,
        prods_of,
        start,
    })
}

/// Single-state pushdown automaton computing leftmost derivations of the
/// acyclic grammar; accepts on empty stack.
#[derive(Clone, Debug)]
pub struct Pda {
    pub n: usize,
    /// Expansion bodies per nonterminal, one ε-transition group each.
    pub expand: Vec<Vec<Vec<GaSym>>>,
    /// One consume transition per indexed terminal.
    pub num_consume: usize,
    pub initial_stack: Vec<GaSym>,
}

impl Pda {
    pub fn transition_count(&self) -> usize {
        self.expand.iter().map(|bodies| bodies.len()).sum::<usize>() + self.num_consume
    }

    /// Run the PDA on a word of base terminals; accepts on empty stack after
    /// the whole input. Exponential in the worst case; test use only.
    pub fn accepts(&self, ga: &AcyclicGrammar, word: &[TermId]) -> bool {
        let mut seen: std::collections::HashSet<(Vec<GaSym>, usize)> =
            std::collections::HashSet::new();
        let mut stack_states = vec![(self.initial_stack.clone(), 0usize)];
        while let Some((stack, pos)) = stack_states.pop() {
            if !seen.insert((stack.clone(), pos)) {
                continue;
            }
            match stack.first() {
                None => {
                    if pos == word.len() {
                        return true;
                    }
                }
                Some(GaSym::Nt(a)) => {
                    for body in &self.expand[*a as usize] {
                        let mut next: Vec<GaSym> = body.clone();
                        next.extend_from_slice(&stack[1..]);
                        stack_states.push((next, pos));
                    }
                }
                Some(GaSym::Term(t)) => {
                    let term = &ga.terminals[*t as usize];
                    if pos < word.len() && term.base == word[pos] && term.pos == pos + 1 {
                        stack_states.push((stack[1..].to_vec(), pos + 1));
                    }
                }
            }
        }
        false
    }
}

pub fn grammar_to_pda(ga: &AcyclicGrammar) -> Pda {
    let mut expand = vec![Vec::new(); ga.nonterminals.len()];
    for nt in 0..ga.nonterminals.len() {
        for &pi in ga.productions_of(nt as u32) {
            let body = match ga.productions[pi].rhs {
                GaRhs::Binary(b, c) => vec![GaSym::Nt(b), GaSym::Nt(c)],
                GaRhs::Terminal(t) => vec![GaSym::Term(t)],
            };
            expand[nt].push(body);
        }
    }
    Pda {
        n: ga.n,
        expand,
        num_consume: ga.terminals.len(),
        initial_stack: vec![GaSym::Nt(ga.start)],
    }
}

/// Acyclic NFA whose states are the PDA's reachable stack configurations.
/// Transitions either expand the top nonterminal (ε) or consume one input
/// symbol.
#[derive(Clone, Debug)]
pub struct EpsilonNfa {
    pub n: usize,
    states: Vec<Vec<GaSym>>,
    out: Vec<Vec<(Option<u32>, u32)>>,
    initial: u32,
    final_state: Option<u32>,
    /// Position and base name per indexed terminal, copied from the acyclic
    /// grammar so the automaton is self-contained.
    term_pos: Vec<usize>,
    term_name: Vec<String>,
}

impl EpsilonNfa {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.out.iter().map(|o| o.len()).sum()
    }

    pub fn initial(&self) -> u32 {
        self.initial
    }

    pub fn final_state(&self) -> Option<u32> {
        self.final_state
    }

    pub fn state(&self, id: u32) -> &[GaSym] {
        &self.states[id as usize]
    }

    pub fn has_stack(&self, stack: &[GaSym]) -> bool {
        self.states.iter().any(|s| s.as_slice() == stack)
    }

    pub fn transitions(&self) -> impl Iterator<Item = (u32, Option<u32>, u32)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(src, ts)| ts.iter().map(move |&(l, d)| (src as u32, l, d)))
    }

    /// Accept a word given as base terminal names.
    pub fn accepts_names(&self, word: &[&str]) -> bool {
        let mut seen = vec![false; self.states.len() * (word.len() + 1)];
        let idx = |q: u32, pos: usize| q as usize * (word.len() + 1) + pos;
        let mut stack_states = vec![(self.initial, 0usize)];
        while let Some((q, pos)) = stack_states.pop() {
            if seen[idx(q, pos)] {
                continue;
            }
            seen[idx(q, pos)] = true;
            if Some(q) == self.final_state && pos == word.len() && self.n == word.len() {
                return true;
            }
            for &(label, dst) in &self.out[q as usize] {
                match label {
                    None => stack_states.push((dst, pos)),
                    Some(t) => {
                        if pos < word.len() && self.term_name[t as usize] == word[pos] {
                            debug_assert_eq!(self.term_pos[t as usize], pos + 1);
                            stack_states.push((dst, pos + 1));
                        }
                    }
                }
            }
        }
        false
    }

    /// Plain text dump (one line per transition), for pipeline artifacts.
    pub fn to_text(&self, ga: &AcyclicGrammar) -> String {
        let fmt_stack = |s: &[GaSym]| {
            if s.is_empty() {
                "<>".to_string()
            } else {
                let parts: Vec<String> = s
                    .iter()
                    .map(|&sym| match sym {
                        GaSym::Nt(id) => ga.nt_label(id).to_string(),
                        GaSym::Term(id) => ga.term_label(id),
                    })
                    .collect();
                format!("<{}>", parts.join(","))
            }
        };
        let mut out = format!(
            "eps-nfa {} {} {}\n",
            self.n,
            self.num_states(),
            self.num_transitions()
        );
        for (src, label, dst) in self.transitions() {
            let l = label.map_or("eps".to_string(), |t| {
                format!("{}", self.term_name[t as usize])
            });
            out.push_str(&format!(
                "{} {} {}\n",
                fmt_stack(&self.states[src as usize]),
                l,
                fmt_stack(&self.states[dst as usize])
            ));
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn from_raw(
        n: usize,
        states: Vec<Vec<GaSym>>,
        transitions: Vec<(u32, Option<u32>, u32)>,
        initial: u32,
        final_state: Option<u32>,
        term_pos: Vec<usize>,
        term_name: Vec<String>,
    ) -> Self {
        let mut out = vec![Vec::new(); states.len()];
        for (s, l, d) in transitions {
            out[s as usize].push((l, d));
        }
        EpsilonNfa {
            n,
            states,
            out,
            initial,
            final_state,
            term_pos,
            term_name,
        }
    }
}

/// Unfold the PDA into the NFA of its reachable stack configurations.
/// Stack states are hash-consed and processed first-in first-out.
pub fn pda_to_nfa(
    pda: &Pda,
    ga: &AcyclicGrammar,
    budget: usize,
) -> Result<EpsilonNfa, ReformulateError> {
    let mut states: Vec<Vec<GaSym>> = Vec::new();
    let mut index: HashMap<Vec<GaSym>, u32> = HashMap::new();
    let mut out: Vec<Vec<(Option<u32>, u32)>> = Vec::new();
    let mut queue: VecDeque<u32> = VecDeque::new();
    let mut final_state = None;

    let mut intern = |stack: Vec<GaSym>,
                      states: &mut Vec<Vec<GaSym>>,
                      out: &mut Vec<Vec<(Option<u32>, u32)>>,
                      queue: &mut VecDeque<u32>|
     -> u32 {
        if let Some(&id) = index.get(&stack) {
            return id;
        }
        let id = states.len() as u32;
        states.push(stack.clone());
        out.push(Vec::new());
        index.insert(stack, id);
        queue.push_back(id);
        id
    };

    let init = intern(
        pda.initial_stack.clone(),
        &mut states,
        &mut out,
        &mut queue,
    );
    while let Some(q) = queue.pop_front() {
        if states.len() > budget {
            return Err(ReformulateError::Budget { budget });
        }
        let stack = states[q as usize].clone();
        match stack.first().copied() {
            None => {
                final_state = Some(q);
            }
            Some(GaSym::Nt(a)) => {
                for body in &pda.expand[a as usize] {
                    let mut next: Vec<GaSym> = body.clone();
                    next.extend_from_slice(&stack[1..]);
                    // A popped nonterminal cannot reappear below.
                    debug_assert!(!next.contains(&GaSym::Nt(a)));
                    let dst = intern(next, &mut states, &mut out, &mut queue);
                    out[q as usize].push((None, dst));
                }
            }
            Some(GaSym::Term(t)) => {
                let next = stack[1..].to_vec();
                let dst = intern(next, &mut states, &mut out, &mut queue);
                out[q as usize].push((Some(t), dst));
            }
        }
    }
    Ok(EpsilonNfa {
        n: pda.n,
        states,
        out,
        initial: init,
        final_state,
        term_pos: ga.terminals.iter().map(|t| t.pos).collect(),
        term_name: ga.terminals.iter().map(|t| t.name.clone()).collect(),
    })
}

/// Contract ε-transitions into a layered, ε-free NFA.
///
/// A state survives when it is the initial state, the final state, or when
/// one ε-step reaches a state with a direct labelled transition (for stack
/// states: the top nonterminal expands to a terminal in one production).
/// States with labelled transitions and no ε-predecessor also survive, so an
/// already ε-free automaton passes through unchanged apart from dead-state
/// removal.
pub fn epsilon_closure(nfa: &EpsilonNfa) -> LayeredAutomaton {
    // Deterministic symbol table: sorted unique base names.
    let mut names: Vec<String> = nfa.term_name.clone();
    names.sort();
    names.dedup();
    let sym_of_term: Vec<u32> = nfa
        .term_name
        .iter()
        .map(|n| names.iter().position(|m| m == n).unwrap() as u32)
        .collect();

    let num = nfa.num_states();
    let mut b = LayeredBuilder::new(nfa.n, names);
    let Some(final_id) = nfa.final_state else {
        return b.finish();
    };

    // Topological order (the NFA is acyclic).
    let mut indeg = vec![0usize; num];
    for (_, _, d) in nfa.transitions() {
        indeg[d as usize] += 1;
    }
    let mut topo: Vec<u32> = Vec::with_capacity(num);
    let mut queue: VecDeque<u32> = (0..num as u32).filter(|&q| indeg[q as usize] == 0).collect();
    while let Some(q) = queue.pop_front() {
        topo.push(q);
        for &(_, d) in &nfa.out[q as usize] {
            indeg[d as usize] -= 1;
            if indeg[d as usize] == 0 {
                queue.push_back(d);
            }
        }
    }
    debug_assert_eq!(topo.len(), num);

    // Consumed-symbol depth per state.
    let mut depth = vec![usize::MAX; num];
    depth[nfa.initial as usize] = 0;
    for &q in &topo {
        if depth[q as usize] == usize::MAX {
            continue;
        }
        for &(label, d) in &nfa.out[q as usize] {
            let nd = depth[q as usize] + label.is_some() as usize;
            debug_assert!(
                depth[d as usize] == usize::MAX || depth[d as usize] == nd,
                "inconsistent layering"
            );
            depth[d as usize] = nd;
        }
    }

    let has_direct_label =
        |q: u32| nfa.out[q as usize].iter().any(|(l, _)| l.is_some());
    let mut has_eps_in = vec![false; num];
    for (_, l, d) in nfa.transitions() {
        if l.is_none() {
            has_eps_in[d as usize] = true;
        }
    }
    let kept: Vec<bool> = (0..num as u32)
        .map(|q| {
            q == nfa.initial
                || q == final_id
                || nfa.out[q as usize]
                    .iter()
                    .any(|&(l, d)| l.is_none() && has_direct_label(d))
                || (has_direct_label(q) && !has_eps_in[q as usize])
        })
        .collect();

    // lab_out: labelled transitions reachable through ε-paths.
    // kept_fwd: surviving states in the forward ε-closure.
    let mut lab_out: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num];
    let mut kept_fwd: Vec<Vec<u32>> = vec![Vec::new(); num];
    for &q in topo.iter().rev() {
        let mut lo: Vec<(u32, u32)> = Vec::new();
        let mut kf: Vec<u32> = Vec::new();
        if kept[q as usize] {
            kf.push(q);
        }
        for &(label, d) in &nfa.out[q as usize] {
            match label {
                Some(t) => lo.push((t, d)),
                None => {
                    lo.extend_from_slice(&lab_out[d as usize]);
                    kf.extend_from_slice(&kept_fwd[d as usize]);
                }
            }
        }
        lo.sort();
        lo.dedup();
        kf.sort();
        kf.dedup();
        lab_out[q as usize] = lo;
        kept_fwd[q as usize] = kf;
    }

    // Materialize surviving states and substituted transitions.
    let mut new_id = vec![u32::MAX; num];
    for q in 0..num as u32 {
        if kept[q as usize] && depth[q as usize] != usize::MAX {
            new_id[q as usize] = b.add_state(depth[q as usize]);
        }
    }
    for q in 0..num as u32 {
        if new_id[q as usize] == u32::MAX {
            continue;
        }
        for &(t, raw_dst) in &lab_out[q as usize] {
            for &v in &kept_fwd[raw_dst as usize] {
                if new_id[v as usize] != u32::MAX {
                    b.add_transition(
                        new_id[q as usize],
                        sym_of_term[t as usize],
                        new_id[v as usize],
                    );
                }
            }
        }
    }
    b.set_initial(new_id[nfa.initial as usize]);
    if new_id[final_id as usize] != u32::MAX {
        b.add_final(new_id[final_id as usize]);
    }
    b.finish()
}
