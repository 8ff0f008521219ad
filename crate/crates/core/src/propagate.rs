//! Domain-consistency propagation over layered automata and a small
//! backtracking solver used to cross-validate the grammar and automaton
//! models of the same constraint.

use thiserror::Error;

use crate::automata::{domain_masks, LayeredAutomaton};
use crate::bitset::BitSet;
use crate::cyk::propagate_grammar;
use crate::grammar::{DomainVector, Grammar, OpenHours, TermId};

#[derive(Error, Debug, PartialEq, Eq)]
pub enum SolveError {
    #[error("search exceeded the node budget of {budget}")]
    NodeBudget { budget: u64 },
    #[error("grammar propagation failed: {0}")]
    Cyk(#[from] crate::cyk::CykError),
}

/// Reachability sweeps of one propagator run.
#[derive(Clone, Debug)]
pub struct PropagationState {
    /// States forward-reachable from the initial state, per layer.
    pub forward: Vec<BitSet>,
    /// States backward-reachable from the accepting states, per layer.
    pub backward: Vec<BitSet>,
    /// Supported symbols per position `1..=n` (index 0 is position 1).
    pub supported: Vec<BitSet>,
}

/// Forward/backward sweep over the layered automaton: a symbol survives at
/// position `i` when some layer-`i-1` transition with that symbol lies on a
/// path from the initial state to an accepting state within the domains.
pub fn regular_propagate_syms(
    a: &LayeredAutomaton,
    allowed: &[BitSet],
) -> PropagationState {
    let n = a.n();
    assert_eq!(allowed.len(), n);
    let mut forward = vec![BitSet::new(); n + 1];
    let mut backward = vec![BitSet::new(); n + 1];
    let mut supported = vec![BitSet::new(); n];
    let Some(init) = a.initial() else {
        return PropagationState {
            forward,
            backward,
            supported,
        };
    };
    forward[0].insert(init as usize);
    for layer in 0..n {
        let frontier: Vec<usize> = forward[layer].iter().collect();
        for q in frontier {
            for &(sym, dst) in a.successors(q as u32) {
                if allowed[layer].contains(sym as usize) {
                    forward[layer + 1].insert(dst as usize);
                }
            }
        }
    }
    for &f in a.finals() {
        backward[n].insert(f as usize);
    }
    for layer in (0..n).rev() {
        for q in 0..a.num_states() as u32 {
            if a.layer(q) != layer {
                continue;
            }
            for &(sym, dst) in a.successors(q) {
                if allowed[layer].contains(sym as usize)
                    && backward[layer + 1].contains(dst as usize)
                {
                    backward[layer].insert(q as usize);
                }
            }
        }
    }
    for layer in 0..n {
        let frontier: Vec<usize> = forward[layer].iter().collect();
        for q in frontier {
            for &(sym, dst) in a.successors(q as u32) {
                if allowed[layer].contains(sym as usize)
                    && backward[layer + 1].contains(dst as usize)
                {
                    supported[layer].insert(sym as usize);
                }
            }
        }
    }
    PropagationState {
        forward,
        backward,
        supported,
    }
}

/// Domain-consistency propagator for the automaton form of the constraint,
/// over grammar-typed domains.
pub fn regular_propagate(
    a: &LayeredAutomaton,
    g: &Grammar,
    d: &DomainVector,
) -> DomainVector {
    let masks = domain_masks(a, g, d);
    let state = regular_propagate_syms(a, &masks);
    let term_of: Vec<Option<TermId>> =
        a.symbols().iter().map(|name| g.term_id(name)).collect();
    let mut out = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let mut set = BitSet::new();
        for sym in state.supported[i].iter() {
            if let Some(t) = term_of[sym] {
                set.insert(t.0 as usize);
            }
        }
        out.push(set);
    }
    DomainVector::new(out)
}

/// Cheapest solution cost within the domains, from the AND/OR graph of the
/// current table. None when dis-entailed. Used as an admissible search
/// bound; both constraint forms agree on it because they are
/// domain-consistent over the same solution set.
fn grammar_min_cost(
    g: &Grammar,
    d: &DomainVector,
    open: Option<&OpenHours>,
    costs: &[i64],
) -> Result<Option<i64>, SolveError> {
    let (_, graph) = crate::cyk::cyk_build(g, d, open)?;
    let Some(root) = graph.root else {
        return Ok(None);
    };
    let mut memo: Vec<Option<i64>> = vec![None; graph.or_nodes.len()];
    fn or_cost(
        graph: &crate::cyk::AndOrGraph,
        costs: &[i64],
        v: usize,
        memo: &mut Vec<Option<i64>>,
    ) -> i64 {
        if let Some(c) = memo[v] {
            return c;
        }
        let node = &graph.or_nodes[v];
        let c = match node.symbol {
            crate::cyk::NodeSymbol::Term(t) => costs[t.0 as usize],
            crate::cyk::NodeSymbol::Nt(_) => node
                .and_children
                .iter()
                .map(|&a| {
                    let and = &graph.and_nodes[a];
                    let mut c = or_cost(graph, costs, and.left, memo);
                    if let Some(r) = and.right {
                        c += or_cost(graph, costs, r, memo);
                    }
                    c
                })
                .min()
                .expect("surviving entry has a derivation"),
        };
        memo[v] = Some(c);
        c
    }
    Ok(Some(or_cost(&graph, costs, root, &mut memo)))
}

/// Cheapest accepted word within the domains, by shortest-path over the
/// layered automaton.
fn regular_min_cost(
    a: &LayeredAutomaton,
    g: &Grammar,
    d: &DomainVector,
    costs: &[i64],
) -> Option<i64> {
    let masks = domain_masks(a, g, d);
    let term_of: Vec<Option<TermId>> =
        a.symbols().iter().map(|name| g.term_id(name)).collect();
    let init = a.initial()?;
    let mut dist: Vec<Option<i64>> = vec![None; a.num_states()];
    dist[init as usize] = Some(0);
    let mut order: Vec<u32> = (0..a.num_states() as u32).collect();
    order.sort_by_key(|&q| a.layer(q));
    for q in order {
        let Some(base) = dist[q as usize] else {
            continue;
        };
        let layer = a.layer(q);
        for &(sym, dst) in a.successors(q) {
            if !masks[layer].contains(sym as usize) {
                continue;
            }
            let step = term_of[sym as usize].map_or(0, |t| costs[t.0 as usize]);
            let cand = base + step;
            dist[dst as usize] =
                Some(dist[dst as usize].map_or(cand, |cur| cur.min(cand)));
        }
    }
    a.finals()
        .iter()
        .filter_map(|&f| dist[f as usize])
        .min()
}

/// Row constraint of the model: every worker row must satisfy it.
#[derive(Clone, Debug)]
pub enum RowKind {
    Grammar,
    Regular(LayeredAutomaton),
}

/// Labour demand: at least `count` workers take `value` in slot `slot`.
#[derive(Clone, Copy, Debug)]
pub struct Demand {
    pub slot: usize,
    pub value: TermId,
    pub count: usize,
}

/// Matrix model: `workers` rows of `n` variables, one row constraint,
/// column demands and an optional linear objective (cost per value).
#[derive(Clone, Debug)]
pub struct CspModel {
    pub n: usize,
    pub workers: usize,
    pub grammar: Grammar,
    pub open: Option<OpenHours>,
    pub row_kind: RowKind,
    pub init_domains: Vec<DomainVector>,
    pub demands: Vec<Demand>,
    pub costs: Option<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub assignment: Vec<Vec<TermId>>,
    pub objective: Option<i64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
}

struct Searcher<'m> {
    model: &'m CspModel,
    budget: u64,
    nodes: u64,
    best: Option<Solution>,
}

impl CspModel {
    fn propagate_row(&self, d: &DomainVector) -> Result<DomainVector, SolveError> {
        match &self.row_kind {
            RowKind::Grammar => {
                Ok(propagate_grammar(&self.grammar, d, self.open.as_ref())?)
            }
            RowKind::Regular(a) => Ok(regular_propagate(a, &self.grammar, d)),
        }
    }
}

impl<'m> Searcher<'m> {
    /// Fixpoint of row propagation and demand counting. Returns None on
    /// wipeout.
    fn propagate(&self, domains: &mut Vec<DomainVector>) -> Result<bool, SolveError> {
        loop {
            let mut changed = false;
            for w in 0..self.model.workers {
                let new = self.model.propagate_row(&domains[w])?;
                if new.any_empty() {
                    return Ok(false);
                }
                if new != domains[w] {
                    domains[w] = new;
                    changed = true;
                }
            }
            for dem in &self.model.demands {
                let holders: Vec<usize> = (0..self.model.workers)
                    .filter(|&w| domains[w].allows(dem.slot, dem.value))
                    .collect();
                if holders.len() < dem.count {
                    return Ok(false);
                }
                if holders.len() == dem.count && dem.count > 0 {
                    for w in holders {
                        if domains[w].at(dem.slot).len() > 1 {
                            let mut single = BitSet::new();
                            single.insert(dem.value.0 as usize);
                            domains[w].set(dem.slot, single);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return Ok(true);
            }
        }
    }

    /// Admissible bound: each row independently pays at least its cheapest
    /// solution within the current domains.
    fn lower_bound(&self, domains: &[DomainVector]) -> Result<i64, SolveError> {
        let Some(costs) = &self.model.costs else {
            return Ok(0);
        };
        let mut lb = 0;
        for d in domains {
            let row = match &self.model.row_kind {
                RowKind::Grammar => {
                    grammar_min_cost(&self.model.grammar, d, self.model.open.as_ref(), costs)?
                }
                RowKind::Regular(a) => {
                    regular_min_cost(a, &self.model.grammar, d, costs)
                }
            };
            // Rows are propagated before bounding, so a solution exists.
            lb += row.unwrap_or(0);
        }
        Ok(lb)
    }

    fn search(&mut self, domains: &mut Vec<DomainVector>) -> Result<bool, SolveError> {
        if !self.propagate(domains)? {
            return Ok(false);
        }
        if self.model.costs.is_some() {
            if let Some(best) = &self.best {
                if self.lower_bound(domains)? >= best.objective.unwrap() {
                    return Ok(false);
                }
            }
        }
        // Static order: workers then positions left to right.
        let mut branch = None;
        'outer: for w in 0..self.model.workers {
            for i in 1..=self.model.n {
                if domains[w].at(i).len() > 1 {
                    branch = Some((w, i));
                    break 'outer;
                }
            }
        }
        let Some((w, i)) = branch else {
            let assignment: Vec<Vec<TermId>> = domains
                .iter()
                .map(|d| {
                    (1..=self.model.n)
                        .map(|i| TermId(d.at(i).iter().next().unwrap() as u32))
                        .collect()
                })
                .collect();
            let objective = self.model.costs.as_ref().map(|costs| {
                assignment
                    .iter()
                    .flat_map(|row| row.iter())
                    .map(|t| costs[t.0 as usize])
                    .sum()
            });
            self.best = Some(Solution {
                assignment,
                objective,
            });
            // Without an objective the first solution ends the search.
            return Ok(self.model.costs.is_none());
        };
        // Value order: terminal declaration order.
        let values: Vec<usize> = domains[w].at(i).iter().collect();
        for v in values {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(SolveError::NodeBudget {
                    budget: self.budget,
                });
            }
            let saved = domains.clone();
            let mut single = BitSet::new();
            single.insert(v);
            domains[w].set(i, single);
            if self.search(domains)? {
                return Ok(true);
            }
            *domains = saved;
        }
        Ok(false)
    }
}

/// Depth-first search with propagation at every node; branch and bound when
/// the model has an objective. Returns the solution (optimal when an
/// objective is set) and the explored node count.
pub fn solve(
    model: &CspModel,
    node_budget: u64,
) -> Result<(Option<Solution>, SolveStats), SolveError> {
    assert!(model.workers >= 1);
    assert_eq!(model.init_domains.len(), model.workers);
    let mut searcher = Searcher {
        model,
        budget: node_budget,
        nodes: 0,
        best: None,
    };
    let mut domains = model.init_domains.clone();
    searcher.search(&mut domains)?;
    Ok((
        searcher.best,
        SolveStats {
            nodes: searcher.nodes,
        },
    ))
}
