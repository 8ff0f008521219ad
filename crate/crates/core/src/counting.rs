//! Predict the size of the reformulated NFA without building it.
//!
//! The number of pre-closure NFA states equals the number of distinct PDA
//! stack configurations. Counting root paths in the AND/OR graph gives a
//! cheap upper bound. The per-node stack graph compresses the stacks having
//! `v` on top into a DAG whose paths from `v` end at right-anchored sinks;
//! its path count is exact whenever distinct derivation contexts never push
//! the same symbol (true for the worked examples here), but the DAG loses
//! the correlation between a pushed symbol and what was pushed before it,
//! so on entangled grammars it can admit paths that correspond to no
//! reachable stack. [`exact_state_count`] therefore counts with a
//! determinized walk over push contexts, which is exact on every input:
//! sets of graph positions that have emitted the same stack suffix are
//! merged and counted once.

use std::collections::HashMap;

use num_bigint::BigUint;
use thiserror::Error;

use crate::bitset::BitSet;
use crate::cyk::{AndOrGraph, OrId};

#[derive(Error, Debug, PartialEq, Eq)]
pub enum CountingError {
    #[error("node {0} is not in the graph")]
    NoSuchNode(usize),
    #[error("the graph is empty")]
    EmptyGraph,
}

/// DAG whose paths starting at `source` enumerate the PDA stack
/// configurations with `source` on top.
#[derive(Clone, Debug)]
pub struct StackGraph {
    pub source: OrId,
    pub vertices: Vec<OrId>,
    /// Successor sets over OR-node ids.
    adj: HashMap<OrId, BitSet>,
}

impl StackGraph {
    pub fn edges(&self) -> Vec<(OrId, OrId)> {
        let mut out: Vec<(OrId, OrId)> = self
            .adj
            .iter()
            .flat_map(|(&src, targets)| targets.iter().map(move |dst| (src, dst)))
            .collect();
        out.sort();
        out
    }

    pub fn has_edge(&self, src: OrId, dst: OrId) -> bool {
        self.adj.get(&src).is_some_and(|t| t.contains(dst))
    }

    fn successors(&self, v: OrId) -> impl Iterator<Item = usize> + '_ {
        self.adj.get(&v).into_iter().flat_map(|t| t.iter())
    }

    /// Paths from `source` to any sink of the graph. Each reachable stack
    /// with `source` on top maps to one such path; the count is exact when
    /// no two derivation contexts push the same symbol (see the module
    /// docs), otherwise it may include unrealizable mixtures. Use
    /// [`stack_count`] for the context-exact number.
    pub fn configuration_count(&self) -> BigUint {
        fn count(
            g: &StackGraph,
            v: OrId,
            memo: &mut HashMap<OrId, BigUint>,
        ) -> BigUint {
            if let Some(c) = memo.get(&v) {
                return c.clone();
            }
            let succ: Vec<usize> = g.successors(v).collect();
            let c = if succ.is_empty() {
                BigUint::from(1u32)
            } else {
                succ.into_iter().map(|s| count(g, s, memo)).sum()
            };
            memo.insert(v, c.clone());
            c
        }
        let mut memo = HashMap::new();
        count(self, self.source, &mut memo)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum NodeRef {
    Or(usize),
    And(usize),
}

/// Topological order of the AND/OR graph with parents before children.
fn topo_nodes(g: &AndOrGraph) -> Vec<NodeRef> {
    let ors = g.or_nodes.len();
    let total = ors + g.and_nodes.len();
    let idx = |r: NodeRef| match r {
        NodeRef::Or(i) => i,
        NodeRef::And(i) => ors + i,
    };
    let mut indeg = vec![0usize; total];
    for (ai, a) in g.and_nodes.iter().enumerate() {
        indeg[ai + ors] += 1; // parent OR -> AND
        indeg[a.left] += 1;
        if let Some(r) = a.right {
            indeg[r] += 1;
        }
    }
    let mut queue: std::collections::VecDeque<NodeRef> = (0..ors)
        .map(NodeRef::Or)
        .chain((0..g.and_nodes.len()).map(NodeRef::And))
        .filter(|&r| indeg[idx(r)] == 0)
        .collect();
    let mut order = Vec::with_capacity(total);
    while let Some(node) = queue.pop_front() {
        order.push(node);
        match node {
            NodeRef::Or(u) => {
                for &c in &g.or_nodes[u].and_children {
                    indeg[ors + c] -= 1;
                    if indeg[ors + c] == 0 {
                        queue.push_back(NodeRef::And(c));
                    }
                }
            }
            NodeRef::And(u) => {
                let a = &g.and_nodes[u];
                for c in [Some(a.left), a.right].into_iter().flatten() {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        queue.push_back(NodeRef::Or(c));
                    }
                }
            }
        }
    }
    debug_assert_eq!(order.len(), total);
    order
}

/// Build the stack graph of OR-node `v` by propagating frontier labels from
/// `v` to the root. Nodes are visited children-first so every label set is
/// complete before a parent consumes it.
pub fn build_stack_graph(g: &AndOrGraph, v: OrId) -> Result<StackGraph, CountingError> {
    if v >= g.or_nodes.len() {
        return Err(CountingError::NoSuchNode(v));
    }
    let or_count = g.or_nodes.len();
    let mut or_labels: Vec<BitSet> = vec![BitSet::new(); or_count];
    let mut and_labels: Vec<BitSet> = vec![BitSet::new(); g.and_nodes.len()];
    or_labels[v].insert(v);
    let mut vertices = BitSet::new();
    vertices.insert(v);
    let mut adj: HashMap<OrId, BitSet> = HashMap::new();

    let mut nodes = topo_nodes(g);
    nodes.reverse(); // children first
    for node in nodes {
        match node {
            NodeRef::Or(u) => {
                if or_labels[u].is_empty() {
                    continue;
                }
                let label = or_labels[u].clone();
                for &p in &g.or_nodes[u].and_parents {
                    let and = &g.and_nodes[p];
                    if and.left == u {
                        if let Some(right) = and.right {
                            // Entering through the left child pushes the
                            // right sibling onto the stack.
                            vertices.insert(right);
                            for l in label.iter() {
                                adj.entry(l).or_default().insert(right);
                            }
                            and_labels[p].insert(right);
                        } else {
                            and_labels[p].union_with(&label);
                        }
                    }
                    if and.right == Some(u) {
                        and_labels[p].union_with(&label);
                    }
                }
            }
            NodeRef::And(u) => {
                if and_labels[u].is_empty() {
                    continue;
                }
                let parent = g.and_nodes[u].parent;
                let label = and_labels[u].clone();
                or_labels[parent].union_with(&label);
            }
        }
    }
    Ok(StackGraph {
        source: v,
        vertices: vertices.iter().collect(),
        adj,
    })
}

/// Loose upper bound on the pre-closure NFA size: the number of root paths
/// to each OR-node, summed.
pub fn path_count_upper_bound(g: &AndOrGraph) -> BigUint {
    let Some(root) = g.root else {
        return BigUint::from(0u32);
    };
    let mut or_pd: Vec<BigUint> = vec![BigUint::from(0u32); g.or_nodes.len()];
    let mut and_pd: Vec<BigUint> = vec![BigUint::from(0u32); g.and_nodes.len()];
    or_pd[root] = BigUint::from(1u32);
    for node in topo_nodes(g) {
        match node {
            NodeRef::Or(u) => {
                if u != root {
                    or_pd[u] = g.or_nodes[u]
                        .and_parents
                        .iter()
                        .map(|&p| and_pd[p].clone())
                        .sum();
                }
            }
            NodeRef::And(u) => {
                and_pd[u] = or_pd[g.and_nodes[u].parent].clone();
            }
        }
    }
    or_pd.iter().sum()
}

/// Predicted automaton sizes. By convention the empty-stack final state is
/// excluded from both exact counts; `exact_post_closure` includes one state
/// for the initial ε-closure class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeReport {
    pub upper_bound: BigUint,
    pub exact_pre_closure: BigUint,
    pub exact_post_closure: BigUint,
    /// `(pre, post)` state counts per layer `0..n`.
    pub per_layer: Vec<(BigUint, BigUint)>,
}

/// Context-exact stack counter.
///
/// A stack with `v` on top reads, from the top down, the right siblings
/// pushed at each AND-node a root derivation enters through its left child
/// on the way down to `v`. Walking the graph upward from `v`, moves through
/// or-parents and right-child slots are free, and moves through a left-child
/// slot emit the pushed sibling. Distinct emission sequences are counted by
/// determinizing the walk: all positions that have emitted the same suffix
/// are merged into one set before continuing.
struct StackCounter<'g> {
    g: &'g AndOrGraph,
    /// Memoized counts per closed position set (OR-node `i`, AND-node
    /// `or_count + i`).
    memo: HashMap<BitSet, BigUint>,
    root_bit: usize,
}

impl<'g> StackCounter<'g> {
    fn new(g: &'g AndOrGraph) -> Self {
        let root_bit = g.root.expect("nonempty graph");
        StackCounter {
            g,
            memo: HashMap::new(),
            root_bit,
        }
    }

    /// Close a set of positions under free upward moves.
    fn close(&self, set: &mut BitSet) {
        let mut frontier: Vec<usize> = set.iter().collect();
        let ors = self.g.or_nodes.len();
        while let Some(node) = frontier.pop() {
            if node < ors {
                for &p in &self.g.or_nodes[node].and_parents {
                    if self.g.and_nodes[p].right == Some(node)
                        || self.g.and_nodes[p].right.is_none()
                    {
                        if set.insert(ors + p) {
                            frontier.push(ors + p);
                        }
                    }
                }
            } else {
                let parent = self.g.and_nodes[node - ors].parent;
                if set.insert(parent) {
                    frontier.push(parent);
                }
            }
        }
    }

    /// Number of distinct emission sequences that end at the root.
    fn count(&mut self, set: BitSet) -> BigUint {
        if let Some(c) = self.memo.get(&set) {
            return c.clone();
        }
        let ors = self.g.or_nodes.len();
        let mut total = if set.contains(self.root_bit) {
            BigUint::from(1u32)
        } else {
            BigUint::from(0u32)
        };
        // Group push moves by the emitted right sibling.
        let mut by_emission: HashMap<usize, BitSet> = HashMap::new();
        for node in set.iter() {
            if node >= ors {
                continue;
            }
            for &p in &self.g.or_nodes[node].and_parents {
                let and = &self.g.and_nodes[p];
                if and.left == node {
                    if let Some(r) = and.right {
                        by_emission.entry(r).or_default().insert(ors + p);
                    }
                }
            }
        }
        let mut emissions: Vec<(usize, BitSet)> = by_emission.into_iter().collect();
        emissions.sort_by_key(|(r, _)| *r);
        for (_, mut next) in emissions {
            self.close(&mut next);
            total += self.count(next);
        }
        self.memo.insert(set, total.clone());
        total
    }

    fn stacks_with_top(&mut self, v: OrId) -> BigUint {
        let mut start = BitSet::new();
        start.insert(v);
        self.close(&mut start);
        self.count(start)
    }
}

/// Exact number of distinct stacks with `v` on top, robust to entangled
/// push contexts.
pub fn stack_count(g: &AndOrGraph, v: OrId) -> Result<BigUint, CountingError> {
    if g.root.is_none() {
        return Err(CountingError::EmptyGraph);
    }
    if v >= g.or_nodes.len() {
        return Err(CountingError::NoSuchNode(v));
    }
    Ok(StackCounter::new(g).stacks_with_top(v))
}

/// Exact state counts of the reformulated NFA before and after ε-closure,
/// computed without constructing the automaton.
pub fn exact_state_count(g: &AndOrGraph) -> Result<SizeReport, CountingError> {
    if g.root.is_none() {
        return Err(CountingError::EmptyGraph);
    }
    let n = g.n;
    let zero = BigUint::from(0u32);
    let mut per_layer = vec![(zero.clone(), zero.clone()); n + 1];
    let mut pre = BigUint::from(0u32);
    // One post-closure state for the initial class.
    let mut post = BigUint::from(1u32);
    per_layer[0].1 += 1u32;
    let mut counter = StackCounter::new(g);
    for v in 0..g.or_nodes.len() {
        let o = &g.or_nodes[v];
        let count = counter.stacks_with_top(v);
        let layer = o.start - 1;
        per_layer[layer].0 += count.clone();
        pre += count.clone();
        // Post-closure survivors: one ε-step from a labelled transition,
        // i.e. nonterminals over a single position. Those starting at the
        // first position collapse into the initial class.
        if !o.is_terminal() && o.len == 1 && o.start >= 2 {
            per_layer[layer].1 += count.clone();
            post += count;
        }
    }
    Ok(SizeReport {
        upper_bound: path_count_upper_bound(g),
        exact_pre_closure: pre,
        exact_post_closure: post,
        per_layer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyk::{cyk_build, NodeSymbol, OrNode};
    use crate::gen::{ab_blocks_grammar, even_palindrome_grammar, run_mixture_grammar};
    use crate::grammar::{DomainVector, Grammar};
    use crate::reformulate::{
        construct_acyclic_grammar, epsilon_closure, grammar_to_pda, pda_to_nfa,
    };

    fn big(n: u32) -> BigUint {
        BigUint::from(n)
    }

    fn example_graph() -> (Grammar, DomainVector, AndOrGraph) {
        let g = ab_blocks_grammar();
        let d = DomainVector::parse("a\na,b\nb\n", &g, 3).unwrap();
        let (_, graph) = cyk_build(&g, &d, None).unwrap();
        (g, d, graph)
    }

    fn or_by_label(g: &Grammar, graph: &AndOrGraph, label: &str) -> OrId {
        (0..graph.or_nodes.len())
            .find(|&i| graph.or_label(g, i) == label)
            .unwrap_or_else(|| panic!("no node {label}"))
    }

    #[test]
    fn upper_bound_counts_root_paths() {
        let (g, _, graph) = example_graph();
        // Two root paths reach A_1_1.
        let mut or_pd_a11 = big(0);
        {
            // recompute via public API: total bound distributes as expected
            let a11 = or_by_label(&g, &graph, "A_1_1");
            let sg = build_stack_graph(&graph, a11).unwrap();
            assert_eq!(sg.source, a11);
            or_pd_a11 += big(2);
        }
        let _ = or_pd_a11;
        assert_eq!(path_count_upper_bound(&graph), big(15));
    }

    #[test]
    fn upper_bound_on_chain_graph() {
        // Hand-built chain root -> x -> y with unary AND-nodes.
        use crate::cyk::AndNode;
        let mut graph = AndOrGraph::default();
        graph.n = 1;
        let mk_or = |sym, start, len| OrNode {
            symbol: sym,
            start,
            len,
            and_children: vec![],
            and_parents: vec![],
        };
        graph
            .or_nodes
            .push(mk_or(NodeSymbol::Nt(crate::grammar::NtId(0)), 1, 1));
        graph
            .or_nodes
            .push(mk_or(NodeSymbol::Nt(crate::grammar::NtId(1)), 1, 1));
        graph
            .or_nodes
            .push(mk_or(NodeSymbol::Term(crate::grammar::TermId(0)), 1, 1));
        graph.and_nodes.push(AndNode {
            prod: 0,
            start: 1,
            len: 1,
            split: 0,
            parent: 0,
            left: 1,
            right: None,
        });
        graph.and_nodes.push(AndNode {
            prod: 1,
            start: 1,
            len: 1,
            split: 0,
            parent: 1,
            left: 2,
            right: None,
        });
        graph.or_nodes[0].and_children.push(0);
        graph.or_nodes[1].and_parents.push(0);
        graph.or_nodes[1].and_children.push(1);
        graph.or_nodes[2].and_parents.push(1);
        graph.root = Some(0);
        assert_eq!(path_count_upper_bound(&graph), big(3));
    }

    #[test]
    fn stack_graph_of_worked_example() {
        let (g, _, graph) = example_graph();
        let a11 = or_by_label(&g, &graph, "A_1_1");
        let sg = build_stack_graph(&graph, a11).unwrap();
        let lbl = |id: OrId| graph.or_label(&g, id);
        let mut edges: Vec<(String, String)> = sg
            .edges()
            .into_iter()
            .map(|(a, b)| (lbl(a), lbl(b)))
            .collect();
        edges.sort();
        let mut expected = vec![
            ("A_1_1".to_string(), "B_2_2".to_string()),
            ("A_1_1".to_string(), "A_2_1".to_string()),
            ("A_2_1".to_string(), "B_3_1".to_string()),
        ];
        expected.sort();
        assert_eq!(edges, expected);
        assert_eq!(sg.configuration_count(), big(2));
    }

    #[test]
    fn stack_graph_of_root_is_trivial() {
        let (_, _, graph) = example_graph();
        let sg = build_stack_graph(&graph, graph.root.unwrap()).unwrap();
        assert_eq!(sg.vertices.len(), 1);
        assert!(sg.edges().is_empty());
        assert_eq!(sg.configuration_count(), big(1));
    }

    #[test]
    fn shared_stacks_counted_once() {
        // Distinct root paths can expose the same stack; the stack graph
        // collapses them.
        let g = run_mixture_grammar();
        let d = DomainVector::full(&g, 5);
        let (_, graph) = cyk_build(&g, &d, None).unwrap();
        let c42 = or_by_label(&g, &graph, "C_4_2");
        let sg = build_stack_graph(&graph, c42).unwrap();
        assert_eq!(sg.configuration_count(), big(1));
        // More than one root path reaches C_4_2, so the bound is loose here.
        let report = exact_state_count(&graph).unwrap();
        assert!(report.upper_bound > report.exact_pre_closure);
    }

    fn built_sizes(g: &Grammar, d: &DomainVector) -> (usize, usize) {
        let (table, _) = cyk_build(g, d, None).unwrap();
        let ga = construct_acyclic_grammar(&table, g, d, None).unwrap();
        let nfa = pda_to_nfa(&grammar_to_pda(&ga), &ga, 10_000_000).unwrap();
        let layered = epsilon_closure(&nfa);
        (nfa.num_states(), layered.num_states())
    }

    #[test]
    fn exact_counts_match_built_nfa_running_example() {
        let (g, d, graph) = example_graph();
        let report = exact_state_count(&graph).unwrap();
        let (pre_built, post_built) = built_sizes(&g, &d);
        // Counts exclude the final state on both sides.
        assert_eq!(report.exact_pre_closure, big(pre_built as u32 - 1));
        assert_eq!(report.exact_post_closure, big(post_built as u32 - 1));
        assert_eq!(report.exact_pre_closure, big(13));
        assert_eq!(report.exact_post_closure, big(4));
        assert!(report.upper_bound >= report.exact_pre_closure);
    }

    #[test]
    fn exact_counts_trivial_grammar() {
        let g = Grammar::parse("S -> 'a'").unwrap();
        let d = DomainVector::full(&g, 1);
        let (_, graph) = cyk_build(&g, &d, None).unwrap();
        let report = exact_state_count(&graph).unwrap();
        let (pre_built, post_built) = built_sizes(&g, &d);
        assert_eq!(pre_built, 3);
        assert_eq!(post_built, 2);
        assert_eq!(report.exact_pre_closure, big(2));
        assert_eq!(report.exact_post_closure, big(1));
    }

    #[test]
    fn exact_counts_palindromes() {
        let g = even_palindrome_grammar();
        for n in [4usize, 6, 8] {
            let d = DomainVector::full(&g, n);
            let (_, graph) = cyk_build(&g, &d, None).unwrap();
            let report = exact_state_count(&graph).unwrap();
            let (pre_built, post_built) = built_sizes(&g, &d);
            assert_eq!(
                report.exact_pre_closure,
                big(pre_built as u32 - 1),
                "pre n={n}"
            );
            assert_eq!(
                report.exact_post_closure,
                big(post_built as u32 - 1),
                "post n={n}"
            );
            assert!(report.upper_bound >= report.exact_pre_closure);
            // In this family no two root paths share a stack, so the bound
            // is tight.
            assert_eq!(report.upper_bound, report.exact_pre_closure);
            // Per-layer counts sum to the totals.
            let pre_sum: BigUint = report.per_layer.iter().map(|(p, _)| p.clone()).sum();
            assert_eq!(pre_sum, report.exact_pre_closure);
        }
    }

    #[test]
    fn palindrome_counts_grow_exponentially() {
        let g = even_palindrome_grammar();
        let mut prev: Option<BigUint> = None;
        for n in [4usize, 6, 8, 10, 12] {
            let d = DomainVector::full(&g, n);
            let (_, graph) = cyk_build(&g, &d, None).unwrap();
            let report = exact_state_count(&graph).unwrap();
            if let Some(p) = prev {
                // At least x1.8 per step of n.
                assert!(
                    report.exact_pre_closure.clone() * big(10)
                        >= p.clone() * big(18),
                    "n={n}: {} vs previous {}",
                    report.exact_pre_closure,
                    p
                );
            }
            prev = Some(report.exact_pre_closure);
        }
    }

    #[test]
    fn entangled_contexts_counted_exactly() {
        // `N0_5_1` continues differently depending on whether `N0_4_1` or
        // `N2_4_1` was pushed before it, so the stack-graph path count
        // overshoots while the determinized walk stays exact.
        let g = Grammar::parse(
            "N0 -> 'b' | N3 N0\nN1 -> 'c' | 'b' | 'a'\nN2 -> 'b' | N2 N4 | N0 N0\nN3 -> N2 N2\nN4 -> N1 N3",
        )
        .unwrap();
        let d = DomainVector::parse("a,b\na,b\n*\n*\nb,c\n*\n*", &g, 7).unwrap();
        let (_, graph) = cyk_build(&g, &d, None).unwrap();
        let v = or_by_label(&g, &graph, "N2_2_2");
        let graph_paths = build_stack_graph(&graph, v).unwrap().configuration_count();
        let exact = stack_count(&graph, v).unwrap();
        assert_eq!(exact, big(5));
        assert_eq!(graph_paths, big(6));
        let report = exact_state_count(&graph).unwrap();
        let (pre_built, post_built) = built_sizes(&g, &d);
        assert_eq!(report.exact_pre_closure, big(pre_built as u32 - 1));
        assert_eq!(report.exact_post_closure, big(post_built as u32 - 1));
    }

    #[test]
    fn stack_count_agrees_with_graph_on_untangled_examples() {
        let (g, _, graph) = example_graph();
        for v in 0..graph.or_nodes.len() {
            let by_graph = build_stack_graph(&graph, v).unwrap().configuration_count();
            let exact = stack_count(&graph, v).unwrap();
            assert_eq!(by_graph, exact, "node {}", graph.or_label(&g, v));
        }
    }

    #[test]
    fn counts_match_on_random_grammars() {
        use crate::gen::{random_cnf_grammar, random_domains, SplitMix64};
        let mut rng = SplitMix64::new(99);
        let mut checked = 0;
        while checked < 15 {
            let g = random_cnf_grammar(&mut rng, 6, 3);
            let n = 2 + rng.below(5);
            let d = random_domains(&mut rng, &g, n, 4, 5);
            let (table, graph) = cyk_build(&g, &d, None).unwrap();
            if table.is_empty() {
                continue;
            }
            let report = exact_state_count(&graph).unwrap();
            let (pre_built, post_built) = built_sizes(&g, &d);
            assert_eq!(report.exact_pre_closure, big(pre_built as u32 - 1));
            assert_eq!(report.exact_post_closure, big(post_built as u32 - 1));
            assert!(report.upper_bound >= report.exact_pre_closure);
            assert!(report.exact_post_closure <= report.exact_pre_closure);
            checked += 1;
        }
    }

    #[test]
    fn empty_graph_errors() {
        let g = ab_blocks_grammar();
        let d = DomainVector::parse("b\nb\nb\n", &g, 3).unwrap();
        let (_, graph) = cyk_build(&g, &d, None).unwrap();
        assert_eq!(exact_state_count(&graph), Err(CountingError::EmptyGraph));
        assert_eq!(path_count_upper_bound(&graph), big(0));
    }
}
