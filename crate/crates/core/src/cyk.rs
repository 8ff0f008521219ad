//! CYK-based domain-consistency propagation for the grammar constraint.
//!
//! `cyk_build` fills the dynamic-programming table bottom-up from the
//! variable domains, then walks top-down from the start entry so that only
//! entries participating in a complete derivation survive. The surviving
//! table doubles as a layered AND/OR graph: OR-nodes are table entries,
//! AND-nodes are production applications with a split point.

use std::collections::HashMap;

use thiserror::Error;

use crate::bitset::BitSet;
use crate::grammar::{
    eval_pred, CnfShape, DomainVector, Grammar, NtId, OpenHours, TermId,
};

/// Triangular table: `cell(i, j)` holds the nonterminals spanning positions
/// `i..i+j-1` (1-based `i`, `1 <= j <= n-i+1`) that are supported below and
/// reachable from the start entry.
#[derive(Clone, Debug)]
pub struct CykTable {
    n: usize,
    cells: Vec<BitSet>,
}

impl CykTable {
    fn empty(n: usize) -> Self {
        CykTable {
            n,
            cells: vec![BitSet::new(); n * n],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && j >= 1 && i + j - 1 <= self.n);
        (j - 1) * self.n + (i - 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell(&self, i: usize, j: usize) -> &BitSet {
        &self.cells[self.idx(i, j)]
    }

    fn cell_mut(&mut self, i: usize, j: usize) -> &mut BitSet {
        let k = self.idx(i, j);
        &mut self.cells[k]
    }

    pub fn contains(&self, nt: NtId, i: usize, j: usize) -> bool {
        self.cell(i, j).contains(nt.0 as usize)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|c| c.is_empty())
    }

    /// Number of nonterminal entries over all cells.
    pub fn entry_count(&self) -> usize {
        self.cells.iter().map(|c| c.len()).sum()
    }
}

pub type OrId = usize;
pub type AndId = usize;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum NodeSymbol {
    Nt(NtId),
    Term(TermId),
}

/// OR-node: an entry `(symbol, start, len)` of the table, or a terminal
/// occurrence `(a, i, 1)`.
#[derive(Clone, Debug)]
pub struct OrNode {
    pub symbol: NodeSymbol,
    pub start: usize,
    pub len: usize,
    pub and_children: Vec<AndId>,
    pub and_parents: Vec<AndId>,
}

impl OrNode {
    pub fn is_terminal(&self) -> bool {
        matches!(self.symbol, NodeSymbol::Term(_))
    }
}

/// AND-node: one application of a production at `(start, len)` with split
/// `split` (0 for terminal productions).
#[derive(Clone, Debug)]
pub struct AndNode {
    pub prod: usize,
    pub start: usize,
    pub len: usize,
    pub split: usize,
    pub parent: OrId,
    pub left: OrId,
    pub right: Option<OrId>,
}

/// Layered DAG of alternating OR- and AND-nodes; equivalent to the table and
/// read elsewhere as the acyclic grammar.
#[derive(Clone, Debug, Default)]
pub struct AndOrGraph {
    pub n: usize,
    pub or_nodes: Vec<OrNode>,
    pub and_nodes: Vec<AndNode>,
    pub root: Option<OrId>,
    index: HashMap<(NodeSymbol, usize, usize), OrId>,
}

impl AndOrGraph {
    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn or_id(&self, symbol: NodeSymbol, start: usize, len: usize) -> Option<OrId> {
        self.index.get(&(symbol, start, len)).copied()
    }

    pub fn nonterminal_or_count(&self) -> usize {
        self.or_nodes.iter().filter(|o| !o.is_terminal()).count()
    }

    pub fn terminal_or_count(&self) -> usize {
        self.or_nodes.iter().filter(|o| o.is_terminal()).count()
    }

    fn add_or(&mut self, symbol: NodeSymbol, start: usize, len: usize) -> OrId {
        let id = self.or_nodes.len();
        self.or_nodes.push(OrNode {
            symbol,
            start,
            len,
            and_children: Vec::new(),
            and_parents: Vec::new(),
        });
        self.index.insert((symbol, start, len), id);
        id
    }

    pub fn or_label(&self, g: &Grammar, id: OrId) -> String {
        let o = &self.or_nodes[id];
        match o.symbol {
            NodeSymbol::Nt(nt) => format!("{}_{}_{}", g.nt_name(nt), o.start, o.len),
            NodeSymbol::Term(t) => format!("{}_{}", g.term_name(t), o.start),
        }
    }

    /// DOT-like text dump for debugging.
    pub fn to_dot(&self, g: &Grammar) -> String {
        let mut out = String::from("digraph andor {\n");
        for (id, o) in self.or_nodes.iter().enumerate() {
            let shape = if o.is_terminal() { "plaintext" } else { "ellipse" };
            out.push_str(&format!(
                "  or{} [label=\"{}\" shape={}];\n",
                id,
                self.or_label(g, id),
                shape
            ));
        }
        for (id, a) in self.and_nodes.iter().enumerate() {
            out.push_str(&format!("  and{id} [label=\"&\" shape=box];\n"));
            out.push_str(&format!("  or{} -> and{};\n", a.parent, id));
            out.push_str(&format!("  and{} -> or{};\n", id, a.left));
            if let Some(r) = a.right {
                out.push_str(&format!("  and{} -> or{};\n", id, r));
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum CykError {
    #[error("grammar must be in Chomsky normal form")]
    NotCnf,
    #[error("domain product has {candidates} words, over the budget of {budget}")]
    Budget { candidates: u128, budget: u128 },
    #[error("constraint arity is zero")]
    ZeroArity,
}

/// Bottom-up table fill. Returns raw (pre-support-filter) cells.
fn fill_table(
    g: &Grammar,
    d: &DomainVector,
    open: Option<&OpenHours>,
) -> Result<CykTable, CykError> {
    if !g.is_cnf() {
        return Err(CykError::NotCnf);
    }
    let n = d.len();
    if n == 0 {
        return Err(CykError::ZeroArity);
    }
    let mut v = CykTable::empty(n);
    for i in 1..=n {
        for p in &g.productions {
            if let Some(CnfShape::Terminal(t)) = p.cnf_shape() {
                if d.allows(i, t) && eval_pred(&p.predicate, i, 1, open) {
                    v.cell_mut(i, 1).insert(p.lhs.0 as usize);
                }
            }
        }
    }
    for j in 2..=n {
        for i in 1..=(n - j + 1) {
            for p in &g.productions {
                if let Some(CnfShape::Binary(b, c)) = p.cnf_shape() {
                    if v.contains(p.lhs, i, j) {
                        continue;
                    }
                    if !eval_pred(&p.predicate, i, j, open) {
                        continue;
                    }
                    for k in 1..j {
                        if v.contains(b, i, k) && v.contains(c, i + k, j - k) {
                            v.cell_mut(i, j).insert(p.lhs.0 as usize);
                            break;
                        }
                    }
                }
            }
        }
    }
    Ok(v)
}

/// Build the support-filtered table and the AND/OR graph.
///
/// If the start symbol does not span the whole constraint, both results are
/// empty: the constraint is dis-entailed.
pub fn cyk_build(
    g: &Grammar,
    d: &DomainVector,
    open: Option<&OpenHours>,
) -> Result<(CykTable, AndOrGraph), CykError> {
    let raw = fill_table(g, d, open)?;
    let n = raw.n();
    let mut graph = AndOrGraph {
        n,
        ..Default::default()
    };
    let mut marked = CykTable::empty(n);
    let mut term_marked = vec![BitSet::new(); n];

    if !raw.contains(g.start, 1, n) {
        return Ok((marked, graph));
    }

    // Top-down: keep entries reachable from (S, 1, n) through supported
    // production applications.
    let mut stack = vec![(g.start, 1usize, n)];
    marked.cell_mut(1, n).insert(g.start.0 as usize);
    while let Some((nt, i, j)) = stack.pop() {
        for (_, p) in g.productions_of(nt) {
            match p.cnf_shape() {
                Some(CnfShape::Terminal(t)) if j == 1 => {
                    if d.allows(i, t) && eval_pred(&p.predicate, i, 1, open) {
                        term_marked[i - 1].insert(t.0 as usize);
                    }
                }
                Some(CnfShape::Binary(b, c)) if j >= 2 => {
                    if !eval_pred(&p.predicate, i, j, open) {
                        continue;
                    }
                    for k in 1..j {
                        if raw.contains(b, i, k) && raw.contains(c, i + k, j - k) {
                            if marked.cell_mut(i, k).insert(b.0 as usize) {
                                stack.push((b, i, k));
                            }
                            if marked.cell_mut(i + k, j - k).insert(c.0 as usize) {
                                stack.push((c, i + k, j - k));
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }

    // Deterministic node construction: nonterminal OR-nodes scanned from the
    // widest span down, then terminal OR-nodes, then AND-nodes per parent.
    for j in (1..=n).rev() {
        for i in 1..=(n - j + 1) {
            for nt in marked.cell(i, j).iter() {
                graph.add_or(NodeSymbol::Nt(NtId(nt as u32)), i, j);
            }
        }
    }
    for i in 1..=n {
        for t in term_marked[i - 1].iter() {
            graph.add_or(NodeSymbol::Term(TermId(t as u32)), i, 1);
        }
    }
    for parent in 0..graph.or_nodes.len() {
        let (sym, i, j) = {
            let o = &graph.or_nodes[parent];
            (o.symbol, o.start, o.len)
        };
        let nt = match sym {
            NodeSymbol::Nt(nt) => nt,
            NodeSymbol::Term(_) => continue,
        };
        for (pi, p) in g.productions_of(nt) {
            match p.cnf_shape() {
                Some(CnfShape::Terminal(t)) if j == 1 => {
                    if let Some(child) = graph.or_id(NodeSymbol::Term(t), i, 1) {
                        let id = graph.and_nodes.len();
                        graph.and_nodes.push(AndNode {
                            prod: pi,
                            start: i,
                            len: j,
                            split: 0,
                            parent,
                            left: child,
                            right: None,
                        });
                        graph.or_nodes[parent].and_children.push(id);
                        graph.or_nodes[child].and_parents.push(id);
                    }
                }
                Some(CnfShape::Binary(b, c)) if j >= 2 => {
                    if !eval_pred(&p.predicate, i, j, open) {
                        continue;
                    }
                    for k in 1..j {
                        let (lb, rc) = (
                            graph.or_id(NodeSymbol::Nt(b), i, k),
                            graph.or_id(NodeSymbol::Nt(c), i + k, j - k),
                        );
                        if let (Some(lb), Some(rc)) = (lb, rc) {
                            let id = graph.and_nodes.len();
                            graph.and_nodes.push(AndNode {
                                prod: pi,
                                start: i,
                                len: j,
                                split: k,
                                parent,
                                left: lb,
                                right: Some(rc),
                            });
                            graph.or_nodes[parent].and_children.push(id);
                            graph.or_nodes[lb].and_parents.push(id);
                            graph.or_nodes[rc].and_parents.push(id);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    // Drop OR-nodes that got no children (marked but unsupported can't
    // happen by construction; terminals always have a parent).
    debug_assert!(graph
        .or_nodes
        .iter()
        .all(|o| o.is_terminal() || !o.and_children.is_empty()));
    graph.root = graph.or_id(NodeSymbol::Nt(g.start), 1, n);
    Ok((marked, graph))
}

/// Domain-consistency propagator: the returned vector keeps exactly the
/// values whose terminal OR-node survives.
pub fn propagate_grammar(
    g: &Grammar,
    d: &DomainVector,
    open: Option<&OpenHours>,
) -> Result<DomainVector, CykError> {
    let (_, graph) = cyk_build(g, d, open)?;
    let n = d.len();
    let mut sets = vec![BitSet::new(); n];
    for o in &graph.or_nodes {
        if let NodeSymbol::Term(t) = o.symbol {
            sets[o.start - 1].insert(t.0 as usize);
        }
    }
    Ok(DomainVector::new(sets))
}

/// Straightforward CYK recognizer for a single word, predicates included.
/// Independent of the propagator's two-pass table; used as an oracle.
pub fn recognize(g: &Grammar, word: &[TermId], open: Option<&OpenHours>) -> bool {
    if !g.is_cnf() || word.is_empty() {
        return false;
    }
    let n = word.len();
    let mut v: Vec<Vec<BitSet>> = vec![vec![BitSet::new(); n + 1]; n + 2];
    for i in 1..=n {
        for p in &g.productions {
            if let Some(CnfShape::Terminal(t)) = p.cnf_shape() {
                if word[i - 1] == t && eval_pred(&p.predicate, i, 1, open) {
                    v[i][1].insert(p.lhs.0 as usize);
                }
            }
        }
    }
    for j in 2..=n {
        for i in 1..=(n - j + 1) {
            for p in &g.productions {
                if let Some(CnfShape::Binary(b, c)) = p.cnf_shape() {
                    if v[i][j].contains(p.lhs.0 as usize)
                        || !eval_pred(&p.predicate, i, j, open)
                    {
                        continue;
                    }
                    for k in 1..j {
                        if v[i][k].contains(b.0 as usize)
                            && v[i + k][j - k].contains(c.0 as usize)
                        {
                            v[i][j].insert(p.lhs.0 as usize);
                            break;
                        }
                    }
                }
            }
        }
    }
    v[1][n].contains(g.start.0 as usize)
}

/// Brute-force oracle: test every word of the domain product.
pub fn enumerate_solutions(
    g: &Grammar,
    d: &DomainVector,
    open: Option<&OpenHours>,
    budget: Option<u128>,
) -> Result<Vec<Vec<TermId>>, CykError> {
    let budget = budget.unwrap_or(10_000_000);
    let candidates = d.candidate_count();
    if candidates > budget {
        return Err(CykError::Budget { candidates, budget });
    }
    let n = d.len();
    let choices: Vec<Vec<TermId>> = (1..=n)
        .map(|i| d.at(i).iter().map(|t| TermId(t as u32)).collect())
        .collect();
    if choices.iter().any(|c| c.is_empty()) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut word: Vec<TermId> = choices.iter().map(|c| c[0]).collect();
    let mut odo = vec![0usize; n];
    loop {
        if recognize(g, &word, open) {
            out.push(word.clone());
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            odo[pos] += 1;
            if odo[pos] < choices[pos].len() {
                word[pos] = choices[pos][odo[pos]];
                break;
            }
            odo[pos] = 0;
            word[pos] = choices[pos][0];
        }
    }
}

/// Enumerate the constraint's solutions by expanding derivations instead of
/// scanning the domain product; usable when the product is astronomical but
/// the language is small. Results are sorted and deduplicated.
pub fn derive_strings(
    g: &Grammar,
    d: &DomainVector,
    open: Option<&OpenHours>,
    cap: usize,
) -> Result<Vec<Vec<TermId>>, CykError> {
    let (table, _) = cyk_build(g, d, open)?;
    let n = d.len();
    let mut memo: HashMap<(u32, usize, usize), Vec<Vec<TermId>>> = HashMap::new();
    fn expand(
        g: &Grammar,
        table: &CykTable,
        d: &DomainVector,
        open: Option<&OpenHours>,
        nt: NtId,
        i: usize,
        j: usize,
        cap: usize,
        memo: &mut HashMap<(u32, usize, usize), Vec<Vec<TermId>>>,
    ) -> Vec<Vec<TermId>> {
        if let Some(v) = memo.get(&(nt.0, i, j)) {
            return v.clone();
        }
        let mut out: Vec<Vec<TermId>> = Vec::new();
        for (_, p) in g.productions_of(nt) {
            match p.cnf_shape() {
                Some(CnfShape::Terminal(t)) if j == 1 => {
                    if d.allows(i, t) && eval_pred(&p.predicate, i, 1, open) {
                        out.push(vec![t]);
                    }
                }
                Some(CnfShape::Binary(b, c)) if j >= 2 => {
                    if !eval_pred(&p.predicate, i, j, open) {
                        continue;
                    }
                    for k in 1..j {
                        if table.contains(b, i, k) && table.contains(c, i + k, j - k) {
                            let ls = expand(g, table, d, open, b, i, k, cap, memo);
                            let rs =
                                expand(g, table, d, open, c, i + k, j - k, cap, memo);
                            for l in &ls {
                                for r in &rs {
                                    let mut w = l.clone();
                                    w.extend_from_slice(r);
                                    out.push(w);
                                    if out.len() > cap {
                                        break;
                                    }
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        out.sort();
        out.dedup();
        out.truncate(cap + 1);
        memo.insert((nt.0, i, j), out.clone());
        out
    }
    if table.is_empty() {
        return Ok(Vec::new());
    }
    let out = expand(g, &table, d, open, g.start, 1, n, cap, &mut memo);
    if out.len() > cap {
        return Err(CykError::Budget {
            candidates: out.len() as u128,
            budget: cap as u128,
        });
    }
    Ok(out)
}
