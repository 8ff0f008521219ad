//! Layered-automaton algebra: unfolding, simplification, subset
//! construction, exact layered minimization and the heuristic NFA reduction,
//! plus a small cyclic DFA type with classical minimization for the
//! order-of-operations experiments.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::bitset::BitSet;
use crate::grammar::{DomainVector, Grammar};

#[derive(Error, Debug, PartialEq, Eq)]
pub enum AutomataError {
    #[error("state budget exceeded: {states} states, budget {budget}")]
    Budget { states: usize, budget: usize },
    #[error("fla line {line}: {msg}")]
    FlaParse { line: usize, msg: String },
}

/// Automaton over `n` layers; transitions only connect consecutive layers,
/// the initial state sits in layer 0 and accepting states in layer `n`, so
/// only length-`n` words are accepted. States are numbered in BFS order from
/// the initial state.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LayeredAutomaton {
    n: usize,
    symbols: Vec<String>,
    layers: Vec<usize>,
    out: Vec<Vec<(u32, u32)>>,
    initial: Option<u32>,
    finals: BTreeSet<u32>,
}

impl LayeredAutomaton {
    pub fn empty(n: usize, symbols: Vec<String>) -> Self {
        LayeredAutomaton {
            n,
            symbols,
            layers: Vec::new(),
            out: Vec::new(),
            initial: None,
            finals: BTreeSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_states(&self) -> usize {
        self.layers.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.out.iter().map(|o| o.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_none()
    }

    pub fn initial(&self) -> Option<u32> {
        self.initial
    }

    pub fn finals(&self) -> &BTreeSet<u32> {
        &self.finals
    }

    pub fn layer(&self, state: u32) -> usize {
        self.layers[state as usize]
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n + 1];
        for &l in &self.layers {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn sym_id(&self, name: &str) -> Option<u32> {
        self.symbols.iter().position(|s| s == name).map(|i| i as u32)
    }

    pub fn transitions(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(src, ts)| ts.iter().map(move |&(s, d)| (src as u32, s, d)))
    }

    pub fn successors(&self, state: u32) -> &[(u32, u32)] {
        &self.out[state as usize]
    }

    pub fn is_deterministic(&self) -> bool {
        self.out.iter().all(|ts| {
            ts.windows(2).all(|w| w[0].0 != w[1].0)
        })
    }

    /// Accept a word of symbol ids (length must be `n`).
    pub fn accepts(&self, word: &[u32]) -> bool {
        if word.len() != self.n {
            return false;
        }
        let Some(init) = self.initial else {
            return false;
        };
        let mut cur: BTreeSet<u32> = BTreeSet::from([init]);
        for &sym in word {
            let mut next = BTreeSet::new();
            for &q in &cur {
                for &(s, d) in &self.out[q as usize] {
                    if s == sym {
                        next.insert(d);
                    }
                }
            }
            if next.is_empty() {
                return false;
            }
            cur = next;
        }
        cur.iter().any(|q| self.finals.contains(q))
    }

    pub fn accepts_names(&self, word: &[&str]) -> bool {
        let ids: Option<Vec<u32>> = word.iter().map(|w| self.sym_id(w)).collect();
        ids.map_or(false, |ids| self.accepts(&ids))
    }

    /// Serialize to the `fla` text format.
    pub fn to_fla(&self) -> String {
        let mut out = format!(
            "fla {} {} {}\n",
            self.n,
            self.num_states(),
            self.num_transitions()
        );
        for (src, ts) in self.out.iter().enumerate() {
            let mut ts: Vec<_> = ts.clone();
            ts.sort_by(|a, b| {
                self.symbols[a.0 as usize]
                    .cmp(&self.symbols[b.0 as usize])
                    .then(a.1.cmp(&b.1))
            });
            for (s, d) in ts {
                out.push_str(&format!(
                    "{} {} {} {}\n",
                    self.layers[src], src, self.symbols[s as usize], d
                ));
            }
        }
        if let Some(init) = self.initial {
            out.push_str(&format!("initial {init}\n"));
            let finals: Vec<String> = self.finals.iter().map(|f| f.to_string()).collect();
            out.push_str(&format!("final {}\n", finals.join(" ")));
        }
        out
    }

    /// Parse the `fla` format.
    pub fn from_fla(text: &str) -> Result<LayeredAutomaton, AutomataError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(AutomataError::FlaParse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "fla" {
            return Err(AutomataError::FlaParse {
                line: 1,
                msg: "expected `fla <n> <states> <transitions>`".into(),
            });
        }
        let parse_num = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|_| AutomataError::FlaParse {
                line,
                msg: format!("bad number `{s}`"),
            })
        };
        let n = parse_num(h[1], 1)?;
        let num_states = parse_num(h[2], 1)?;
        let num_trans = parse_num(h[3], 1)?;
        let mut symbols: Vec<String> = Vec::new();
        let mut sym_index: HashMap<String, u32> = HashMap::new();
        let mut layers: Vec<Option<usize>> = vec![None; num_states];
        let mut out: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num_states];
        let mut initial = None;
        let mut finals = BTreeSet::new();
        let mut seen_trans = 0usize;
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            match toks[0] {
                "initial" => {
                    if toks.len() != 2 {
                        return Err(AutomataError::FlaParse {
                            line: line_no,
                            msg: "initial takes one id".into(),
                        });
                    }
                    initial = Some(parse_num(toks[1], line_no)? as u32);
                }
                "final" => {
                    for t in &toks[1..] {
                        finals.insert(parse_num(t, line_no)? as u32);
                    }
                }
                _ => {
                    if toks.len() != 4 {
                        return Err(AutomataError::FlaParse {
                            line: line_no,
                            msg: "expected `layer src symbol dst`".into(),
                        });
                    }
                    let layer = parse_num(toks[0], line_no)?;
                    let src = parse_num(toks[1], line_no)?;
                    let dst = parse_num(toks[3], line_no)?;
                    if src >= num_states || dst >= num_states {
                        return Err(AutomataError::FlaParse {
                            line: line_no,
                            msg: "state id out of range".into(),
                        });
                    }
                    let sym = *sym_index.entry(toks[2].to_string()).or_insert_with(|| {
                        symbols.push(toks[2].to_string());
                        (symbols.len() - 1) as u32
                    });
                    for (state, l) in [(src, layer), (dst, layer + 1)] {
                        match layers[state] {
                            None => layers[state] = Some(l),
                            Some(prev) if prev != l => {
                                return Err(AutomataError::FlaParse {
                                    line: line_no,
                                    msg: format!("state {state} in layers {prev} and {l}"),
                                })
                            }
                            _ => {}
                        }
                    }
                    out[src].push((sym, dst as u32));
                    seen_trans += 1;
                }
            }
        }
        if seen_trans != num_trans {
            return Err(AutomataError::FlaParse {
                line: 1,
                msg: format!("header says {num_trans} transitions, found {seen_trans}"),
            });
        }
        if num_states == 0 {
            return Ok(LayeredAutomaton::empty(n, symbols));
        }
        let initial = initial.ok_or(AutomataError::FlaParse {
            line: 1,
            msg: "missing initial line".into(),
        })?;
        if initial as usize >= num_states || finals.iter().any(|&f| f as usize >= num_states)
        {
            return Err(AutomataError::FlaParse {
                line: 1,
                msg: "initial/final id out of range".into(),
            });
        }
        // A state mentioned nowhere has no layer; only possible for a
        // one-state automaton accepting nothing, which we reject.
        let layers: Result<Vec<usize>, _> = layers
            .iter()
            .enumerate()
            .map(|(s, l)| {
                l.or({
                    // lone initial==final state at n==0 is not supported
                    if n == 0 {
                        Some(0)
                    } else {
                        None
                    }
                })
                .ok_or(AutomataError::FlaParse {
                    line: 1,
                    msg: format!("state {s} has no transitions"),
                })
            })
            .collect();
        Ok(LayeredAutomaton {
            n,
            symbols,
            layers: layers?,
            out,
            initial: Some(initial),
            finals,
        })
    }
}

/// Incremental construction; `finish` trims states off every
/// initial-to-accepting path and renumbers canonically by BFS.
pub(crate) struct LayeredBuilder {
    n: usize,
    symbols: Vec<String>,
    layers: Vec<usize>,
    out: Vec<Vec<(u32, u32)>>,
    initial: Option<u32>,
    finals: BTreeSet<u32>,
}

impl LayeredBuilder {
    pub fn new(n: usize, symbols: Vec<String>) -> Self {
        LayeredBuilder {
            n,
            symbols,
            layers: Vec::new(),
            out: Vec::new(),
            initial: None,
            finals: BTreeSet::new(),
        }
    }

    pub fn add_state(&mut self, layer: usize) -> u32 {
        self.layers.push(layer);
        self.out.push(Vec::new());
        (self.layers.len() - 1) as u32
    }

    pub fn add_transition(&mut self, src: u32, sym: u32, dst: u32) {
        debug_assert_eq!(self.layers[src as usize] + 1, self.layers[dst as usize]);
        self.out[src as usize].push((sym, dst));
    }

    pub fn set_initial(&mut self, state: u32) {
        debug_assert_eq!(self.layers[state as usize], 0);
        self.initial = Some(state);
    }

    pub fn add_final(&mut self, state: u32) {
        debug_assert_eq!(self.layers[state as usize], self.n);
        self.finals.insert(state);
    }

    pub fn finish(self) -> LayeredAutomaton {
        let num = self.layers.len();
        let empty = LayeredAutomaton::empty(self.n, self.symbols.clone());
        let Some(init) = self.initial else {
            return empty;
        };
        // Forward reachability.
        let mut fwd = vec![false; num];
        let mut queue = VecDeque::from([init]);
        fwd[init as usize] = true;
        while let Some(q) = queue.pop_front() {
            for &(_, d) in &self.out[q as usize] {
                if !fwd[d as usize] {
                    fwd[d as usize] = true;
                    queue.push_back(d);
                }
            }
        }
        // Backward reachability from finals.
        let mut ins: Vec<Vec<u32>> = vec![Vec::new(); num];
        for (src, ts) in self.out.iter().enumerate() {
            for &(_, d) in ts {
                ins[d as usize].push(src as u32);
            }
        }
        let mut bwd = vec![false; num];
        let mut queue: VecDeque<u32> = self.finals.iter().copied().collect();
        for &f in &self.finals {
            bwd[f as usize] = true;
        }
        while let Some(q) = queue.pop_front() {
            for &p in &ins[q as usize] {
                if !bwd[p as usize] {
                    bwd[p as usize] = true;
                    queue.push_back(p);
                }
            }
        }
        let alive = |s: u32| fwd[s as usize] && bwd[s as usize];
        if !alive(init) {
            return empty;
        }
        // Canonical BFS renumbering over alive states.
        let mut renum: Vec<Option<u32>> = vec![None; num];
        let mut order: Vec<u32> = Vec::new();
        let mut queue = VecDeque::from([init]);
        renum[init as usize] = Some(0);
        order.push(init);
        while let Some(q) = queue.pop_front() {
            let mut ts: Vec<(u32, u32)> = self.out[q as usize]
                .iter()
                .copied()
                .filter(|&(_, d)| alive(d))
                .collect();
            ts.sort();
            ts.dedup();
            for (_, d) in ts {
                if renum[d as usize].is_none() {
                    renum[d as usize] = Some(order.len() as u32);
                    order.push(d);
                    queue.push_back(d);
                }
            }
        }
        let mut layers = Vec::with_capacity(order.len());
        let mut out = Vec::with_capacity(order.len());
        for &old in &order {
            layers.push(self.layers[old as usize]);
            let mut ts: Vec<(u32, u32)> = self.out[old as usize]
                .iter()
                .filter(|&&(_, d)| alive(d))
                .map(|&(s, d)| (s, renum[d as usize].unwrap()))
                .collect();
            ts.sort();
            ts.dedup();
            out.push(ts);
        }
        let finals: BTreeSet<u32> = self
            .finals
            .iter()
            .filter(|&&f| alive(f))
            .map(|&f| renum[f as usize].unwrap())
            .collect();
        LayeredAutomaton {
            n: self.n,
            symbols: self.symbols,
            layers,
            out,
            initial: Some(0),
            finals,
        }
    }
}

/// Cyclic deterministic finite automaton with a partial transition function.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Dfa {
    symbols: Vec<String>,
    num_states: usize,
    initial: u32,
    finals: BTreeSet<u32>,
    delta: Vec<BTreeMap<u32, u32>>,
}

impl Dfa {
    pub fn new(symbols: Vec<String>, num_states: usize, initial: u32) -> Self {
        Dfa {
            symbols,
            num_states,
            initial,
            finals: BTreeSet::new(),
            delta: vec![BTreeMap::new(); num_states],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn initial(&self) -> u32 {
        self.initial
    }

    pub fn finals(&self) -> &BTreeSet<u32> {
        &self.finals
    }

    pub fn add_transition(&mut self, src: u32, sym: u32, dst: u32) {
        self.delta[src as usize].insert(sym, dst);
    }

    pub fn set_final(&mut self, state: u32) {
        self.finals.insert(state);
    }

    pub fn next(&self, state: u32, sym: u32) -> Option<u32> {
        self.delta[state as usize].get(&sym).copied()
    }

    pub fn accepts(&self, word: &[u32]) -> bool {
        let mut q = self.initial;
        for &s in word {
            match self.next(q, s) {
                Some(d) => q = d,
                None => return false,
            }
        }
        self.finals.contains(&q)
    }

    /// Keep states reachable from the initial state and able to reach a
    /// final state. Returns an automaton with 0 states when the language is
    /// empty.
    pub fn trim(&self) -> Dfa {
        let mut fwd = vec![false; self.num_states];
        let mut queue = VecDeque::from([self.initial]);
        fwd[self.initial as usize] = true;
        while let Some(q) = queue.pop_front() {
            for (_, &d) in &self.delta[q as usize] {
                if !fwd[d as usize] {
                    fwd[d as usize] = true;
                    queue.push_back(d);
                }
            }
        }
        let mut ins: Vec<Vec<u32>> = vec![Vec::new(); self.num_states];
        for (src, ts) in self.delta.iter().enumerate() {
            for (_, &d) in ts {
                ins[d as usize].push(src as u32);
            }
        }
        let mut bwd = vec![false; self.num_states];
        let mut queue: VecDeque<u32> = self.finals.iter().copied().collect();
        for &f in &self.finals {
            bwd[f as usize] = true;
        }
        while let Some(q) = queue.pop_front() {
            for &p in &ins[q as usize] {
                if !bwd[p as usize] {
                    bwd[p as usize] = true;
                    queue.push_back(p);
                }
            }
        }
        let alive: Vec<bool> = (0..self.num_states)
            .map(|s| fwd[s] && bwd[s])
            .collect();
        if !alive[self.initial as usize] {
            return Dfa::new(self.symbols.clone(), 0, 0);
        }
        let mut renum = vec![u32::MAX; self.num_states];
        let mut count = 0;
        for s in 0..self.num_states {
            if alive[s] {
                renum[s] = count;
                count += 1;
            }
        }
        let mut out = Dfa::new(self.symbols.clone(), count as usize, renum[self.initial as usize]);
        for s in 0..self.num_states {
            if !alive[s] {
                continue;
            }
            for (&sym, &d) in &self.delta[s] {
                if alive[d as usize] {
                    out.add_transition(renum[s], sym, renum[d as usize]);
                }
            }
            if self.finals.contains(&(s as u32)) {
                out.set_final(renum[s]);
            }
        }
        out
    }

    /// Classical minimization by partition refinement over the completed
    /// automaton; the dead class is dropped again on the way out.
    pub fn minimize(&self) -> Dfa {
        let t = self.trim();
        if t.num_states == 0 {
            return t;
        }
        let nsym = t.symbols.len() as u32;
        let sink = t.num_states; // virtual dead state
        let total = t.num_states + 1;
        // class 0: non-final (includes sink), class 1: final
        let mut class: Vec<u32> = (0..total)
            .map(|s| {
                if s < t.num_states && t.finals.contains(&(s as u32)) {
                    1
                } else {
                    0
                }
            })
            .collect();
        let has_finals = class.iter().any(|&c| c == 1);
        debug_assert!(has_finals);
        loop {
            let mut sig_map: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
            let mut next: Vec<u32> = vec![0; total];
            for s in 0..total {
                let succ: Vec<u32> = (0..nsym)
                    .map(|sym| {
                        if s == sink {
                            class[sink]
                        } else {
                            t.next(s as u32, sym)
                                .map(|d| class[d as usize])
                                .unwrap_or(class[sink])
                        }
                    })
                    .collect();
                let key = (class[s], succ);
                let fresh = sig_map.len() as u32;
                let id = *sig_map.entry(key).or_insert(fresh);
                next[s] = id;
            }
            let stable = {
                let mut remap: HashMap<u32, u32> = HashMap::new();
                let mut ok = true;
                for s in 0..total {
                    match remap.get(&class[s]) {
                        Some(&m) if m != next[s] => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            remap.insert(class[s], next[s]);
                        }
                    }
                }
                ok && remap.len() == sig_map.len()
            };
            class = next;
            if stable {
                break;
            }
        }
        let dead_class = class[sink];
        // Build the quotient, skipping the dead class.
        let mut class_ids: Vec<u32> = class[..t.num_states]
            .iter()
            .copied()
            .filter(|&c| c != dead_class)
            .collect();
        class_ids.sort();
        class_ids.dedup();
        let renum: HashMap<u32, u32> = class_ids
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u32))
            .collect();
        let mut out = Dfa::new(
            t.symbols.clone(),
            class_ids.len(),
            renum[&class[t.initial as usize]],
        );
        for s in 0..t.num_states {
            let c = class[s];
            if c == dead_class {
                continue;
            }
            for (&sym, &d) in &t.delta[s] {
                let dc = class[d as usize];
                if dc != dead_class {
                    out.add_transition(renum[&c], sym, renum[&dc]);
                }
            }
            if t.finals.contains(&(s as u32)) {
                out.set_final(renum[&c]);
            }
        }
        out.trim()
    }
}

/// Unfold a cyclic DFA into the layered automaton accepting exactly its
/// length-`n` words.
pub fn unfold(dfa: &Dfa, n: usize) -> LayeredAutomaton {
    let mut b = LayeredBuilder::new(n, dfa.symbols().to_vec());
    if dfa.num_states() == 0 {
        return b.finish();
    }
    let mut index: HashMap<(u32, usize), u32> = HashMap::new();
    let init = b.add_state(0);
    index.insert((dfa.initial(), 0), init);
    b.set_initial(init);
    let mut frontier = vec![(dfa.initial(), 0usize)];
    while let Some((q, k)) = frontier.pop() {
        if k == n {
            continue;
        }
        let src = index[&(q, k)];
        for sym in 0..dfa.num_symbols() as u32 {
            if let Some(d) = dfa.next(q, sym) {
                let dst = *index.entry((d, k + 1)).or_insert_with(|| {
                    frontier.push((d, k + 1));
                    b.add_state(k + 1)
                });
                b.add_transition(src, sym, dst);
            }
        }
    }
    for (&(q, k), &id) in &index {
        if k == n && dfa.finals().contains(&q) {
            b.add_final(id);
        }
    }
    b.finish()
}

/// Remove layer-`k` transitions whose symbol is not allowed at position
/// `k+1`, then drop states off every accepting path.
pub fn simplify_syms(a: &LayeredAutomaton, allowed: &[BitSet]) -> LayeredAutomaton {
    assert_eq!(allowed.len(), a.n());
    let mut b = LayeredBuilder::new(a.n(), a.symbols().to_vec());
    for s in 0..a.num_states() {
        b.add_state(a.layer(s as u32));
    }
    for (src, sym, dst) in a.transitions() {
        if allowed[a.layer(src)].contains(sym as usize) {
            b.add_transition(src, sym, dst);
        }
    }
    if let Some(init) = a.initial() {
        b.set_initial(init);
        for &f in a.finals() {
            b.add_final(f);
        }
    }
    b.finish()
}

/// Per-position allowed-symbol masks for an automaton, from a grammar-typed
/// domain vector.
pub fn domain_masks(a: &LayeredAutomaton, g: &Grammar, d: &DomainVector) -> Vec<BitSet> {
    let term_of: Vec<Option<crate::grammar::TermId>> = a
        .symbols()
        .iter()
        .map(|name| g.term_id(name))
        .collect();
    (1..=d.len())
        .map(|i| {
            let mut set = BitSet::new();
            for (sym, t) in term_of.iter().enumerate() {
                if let Some(t) = t {
                    if d.allows(i, *t) {
                        set.insert(sym);
                    }
                }
            }
            set
        })
        .collect()
}

/// `simplify` with grammar-typed domains.
pub fn simplify(a: &LayeredAutomaton, g: &Grammar, d: &DomainVector) -> LayeredAutomaton {
    simplify_syms(a, &domain_masks(a, g, d))
}

/// Standard subset construction, layer by layer. Fails if the deterministic
/// automaton would exceed `budget` states.
pub fn subset_construction(
    a: &LayeredAutomaton,
    budget: usize,
) -> Result<LayeredAutomaton, AutomataError> {
    let mut b = LayeredBuilder::new(a.n(), a.symbols().to_vec());
    let Some(init) = a.initial() else {
        return Ok(b.finish());
    };
    let mut index: HashMap<Vec<u32>, u32> = HashMap::new();
    let start = vec![init];
    let sid = b.add_state(0);
    index.insert(start.clone(), sid);
    b.set_initial(sid);
    let mut frontier = VecDeque::from([start]);
    let mut states = 1usize;
    while let Some(subset) = frontier.pop_front() {
        let src = index[&subset];
        let layer = a.layer(subset[0]);
        if layer == a.n() {
            if subset.iter().any(|q| a.finals().contains(q)) {
                b.add_final(src);
            }
            continue;
        }
        let mut by_sym: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for &q in &subset {
            for &(sym, d) in a.successors(q) {
                by_sym.entry(sym).or_default().insert(d);
            }
        }
        for (sym, targets) in by_sym {
            let key: Vec<u32> = targets.into_iter().collect();
            let dst = match index.get(&key) {
                Some(&d) => d,
                None => {
                    states += 1;
                    if states > budget {
                        return Err(AutomataError::Budget { states, budget });
                    }
                    let d = b.add_state(layer + 1);
                    index.insert(key.clone(), d);
                    frontier.push_back(key);
                    d
                }
            };
            b.add_transition(src, sym, dst);
        }
    }
    Ok(b.finish())
}

/// Exact minimization for layered deterministic automata: merge states with
/// identical `(symbol → successor class)` signatures, scanning from the last
/// layer to the first.
pub fn minimize_layered(a: &LayeredAutomaton) -> LayeredAutomaton {
    if a.is_empty() {
        return a.clone();
    }
    debug_assert!(a.is_deterministic());
    merge_by_backward_signature(a)
}

fn merge_by_backward_signature(a: &LayeredAutomaton) -> LayeredAutomaton {
    let num = a.num_states();
    let mut class = vec![0u32; num];
    let mut next_class = 0u32;
    for layer in (0..=a.n()).rev() {
        let mut sig_map: HashMap<(bool, Vec<(u32, u32)>), u32> = HashMap::new();
        for s in 0..num as u32 {
            if a.layer(s) != layer {
                continue;
            }
            let mut sig: Vec<(u32, u32)> = a
                .successors(s)
                .iter()
                .map(|&(sym, d)| (sym, class[d as usize]))
                .collect();
            sig.sort();
            sig.dedup();
            let key = (a.finals().contains(&s), sig);
            let id = match sig_map.get(&key) {
                Some(&id) => id,
                None => {
                    let id = next_class;
                    next_class += 1;
                    sig_map.insert(key, id);
                    id
                }
            };
            class[s as usize] = id;
        }
    }
    // Rebuild one state per class.
    let mut b = LayeredBuilder::new(a.n(), a.symbols().to_vec());
    let mut class_state: HashMap<u32, u32> = HashMap::new();
    for s in 0..num as u32 {
        let c = class[s as usize];
        class_state
            .entry(c)
            .or_insert_with(|| b.add_state(a.layer(s)));
    }
    for (src, sym, dst) in a.transitions() {
        b.add_transition(
            class_state[&class[src as usize]],
            sym,
            class_state[&class[dst as usize]],
        );
    }
    b.set_initial(class_state[&class[a.initial().unwrap() as usize]]);
    for &f in a.finals() {
        b.add_final(class_state[&class[f as usize]]);
    }
    b.finish()
}

/// Heuristic NFA reduction: repeatedly merge states with identical outgoing
/// transition sets (last layer to first), then states with identical
/// incoming sets on the reversed automaton, until no merge applies.
pub fn heuristic_minimize_nfa(a: &LayeredAutomaton) -> LayeredAutomaton {
    if a.is_empty() {
        return a.clone();
    }
    let mut cur = a.clone();
    loop {
        let fwd = merge_by_backward_signature(&cur);
        let bwd = merge_by_forward_signature(&fwd);
        if bwd.num_states() == cur.num_states() {
            return bwd;
        }
        cur = bwd;
    }
}

fn merge_by_forward_signature(a: &LayeredAutomaton) -> LayeredAutomaton {
    let num = a.num_states();
    let mut ins: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num];
    for (src, sym, dst) in a.transitions() {
        ins[dst as usize].push((sym, src));
    }
    let mut class = vec![0u32; num];
    let mut next_class = 0u32;
    for layer in 0..=a.n() {
        let mut sig_map: HashMap<(bool, Vec<(u32, u32)>), u32> = HashMap::new();
        for s in 0..num as u32 {
            if a.layer(s) != layer {
                continue;
            }
            let mut sig: Vec<(u32, u32)> = ins[s as usize]
                .iter()
                .map(|&(sym, p)| (sym, class[p as usize]))
                .collect();
            sig.sort();
            sig.dedup();
            let key = (a.initial() == Some(s), sig);
            let id = match sig_map.get(&key) {
                Some(&id) => id,
                None => {
                    let id = next_class;
                    next_class += 1;
                    sig_map.insert(key, id);
                    id
                }
            };
            class[s as usize] = id;
        }
    }
    let mut b = LayeredBuilder::new(a.n(), a.symbols().to_vec());
    let mut class_state: HashMap<u32, u32> = HashMap::new();
    for s in 0..num as u32 {
        let c = class[s as usize];
        class_state
            .entry(c)
            .or_insert_with(|| b.add_state(a.layer(s)));
    }
    for (src, sym, dst) in a.transitions() {
        b.add_transition(
            class_state[&class[src as usize]],
            sym,
            class_state[&class[dst as usize]],
        );
    }
    b.set_initial(class_state[&class[a.initial().unwrap() as usize]]);
    for &f in a.finals() {
        b.add_final(class_state[&class[f as usize]]);
    }
    b.finish()
}

/// Cyclic DFA for the language of strings over `{0..m-1}` that contain the
/// symbol `len mod m`. Its minimal form stays exponential, while unfolding
/// at length `m` and then minimizing collapses to two states per layer.
pub fn contains_length_mod_symbol_dfa(m: usize) -> Dfa {
    assert!(m >= 1 && m <= 16);
    let symbols: Vec<String> = (0..m).map(|s| s.to_string()).collect();
    let states = m << m;
    let id = |r: usize, seen: usize| (r << m | seen) as u32;
    let mut dfa = Dfa::new(symbols, states, id(0, 0));
    for r in 0..m {
        for seen in 0..(1usize << m) {
            for c in 0..m {
                dfa.add_transition(id(r, seen), c as u32, id((r + 1) % m, seen | 1 << c));
            }
            if seen & (1 << r) != 0 {
                dfa.set_final(id(r, seen));
            }
        }
    }
    dfa.trim()
}

/// Cyclic DFA for strings over `{1..k}` in which at least one symbol is
/// repeated and the last two symbols differ.
pub fn repeat_last_two_differ_dfa(k: usize) -> Dfa {
    assert!(k >= 2 && k <= 12);
    let symbols: Vec<String> = (1..=k).map(|s| s.to_string()).collect();
    // state = seen-set * (k+1) * 4 + last * 4 + repeated * 2 + last_two_differ
    // last: 0 = none yet, 1..=k
    let states = (1usize << k) * (k + 1) * 4;
    let id = |seen: usize, last: usize, rep: bool, diff: bool| {
        ((seen * (k + 1) + last) * 4 + (rep as usize) * 2 + diff as usize) as u32
    };
    let mut dfa = Dfa::new(symbols, states, id(0, 0, false, false));
    for seen in 0..(1usize << k) {
        for last in 0..=k {
            for rep in [false, true] {
                for diff in [false, true] {
                    let src = id(seen, last, rep, diff);
                    if rep && diff {
                        dfa.set_final(src);
                    }
                    for c in 1..=k {
                        let nrep = rep || seen & (1 << (c - 1)) != 0;
                        let ndiff = last != 0 && c != last;
                        dfa.add_transition(
                            src,
                            (c - 1) as u32,
                            id(seen | 1 << (c - 1), c, nrep, ndiff),
                        );
                    }
                }
            }
        }
    }
    dfa.trim()
}
