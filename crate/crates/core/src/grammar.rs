//! Context-free grammars with restricted productions.
//!
//! A grammar is a set of productions over interned terminal and nonterminal
//! symbols. Each production may carry a [`PositionPredicate`] restricting the
//! start position and length of the substring its left-hand side spans; the
//! predicate is checked at the table cell where the left-hand side is placed.
//!
//! The text format is line based:
//!
//! ```text
//! # comment
//! S -> A B | 'a'
//! @restrict A len in [4,24]
//! @restrict A start open
//! ```
//!
//! Terminals are single-quoted, nonterminals are bare tokens, and the start
//! symbol is the left-hand side of the first production. `@restrict` lines
//! attach a predicate to every production of the named nonterminal.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::bitset::BitSet;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TermId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct NtId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Symbol {
    Terminal(TermId),
    Nonterminal(NtId),
}

/// Business-hours table backing the `open(i)` predicate. Slots are 1-based.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OpenHours {
    open: Vec<bool>,
}

impl OpenHours {
    pub fn new(open: Vec<bool>) -> Self {
        OpenHours { open }
    }

    pub fn all_open(n: usize) -> Self {
        OpenHours {
            open: vec![true; n],
        }
    }

    /// Synthetic default: slots `29..=68` of a 96-slot day, scaled linearly
    /// to other horizons.
    pub fn business_day(n: usize) -> Self {
        let lo = ((29 * n) / 96).max(1);
        let hi = (68 * n) / 96;
        OpenHours {
            open: (1..=n).map(|i| i >= lo && i <= hi).collect(),
        }
    }

    pub fn is_open(&self, slot: usize) -> bool {
        slot >= 1 && self.open.get(slot - 1).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }
}

/// Predicate over the (start, length) span matched by a production.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum PositionPredicate {
    /// `lo <= len` and, when `hi` is present, `len <= hi`.
    LenIn { lo: usize, hi: Option<usize> },
    /// `open(start)` for an externally supplied [`OpenHours`] table.
    /// Without a table the predicate is true.
    Open,
    /// Conjunction, produced by unit-production elimination.
    And(Vec<PositionPredicate>),
}

impl PositionPredicate {
    pub fn len_range(lo: usize, hi: Option<usize>) -> Self {
        PositionPredicate::LenIn { lo, hi }
    }

    pub fn eval(&self, start: usize, len: usize, open: Option<&OpenHours>) -> bool {
        match self {
            PositionPredicate::LenIn { lo, hi } => {
                len >= *lo && hi.map_or(true, |h| len <= h)
            }
            PositionPredicate::Open => open.map_or(true, |o| o.is_open(start)),
            PositionPredicate::And(ps) => ps.iter().all(|p| p.eval(start, len, open)),
        }
    }

    fn conjoin(a: Option<Self>, b: Option<Self>) -> Option<Self> {
        match (a, b) {
            (None, x) | (x, None) => x,
            (Some(x), Some(y)) => {
                let mut parts = Vec::new();
                for p in [x, y] {
                    match p {
                        PositionPredicate::And(ps) => parts.extend(ps),
                        other => parts.push(other),
                    }
                }
                Some(PositionPredicate::And(parts))
            }
        }
    }

    /// Flattened conjuncts, for serialization.
    fn conjuncts(&self) -> Vec<&PositionPredicate> {
        match self {
            PositionPredicate::And(ps) => ps.iter().flat_map(|p| p.conjuncts()).collect(),
            other => vec![other],
        }
    }
}

pub(crate) fn eval_pred(
    pred: &Option<PositionPredicate>,
    start: usize,
    len: usize,
    open: Option<&OpenHours>,
) -> bool {
    pred.as_ref().map_or(true, |p| p.eval(start, len, open))
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Production {
    pub lhs: NtId,
    pub rhs: Vec<Symbol>,
    pub predicate: Option<PositionPredicate>,
}

/// Shape of a production in a Chomsky-normal-form grammar.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CnfShape {
    Binary(NtId, NtId),
    Terminal(TermId),
}

impl Production {
    pub fn cnf_shape(&self) -> Option<CnfShape> {
        match self.rhs.as_slice() {
            [Symbol::Nonterminal(b), Symbol::Nonterminal(c)] => Some(CnfShape::Binary(*b, *c)),
            [Symbol::Terminal(t)] => Some(CnfShape::Terminal(*t)),
            _ => None,
        }
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("undeclared symbol `{0}`")]
    UndeclaredSymbol(String),
    #[error("missing start symbol: grammar has no productions")]
    MissingStart,
    #[error("epsilon production for `{0}` is not allowed")]
    EpsilonProduction(String),
    #[error("unit production cycle through `{0}`")]
    UnitCycle(String),
    #[error("activity count must be at least 1")]
    NoActivities,
    #[error("productions of `{0}` carry non-uniform predicates; not serializable")]
    NonUniformPredicates(String),
    #[error("domain line {line}: unknown terminal `{name}`")]
    UnknownTerminal { line: usize, name: String },
    #[error("domain file has {got} lines, expected {expected}")]
    DomainArity { got: usize, expected: usize },
}

/// Context-free grammar `⟨T, H, P, S⟩` with interned symbols.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Grammar {
    terminals: Vec<String>,
    nonterminals: Vec<String>,
    pub productions: Vec<Production>,
    pub start: NtId,
    cnf: bool,
}

impl Grammar {
    pub fn num_terminals(&self) -> usize {
        self.terminals.len()
    }

    pub fn num_nonterminals(&self) -> usize {
        self.nonterminals.len()
    }

    pub fn term_name(&self, t: TermId) -> &str {
        &self.terminals[t.0 as usize]
    }

    pub fn nt_name(&self, n: NtId) -> &str {
        &self.nonterminals[n.0 as usize]
    }

    pub fn term_id(&self, name: &str) -> Option<TermId> {
        self.terminals
            .iter()
            .position(|t| t == name)
            .map(|i| TermId(i as u32))
    }

    pub fn nt_id(&self, name: &str) -> Option<NtId> {
        self.nonterminals
            .iter()
            .position(|t| t == name)
            .map(|i| NtId(i as u32))
    }

    pub fn is_cnf(&self) -> bool {
        self.cnf
    }

    pub fn productions_of(&self, nt: NtId) -> impl Iterator<Item = (usize, &Production)> {
        self.productions
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.lhs == nt)
    }

    /// Build a grammar from parts; validates symbol references and sets the
    /// cnf flag.
    pub fn from_parts(
        terminals: Vec<String>,
        nonterminals: Vec<String>,
        productions: Vec<Production>,
        start: NtId,
    ) -> Result<Grammar, GrammarError> {
        if nonterminals.is_empty() || productions.is_empty() {
            return Err(GrammarError::MissingStart);
        }
        for p in &productions {
            if p.rhs.is_empty() {
                return Err(GrammarError::EpsilonProduction(
                    nonterminals[p.lhs.0 as usize].clone(),
                ));
            }
            if p.lhs.0 as usize >= nonterminals.len() {
                return Err(GrammarError::UndeclaredSymbol(format!("nt#{}", p.lhs.0)));
            }
            for s in &p.rhs {
                match s {
                    Symbol::Terminal(t) if t.0 as usize >= terminals.len() => {
                        return Err(GrammarError::UndeclaredSymbol(format!("t#{}", t.0)));
                    }
                    Symbol::Nonterminal(n) if n.0 as usize >= nonterminals.len() => {
                        return Err(GrammarError::UndeclaredSymbol(format!("nt#{}", n.0)));
                    }
                    _ => {}
                }
            }
        }
        let cnf = productions.iter().all(|p| p.cnf_shape().is_some());
        Ok(Grammar {
            terminals,
            nonterminals,
            productions,
            start,
            cnf,
        })
    }

    /// Parse the line-based grammar format.
    pub fn parse(text: &str) -> Result<Grammar, GrammarError> {
        let mut terminals: Vec<String> = Vec::new();
        let mut nonterminals: Vec<String> = Vec::new();
        let mut nt_index: HashMap<String, u32> = HashMap::new();
        let mut term_index: HashMap<String, u32> = HashMap::new();
        // (lhs, rhs tokens, line) before symbol resolution
        let mut raw: Vec<(u32, Vec<String>, usize)> = Vec::new();
        let mut restricts: Vec<(String, PositionPredicate, usize)> = Vec::new();

        let intern_nt = |name: &str,
                             nonterminals: &mut Vec<String>,
                             nt_index: &mut HashMap<String, u32>| {
            *nt_index.entry(name.to_string()).or_insert_with(|| {
                nonterminals.push(name.to_string());
                (nonterminals.len() - 1) as u32
            })
        };

        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("@restrict") {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                let pred = match toks.as_slice() {
                    [nt, "len", "in", range] => {
                        let inner = range
                            .strip_prefix('[')
                            .and_then(|r| r.strip_suffix(']'))
                            .ok_or_else(|| GrammarError::Syntax {
                                line: line_no,
                                msg: format!("bad range `{range}`"),
                            })?;
                        let mut parts = inner.splitn(2, ',');
                        let lo_s = parts.next().unwrap_or("");
                        let hi_s = parts.next().ok_or_else(|| GrammarError::Syntax {
                            line: line_no,
                            msg: "range needs two bounds".into(),
                        })?;
                        let lo = lo_s.trim().parse::<usize>().map_err(|_| {
                            GrammarError::Syntax {
                                line: line_no,
                                msg: format!("bad lower bound `{lo_s}`"),
                            }
                        })?;
                        let hi = if hi_s.trim() == "*" {
                            None
                        } else {
                            Some(hi_s.trim().parse::<usize>().map_err(|_| {
                                GrammarError::Syntax {
                                    line: line_no,
                                    msg: format!("bad upper bound `{hi_s}`"),
                                }
                            })?)
                        };
                        (nt.to_string(), PositionPredicate::LenIn { lo, hi })
                    }
                    [nt, "start", "open"] => (nt.to_string(), PositionPredicate::Open),
                    _ => {
                        return Err(GrammarError::Syntax {
                            line: line_no,
                            msg: "expected `@restrict NT len in [lo,hi]` or `@restrict NT start open`"
                                .into(),
                        })
                    }
                };
                restricts.push((pred.0, pred.1, line_no));
                continue;
            }
            let (lhs_part, rhs_part) = line.split_once("->").ok_or_else(|| {
                GrammarError::Syntax {
                    line: line_no,
                    msg: "expected `LHS -> ...`".into(),
                }
            })?;
            let lhs = lhs_part.trim();
            if lhs.is_empty() || lhs.contains('\'') || lhs.contains(char::is_whitespace) {
                return Err(GrammarError::Syntax {
                    line: line_no,
                    msg: format!("bad left-hand side `{lhs}`"),
                });
            }
            let lhs_id = intern_nt(lhs, &mut nonterminals, &mut nt_index);
            for alt in rhs_part.split('|') {
                let toks: Vec<String> =
                    alt.split_whitespace().map(|s| s.to_string()).collect();
                if toks.is_empty() {
                    return Err(GrammarError::Syntax {
                        line: line_no,
                        msg: "empty right-hand side".into(),
                    });
                }
                for t in &toks {
                    if let Some(name) = t.strip_prefix('\'') {
                        let name = name.strip_suffix('\'').ok_or_else(|| {
                            GrammarError::Syntax {
                                line: line_no,
                                msg: format!("unterminated terminal `{t}`"),
                            }
                        })?;
                        if name.is_empty() || name.contains('\'') {
                            return Err(GrammarError::Syntax {
                                line: line_no,
                                msg: format!("bad terminal `{t}`"),
                            });
                        }
                        term_index.entry(name.to_string()).or_insert_with(|| {
                            terminals.push(name.to_string());
                            (terminals.len() - 1) as u32
                        });
                    } else if t.contains('\'') {
                        return Err(GrammarError::Syntax {
                            line: line_no,
                            msg: format!("bad token `{t}`"),
                        });
                    }
                }
                raw.push((lhs_id, toks, line_no));
            }
        }

        if raw.is_empty() {
            return Err(GrammarError::MissingStart);
        }

        // Resolve bare tokens: they must be declared as a production lhs.
        let mut productions = Vec::with_capacity(raw.len());
        for (lhs, toks, _line) in &raw {
            let mut rhs = Vec::with_capacity(toks.len());
            for t in toks {
                if let Some(name) = t.strip_prefix('\'') {
                    let name = name.strip_suffix('\'').unwrap();
                    rhs.push(Symbol::Terminal(TermId(term_index[name])));
                } else {
                    let id = nt_index
                        .get(t.as_str())
                        .ok_or_else(|| GrammarError::UndeclaredSymbol(t.clone()))?;
                    rhs.push(Symbol::Nonterminal(NtId(*id)));
                }
            }
            productions.push(Production {
                lhs: NtId(*lhs),
                rhs,
                predicate: None,
            });
        }

        // Attach restrictions to every production of the named nonterminal.
        for (nt, pred, _line) in restricts {
            let id = nt_index
                .get(nt.as_str())
                .ok_or(GrammarError::UndeclaredSymbol(nt))?;
            for p in productions.iter_mut().filter(|p| p.lhs.0 == *id) {
                p.predicate =
                    PositionPredicate::conjoin(p.predicate.take(), Some(pred.clone()));
            }
        }

        Grammar::from_parts(terminals, nonterminals, productions, NtId(raw[0].0))
    }

    /// Serialize back to the text format. Productions of a nonterminal must
    /// share one predicate (the format attaches restrictions per
    /// nonterminal).
    pub fn to_text(&self) -> Result<String, GrammarError> {
        let mut out = String::new();
        // Group productions by lhs in first-appearance order.
        let mut order: Vec<NtId> = Vec::new();
        let mut seen = HashSet::new();
        for p in &self.productions {
            if seen.insert(p.lhs) {
                order.push(p.lhs);
            }
        }
        // The start symbol's group must come first so that re-parsing keeps it.
        if let Some(pos) = order.iter().position(|&n| n == self.start) {
            let s = order.remove(pos);
            order.insert(0, s);
        }
        let mut restrict_lines = Vec::new();
        for &nt in &order {
            let prods: Vec<&Production> =
                self.productions.iter().filter(|p| p.lhs == nt).collect();
            let pred = &prods[0].predicate;
            if prods.iter().any(|p| &p.predicate != pred) {
                return Err(GrammarError::NonUniformPredicates(
                    self.nt_name(nt).to_string(),
                ));
            }
            let alts: Vec<String> = prods
                .iter()
                .map(|p| {
                    p.rhs
                        .iter()
                        .map(|s| match s {
                            Symbol::Terminal(t) => format!("'{}'", self.term_name(*t)),
                            Symbol::Nonterminal(n) => self.nt_name(*n).to_string(),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            out.push_str(&format!("{} -> {}\n", self.nt_name(nt), alts.join(" | ")));
            if let Some(pred) = pred {
                for c in pred.conjuncts() {
                    match c {
                        PositionPredicate::LenIn { lo, hi } => {
                            let hi_s =
                                hi.map_or_else(|| "*".to_string(), |h| h.to_string());
                            restrict_lines.push(format!(
                                "@restrict {} len in [{},{}]",
                                self.nt_name(nt),
                                lo,
                                hi_s
                            ));
                        }
                        PositionPredicate::Open => {
                            restrict_lines
                                .push(format!("@restrict {} start open", self.nt_name(nt)));
                        }
                        PositionPredicate::And(_) => unreachable!("conjuncts are flat"),
                    }
                }
            }
        }
        for l in restrict_lines {
            out.push_str(&l);
            out.push('\n');
        }
        Ok(out)
    }

    /// Convert to Chomsky normal form.
    ///
    /// Terminal occurrences in long right-hand sides are wrapped, long
    /// right-hand sides are binarized left to right with the original
    /// predicate kept on the topmost production, and unit productions are
    /// eliminated by substitution with predicate conjunction.
    pub fn to_cnf(&self) -> Result<Grammar, GrammarError> {
        for p in &self.productions {
            if p.rhs.is_empty() {
                return Err(GrammarError::EpsilonProduction(
                    self.nt_name(p.lhs).to_string(),
                ));
            }
        }
        let terminals = self.terminals.clone();
        let mut nonterminals = self.nonterminals.clone();
        let mut taken: HashSet<String> = nonterminals.iter().cloned().collect();
        let fresh_nt = |base: String, nonterminals: &mut Vec<String>, taken: &mut HashSet<String>| {
            let mut name = base.clone();
            let mut k = 0;
            while taken.contains(&name) {
                k += 1;
                name = format!("{base}{k}");
            }
            taken.insert(name.clone());
            nonterminals.push(name);
            NtId((nonterminals.len() - 1) as u32)
        };

        // TERM: wrap terminals inside right-hand sides of length >= 2.
        let mut wrappers: HashMap<TermId, NtId> = HashMap::new();
        let mut prods: Vec<Production> = Vec::new();
        for p in &self.productions {
            if p.rhs.len() >= 2 {
                let rhs = p
                    .rhs
                    .iter()
                    .map(|s| match s {
                        Symbol::Terminal(t) => {
                            let nt = *wrappers.entry(*t).or_insert_with(|| {
                                fresh_nt(
                                    format!("T.{}", terminals[t.0 as usize]),
                                    &mut nonterminals,
                                    &mut taken,
                                )
                            });
                            Symbol::Nonterminal(nt)
                        }
                        s => *s,
                    })
                    .collect();
                prods.push(Production {
                    lhs: p.lhs,
                    rhs,
                    predicate: p.predicate.clone(),
                });
            } else {
                prods.push(p.clone());
            }
        }
        for (t, nt) in {
            let mut ws: Vec<_> = wrappers.iter().map(|(a, b)| (*a, *b)).collect();
            ws.sort();
            ws
        } {
            prods.push(Production {
                lhs: nt,
                rhs: vec![Symbol::Terminal(t)],
                predicate: None,
            });
        }

        // BIN: binarize right-hand sides of length >= 3. The predicate stays
        // on the topmost production so it is still checked at the original
        // left-hand side's span.
        let mut bin: Vec<Production> = Vec::new();
        for p in prods {
            if p.rhs.len() <= 2 {
                bin.push(p);
                continue;
            }
            let base = self.nt_name(p.lhs).to_string();
            let mut tail = p.rhs.clone();
            let first = tail.remove(0);
            let mut helper = fresh_nt(format!("{base}.1"), &mut nonterminals, &mut taken);
            bin.push(Production {
                lhs: p.lhs,
                rhs: vec![first, Symbol::Nonterminal(helper)],
                predicate: p.predicate.clone(),
            });
            let mut idx = 1;
            while tail.len() > 2 {
                let first = tail.remove(0);
                idx += 1;
                let next = fresh_nt(format!("{base}.{idx}"), &mut nonterminals, &mut taken);
                bin.push(Production {
                    lhs: helper,
                    rhs: vec![first, Symbol::Nonterminal(next)],
                    predicate: None,
                });
                helper = next;
            }
            bin.push(Production {
                lhs: helper,
                rhs: tail,
                predicate: None,
            });
        }

        // UNIT: eliminate A -> B by substituting B's non-unit productions,
        // conjoining predicates along the chain.
        let is_unit = |p: &Production| {
            matches!(p.rhs.as_slice(), [Symbol::Nonterminal(_)])
        };
        let unit_targets: Vec<Vec<(NtId, Option<PositionPredicate>)>> = {
            let mut m = vec![Vec::new(); nonterminals.len()];
            for p in bin.iter().filter(|p| is_unit(p)) {
                if let [Symbol::Nonterminal(b)] = p.rhs.as_slice() {
                    m[p.lhs.0 as usize].push((*b, p.predicate.clone()));
                }
            }
            m
        };
        // Detect cycles and compute a processing order of the unit graph.
        let mut state = vec![0u8; nonterminals.len()]; // 0 new, 1 visiting, 2 done
        let mut order: Vec<u32> = Vec::new();
        fn visit(
            v: u32,
            unit_targets: &[Vec<(NtId, Option<PositionPredicate>)>],
            state: &mut [u8],
            order: &mut Vec<u32>,
            names: &[String],
        ) -> Result<(), GrammarError> {
            match state[v as usize] {
                1 => return Err(GrammarError::UnitCycle(names[v as usize].clone())),
                2 => return Ok(()),
                _ => {}
            }
            state[v as usize] = 1;
            for (b, _) in &unit_targets[v as usize] {
                visit(b.0, unit_targets, state, order, names)?;
            }
            state[v as usize] = 2;
            order.push(v);
            Ok(())
        }
        for v in 0..nonterminals.len() as u32 {
            visit(v, &unit_targets, &mut state, &mut order, &nonterminals)?;
        }
        let mut resolved: Vec<Vec<Production>> = vec![Vec::new(); nonterminals.len()];
        for &v in &order {
            let mut out: Vec<Production> = bin
                .iter()
                .filter(|p| p.lhs.0 == v && !is_unit(p))
                .cloned()
                .collect();
            for (b, pred) in &unit_targets[v as usize] {
                for q in resolved[b.0 as usize].clone() {
                    out.push(Production {
                        lhs: NtId(v),
                        rhs: q.rhs,
                        predicate: PositionPredicate::conjoin(
                            pred.clone(),
                            q.predicate,
                        ),
                    });
                }
            }
            resolved[v as usize] = out;
        }
        // Keep the original production order per lhs block.
        let mut final_prods = Vec::new();
        let mut emitted = HashSet::new();
        for p in &bin {
            if emitted.insert(p.lhs) {
                final_prods.extend(resolved[p.lhs.0 as usize].clone());
            }
        }

        Grammar::from_parts(terminals, nonterminals, final_prods, self.start)
    }
}

/// The shift-scheduling grammar over `{a1..a<k>, b, l, r}`.
///
/// Work stretches must be at least an hour, shifts contain a break or an
/// hour-long lunch, and activity slots require the business to be open. The
/// lunch recursion uses a helper nonterminal `L.t` so the exact-length
/// restriction on `L` applies to the whole lunch rather than its tail.
pub fn shift_scheduling_grammar(activities: usize) -> Result<Grammar, GrammarError> {
    if activities == 0 {
        return Err(GrammarError::NoActivities);
    }
    let mut text = String::new();
    text.push_str("S -> R P R | R F R\n");
    text.push_str("P -> W 'b' W\n");
    text.push_str("F -> P L P\n");
    text.push_str("L -> 'l' L.t | 'l'\n");
    text.push_str("L.t -> 'l' L.t | 'l'\n");
    text.push_str("R -> 'r' R | 'r'\n");
    let ws: Vec<String> = (1..=activities).map(|i| format!("A{i}")).collect();
    text.push_str(&format!("W -> {}\n", ws.join(" | ")));
    for i in 1..=activities {
        text.push_str(&format!("A{i} -> 'a{i}' A{i} | 'a{i}'\n"));
    }
    text.push_str("@restrict P len in [13,24]\n");
    text.push_str("@restrict F len in [30,38]\n");
    text.push_str("@restrict L len in [4,4]\n");
    text.push_str("@restrict W len in [4,*]\n");
    for i in 1..=activities {
        text.push_str(&format!("@restrict A{i} start open\n"));
    }
    Grammar::parse(&text)
}

/// Per-position sets of allowed terminal values.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DomainVector {
    domains: Vec<BitSet>,
}

impl DomainVector {
    pub fn new(domains: Vec<BitSet>) -> Self {
        DomainVector { domains }
    }

    /// Full domains: every terminal of `g` allowed at each of `n` positions.
    pub fn full(g: &Grammar, n: usize) -> Self {
        DomainVector {
            domains: vec![BitSet::all(g.num_terminals()); n],
        }
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// Domain of the 1-based position `i`.
    pub fn at(&self, i: usize) -> &BitSet {
        &self.domains[i - 1]
    }

    pub fn set(&mut self, i: usize, values: BitSet) {
        self.domains[i - 1] = values;
    }

    pub fn allows(&self, i: usize, t: TermId) -> bool {
        self.domains[i - 1].contains(t.0 as usize)
    }

    pub fn remove(&mut self, i: usize, t: TermId) -> bool {
        self.domains[i - 1].remove(t.0 as usize)
    }

    pub fn any_empty(&self) -> bool {
        self.domains.iter().any(|d| d.is_empty())
    }

    /// Pointwise subset test.
    pub fn subset_of(&self, other: &DomainVector) -> bool {
        self.domains.len() == other.domains.len()
            && self
                .domains
                .iter()
                .zip(&other.domains)
                .all(|(a, b)| a.is_subset(b))
    }

    /// Number of words in the domain product.
    pub fn candidate_count(&self) -> u128 {
        self.domains
            .iter()
            .map(|d| d.len() as u128)
            .try_fold(1u128, |acc, k| acc.checked_mul(k))
            .unwrap_or(u128::MAX)
    }

    /// Parse the domain file format: one line per position, `*` or a
    /// comma-separated list of terminal names.
    pub fn parse(text: &str, g: &Grammar, n: usize) -> Result<DomainVector, GrammarError> {
        let mut domains = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "*" {
                domains.push(BitSet::all(g.num_terminals()));
                continue;
            }
            let mut set = BitSet::new();
            for name in line.split(',') {
                let name = name.trim();
                if name.is_empty() {
                    continue;
                }
                let t = g
                    .term_id(name)
                    .ok_or_else(|| GrammarError::UnknownTerminal {
                        line: lineno + 1,
                        name: name.to_string(),
                    })?;
                set.insert(t.0 as usize);
            }
            domains.push(set);
        }
        if domains.len() != n {
            return Err(GrammarError::DomainArity {
                got: domains.len(),
                expected: n,
            });
        }
        Ok(DomainVector { domains })
    }

    pub fn to_text(&self, g: &Grammar) -> String {
        let mut out = String::new();
        for d in &self.domains {
            if d.len() == g.num_terminals() {
                out.push('*');
            } else {
                let names: Vec<&str> =
                    d.iter().map(|i| g.term_name(TermId(i as u32))).collect();
                out.push_str(&names.join(","));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Terminal(t) => write!(f, "t{}", t.0),
            Symbol::Nonterminal(n) => write!(f, "n{}", n.0),
        }
    }
}

/// Recognition by direct derivation, used as an oracle in tests. Handles
/// general (non-CNF) right-hand sides and predicates.
#[cfg(test)]
pub(crate) fn derives_general(
    g: &Grammar,
    word: &[TermId],
    open: Option<&OpenHours>,
) -> bool {
    use std::collections::HashMap as Memo;
    fn seq_derives(
        g: &Grammar,
        rhs: &[Symbol],
        word: &[TermId],
        start: usize,
        len: usize,
        open: Option<&OpenHours>,
        memo: &mut Memo<(u32, usize, usize), bool>,
    ) -> bool {
        match rhs {
            [] => len == 0,
            [sym, rest @ ..] => {
                let min_rest = rest.len();
                if len < min_rest + 1 {
                    return false;
                }
                for take in 1..=(len - min_rest) {
                    let head_ok = match sym {
                        Symbol::Terminal(t) => take == 1 && word[start - 1] == *t,
                        Symbol::Nonterminal(n) => {
                            nt_derives(g, *n, word, start, take, open, memo)
                        }
                    };
                    if head_ok
                        && seq_derives(g, rest, word, start + take, len - take, open, memo)
                    {
                        return true;
                    }
                }
                false
            }
        }
    }
    fn nt_derives(
        g: &Grammar,
        nt: NtId,
        word: &[TermId],
        start: usize,
        len: usize,
        open: Option<&OpenHours>,
        memo: &mut Memo<(u32, usize, usize), bool>,
    ) -> bool {
        if let Some(&r) = memo.get(&(nt.0, start, len)) {
            return r;
        }
        // Mark in-progress as false; fixed-length spans cannot recurse into
        // themselves without shrinking, except through unit chains, which we
        // cut off conservatively here (unit cycles are rejected by to_cnf).
        memo.insert((nt.0, start, len), false);
        let mut ok = false;
        for (_, p) in g.productions_of(nt) {
            if !eval_pred(&p.predicate, start, len, open) {
                continue;
            }
            if seq_derives(g, &p.rhs, word, start, len, open, memo) {
                ok = true;
                break;
            }
        }
        memo.insert((nt.0, start, len), ok);
        ok
    }
    let mut memo = Memo::new();
    !word.is_empty() && nt_derives(g, g.start, word, 1, word.len(), open, &mut memo)
}
