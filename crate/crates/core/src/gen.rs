//! Fixture grammars and deterministic random generators for tests and
//! experiments.

use crate::automata::Dfa;
use crate::bitset::BitSet;
use crate::grammar::{DomainVector, Grammar, NtId, Production, Symbol, TermId};

/// SplitMix64: tiny deterministic RNG so corpora are reproducible without an
/// external dependency.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform value in `0..bound` (bound > 0).
    pub fn below(&mut self, bound: usize) -> usize {
        (self.next_u64() % bound as u64) as usize
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.next_u64() % den < num
    }
}

/// Language `a⁺b⁺` in CNF: `S -> AB, A -> AA | a, B -> BB | b`.
pub fn ab_blocks_grammar() -> Grammar {
    Grammar::parse("S -> A B\nA -> A A | 'a'\nB -> B B | 'b'").unwrap()
}

/// Even-length binary palindromes `w·wᴿ`, in CNF. Their reformulated NFA
/// grows exponentially with the word length.
pub fn even_palindrome_grammar() -> Grammar {
    Grammar::parse("S -> Z A | O B | Z Z | O O\nA -> S Z\nB -> S O\nZ -> '0'\nO -> '1'")
        .unwrap()
}

/// Grammar whose AND/OR graph maps distinct root paths onto one PDA stack:
/// `S -> AA, A -> a | AA | BC, B -> b | BB, C -> c | CC`.
pub fn run_mixture_grammar() -> Grammar {
    Grammar::parse(
        "S -> A A\nA -> 'a' | A A | B C\nB -> 'b' | B B\nC -> 'c' | C C",
    )
    .unwrap()
}

/// Random CNF grammar with up to `max_nts` nonterminals over an alphabet of
/// `alphabet` terminals. All nonterminals are productive and reachable; the
/// grammar may still generate no string of a particular length.
pub fn random_cnf_grammar(rng: &mut SplitMix64, max_nts: usize, alphabet: usize) -> Grammar {
    assert!(max_nts >= 1 && alphabet >= 1);
    loop {
        let nts = 1 + rng.below(max_nts);
        let terminals: Vec<String> = (0..alphabet)
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect();
        let nonterminals: Vec<String> = (0..nts).map(|i| format!("N{i}")).collect();
        let mut productions = Vec::new();
        for lhs in 0..nts {
            let count = 1 + rng.below(3);
            for _ in 0..count {
                // Bias toward terminal productions so most grammars are productive.
                if rng.chance(1, 2) || nts == 1 {
                    productions.push(Production {
                        lhs: NtId(lhs as u32),
                        rhs: vec![Symbol::Terminal(TermId(rng.below(alphabet) as u32))],
                        predicate: None,
                    });
                } else {
                    productions.push(Production {
                        lhs: NtId(lhs as u32),
                        rhs: vec![
                            Symbol::Nonterminal(NtId(rng.below(nts) as u32)),
                            Symbol::Nonterminal(NtId(rng.below(nts) as u32)),
                        ],
                        predicate: None,
                    });
                }
            }
        }
        productions.sort_by_key(|p| p.lhs);
        productions.dedup();
        let g = Grammar::from_parts(terminals, nonterminals, productions, NtId(0)).unwrap();
        if grammar_productive(&g) {
            return g;
        }
    }
}

fn grammar_productive(g: &Grammar) -> bool {
    let mut productive = vec![false; g.num_nonterminals()];
    loop {
        let mut changed = false;
        for p in &g.productions {
            if productive[p.lhs.0 as usize] {
                continue;
            }
            let ok = p.rhs.iter().all(|s| match s {
                Symbol::Terminal(_) => true,
                Symbol::Nonterminal(n) => productive[n.0 as usize],
            });
            if ok {
                productive[p.lhs.0 as usize] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    productive[g.start.0 as usize]
}

/// Random domain reduction: each value is kept with probability
/// `keep_num/keep_den`, but every position keeps at least one value.
pub fn random_domains(
    rng: &mut SplitMix64,
    g: &Grammar,
    n: usize,
    keep_num: u64,
    keep_den: u64,
) -> DomainVector {
    let mut d = DomainVector::full(g, n);
    for i in 1..=n {
        let mut set = BitSet::new();
        for t in 0..g.num_terminals() {
            if rng.chance(keep_num, keep_den) {
                set.insert(t);
            }
        }
        if set.is_empty() {
            set.insert(rng.below(g.num_terminals()));
        }
        d.set(i, set);
    }
    d
}

/// Random trimmed DFA with up to `max_states` states over `alphabet`
/// symbols named `0..alphabet`.
pub fn random_dfa(rng: &mut SplitMix64, max_states: usize, alphabet: usize) -> Dfa {
    assert!(max_states >= 1 && alphabet >= 1);
    loop {
        let states = 1 + rng.below(max_states);
        let symbols: Vec<String> = (0..alphabet).map(|s| s.to_string()).collect();
        let mut dfa = Dfa::new(symbols, states, 0);
        for q in 0..states {
            for s in 0..alphabet {
                // Partial transition function: some edges missing.
                if rng.chance(4, 5) {
                    dfa.add_transition(q as u32, s as u32, rng.below(states) as u32);
                }
            }
        }
        let mut any_final = false;
        for q in 0..states {
            if rng.chance(1, 3) {
                dfa.set_final(q as u32);
                any_final = true;
            }
        }
        if !any_final {
            dfa.set_final(rng.below(states) as u32);
        }
        let dfa = dfa.trim();
        if dfa.num_states() > 0 {
            return dfa;
        }
    }
}
