//! End-to-end reformulation driver: grammar to minimized layered DFA with
//! size prediction, budget refusal, per-stage reports and the
//! order-of-operations experiments.

use std::time::Instant;

use num_bigint::BigUint;
use thiserror::Error;

use crate::automata::{
    contains_length_mod_symbol_dfa, heuristic_minimize_nfa, minimize_layered,
    repeat_last_two_differ_dfa, simplify_syms, subset_construction, unfold,
    LayeredAutomaton,
};
use crate::bitset::BitSet;
use crate::counting::{exact_state_count, SizeReport};
use crate::cyk::cyk_build;
use crate::grammar::{DomainVector, Grammar, OpenHours};
use crate::propagate::{CspModel, Demand, RowKind};
use crate::reformulate::{
    construct_acyclic_grammar, epsilon_closure, grammar_to_pda, pda_to_nfa,
    AcyclicGrammar, EpsilonNfa,
};

#[derive(Error, Debug)]
pub enum PipelineError {
    #[error("predicted NFA size {predicted} exceeds the budget of {budget} states")]
    Budget { predicted: BigUint, budget: usize },
    #[error("the constraint is dis-entailed: no solution within the domains")]
    Disentailed,
    #[error(transparent)]
    Grammar(#[from] crate::grammar::GrammarError),
    #[error(transparent)]
    Cyk(#[from] crate::cyk::CykError),
    #[error(transparent)]
    Reformulate(#[from] crate::reformulate::ReformulateError),
    #[error(transparent)]
    Counting(#[from] crate::counting::CountingError),
    #[error(transparent)]
    Automata(#[from] crate::automata::AutomataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageSizes {
    pub states: usize,
    pub transitions: usize,
}

impl StageSizes {
    fn of(a: &LayeredAutomaton) -> Self {
        StageSizes {
            states: a.num_states(),
            transitions: a.num_transitions(),
        }
    }
}

/// Per-stage sizes in the shape of the benchmark table, plus the predicted
/// counts. Timings are kept out of the TSV so reports are byte-reproducible.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub n: usize,
    pub ga_terms: usize,
    pub ga_prods: usize,
    pub predicted: SizeReport,
    pub eps_nfa: StageSizes,
    pub nfa: StageSizes,
    pub reduced_nfa: StageSizes,
    pub dfa: StageSizes,
    pub min_dfa: StageSizes,
    pub timings_ms: Vec<(String, u128)>,
}

impl PipelineReport {
    pub fn tsv_header() -> &'static str {
        "n\tga_terms\tga_prods\tpred_pre\tpred_post\tupper_bound\t\
         eps_states\teps_trans\tnfa_states\tnfa_trans\t\
         rednfa_states\trednfa_trans\tdfa_states\tdfa_trans\t\
         mindfa_states\tmindfa_trans"
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.n,
            self.ga_terms,
            self.ga_prods,
            self.predicted.exact_pre_closure,
            self.predicted.exact_post_closure,
            self.predicted.upper_bound,
            self.eps_nfa.states,
            self.eps_nfa.transitions,
            self.nfa.states,
            self.nfa.transitions,
            self.reduced_nfa.states,
            self.reduced_nfa.transitions,
            self.dfa.states,
            self.dfa.transitions,
            self.min_dfa.states,
            self.min_dfa.transitions,
        )
    }
}

#[derive(Clone, Debug)]
pub struct PipelineArtifacts {
    pub grammar_cnf: Grammar,
    pub acyclic: AcyclicGrammar,
    pub eps_nfa: EpsilonNfa,
    pub nfa: LayeredAutomaton,
    pub reduced_nfa: LayeredAutomaton,
    pub dfa: LayeredAutomaton,
    pub min_dfa: LayeredAutomaton,
    pub report: PipelineReport,
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    /// Refuse construction when the predicted pre-closure NFA exceeds this
    /// many states.
    pub budget: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { budget: 1_000_000 }
    }
}

/// Run the whole chain. The predicted size is computed first and the run
/// refuses, without building, when it exceeds the budget.
pub fn run_pipeline(
    g: &Grammar,
    d: &DomainVector,
    open: Option<&OpenHours>,
    opts: &PipelineOptions,
) -> Result<PipelineArtifacts, PipelineError> {
    let mut timings: Vec<(String, u128)> = Vec::new();
    let timed = |label: &str, start: Instant, timings: &mut Vec<(String, u128)>| {
        timings.push((label.to_string(), start.elapsed().as_millis()));
    };

    let t = Instant::now();
    let cnf = if g.is_cnf() { g.clone() } else { g.to_cnf()? };
    timed("cnf", t, &mut timings);

    let t = Instant::now();
    let (table, graph) = cyk_build(&cnf, d, open)?;
    timed("cyk", t, &mut timings);
    if graph.is_empty() {
        return Err(PipelineError::Disentailed);
    }

    let t = Instant::now();
    let predicted = exact_state_count(&graph)?;
    timed("count", t, &mut timings);
    if predicted.exact_pre_closure > BigUint::from(opts.budget) {
        return Err(PipelineError::Budget {
            predicted: predicted.exact_pre_closure,
            budget: opts.budget,
        });
    }

    let t = Instant::now();
    let acyclic = construct_acyclic_grammar(&table, &cnf, d, open)?;
    timed("acyclic-grammar", t, &mut timings);

    let t = Instant::now();
    let pda = grammar_to_pda(&acyclic);
    let eps_nfa = pda_to_nfa(&pda, &acyclic, opts.budget + 1)?;
    timed("pda-to-nfa", t, &mut timings);

    let t = Instant::now();
    let nfa = epsilon_closure(&eps_nfa);
    timed("eps-closure", t, &mut timings);

    let t = Instant::now();
    let reduced_nfa = heuristic_minimize_nfa(&nfa);
    timed("nfa-reduce", t, &mut timings);

    let t = Instant::now();
    let dfa = subset_construction(&reduced_nfa, opts.budget)?;
    timed("determinize", t, &mut timings);

    let t = Instant::now();
    let min_dfa = minimize_layered(&dfa);
    timed("minimize", t, &mut timings);

    // The prediction must match the construction exactly (both counts
    // exclude the single final state).
    debug_assert_eq!(
        predicted.exact_pre_closure,
        BigUint::from(eps_nfa.num_states() as u64 - 1)
    );
    debug_assert_eq!(
        predicted.exact_post_closure,
        BigUint::from(nfa.num_states() as u64 - 1)
    );

    let report = PipelineReport {
        n: d.len(),
        ga_terms: acyclic.nonterminals.len() + acyclic.terminals.len(),
        ga_prods: acyclic.productions.len(),
        predicted,
        eps_nfa: StageSizes {
            states: eps_nfa.num_states(),
            transitions: eps_nfa.num_transitions(),
        },
        nfa: StageSizes::of(&nfa),
        reduced_nfa: StageSizes::of(&reduced_nfa),
        dfa: StageSizes::of(&dfa),
        min_dfa: StageSizes::of(&min_dfa),
        timings_ms: timings,
    };
    Ok(PipelineArtifacts {
        grammar_cnf: cnf,
        acyclic,
        eps_nfa,
        nfa,
        reduced_nfa,
        dfa,
        min_dfa,
        report,
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SeparationFamily {
    /// Strings over `{0..n-1}` containing the symbol `len mod n`;
    /// compares minimize-after-unfold against unfold-after-minimize.
    ContainsLengthModSymbol,
    /// Strings over `{1..n}` with a repeated symbol and different last two
    /// symbols, with the value `n` removed from every domain; compares
    /// minimize-after-simplify against simplify-after-minimize.
    RepeatWithDifferentTail,
}

/// Sizes of the two evaluation orders; `small` is the provably-no-larger
/// side (minimization last).
#[derive(Clone, Debug)]
pub struct OrderReport {
    pub family: SeparationFamily,
    pub n: usize,
    pub small: StageSizes,
    pub large: StageSizes,
}

impl OrderReport {
    pub fn ratio(&self) -> f64 {
        self.large.states as f64 / self.small.states.max(1) as f64
    }

    pub fn tsv_header() -> &'static str {
        "family\tn\tsmall_states\tsmall_trans\tlarge_states\tlarge_trans\tratio"
    }

    pub fn to_tsv(&self) -> String {
        let family = match self.family {
            SeparationFamily::ContainsLengthModSymbol => "separation-1",
            SeparationFamily::RepeatWithDifferentTail => "separation-2",
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.2}",
            family,
            self.n,
            self.small.states,
            self.small.transitions,
            self.large.states,
            self.large.transitions,
            self.ratio()
        )
    }
}

/// Build the separation family at size `n` and measure both evaluation
/// orders. The minimize-last order is asserted to be no larger.
pub fn order_experiment(family: SeparationFamily, n: usize) -> OrderReport {
    let (small, large) = match family {
        SeparationFamily::ContainsLengthModSymbol => {
            let a = contains_length_mod_symbol_dfa(n);
            let small = minimize_layered(&unfold(&a, n));
            let large = unfold(&a.minimize(), n);
            (small, large)
        }
        SeparationFamily::RepeatWithDifferentTail => {
            let a = repeat_last_two_differ_dfa(n);
            let u = unfold(&a, n);
            // Remove the value `n` (symbol id n-1) everywhere.
            let masks: Vec<BitSet> = (0..n).map(|_| BitSet::all(n - 1)).collect();
            let small = minimize_layered(&simplify_syms(&u, &masks));
            let large = simplify_syms(&minimize_layered(&u), &masks);
            (small, large)
        }
    };
    assert!(small.num_states() <= large.num_states());
    OrderReport {
        family,
        n,
        small: StageSizes::of(&small),
        large: StageSizes::of(&large),
    }
}

/// Assemble the scheduling toy model shared by the solver cross-validation
/// and the command line.
pub fn shift_csp_model(
    slots: usize,
    workers: usize,
    activities: usize,
    open: &OpenHours,
    demands: Vec<Demand>,
    use_regular: bool,
    budget: usize,
) -> Result<CspModel, PipelineError> {
    let g = crate::grammar::shift_scheduling_grammar(activities)?.to_cnf()?;
    let d = DomainVector::full(&g, slots);
    let row_kind = if use_regular {
        match run_pipeline(&g, &d, Some(open), &PipelineOptions { budget }) {
            Ok(artifacts) => RowKind::Regular(artifacts.min_dfa),
            // No schedule fits this horizon; the automaton row is empty and
            // the model is unsatisfiable, matching the grammar propagator.
            Err(PipelineError::Disentailed) => {
                let symbols = (0..g.num_terminals())
                    .map(|t| g.term_name(crate::grammar::TermId(t as u32)).to_string())
                    .collect();
                RowKind::Regular(LayeredAutomaton::empty(slots, symbols))
            }
            Err(e) => return Err(e),
        }
    } else {
        RowKind::Grammar
    };
    let mut costs = vec![0i64; g.num_terminals()];
    for k in 1..=activities {
        if let Some(t) = g.term_id(&format!("a{k}")) {
            costs[t.0 as usize] = 1;
        }
    }
    Ok(CspModel {
        n: slots,
        workers,
        grammar: g,
        open: Some(open.clone()),
        row_kind,
        init_domains: vec![d; workers],
        demands,
        costs: Some(costs),
    })
}
