//! Reformulation of fixed-length grammar constraints into layered automata.
//!
//! The pipeline takes a context-free grammar constraint over `n` variables,
//! runs a CYK-style propagator to build an AND/OR graph of all supported
//! derivations, reads that graph as an acyclic grammar, encodes the grammar
//! as a single-state pushdown automaton, unfolds the PDA's stack
//! configurations into a layered NFA, and then determinizes and minimizes.
//! State counts of the NFA can be predicted exactly before construction, so
//! callers can refuse oversized reformulations up front.
//!
//! On top of the automata the crate provides domain-consistency propagators
//! for both the grammar and the automaton form, a small backtracking solver
//! to cross-validate them, CNF and pseudo-Boolean encodings, and text formats
//! for grammars, domains, layered automata, DIMACS and OPB files.
//!
//! ```
//! use g2r_core::pipeline::{run_pipeline, PipelineOptions};
//! use g2r_core::{DomainVector, Grammar};
//!
//! let grammar = Grammar::parse("S -> A B\nA -> A A | 'a'\nB -> B B | 'b'").unwrap();
//! let domains = DomainVector::parse("a\na,b\nb\n", &grammar, 3).unwrap();
//! let out = run_pipeline(&grammar, &domains, None, &PipelineOptions::default()).unwrap();
//!
//! // Both solutions of the constraint are accepted, nothing else is.
//! assert!(out.min_dfa.accepts_names(&["a", "a", "b"]));
//! assert!(out.min_dfa.accepts_names(&["a", "b", "b"]));
//! assert!(!out.min_dfa.accepts_names(&["a", "a", "a"]));
//! assert_eq!(out.min_dfa.num_states(), 4);
//!
//! // The size was known before the automaton was built.
//! assert_eq!(
//!     out.report.predicted.exact_pre_closure,
//!     (out.report.eps_nfa.states as u64 - 1).into()
//! );
//! ```

pub mod automata;
pub mod bitset;
pub mod counting;
pub mod cyk;
pub mod encode;
pub mod gen;
pub mod grammar;
pub mod pipeline;
pub mod propagate;
pub mod reformulate;

pub use grammar::{DomainVector, Grammar, OpenHours};
