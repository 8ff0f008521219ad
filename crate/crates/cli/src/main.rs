//! `g2r`: reformulate grammar constraints into layered automata, predict
//! sizes, minimize, encode and solve toy scheduling instances.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use g2r_core::automata::{
    heuristic_minimize_nfa, minimize_layered, simplify_syms, subset_construction,
    Dfa, LayeredAutomaton,
};
use g2r_core::bitset::BitSet;
use g2r_core::counting::exact_state_count;
use g2r_core::cyk::cyk_build;
use g2r_core::encode::{
    build_shift_pb, encode_grammar_cnf, encode_regular_cnf, ShiftPbConfig, Strength,
    WorkerEncoding,
};
use g2r_core::pipeline::{
    order_experiment, run_pipeline, OrderReport, PipelineError, PipelineOptions,
    PipelineReport, SeparationFamily,
};
use g2r_core::propagate::{solve, Demand};
use g2r_core::{DomainVector, Grammar, OpenHours};

#[derive(Parser)]
#[command(name = "g2r", about = "Grammar-to-regular reformulation toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Grammar,
    Regular,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrengthArg {
    Strong,
    Weak,
}

impl From<StrengthArg> for Strength {
    fn from(s: StrengthArg) -> Strength {
        match s {
            StrengthArg::Strong => Strength::Strong,
            StrengthArg::Weak => Strength::Weak,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    #[value(name = "separation-1")]
    Separation1,
    #[value(name = "separation-2")]
    Separation2,
}

#[derive(Args)]
struct InstanceArgs {
    /// Grammar file.
    #[arg(long)]
    grammar: PathBuf,
    /// Constraint arity (number of variables).
    #[arg(short)]
    n: usize,
    /// Domain file; full domains when omitted.
    #[arg(long)]
    domains: Option<PathBuf>,
    /// Business hours: `all`, `default` (scaled 29..68 of 96) or a file of
    /// 0/1 lines.
    #[arg(long, default_value = "all")]
    open: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full reformulation chain and write every intermediate.
    Pipeline {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Refuse when the predicted NFA exceeds this many states.
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict automaton sizes without building anything.
    Count {
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Solve a scheduling instance with the grammar or the automaton model.
    Solve {
        /// Propagator to use for worker rows.
        #[arg(long, value_enum)]
        model: ModelKind,
        /// Instance description file.
        #[arg(long)]
        instance: PathBuf,
    },
    /// Emit a CNF encoding (DIMACS plus atom map).
    Encode {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Encode the grammar constraint or the reformulated automaton.
        #[arg(long, value_enum)]
        kind: ModelKind,
        #[arg(long, value_enum, default_value = "strong")]
        strength: StrengthArg,
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit the shift-scheduling pseudo-Boolean model as OPB.
    ShiftPb {
        #[arg(long)]
        slots: usize,
        #[arg(long)]
        workers: usize,
        #[arg(long, default_value_t = 1)]
        activities: usize,
        /// Demand file: lines `slot activity count` (1-based).
        #[arg(long)]
        demands: Option<PathBuf>,
        #[arg(long, default_value = "default")]
        open: String,
        /// Per-worker constraint encoding.
        #[arg(long, value_enum, default_value = "regular")]
        worker_encoding: ModelKind,
        #[arg(long, value_enum, default_value = "strong")]
        strength: StrengthArg,
        /// Read demands literally as `>` instead of `>=`.
        #[arg(long)]
        strict_demands: bool,
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare minimization orders on the separation families.
    OrderExp {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(short)]
        n: usize,
    },
    /// Print the built-in shift-scheduling grammar.
    ShiftGrammar {
        #[arg(long, default_value_t = 1)]
        activities: usize,
    },
    /// Unfold a cyclic DFA into a layered automaton.
    Unfold {
        /// Cyclic DFA file (`dfa` text format).
        #[arg(long)]
        dfa: PathBuf,
        #[arg(short)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Minimize the cyclic DFA before unfolding.
        #[arg(long)]
        minimize_first: bool,
    },
    /// Delete domain-forbidden transitions and dead states.
    Simplify {
        #[arg(long)]
        fla: PathBuf,
        /// Domain file over the automaton's symbol names.
        #[arg(long)]
        domains: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subset construction.
    Determinize {
        #[arg(long)]
        fla: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact minimization of a layered DFA.
    Minimize {
        #[arg(long)]
        fla: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Heuristic NFA reduction.
    NfaReduce {
        #[arg(long)]
        fla: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn new(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }

    fn budget(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::new(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}

fn write(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}

fn parse_open(choice: &str, n: usize) -> Result<Option<OpenHours>, CliError> {
    match choice {
        "all" => Ok(Some(OpenHours::all_open(n))),
        "default" => Ok(Some(OpenHours::business_day(n))),
        path => {
            let text = read(Path::new(path))?;
            let slots: Vec<bool> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l == "1")
                .collect();
            if slots.len() != n {
                return Err(CliError::new(format!(
                    "open file has {} slots, expected {n}",
                    slots.len()
                )));
            }
            Ok(Some(OpenHours::new(slots)))
        }
    }
}

fn load_instance(args: &InstanceArgs) -> Result<(Grammar, DomainVector, Option<OpenHours>), CliError> {
    let g = Grammar::parse(&read(&args.grammar)?)?;
    let g = if g.is_cnf() { g } else { g.to_cnf()? };
    let d = match &args.domains {
        Some(path) => DomainVector::parse(&read(path)?, &g, args.n)?,
        None => DomainVector::full(&g, args.n),
    };
    let open = parse_open(&args.open, args.n)?;
    Ok((g, d, open))
}

fn map_pipeline_err(e: PipelineError) -> CliError {
    match &e {
        PipelineError::Budget { predicted, budget } => CliError::budget(format!(
            "refused: predicted NFA has {predicted} states, budget {budget}"
        )),
        _ => CliError::new(e.to_string()),
    }
}

/// Cyclic DFA text format: `dfa <states>`, `trans <src> <symbol> <dst>`,
/// `initial <id>`, `final <id>...`.
fn parse_dfa(text: &str) -> Result<Dfa, CliError> {
    let mut num_states = None;
    let mut transitions: Vec<(u32, String, u32)> = Vec::new();
    let mut initial = 0u32;
    let mut finals: Vec<u32> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| CliError::new(format!("dfa line {}: {msg}", idx + 1));
        match toks.as_slice() {
            [] => {}
            ["#", ..] => {}
            ["dfa", n] => {
                num_states = Some(n.parse::<usize>().map_err(|_| bad("bad state count"))?)
            }
            ["trans", s, sym, d] => transitions.push((
                s.parse().map_err(|_| bad("bad source"))?,
                sym.to_string(),
                d.parse().map_err(|_| bad("bad target"))?,
            )),
            ["initial", s] => initial = s.parse().map_err(|_| bad("bad initial"))?,
            ["final", rest @ ..] => {
                for f in rest {
                    finals.push(f.parse().map_err(|_| bad("bad final"))?);
                }
            }
            _ => return Err(bad("unrecognized line")),
        }
    }
    let num_states = num_states.ok_or_else(|| CliError::new("missing `dfa <states>` header"))?;
    let mut symbols: Vec<String> = transitions.iter().map(|(_, s, _)| s.clone()).collect();
    symbols.sort();
    symbols.dedup();
    let mut dfa = Dfa::new(symbols.clone(), num_states, initial);
    for (s, sym, d) in transitions {
        let sid = symbols.iter().position(|x| *x == sym).unwrap() as u32;
        dfa.add_transition(s, sid, d);
    }
    for f in finals {
        dfa.set_final(f);
    }
    Ok(dfa)
}

/// Domain file over raw automaton symbol names.
fn parse_symbol_domains(
    text: &str,
    a: &LayeredAutomaton,
) -> Result<Vec<BitSet>, CliError> {
    let mut masks = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "*" {
            masks.push(BitSet::all(a.symbols().len()));
            continue;
        }
        let mut set = BitSet::new();
        for name in line.split(',') {
            let name = name.trim();
            let sym = a.sym_id(name).ok_or_else(|| {
                CliError::new(format!(
                    "domain line {}: unknown symbol `{name}`",
                    idx + 1
                ))
            })?;
            set.insert(sym as usize);
        }
        masks.push(set);
    }
    if masks.len() != a.n() {
        return Err(CliError::new(format!(
            "domain file has {} positions, automaton expects {}",
            masks.len(),
            a.n()
        )));
    }
    Ok(masks)
}

struct Instance {
    grammar: Grammar,
    n: usize,
    workers: usize,
    open: OpenHours,
    domains: DomainVector,
    automaton: Option<LayeredAutomaton>,
    demands: Vec<Demand>,
    costs: Option<Vec<i64>>,
    node_budget: u64,
    state_budget: usize,
}

fn load_solve_instance(path: &Path) -> Result<Instance, CliError> {
    let text = read(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut grammar_path: Option<PathBuf> = None;
    let mut shift_activities: Option<usize> = None;
    let mut n = None;
    let mut workers = 1usize;
    let mut open_spec = "all".to_string();
    let mut domains_path: Option<PathBuf> = None;
    let mut automaton_path: Option<PathBuf> = None;
    let mut raw_demands: Vec<(usize, String, usize)> = Vec::new();
    let mut raw_costs: Vec<(String, i64)> = Vec::new();
    let mut node_budget = 10_000_000u64;
    let mut state_budget = 1_000_000usize;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| CliError::new(format!("instance line {}: {msg}", idx + 1));
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["grammar", p] => grammar_path = Some(dir.join(p)),
            ["shift", a] => {
                shift_activities = Some(a.parse().map_err(|_| bad("bad activity count"))?)
            }
            ["n", v] => n = Some(v.parse().map_err(|_| bad("bad n"))?),
            ["workers", v] => workers = v.parse().map_err(|_| bad("bad workers"))?,
            ["open", v] => open_spec = v.to_string(),
            ["domains", p] => domains_path = Some(dir.join(p)),
            ["automaton", p] => automaton_path = Some(dir.join(p)),
            ["demand", slot, term, count] => raw_demands.push((
                slot.parse().map_err(|_| bad("bad slot"))?,
                term.to_string(),
                count.parse().map_err(|_| bad("bad count"))?,
            )),
            ["cost", term, c] => {
                raw_costs.push((term.to_string(), c.parse().map_err(|_| bad("bad cost"))?))
            }
            ["node-budget", v] => {
                node_budget = v.parse().map_err(|_| bad("bad node budget"))?
            }
            ["state-budget", v] => {
                state_budget = v.parse().map_err(|_| bad("bad state budget"))?
            }
            _ => return Err(bad("unrecognized line")),
        }
    }
    let n = n.ok_or_else(|| CliError::new("instance missing `n`"))?;
    let grammar = match (&grammar_path, shift_activities) {
        (Some(p), _) => {
            let g = Grammar::parse(&read(p)?)?;
            if g.is_cnf() {
                g
            } else {
                g.to_cnf()?
            }
        }
        (None, Some(a)) => g2r_core::grammar::shift_scheduling_grammar(a)?.to_cnf()?,
        (None, None) => {
            return Err(CliError::new("instance needs `grammar <path>` or `shift <a>`"))
        }
    };
    let open = parse_open(&open_spec, n)?
        .unwrap_or_else(|| OpenHours::all_open(n));
    let domains = match &domains_path {
        Some(p) => DomainVector::parse(&read(p)?, &grammar, n)?,
        None => DomainVector::full(&grammar, n),
    };
    let automaton = match &automaton_path {
        Some(p) => Some(
            LayeredAutomaton::from_fla(&read(p)?)
                .map_err(|e| CliError::new(e.to_string()))?,
        ),
        None => None,
    };
    let mut demands = Vec::new();
    for (slot, term, count) in raw_demands {
        let value = grammar
            .term_id(&term)
            .ok_or_else(|| CliError::new(format!("unknown demand terminal `{term}`")))?;
        demands.push(Demand { slot, value, count });
    }
    let costs = if raw_costs.is_empty() {
        None
    } else {
        let mut v = vec![0i64; grammar.num_terminals()];
        for (term, c) in raw_costs {
            let t = grammar
                .term_id(&term)
                .ok_or_else(|| CliError::new(format!("unknown cost terminal `{term}`")))?;
            v[t.0 as usize] = c;
        }
        Some(v)
    };
    Ok(Instance {
        grammar,
        n,
        workers,
        open,
        domains,
        automaton,
        demands,
        costs,
        node_budget,
        state_budget,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Pipeline {
            instance,
            budget,
            out,
        } => {
            let (g, d, open) = load_instance(&instance)?;
            let art = run_pipeline(&g, &d, open.as_ref(), &PipelineOptions { budget })
                .map_err(map_pipeline_err)?;
            fs::create_dir_all(&out)
                .map_err(|e| CliError::new(format!("{}: {e}", out.display())))?;
            write(&out.join("grammar_cnf.cfg"), &art.grammar_cnf.to_text()?)?;
            write(&out.join("acyclic.cfg"), &art.acyclic.to_grammar_text())?;
            write(&out.join("eps_nfa.txt"), &art.eps_nfa.to_text(&art.acyclic))?;
            write(&out.join("nfa.fla"), &art.nfa.to_fla())?;
            write(&out.join("nfa_reduced.fla"), &art.reduced_nfa.to_fla())?;
            write(&out.join("dfa.fla"), &art.dfa.to_fla())?;
            write(&out.join("dfa_min.fla"), &art.min_dfa.to_fla())?;
            let report = format!(
                "{}\n{}\n",
                PipelineReport::tsv_header(),
                art.report.to_tsv()
            );
            write(&out.join("report.tsv"), &report)?;
            print!("{report}");
            for (stage, ms) in &art.report.timings_ms {
                eprintln!("{stage}: {ms} ms");
            }
            Ok(())
        }
        Command::Count { instance } => {
            let (g, d, open) = load_instance(&instance)?;
            let (_, graph) = cyk_build(&g, &d, open.as_ref())?;
            if graph.is_empty() {
                return Err(CliError::new("the constraint is dis-entailed"));
            }
            let report = exact_state_count(&graph)?;
            println!("upper_bound\t{}", report.upper_bound);
            println!("exact_pre_closure\t{}", report.exact_pre_closure);
            println!("exact_post_closure\t{}", report.exact_post_closure);
            println!("layer\tpre\tpost");
            for (layer, (pre, post)) in report.per_layer.iter().enumerate() {
                println!("{layer}\t{pre}\t{post}");
            }
            Ok(())
        }
        Command::Solve { model, instance } => {
            let inst = load_solve_instance(&instance)?;
            let use_regular = matches!(model, ModelKind::Regular);
            let csp = if let (true, Some(a)) = (use_regular, &inst.automaton) {
                g2r_core::propagate::CspModel {
                    n: inst.n,
                    workers: inst.workers,
                    grammar: inst.grammar.clone(),
                    open: Some(inst.open.clone()),
                    row_kind: g2r_core::propagate::RowKind::Regular(a.clone()),
                    init_domains: vec![inst.domains.clone(); inst.workers],
                    demands: inst.demands.clone(),
                    costs: inst.costs.clone(),
                }
            } else {
                let mut csp = shift_model_or_generic(&inst, use_regular)?;
                csp.costs = inst.costs.clone();
                csp
            };
            let (solution, stats) = solve(&csp, inst.node_budget)?;
            match solution {
                None => {
                    println!("unsatisfiable");
                    println!("nodes\t{}", stats.nodes);
                }
                Some(sol) => {
                    if let Some(obj) = sol.objective {
                        println!("optimum\t{obj}");
                    } else {
                        println!("satisfiable");
                    }
                    println!("nodes\t{}", stats.nodes);
                    for (w, row) in sol.assignment.iter().enumerate() {
                        let s: Vec<&str> =
                            row.iter().map(|t| csp.grammar.term_name(*t)).collect();
                        println!("worker{}\t{}", w + 1, s.join(" "));
                    }
                }
            }
            Ok(())
        }
        Command::Encode {
            instance,
            kind,
            strength,
            budget,
            out,
        } => {
            let (g, d, open) = load_instance(&instance)?;
            let f = match kind {
                ModelKind::Grammar => {
                    let (_, graph) = cyk_build(&g, &d, open.as_ref())?;
                    encode_grammar_cnf(&graph, &g, &d, strength.into())
                }
                ModelKind::Regular => {
                    let art =
                        run_pipeline(&g, &d, open.as_ref(), &PipelineOptions { budget })
                            .map_err(map_pipeline_err)?;
                    encode_regular_cnf(&art.min_dfa, &g, &d, strength.into())
                }
            };
            fs::create_dir_all(&out)
                .map_err(|e| CliError::new(format!("{}: {e}", out.display())))?;
            write(&out.join("constraint.cnf"), &f.to_dimacs())?;
            write(&out.join("constraint.atoms"), &f.atom_map())?;
            println!("vars\t{}", f.num_vars());
            println!("clauses\t{}", f.num_clauses());
            Ok(())
        }
        Command::ShiftPb {
            slots,
            workers,
            activities,
            demands,
            open,
            worker_encoding,
            strength,
            strict_demands,
            budget,
            out,
        } => {
            let open = parse_open(&open, slots)?.unwrap();
            let mut table = vec![vec![0usize; activities]; slots];
            if let Some(path) = demands {
                for (idx, line) in read(&path)?.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    if toks.len() != 3 {
                        return Err(CliError::new(format!(
                            "demand line {}: expected `slot activity count`",
                            idx + 1
                        )));
                    }
                    let slot: usize = toks[0]
                        .parse()
                        .map_err(|_| CliError::new("bad demand slot"))?;
                    let act: usize = toks[1]
                        .parse()
                        .map_err(|_| CliError::new("bad demand activity"))?;
                    let count: usize = toks[2]
                        .parse()
                        .map_err(|_| CliError::new("bad demand count"))?;
                    if slot == 0 || slot > slots || act == 0 || act > activities {
                        return Err(CliError::new(format!(
                            "demand line {}: out of range",
                            idx + 1
                        )));
                    }
                    table[slot - 1][act - 1] = count;
                }
            }
            let cfg = ShiftPbConfig {
                slots,
                workers,
                activities,
                open,
                demands: table,
                encoding: match worker_encoding {
                    ModelKind::Grammar => WorkerEncoding::GrammarCnf,
                    ModelKind::Regular => WorkerEncoding::RegularCnf,
                },
                strength: strength.into(),
                strict_demands,
                budget,
            };
            let m = build_shift_pb(&cfg)?;
            fs::create_dir_all(&out)
                .map_err(|e| CliError::new(format!("{}: {e}", out.display())))?;
            write(&out.join("shift.opb"), &m.to_opb())?;
            write(&out.join("shift.atoms"), &m.atom_map())?;
            println!("vars\t{}", m.num_vars());
            println!("constraints\t{}", m.constraints.len());
            Ok(())
        }
        Command::OrderExp { family, n } => {
            let family = match family {
                FamilyArg::Separation1 => SeparationFamily::ContainsLengthModSymbol,
                FamilyArg::Separation2 => SeparationFamily::RepeatWithDifferentTail,
            };
            let report = order_experiment(family, n);
            println!("{}", OrderReport::tsv_header());
            println!("{}", report.to_tsv());
            Ok(())
        }
        Command::ShiftGrammar { activities } => {
            let g = g2r_core::grammar::shift_scheduling_grammar(activities)?;
            print!("{}", g.to_text()?);
            Ok(())
        }
        Command::Unfold {
            dfa,
            n,
            out,
            minimize_first,
        } => {
            let parsed = parse_dfa(&read(&dfa)?)?;
            let parsed = if minimize_first {
                parsed.minimize()
            } else {
                parsed
            };
            let unfolded = g2r_core::automata::unfold(&parsed, n);
            write(&out, &unfolded.to_fla())?;
            println!(
                "states\t{}\ntransitions\t{}",
                unfolded.num_states(),
                unfolded.num_transitions()
            );
            Ok(())
        }
        Command::Simplify { fla, domains, out } => {
            let a = LayeredAutomaton::from_fla(&read(&fla)?)
                .map_err(|e| CliError::new(e.to_string()))?;
            let masks = parse_symbol_domains(&read(&domains)?, &a)?;
            let s = simplify_syms(&a, &masks);
            write(&out, &s.to_fla())?;
            println!("states\t{}\ntransitions\t{}", s.num_states(), s.num_transitions());
            Ok(())
        }
        Command::Determinize { fla, budget, out } => {
            let a = LayeredAutomaton::from_fla(&read(&fla)?)
                .map_err(|e| CliError::new(e.to_string()))?;
            let det = subset_construction(&a, budget).map_err(|e| match e {
                g2r_core::automata::AutomataError::Budget { states, budget } => {
                    CliError::budget(format!(
                        "refused: subset construction reached {states} states, budget {budget}"
                    ))
                }
                other => CliError::new(other.to_string()),
            })?;
            write(&out, &det.to_fla())?;
            println!(
                "states\t{}\ntransitions\t{}",
                det.num_states(),
                det.num_transitions()
            );
            Ok(())
        }
        Command::Minimize { fla, out } => {
            let a = LayeredAutomaton::from_fla(&read(&fla)?)
                .map_err(|e| CliError::new(e.to_string()))?;
            if !a.is_deterministic() {
                return Err(CliError::new(
                    "input is nondeterministic; run `determinize` or `nfa-reduce`",
                ));
            }
            let m = minimize_layered(&a);
            write(&out, &m.to_fla())?;
            println!("states\t{}\ntransitions\t{}", m.num_states(), m.num_transitions());
            Ok(())
        }
        Command::NfaReduce { fla, out } => {
            let a = LayeredAutomaton::from_fla(&read(&fla)?)
                .map_err(|e| CliError::new(e.to_string()))?;
            let r = heuristic_minimize_nfa(&a);
            write(&out, &r.to_fla())?;
            println!("states\t{}\ntransitions\t{}", r.num_states(), r.num_transitions());
            Ok(())
        }
    }
}

fn shift_model_or_generic(
    inst: &Instance,
    use_regular: bool,
) -> Result<g2r_core::propagate::CspModel, CliError> {
    let row_kind = if use_regular {
        let art = run_pipeline(
            &inst.grammar,
            &inst.domains,
            Some(&inst.open),
            &PipelineOptions {
                budget: inst.state_budget,
            },
        )
        .map_err(map_pipeline_err)?;
        g2r_core::propagate::RowKind::Regular(art.min_dfa)
    } else {
        g2r_core::propagate::RowKind::Grammar
    };
    Ok(g2r_core::propagate::CspModel {
        n: inst.n,
        workers: inst.workers,
        grammar: inst.grammar.clone(),
        open: Some(inst.open.clone()),
        row_kind,
        init_domains: vec![inst.domains.clone(); inst.workers],
        demands: inst.demands.clone(),
        costs: inst.costs.clone(),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep exit code 2 for budget refusals only.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
