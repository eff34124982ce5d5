use clap::{Parser, Subcommand};
use fgadyn::extension::{
    cayley_ball, flare_probe, hyperbolicity_stats, zz_search, ExtensionError,
    LiftAssignment, PeripheralComponent, PeripheralSpec, BALL_VERTEX_CAP,
};
use fgadyn::freegroup::{equal_outer, Automorphism, ComposeOrder, Letter, OuterEquality, Word};
use fgadyn::graphmap::{
    bcc_upper_bound, check_rtt, critical_constant_value, filtration, GraphMap, GraphMapError,
    StratumClass, BCC_DEFAULT_CAP, RTT_PATH_BOUND,
};
use fgadyn::growth::{atoroidal_probe, growth_partition, iterate_lengths};
use fgadyn::sink::{hyperbolicity_hypothesis_check, sink_approx};
use fgadyn::stallings::{fiber_subgroup, is_malnormal, meet, MalnormalityVerdict, SubgroupSystem};
use fgadyn::whitehead;
use fgadyn_cli::session::{parse_session, Session, SessionConfig};
use fgadyn_cli::verify;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fgadyn",
    version,
    about = "Free-group automorphism dynamics: growth, sinks, strata and extension-group probes"
)]
struct Cli {
    /// Session file with named automorphisms.
    #[arg(long, global = true, alias = "lifts")]
    aut: Option<PathBuf>,
    /// Automorphism name from the session file.
    #[arg(long, global = true)]
    name: Option<String>,
    /// Product expression like "Phi^-1*Psi" (see --compose-order).
    #[arg(long, global = true)]
    expr: Option<String>,
    /// Comma-separated automorphism names (lift symbols t1, t2, ...).
    #[arg(long, global = true, value_delimiter = ',')]
    names: Vec<String>,
    /// Class length bound.
    #[arg(short = 'L', global = true)]
    l: Option<usize>,
    /// Iteration count.
    #[arg(short = 'n', global = true)]
    n: Option<usize>,
    /// Period bound.
    #[arg(short = 'P', global = true)]
    p: Option<usize>,
    #[arg(long = "k-max", global = true)]
    k_max: Option<usize>,
    /// Ball radius.
    #[arg(long, global = true)]
    radius: Option<usize>,
    /// Flare stretch factor.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Power used by the flare probe.
    #[arg(short = 'm', global = true)]
    m: Option<usize>,
    #[arg(long = "q-len", global = true)]
    q_len: Option<usize>,
    /// Product reading order: right = rightmost factor acts first.
    #[arg(long = "compose-order", global = true, value_parser = parse_order)]
    compose_order: Option<ComposeOrder>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Emit a JSON report.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Command,
}

fn parse_order(s: &str) -> Result<ComposeOrder, String> {
    match s {
        "right" => Ok(ComposeOrder::RightToLeft),
        "left" => Ok(ComposeOrder::LeftToRight),
        _ => Err("expected 'right' or 'left'".into()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Cyclic lengths of a class under iteration (TSV: iterate, length).
    Growth {
        #[arg(long)]
        word: String,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Partition all short classes by growth type.
    Partition,
    /// Bounded periodic-class search.
    Atoroidal,
    /// Nonattracting sink approximation.
    Sink,
    /// Invariant filtration, stratum classes and eigenvalues.
    Strata,
    /// Train-track condition checks for the rose representative.
    Rtt {
        #[arg(long = "path-bound")]
        path_bound: Option<usize>,
    },
    /// Certified bounded-cancellation upper bound.
    Bcc {
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Critical constants of the exponentially growing strata.
    Critical,
    /// Invert an automorphism (reports non-invertibility).
    Invert,
    /// Outer-equality search up to a conjugator length bound.
    EqualOuter {
        #[arg(long)]
        other: String,
        #[arg(long, default_value_t = 4)]
        bound: usize,
    },
    /// Invariant fiber closure of a seed subgroup.
    Fiber {
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<String>,
    },
    /// Meet of two subgroup systems (components ';', generators ',').
    Meet {
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
    },
    /// Malnormality of a subgroup system.
    Malnormal {
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        components: String,
    },
    /// Whitehead primitivity of a word.
    Primitive {
        word: String,
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Flare probe over short classes and generator lifts.
    Flare,
    /// Search for Z⊕Z certificates in the extension group.
    Zz,
    /// Cayley ball (optionally coned) with slim-triangle statistics.
    Ball {
        /// JSON file {"components":[{"gens":["e"],"stabilizers":[1]}]}.
        #[arg(long)]
        cone: Option<PathBuf>,
        /// Number of sampled triangles.
        #[arg(long)]
        stats: Option<usize>,
        /// Emit the edge list as TSV (src, dst, doubled length).
        #[arg(long)]
        tsv: bool,
    },
    /// Hypothesis checks for a collection of automorphisms.
    Check,
    /// Recompute the bundled reference claims under both conventions.
    #[command(name = "verify-paper")]
    VerifyPaper,
}

enum RunError {
    Input(String),
    Resource(String),
}

impl From<fgadyn_cli::session::SessionError> for RunError {
    fn from(e: fgadyn_cli::session::SessionError) -> Self {
        RunError::Input(e.to_string())
    }
}

impl From<fgadyn::freegroup::FreeGroupError> for RunError {
    fn from(e: fgadyn::freegroup::FreeGroupError) -> Self {
        RunError::Input(e.to_string())
    }
}

impl From<GraphMapError> for RunError {
    fn from(e: GraphMapError) -> Self {
        match e {
            GraphMapError::NonStabilizing(_) | GraphMapError::NonConvergent => {
                RunError::Resource(e.to_string())
            }
            other => RunError::Input(other.to_string()),
        }
    }
}

impl From<ExtensionError> for RunError {
    fn from(e: ExtensionError) -> Self {
        match e {
            ExtensionError::MemoryCap { .. } | ExtensionError::StatsTooLarge { .. } => {
                RunError::Resource(e.to_string())
            }
            other => RunError::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap's help/version are normal exits
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(RunError::Resource(msg)) => {
            eprintln!("resource cap: {msg}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("FGADYN_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

struct Ctx {
    session: Option<Session>,
    order: ComposeOrder,
    seed: u64,
    json: bool,
}

impl Ctx {
    fn session(&self) -> Result<&Session, RunError> {
        self.session
            .as_ref()
            .ok_or_else(|| RunError::Input("this command needs --aut FILE".into()))
    }


    /// The automorphism selected by --name or --expr.
    fn selected(&self, cli: &Cli) -> Result<Automorphism, RunError> {
        let session = self.session()?;
        if let Some(expr) = &cli.expr {
            return Ok(session.expression(expr, self.order)?);
        }
        if let Some(name) = &cli.name {
            return Ok(session.get(name)?.clone());
        }
        if session.automorphisms.len() == 1 {
            return Ok(session.automorphisms.values().next().unwrap().clone());
        }
        Err(RunError::Input(
            "select an automorphism with --name or --expr".into(),
        ))
    }

    fn lifts(&self, cli: &Cli) -> Result<LiftAssignment, RunError> {
        let session = self.session()?;
        let names: Vec<String> = if cli.names.is_empty() {
            session.automorphisms.keys().cloned().collect()
        } else {
            cli.names.clone()
        };
        let mut lifts = Vec::new();
        for n in &names {
            lifts.push(session.get(n)?.clone());
        }
        Ok(LiftAssignment::new(session.config.rank, lifts)?)
    }

    fn emit(&self, report: serde_json::Value, text: String) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
        } else {
            print!("{text}");
        }
    }
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let session = match &cli.aut {
        Some(path) => {
            let s = parse_session(path)?;
            if s.config.rank < 3 {
                eprintln!(
                    "warning: rank {} is below 3; the dynamics of interest assume rank >= 3",
                    s.config.rank
                );
            }
            Some(s)
        }
        None => None,
    };
    let file_cfg = session.as_ref().map(|s| s.config.clone()).unwrap_or_else(|| SessionConfig {
        rank: 2,
        compose_order: ComposeOrder::default(),
        seed: 0,
        format: Default::default(),
        bounds: Default::default(),
        tolerances: Default::default(),
        aut: Default::default(),
    });
    let ctx = Ctx {
        order: cli.compose_order.unwrap_or(file_cfg.compose_order),
        seed: cli.seed.unwrap_or(file_cfg.seed),
        json: cli.json || matches!(file_cfg.format, fgadyn_cli::session::OutputFormat::Json),
        session,
    };
    let bounds = {
        let mut b = file_cfg.bounds;
        if let Some(l) = cli.l {
            b.l = l;
        }
        if let Some(n) = cli.n {
            b.n = n;
        }
        if let Some(p) = cli.p {
            b.p = p;
        }
        if let Some(k) = cli.k_max {
            b.k_max = k;
        }
        if let Some(r) = cli.radius {
            b.r = r;
        }
        if let Some(q) = cli.q_len {
            b.q_len = q;
        }
        if let Some(m) = cli.m {
            b.m = m;
        }
        b
    };
    let tol = file_cfg.tolerances;
    let growth_cfg = tol.growth_config();

    match &cli.cmd {
        Command::Growth { word, iters } => {
            let f = ctx.selected(cli)?;
            let w = Word::parse(word)?;
            let n = iters.unwrap_or(bounds.n);
            let lens = iterate_lengths(&f, &w, n)?;
            let text: String = lens
                .iter()
                .enumerate()
                .map(|(i, len)| format!("{i}\t{len}\n"))
                .collect();
            ctx.emit(
                json!({"schema": 1, "command": "growth", "word": word, "iters": n, "lengths": lens}),
                text,
            );
        }
        Command::Partition => {
            let f = ctx.selected(cli)?;
            let part = growth_partition(&f, bounds.l, bounds.n, &growth_cfg)?;
            let text = format!(
                "classes up to L={}: {} exponential, {} non-exponential, {} inconclusive (n={})\n{}{}",
                part.l,
                part.exponential.len(),
                part.non_exponential.len(),
                part.inconclusive.len(),
                part.n,
                part.non_exponential
                    .iter()
                    .map(|(c, r)| format!("  non-exp [{c}]: {:?}\n", r.class))
                    .collect::<String>(),
                part.inconclusive
                    .iter()
                    .map(|(c, _)| format!("  inconclusive [{c}]\n"))
                    .collect::<String>(),
            );
            ctx.emit(
                json!({"schema": 1, "command": "partition", "report": part}),
                text,
            );
        }
        Command::Atoroidal => {
            let f = ctx.selected(cli)?;
            let probe = atoroidal_probe(&f, bounds.l, bounds.p);
            let text = format!("{probe:?}\n");
            ctx.emit(
                json!({"schema": 1, "command": "atoroidal", "L": bounds.l, "P": bounds.p, "verdict": probe}),
                text,
            );
        }
        Command::Sink => {
            let f = ctx.selected(cli)?;
            let sink = sink_approx(&f, bounds.l, bounds.n, &growth_cfg)?;
            let text = format!(
                "sink at (L={}, n={}): {}\n  malnormal: {}\n  invariant: {}\n  inconclusive classes: {}\n",
                bounds.l,
                bounds.n,
                if sink.whole_group {
                    "whole group (no exponential class at this scale)".to_string()
                } else if sink.is_empty() {
                    "empty".to_string()
                } else {
                    sink.component_summaries().join(" ")
                },
                sink.malnormal,
                sink.phi_invariant,
                sink.residual.len(),
            );
            ctx.emit(
                json!({
                    "schema": 1, "command": "sink", "L": bounds.l, "n": bounds.n,
                    "components": sink.component_summaries(),
                    "graphs": sink.system.components.iter().map(|c| c.graph.to_json()).collect::<Vec<_>>(),
                    "whole_group": sink.whole_group,
                    "malnormal": sink.malnormal,
                    "phi_invariant": sink.phi_invariant,
                    "residual": sink.residual.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                    "needs_review": sink.needs_review,
                }),
                text,
            );
        }
        Command::Strata => {
            let f = ctx.selected(cli)?;
            let filt = filtration(&GraphMap::rose_map(&f));
            let strata: Vec<serde_json::Value> = filt
                .strata
                .iter()
                .map(|s| {
                    json!({
                        "edges": s.edges.iter().map(|&e| Letter::positive(e).to_char().to_string()).collect::<Vec<_>>(),
                        "class": s.class,
                        "lambda": s.pf_eigenvalue,
                    })
                })
                .collect();
            let text: String = filt
                .strata
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    format!(
                        "stratum {}: edges {:?} class {} lambda {:?}\n",
                        i + 1,
                        s.edges
                            .iter()
                            .map(|&e| Letter::positive(e).to_char())
                            .collect::<String>(),
                        s.class,
                        s.pf_eigenvalue
                    )
                })
                .collect();
            let m = GraphMap::rose_map(&f);
            let rtt_passed = check_rtt(&m, &filt, RTT_PATH_BOUND).passed;
            ctx.emit(
                json!({
                    "schema": 1, "command": "strata", "strata": strata,
                    "eg_count": filt.eg_count(), "rtt_passed": rtt_passed,
                }),
                text,
            );
        }
        Command::Rtt { path_bound } => {
            let f = ctx.selected(cli)?;
            let m = GraphMap::rose_map(&f);
            let filt = filtration(&m);
            let rep = check_rtt(&m, &filt, path_bound.unwrap_or(RTT_PATH_BOUND));
            let text = format!(
                "train-track conditions (rose representative): {}\n{}",
                if rep.passed { "pass" } else { "FAIL" },
                rep.eg_strata
                    .iter()
                    .map(|s| format!(
                        "  stratum {}: images {:?}, connecting {:?}, directions {:?}\n",
                        s.stratum + 1,
                        s.images_legal,
                        s.connecting_paths,
                        s.directions_stay
                    ))
                    .collect::<String>()
            );
            let table = fgadyn::graphmap::turn_table(&m);
            let turns: Vec<serde_json::Value> = table
                .iter()
                .map(|(&(d1, d2), leg)| {
                    json!({
                        "turn": [m.graph.dir_name(d1), m.graph.dir_name(d2)],
                        "legality": leg,
                    })
                })
                .collect();
            ctx.emit(
                json!({"schema": 1, "command": "rtt", "report": rep, "turns": turns, "map": m.to_json()}),
                text,
            );
        }
        Command::Bcc { cap } => {
            let f = ctx.selected(cli)?;
            let m = GraphMap::rose_map(&f);
            let bound = bcc_upper_bound(&m, cap.unwrap_or(BCC_DEFAULT_CAP))?;
            ctx.emit(
                json!({"schema": 1, "command": "bcc", "bound": bound}),
                format!("certified cancellation bound: {bound}\n"),
            );
        }
        Command::Critical => {
            let f = ctx.selected(cli)?;
            let m = GraphMap::rose_map(&f);
            let filt = filtration(&m);
            let bcc = bcc_upper_bound(&m, BCC_DEFAULT_CAP)?;
            let mut rows = Vec::new();
            let mut text = String::new();
            let mut any_eg = false;
            for (i, s) in filt.strata.iter().enumerate() {
                if s.class != StratumClass::Eg {
                    continue;
                }
                any_eg = true;
                let lambda = s.pf_eigenvalue.expect("EG strata carry lambda");
                let cc = critical_constant_value(bcc, lambda)?;
                rows.push(json!({"stratum": i + 1, "lambda": lambda, "bcc": bcc, "critical": cc}));
                text.push_str(&format!(
                    "stratum {}: lambda {lambda}, bcc {bcc}, critical constant {cc}\n",
                    i + 1
                ));
            }
            if !any_eg {
                return Err(RunError::Input(
                    "no exponentially growing stratum: lambda = 1, critical constant undefined".into(),
                ));
            }
            ctx.emit(json!({"schema": 1, "command": "critical", "strata": rows}), text);
        }
        Command::Invert => {
            let session = ctx.session()?;
            let name = cli
                .name
                .clone()
                .ok_or_else(|| RunError::Input("invert needs --name".into()))?;
            let f = session.get(&name)?;
            match f.invert() {
                Ok(g) => {
                    let images: Vec<String> = (0..g.rank())
                        .map(|i| format!("{} -> {}", Letter::positive(i).to_char(), g.image(i)))
                        .collect();
                    ctx.emit(
                        json!({"schema": 1, "command": "invert", "name": name, "invertible": true, "inverse": images}),
                        format!("{}\n", images.join(", ")),
                    );
                }
                Err(e) => {
                    ctx.emit(
                        json!({"schema": 1, "command": "invert", "name": name, "invertible": false, "reason": e.to_string()}),
                        format!("not invertible: {e}\n"),
                    );
                }
            }
        }
        Command::EqualOuter { other, bound } => {
            let session = ctx.session()?;
            let name = cli
                .name
                .clone()
                .ok_or_else(|| RunError::Input("equal-outer needs --name".into()))?;
            let f = session.get(&name)?;
            let g = session.get(other)?;
            let verdict = equal_outer(f, g, *bound)?;
            let text = match &verdict {
                OuterEquality::Equal { conjugator } => {
                    format!("equal as outer automorphisms; conjugator {conjugator}\n")
                }
                OuterEquality::NotEqualUpToBound { bound } => {
                    format!("not equal up to conjugators of length {bound}\n")
                }
            };
            let detail = match verdict {
                OuterEquality::Equal { conjugator } => {
                    json!({"equal": true, "conjugator": conjugator.to_string()})
                }
                OuterEquality::NotEqualUpToBound { bound } => {
                    json!({"equal": false, "bound": bound})
                }
            };
            ctx.emit(
                json!({"schema": 1, "command": "equal-outer", "verdict": detail}),
                text,
            );
        }
        Command::Fiber { seeds } => {
            let f = ctx.selected(cli)?.into_verified()?;
            let seed_words: Vec<Word> = seeds
                .iter()
                .map(|s| Word::parse(s))
                .collect::<Result<_, _>>()?;
            if seed_words.is_empty() {
                return Err(RunError::Input("fiber needs --seeds".into()));
            }
            let res = fiber_subgroup(&f, &seed_words, bounds.k_max)?;
            let rank = f.rank();
            let contained: Vec<String> = (0..rank)
                .map(Letter::positive)
                .filter(|&l| res.graph.contains(&Word::single(l)))
                .map(|l| l.to_char().to_string())
                .collect();
            let text = format!(
                "fiber closure (order {}): {} at K={:?}; rank {}; contains generators {:?}\n",
                ctx.order,
                if res.stabilized_at.is_some() {
                    "stabilized"
                } else {
                    "NOT stabilized"
                },
                res.stabilized_at,
                res.graph.subgroup_rank(),
                contained
            );
            ctx.emit(
                json!({
                    "schema": 1, "command": "fiber", "order": ctx.order.to_string(),
                    "k_max": bounds.k_max,
                    "stabilized_at": res.stabilized_at,
                    "rank": res.graph.subgroup_rank(),
                    "contained_generators": contained,
                    "graph": res.graph.to_json(),
                }),
                text,
            );
        }
        Command::Meet { rank, left, right } => {
            let rank = rank_for(&ctx, *rank)?;
            let s1 = system_from_arg(rank, left)?;
            let s2 = system_from_arg(rank, right)?;
            let m = meet(&s1, &s2);
            let comps: Vec<String> = m
                .components
                .iter()
                .map(|c| {
                    format!(
                        "[<{}>]",
                        c.gens
                            .iter()
                            .map(|g| g.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                })
                .collect();
            ctx.emit(
                json!({
                    "schema": 1, "command": "meet",
                    "components": comps,
                    "graphs": m.components.iter().map(|c| c.graph.to_json()).collect::<Vec<_>>(),
                }),
                format!("meet: {}\n", if comps.is_empty() { "empty".into() } else { comps.join(" ") }),
            );
        }
        Command::Malnormal { rank, components } => {
            let rank = rank_for(&ctx, *rank)?;
            let sys = system_from_arg(rank, components)?;
            let verdict = is_malnormal(&sys);
            let (text, detail) = match &verdict {
                MalnormalityVerdict::Yes => ("malnormal: yes\n".to_string(), json!({"malnormal": true})),
                MalnormalityVerdict::No(w) => (
                    format!(
                        "malnormal: no; witness (s={}, t={}, x={}) with element {}\n",
                        w.s + 1,
                        w.t + 1,
                        w.conjugator,
                        w.element
                    ),
                    json!({
                        "malnormal": false,
                        "witness": {
                            "s": w.s + 1, "t": w.t + 1,
                            "conjugator": w.conjugator.to_string(),
                            "element": w.element.to_string(),
                        }
                    }),
                ),
            };
            ctx.emit(
                json!({"schema": 1, "command": "malnormal", "verdict": detail}),
                text,
            );
        }
        Command::Primitive { word, rank } => {
            let rank = rank_for(&ctx, *rank)?;
            let w = Word::parse(word)?;
            match whitehead::is_primitive(&w, rank, whitehead::DEFAULT_LENGTH_CAP) {
                Ok(p) => ctx.emit(
                    json!({"schema": 1, "command": "primitive", "word": word, "primitive": p}),
                    format!("{}\n", if p { "primitive" } else { "not primitive" }),
                ),
                Err(e) => return Err(RunError::Input(e.to_string())),
            }
        }
        Command::Flare => {
            let lifts = ctx.lifts(cli)?;
            let lambda = cli.lambda.unwrap_or(tol.lambda);
            let rep = flare_probe(&lifts, lambda, bounds.m, bounds.l);
            let text = format!(
                "flare(lambda={}, m={}, L={}): pass fraction {:.4} over {} pairs; worst {:?}\n",
                rep.lambda, rep.m, rep.l, rep.pass_fraction, rep.total_pairs, rep.worst
            );
            ctx.emit(json!({"schema": 1, "command": "flare", "report": rep}), text);
        }
        Command::Zz => {
            let lifts = ctx.lifts(cli)?;
            let certs = zz_search(&lifts, bounds.q_len, bounds.l, bounds.p, ctx.order);
            let text = if certs.is_empty() {
                format!(
                    "no Z+Z certificate up to (q_len={}, L={}, P={})\n",
                    bounds.q_len, bounds.l, bounds.p
                )
            } else {
                certs
                    .iter()
                    .map(|c| {
                        format!(
                            "certificate: fiber [{}], q {}, period {}, corrector {}\n",
                            c.class, c.q, c.period, c.corrector
                        )
                    })
                    .collect()
            };
            ctx.emit(
                json!({
                    "schema": 1, "command": "zz", "order": ctx.order.to_string(),
                    "q_len": bounds.q_len, "L": bounds.l, "P": bounds.p,
                    "certificates": certs,
                }),
                text,
            );
        }
        Command::Ball { cone, stats, tsv } => {
            let lifts = ctx.lifts(cli)?;
            let peripherals = match cone {
                Some(path) => Some(load_peripherals(path)?),
                None => None,
            };
            let ball = cayley_ball(&lifts, bounds.r, peripherals.as_ref(), BALL_VERTEX_CAP)?;
            if *tsv {
                let mut text = String::new();
                for &(a, b, w) in &ball.edges {
                    text.push_str(&format!("{a}\t{b}\t{w}\n"));
                }
                print!("{text}");
                return Ok(());
            }
            let stats_rep = match stats {
                Some(samples) => Some(hyperbolicity_stats(&ball, *samples, ctx.seed)?),
                None => None,
            };
            let text = format!(
                "ball radius {}: {} vertices, {} cones, {} edges{}\n",
                ball.radius,
                ball.vertices.len(),
                ball.cones.len(),
                ball.edges.len(),
                match &stats_rep {
                    Some(s) => format!(
                        "; delta estimate {} (doubled {}) over {} samples (seed {})",
                        s.delta, s.delta_doubled, s.samples, s.seed
                    ),
                    None => String::new(),
                }
            );
            ctx.emit(
                json!({
                    "schema": 1, "command": "ball", "radius": ball.radius,
                    "vertices": ball.vertices.len(), "cones": ball.cones.len(),
                    "edges": ball.edges.len(), "stats": stats_rep,
                }),
                text,
            );
        }
        Command::Check => {
            let session = ctx.session()?;
            let names: Vec<String> = if cli.names.is_empty() {
                session.automorphisms.keys().cloned().collect()
            } else {
                cli.names.clone()
            };
            let mut auts = Vec::new();
            for n in &names {
                auts.push((n.clone(), session.get(n)?.clone()));
            }
            let rep =
                hyperbolicity_hypothesis_check(&auts, bounds.l, bounds.n, bounds.p, &growth_cfg)?;
            let text = rep
                .verdicts
                .iter()
                .map(|v| format!("{v}\n"))
                .collect::<String>();
            ctx.emit(json!({"schema": 1, "command": "check", "report": rep}), text);
        }
        Command::VerifyPaper => {
            let rep = verify::verify_paper(ctx.seed);
            let text = verify::render_text(&rep);
            ctx.emit(serde_json::to_value(&rep).unwrap(), text);
        }
    }
    Ok(())
}

fn rank_for(ctx: &Ctx, explicit: Option<usize>) -> Result<usize, RunError> {
    if let Some(r) = explicit {
        return Ok(r);
    }
    if let Some(s) = &ctx.session {
        return Ok(s.config.rank);
    }
    Err(RunError::Input("need --rank or --aut".into()))
}

/// "e;a,b" = two components: ⟨e⟩ and ⟨a, b⟩.
fn system_from_arg(rank: usize, arg: &str) -> Result<SubgroupSystem, RunError> {
    let mut sets = Vec::new();
    for comp in arg.split(';') {
        let mut gens = Vec::new();
        for g in comp.split(',') {
            let g = g.trim();
            if g.is_empty() {
                continue;
            }
            gens.push(Word::parse(g)?);
        }
        if !gens.is_empty() {
            sets.push(gens);
        }
    }
    if sets.is_empty() {
        return Err(RunError::Input("empty subgroup system".into()));
    }
    Ok(SubgroupSystem::from_generators(rank, sets))
}

#[derive(serde::Deserialize)]
struct PeripheralFile {
    components: Vec<PeripheralFileComponent>,
}

#[derive(serde::Deserialize)]
struct PeripheralFileComponent {
    gens: Vec<String>,
    /// 1-based lift symbol numbers.
    stabilizers: Vec<usize>,
}

fn load_peripherals(path: &PathBuf) -> Result<PeripheralSpec, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Input(format!("cannot read {}: {e}", path.display())))?;
    let file: PeripheralFile =
        serde_json::from_str(&text).map_err(|e| RunError::Input(format!("bad cone file: {e}")))?;
    let mut components = Vec::new();
    for c in file.components {
        let gens = c
            .gens
            .iter()
            .map(|s| Word::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        let stabilizer_symbols: Vec<usize> = c
            .stabilizers
            .iter()
            .map(|&s| {
                s.checked_sub(1)
                    .ok_or_else(|| RunError::Input("stabilizer symbols are 1-based".into()))
            })
            .collect::<Result<_, _>>()?;
        components.push(PeripheralComponent {
            gens,
            stabilizer_symbols,
        });
    }
    Ok(PeripheralSpec { components })
}
