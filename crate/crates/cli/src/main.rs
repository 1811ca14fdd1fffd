use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use zipper_core::arith::{format_rational, parse_rational, pow2, to_f64, Rational};
use zipper_core::horseshoe::{self, HorseshoeCertificate};
use zipper_core::mdim::{mdim_table, mdim_target, tile_graph};
use zipper_core::regularity::hypersensitivity;
use zipper_core::symbolic::{check_embedding, check_order_realization, embed, realize_order, Symbol};
use zipper_core::vanishing::{self, SequenceSpec};
use zipper_core::{zipper, Error, Parameter};

#[derive(Parser)]
#[command(name = "zipper", version, about = "Exact analyses of zipper maps of the unit interval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Slopes, region flags and certified exponents of a parameter.
    Analyze {
        #[command(flatten)]
        p: ParamArg,
        /// Precision of the exponent enclosures, in bits.
        #[arg(long, default_value_t = 40)]
        bits: u64,
    },
    /// Enclosures of Z(x) as CSV rows "x,y_lo,y_hi".
    Eval {
        #[command(flatten)]
        p: ParamArg,
        /// Comma-separated points.
        #[arg(long, value_delimiter = ',', conflicts_with = "grid")]
        x: Vec<String>,
        /// Evaluate at i/N for i = 0..=N.
        #[arg(long)]
        grid: Option<u64>,
        /// Enclosure width.
        #[arg(long, default_value = "2^-30")]
        eps: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG plot of an approximant of Z, or of the coordinate change h^n.
    Plot {
        #[command(flatten)]
        p: OptParamArg,
        /// Approximant level for Z.
        #[arg(long, default_value_t = 6)]
        k: usize,
        /// Plot h^n for these scale exponents m_j (s_j = 2^-m_j) instead of Z.
        #[arg(long, value_delimiter = ',')]
        exponents: Vec<i128>,
        /// Level n of h^n.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Horseshoe certificates.
    Horseshoe {
        #[command(subcommand)]
        action: HorseshoeCmd,
    },
    /// Points whose orbits follow a prescribed total order.
    RealizeOrder {
        #[command(flatten)]
        p: ParamArg,
        /// Number of orbits.
        #[arg(long)]
        k: usize,
        /// Orbits have times 0..=l.
        #[arg(long)]
        l: usize,
        /// Symbols "(i,j)" in increasing order, e.g. '["(0,0)","(1,0)"]' or "(0,0),(1,0)".
        #[arg(long)]
        order: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embeds a self-map of {0..n-1} by nested tiles.
    Embed {
        #[command(flatten)]
        p: ParamArg,
        /// Images of 0, 1, ..., e.g. "1,2,0".
        #[arg(long, value_delimiter = ',', required = true)]
        map: Vec<usize>,
        /// Width target for the enclosures.
        #[arg(long, default_value = "2^-20")]
        width: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certified lower bounds on the growth of the tile graph, CSV "epsilon,rate_lo,ratio,target".
    Mdim {
        #[command(flatten)]
        p: ParamArg,
        #[arg(long, value_delimiter = ',', default_value = "2^-6,2^-7,2^-8,2^-9,2^-10")]
        eps: Vec<String>,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 20)]
        nmax: usize,
        /// Write the adjacency list of the graph at the last ε here.
        #[arg(long)]
        dump_graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The coordinate change h_s, its cover and the conjugated growth rate.
    Homeo {
        #[command(subcommand)]
        action: HomeoCmd,
    },
}

#[derive(Subcommand)]
enum HorseshoeCmd {
    /// Searches a certificate of order at least k and prints it as JSON.
    Search {
        #[command(flatten)]
        p: ParamArg,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        /// Longest word for the exhaustive method.
        #[arg(long, default_value_t = 12)]
        max_len: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verifies a JSON certificate (path or "-" for stdin); exit 1 when rejected.
    Verify { file: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Symmetric,
    RegionB,
    Brute,
}

#[derive(Subcommand)]
enum HomeoCmd {
    /// Scale sequence with its certification records, and the breakpoints of h^n.
    Build {
        #[command(flatten)]
        seq: SeqArg,
        /// Level n of h^n (at most the sequence length).
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Size classes of the cover at ε, CSV "class_k,count,bound_4^max(k,p0)"; exit 1 if a lemma check fails.
    Cover {
        #[command(flatten)]
        seq: SeqArg,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper growth rate in the conjugated metric, CSV "epsilon,vertices,edges,rate_hi,ratio_hi".
    Rate {
        #[command(flatten)]
        seq: SeqArg,
        #[arg(long, value_delimiter = ',', default_value = "1/20,1/40")]
        eps: Vec<String>,
        #[arg(long, default_value_t = 20)]
        nmax: usize,
        /// Image resolution |A|·2^-depth; 0 uses the complete graph.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ParamArg {
    /// Parameter "x1,y1,x2,y2" (rationals or decimals).
    #[arg(long = "p")]
    p: String,
}

#[derive(Args)]
struct OptParamArg {
    /// Parameter "x1,y1,x2,y2".
    #[arg(long = "p")]
    p: Option<String>,
}

#[derive(Args)]
struct SeqArg {
    /// Parameter whose Hölder data fixes the sequence.
    #[arg(long = "p", default_value = "3/10,7/10,4/5,1/10")]
    p: String,
    /// Sequence length.
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Use these exponents m_j instead of the certified choice.
    #[arg(long, value_delimiter = ',')]
    exponents: Vec<i128>,
}

enum Failure {
    Input(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::InvalidWord(_)
            | Error::Parse(_)
            | Error::DomainViolation(_)
            | Error::Precondition(_)
            | Error::EpsilonTooLarge
            | Error::DepthExceedsSequence { .. } => Failure::Input(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Run = Result<(), Failure>;

/// Also accepts `2^k`.
fn rational(s: &str) -> Result<Rational, Failure> {
    let s = s.trim();
    if let Some(e) = s.strip_prefix("2^") {
        let e: i64 = e.parse().map_err(|_| Failure::Input(format!("bad exponent in {s:?}")))?;
        return Ok(pow2(e));
    }
    Ok(parse_rational(s)?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Run {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn sequence(seq: &SeqArg) -> Result<SequenceSpec, Failure> {
    if !seq.exponents.is_empty() {
        return Ok(SequenceSpec::from_exponents(seq.exponents.clone()));
    }
    Ok(vanishing::choose_sequence(&Parameter::parse(&seq.p)?, seq.k, 60)?)
}

fn parse_order(s: &str) -> Result<Vec<Symbol>, Failure> {
    let bad = || Failure::Input(format!("order must be a list of \"(i,j)\" symbols, got {s:?}"));
    let mut out = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('(') {
        let close = rest[open..].find(')').ok_or_else(bad)? + open;
        let (i, j) = rest[open + 1..close].split_once(',').ok_or_else(bad)?;
        out.push((i.trim().parse().map_err(|_| bad())?, j.trim().parse().map_err(|_| bad())?));
        rest = &rest[close + 1..];
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn svg(points: &[(f64, f64)], title: &str) -> String {
    let size = 512.0;
    let coords: Vec<String> =
        points.iter().map(|(x, y)| format!("{:.3},{:.3}", x * size, (1.0 - y) * size)).collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {size} {size}\" width=\"{size}\" height=\"{size}\">\n\
         <title>{title}</title>\n\
         <rect width=\"{size}\" height=\"{size}\" fill=\"white\" stroke=\"black\"/>\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"{}\"/>\n</svg>\n",
        coords.join(" ")
    )
}

fn analyze(p: &str, bits: u64) -> Run {
    let p = Parameter::parse(p)?;
    let reg = hypersensitivity(&p, bits)?;
    let target = mdim_target(&p)?;
    let v = json!({
        "parameter": p.to_strings(),
        "derived": p.derived(),
        "regularity": reg,
        "mdim_target": target,
    });
    emit(&None, &pretty(&v))
}

fn eval(p: &str, xs: &[String], grid: Option<u64>, eps: &str, out: &Option<PathBuf>) -> Run {
    let p = Parameter::parse(p)?;
    let eps = rational(eps)?;
    let points: Vec<Rational> = match grid {
        Some(0) => return Err(Failure::Input("grid must be positive".into())),
        Some(n) => (0..=n).map(|i| Rational::new(i.into(), n.into())).collect(),
        None if xs.is_empty() => return Err(Failure::Input("give --x or --grid".into())),
        None => xs.iter().map(|x| rational(x)).collect::<Result<_, _>>()?,
    };
    let mut csv = String::from("x,y_lo,y_hi\n");
    for x in &points {
        let y = zipper::eval(&p, x, &eps)?;
        csv.push_str(&format!("{},{},{}\n", format_rational(x), format_rational(&y.lo), format_rational(&y.hi)));
    }
    emit(out, &csv)
}

fn plot(p: &Option<String>, k: usize, exponents: &[i128], n: Option<usize>, out: &Option<PathBuf>) -> Run {
    let text = match (p, exponents.is_empty()) {
        (Some(p), true) => {
            let p = Parameter::parse(p)?;
            let (f, _) = zipper::approximant(&p, k)?;
            let pts: Vec<(f64, f64)> = f.points().iter().map(|(x, y)| (to_f64(x), to_f64(y))).collect();
            svg(&pts, &format!("Z approximant, level {k}"))
        }
        (None, false) => {
            let s = SequenceSpec::from_exponents(exponents.to_vec());
            let n = n.unwrap_or(s.len());
            let (h, _) = vanishing::build_homeo(&s, n)?;
            let pts: Vec<(f64, f64)> = h.points.iter().map(|(x, y)| (x.to_f64(), y.to_f64())).collect();
            svg(&pts, &format!("h^{n}"))
        }
        _ => return Err(Failure::Input("give exactly one of --p and --exponents".into())),
    };
    emit(out, &text)
}

fn horseshoe_search(p: &str, k: usize, method: Method, max_len: usize, out: &Option<PathBuf>) -> Run {
    let p = Parameter::parse(p)?;
    let cert = match method {
        Method::Auto => horseshoe::search(&p, k)?,
        Method::Symmetric => horseshoe::symmetric_search(&p, k)?,
        Method::RegionB => horseshoe::region_b_search(&p, k)?,
        Method::Brute => horseshoe::brute_search(&p, k, max_len)
            .ok_or_else(|| Failure::Check(format!("no horseshoe of order {k} with words up to length {max_len}")))?,
    };
    emit(out, &pretty(&cert))
}

fn horseshoe_verify(file: &str) -> Run {
    let text = if file == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(file)?
    };
    let cert: HorseshoeCertificate =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("bad certificate: {e}")))?;
    let v = horseshoe::verify(&cert);
    emit(&None, &pretty(&v))?;
    if v.ok {
        Ok(())
    } else {
        Err(Failure::Check("certificate rejected".into()))
    }
}

fn homeo_build(seq: &SeqArg, n: usize, out: &Option<PathBuf>) -> Run {
    let s = sequence(seq)?;
    let (h, err) = vanishing::build_homeo(&s, n)?;
    let gaps: Vec<bool> = (0..n.min(s.len().saturating_sub(1)))
        .map(|m| vanishing::successive_gap_holds(&s, m))
        .collect::<Result<_, _>>()?;
    let v = json!({
        "sequence": s,
        "gaps_hold": s.gaps_hold(),
        "product_holds": s.product_holds(),
        "modulus_holds": s.modulus_holds(),
        "n": n,
        "monotone": h.is_strictly_increasing(),
        "successive_gaps_hold": gaps,
        "error_bound": err,
        "curve": h,
    });
    emit(out, &pretty(&v))
}

fn homeo_cover(seq: &SeqArg, eps: &str, out: &Option<PathBuf>) -> Run {
    let s = sequence(seq)?;
    let c = vanishing::cover_and_classify(&s, &rational(eps)?, s.len())?;
    emit(out, &c.to_csv())?;
    eprintln!(
        "elements={} p0={} K_eps={} horizontal={} card={} depth={}",
        c.elements.len(),
        c.p0,
        c.k_eps,
        c.horizontal_ok,
        c.card_ok(),
        c.depth_ok
    );
    if c.all_ok() {
        Ok(())
    } else {
        Err(Failure::Check("a cover lemma check failed".into()))
    }
}

fn homeo_rate(seq: &SeqArg, eps: &[String], nmax: usize, depth: usize, out: &Option<PathBuf>) -> Run {
    let p = Parameter::parse(&seq.p)?;
    let s = sequence(seq)?;
    let mut csv = String::from("epsilon,vertices,edges,rate_hi,ratio_hi\n");
    for e in eps {
        let e = rational(e)?;
        let r = vanishing::conjugated_rate(&p, &s, &e, nmax, depth)?;
        csv.push_str(&format!(
            "{},{},{},{:.6},{:.6}\n",
            format_rational(&e),
            r.graph.len(),
            r.graph.edge_count(),
            to_f64(&r.estimate.upper.hi),
            to_f64(&r.ratio.hi)
        ));
    }
    emit(out, &csv)
}

fn mdim(p: &str, eps: &[String], depth: usize, nmax: usize, dump: &Option<PathBuf>, out: &Option<PathBuf>) -> Run {
    let p = Parameter::parse(p)?;
    let eps: Vec<Rational> = eps.iter().map(|e| rational(e)).collect::<Result<_, _>>()?;
    let rows = mdim_table(&p, &eps, depth, nmax)?;
    let mut csv = String::from("epsilon,rate_lo,ratio,target\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            format_rational(&r.epsilon),
            to_f64(&r.rate_lower.lo),
            to_f64(r.ratio_lower_bound()),
            to_f64(&r.target.lo)
        ));
    }
    emit(out, &csv)?;
    if let (Some(path), Some(e)) = (dump, eps.last()) {
        fs::write(path, tile_graph(&p, e, depth)?.to_text())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Analyze { p, bits } => analyze(&p.p, bits),
        Command::Eval { p, x, grid, eps, out } => eval(&p.p, &x, grid, &eps, &out),
        Command::Plot { p, k, exponents, n, out } => plot(&p.p, k, &exponents, n, &out),
        Command::Horseshoe { action } => match action {
            HorseshoeCmd::Search { p, k, method, max_len, out } => horseshoe_search(&p.p, k, method, max_len, &out),
            HorseshoeCmd::Verify { file } => horseshoe_verify(&file),
        },
        Command::RealizeOrder { p, k, l, order, out } => {
            let p = Parameter::parse(&p.p)?;
            let r = realize_order(&p, k, l, &parse_order(&order)?)?;
            check_order_realization(&r)?;
            emit(&out, &pretty(&r))
        }
        Command::Embed { p, map, width, out } => {
            let p = Parameter::parse(&p.p)?;
            let e = embed(&p, &map, &rational(&width)?)?;
            check_embedding(&e)?;
            emit(&out, &pretty(&e))
        }
        Command::Mdim { p, eps, depth, nmax, dump_graph, out } => mdim(&p.p, &eps, depth, nmax, &dump_graph, &out),
        Command::Homeo { action } => match action {
            HomeoCmd::Build { seq, n, out } => homeo_build(&seq, n, &out),
            HomeoCmd::Cover { seq, eps, out } => homeo_cover(&seq, &eps, &out),
            HomeoCmd::Rate { seq, eps, nmax, depth, out } => homeo_rate(&seq, &eps, nmax, depth, &out),
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
