//! Command-line front end: hash files or streams under any tree mode, dump
//! topologies, decode framed nodes, and run growth reports.
//!
//! Exit codes are stable: 0 success, 2 invalid parameters or usage, 3 I/O
//! failure, 4 undecodable node input. See `docs/cli.md`.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shaketree::analyze::{growth_report, render_json_lines, render_text, Arrival, CostModel};
use shaketree::exec::{hash_parallel_stored, hash_parallel_stream, hash_sequential, Input};
use shaketree::schedule::{Mode, ModeParams, Ratio};
use shaketree::tree::build_topology;
use shaketree::{decode_node, BitString, Error, FrameConfig, NodeClass};

#[derive(Parser)]
#[command(
    name = "shaketree",
    about = "Parameterizable Sakura-compatible tree hashing over RawSHAKE256",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hash a file or standard input and print the digest as lowercase hex.
    Hash(HashArgs),
    /// Print the node table of the tree built for a message length.
    Topo(TopoArgs),
    /// Decode a hex-encoded framed node and describe it.
    Decode(DecodeArgs),
    /// Run a growth report over a list of message lengths in blocks.
    Analyze(AnalyzeArgs),
}

/// Mode selection flags, shared by all subcommands and mirrored by the
/// key=value parameter file.
#[derive(Args, Clone)]
struct ModeFlags {
    /// Tree mode: 1, 2S, 2L, 3, 4S, 5S, 6S, 4L, 5L, 6L, WC, B1, B2 or B3.
    #[arg(long)]
    mode: Option<String>,
    /// Exponent parameter (e.g. 1/2) for modes 4S, 5S, 5L.
    #[arg(long)]
    epsilon: Option<String>,
    /// Logarithm base / upper arity for modes 5L, 6S, 6L.
    #[arg(long)]
    c: Option<u64>,
    /// Lane count for modes 2S and 2L.
    #[arg(long)]
    q: Option<u64>,
    /// Chunk size in 64-byte blocks for mode 1 (default 8).
    #[arg(long = "B")]
    chunk: Option<u64>,
    /// Tree height for mode 4L.
    #[arg(long = "h")]
    height: Option<u32>,
    /// Constant arity (a power of two) for mode WC.
    #[arg(long)]
    k: Option<u64>,
    /// Sequential threshold: advance the highest node holding d values.
    #[arg(long)]
    d: Option<u64>,
    /// Interleave slice width in bits (modes 2L and grouped 4L).
    #[arg(long = "I")]
    interleave_bits: Option<u64>,
    /// Interleave sibling-group size (grouped mode 4L).
    #[arg(long = "nI")]
    group_size: Option<u64>,
    /// Parameter file with key=value lines (mode, epsilon, c, q, B, h, k,
    /// d, I, nI); command-line flags take precedence.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct HashArgs {
    #[command(flatten)]
    mode: ModeFlags,
    /// Input file; `-` or absent reads standard input.
    file: Option<PathBuf>,
    /// Message length in bytes; required for stored-content modes reading
    /// a pipe of unknown length.
    #[arg(long)]
    length: Option<u64>,
    /// Digest length in bits (default 512).
    #[arg(long = "out-bits", default_value_t = 512)]
    out_bits: u64,
    /// Worker threads; 0 picks the available hardware parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Buffer multiplier for the streamed parallel strategy.
    #[arg(long, default_value_t = 1)]
    buffer_factor: u64,
    /// Print the execution report on standard error.
    #[arg(long)]
    report: bool,
    /// Report format: text or json.
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args)]
struct TopoArgs {
    #[command(flatten)]
    mode: ModeFlags,
    /// Message length in bytes.
    #[arg(long)]
    length: u64,
}

#[derive(Args)]
struct DecodeArgs {
    /// Hex-encoded framed node; absent reads hex from standard input.
    hex: Option<String>,
    /// Exact bit length when the input is not a whole number of bytes
    /// (root nodes end two bits past a byte boundary).
    #[arg(long)]
    bits: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    mode: ModeFlags,
    /// Comma-separated message lengths in 64-byte blocks.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    /// Output format: text or json-lines.
    #[arg(long, default_value = "text")]
    format: String,
    /// Model blocks arriving one per time unit instead of all up front.
    #[arg(long)]
    streamed: bool,
    /// Arrival rate multiplier for --streamed.
    #[arg(long, default_value_t = 1)]
    rate: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Hash(args) => cmd_hash(args),
        Command::Topo(args) => cmd_topo(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Analyze(args) => cmd_analyze(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("shaketree: {err}");
            ExitCode::from(match err {
                Error::Decode { .. } => 4,
                Error::Io(_) => 3,
                _ => 2,
            })
        }
    }
}

fn build_params(flags: &ModeFlags) -> Result<ModeParams, Error> {
    let mut params = ModeParams::default();
    if let Some(path) = &flags.params {
        apply_params_file(&mut params, path)?;
    }
    if let Some(mode) = &flags.mode {
        params.mode = Some(mode.parse()?);
    }
    if let Some(eps) = &flags.epsilon {
        params.epsilon = Some(eps.parse()?);
    }
    params.base = flags.c.or(params.base);
    params.lanes = flags.q.or(params.lanes);
    params.chunk_blocks = flags.chunk.or(params.chunk_blocks);
    params.height = flags.height.or(params.height);
    params.fixed_arity = flags.k.or(params.fixed_arity);
    params.threshold = flags.d.or(params.threshold);
    params.interleave_bits = flags.interleave_bits.or(params.interleave_bits);
    params.group_size = flags.group_size.or(params.group_size);
    params.validate()?;
    Ok(params)
}

fn apply_params_file(params: &mut ModeParams, path: &PathBuf) -> Result<(), Error> {
    let text = std::fs::read_to_string(path)?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| {
            Error::Config(format!(
                "{}:{}: invalid {what} value `{value}`",
                path.display(),
                lineno + 1
            ))
        };
        match key {
            "mode" => params.mode = Some(value.parse::<Mode>()?),
            "epsilon" => params.epsilon = Some(value.parse::<Ratio>()?),
            "c" => params.base = Some(value.parse().map_err(|_| bad("c"))?),
            "q" => params.lanes = Some(value.parse().map_err(|_| bad("q"))?),
            "B" => params.chunk_blocks = Some(value.parse().map_err(|_| bad("B"))?),
            "h" => params.height = Some(value.parse().map_err(|_| bad("h"))?),
            "k" => params.fixed_arity = Some(value.parse().map_err(|_| bad("k"))?),
            "d" => params.threshold = Some(value.parse().map_err(|_| bad("d"))?),
            "I" => params.interleave_bits = Some(value.parse().map_err(|_| bad("I"))?),
            "nI" => params.group_size = Some(value.parse().map_err(|_| bad("nI"))?),
            other => {
                return Err(Error::Config(format!(
                    "{}:{}: unknown key `{other}`",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

fn cmd_hash(args: HashArgs) -> Result<(), Error> {
    let params = build_params(&args.mode)?;
    let d = args.mode.d.unwrap_or_else(|| params.threshold());
    let workers = match args.workers {
        None => 1,
        Some(0) => std::thread::available_parallelism().map_or(1, |p| p.get()),
        Some(p) => p,
    };
    let use_stdin = args.file.as_deref().is_none_or(|f| f.as_os_str() == "-");
    let mode = params.mode()?;
    let stream_parallel_ok = matches!(mode, Mode::M3 | Mode::M6L | Mode::Wc);

    let output = if workers <= 1 {
        if use_stdin {
            let stdin = std::io::stdin();
            let mut lock = stdin.lock();
            hash_sequential(&params, Input::Reader(&mut lock), args.length, d)?
        } else {
            let path = args.file.as_ref().expect("file path");
            let len = std::fs::metadata(path)?.len();
            let mut file = std::fs::File::open(path)?;
            hash_sequential(&params, Input::Reader(&mut file), Some(len), d)?
        }
    } else if use_stdin && stream_parallel_ok {
        let stdin = std::io::stdin();
        let mut lock = stdin.lock();
        hash_parallel_stream(&params, &mut lock, workers, args.buffer_factor)?
    } else {
        // Subtree partitioning needs the whole message.
        let bytes = if use_stdin {
            if mode.is_live() || args.length.is_some() {
                let mut buf = Vec::new();
                std::io::stdin().lock().read_to_end(&mut buf)?;
                if let Some(expect) = args.length {
                    if expect != buf.len() as u64 {
                        return Err(Error::Mode(format!(
                            "declared length {expect} bytes but read {}",
                            buf.len()
                        )));
                    }
                }
                buf
            } else {
                return Err(Error::Mode(format!(
                    "mode {} needs --length to hash standard input",
                    mode.as_str()
                )));
            }
        } else {
            std::fs::read(args.file.as_ref().expect("file path"))?
        };
        hash_parallel_stored(&params, &bytes, workers)?
    };

    if args.out_bits == 512 {
        println!("{}", hex::encode(output.digest()));
    } else {
        println!("{}", hex::encode(output.squeeze(args.out_bits)));
    }
    if args.report {
        let r = &output.report;
        match args.format.as_str() {
            "json" => eprintln!(
                "{{\"digest\":\"{}\",\"max_live_states\":{},\"f_calls\":{},\"permutation_calls\":{},\"buffer_peak\":{}}}",
                hex::encode(r.digest),
                r.max_live_states,
                r.f_calls,
                r.permutation_calls,
                r.buffer_peak
            ),
            _ => eprintln!(
                "max_live_states {}\nf_calls {}\npermutation_calls {}\nbuffer_peak {}",
                r.max_live_states, r.f_calls, r.permutation_calls, r.buffer_peak
            ),
        }
    }
    Ok(())
}

fn cmd_topo(args: TopoArgs) -> Result<(), Error> {
    let params = build_params(&args.mode)?;
    let schedule = shaketree::AritySchedule::new(params)?;
    let topology = build_topology(&schedule, args.length * 8)?;
    print!("{}", topology.export_text());
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<(), Error> {
    let hex_str = match args.hex {
        Some(h) => h,
        None => {
            let mut buf = String::new();
            std::io::stdin().lock().read_to_string(&mut buf)?;
            buf
        }
    };
    let cleaned: String = hex_str.chars().filter(|c| !c.is_whitespace()).collect();
    let bytes = hex::decode(&cleaned).map_err(|e| Error::Decode {
        position: 0,
        reason: format!("invalid hex input: {e}"),
    })?;
    let bits = match args.bits {
        None => bytes.len() as u64 * 8,
        Some(b) if b.div_ceil(8) == bytes.len() as u64 => b,
        Some(b) => {
            return Err(Error::Config(format!(
                "--bits {b} does not match {} bytes of input",
                bytes.len()
            )))
        }
    };
    let input = BitString::from_bits(&bytes, bits as usize);
    let (kind, payload) = decode_node(&input, &FrameConfig::default())?;
    let role = if kind.is_root { "root" } else { "non-root" };
    match kind.class {
        NodeClass::Leaf => {
            println!("leaf {role}");
            println!("payload_bits {}", payload.len());
        }
        NodeClass::Inner { arity, interleave } => {
            println!("inner {role}");
            println!("arity {arity}");
            match interleave {
                None => println!("interleave none"),
                Some((bits, group)) => println!("interleave {bits} group {group}"),
            }
            println!("payload_bits {}", payload.len());
        }
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let params = build_params(&args.mode)?;
    let mut n_list = args.n.clone();
    n_list.sort_unstable();
    let cost = CostModel {
        arrival: if args.streamed {
            Arrival::Streamed { rate: args.rate }
        } else {
            Arrival::Stored
        },
        ..CostModel::default()
    };
    let rows = growth_report(&params, &n_list, &cost)?;
    let mut stdout = std::io::stdout().lock();
    match args.format.as_str() {
        "json-lines" => writeln!(stdout, "{}", render_json_lines(&rows))?,
        _ => write!(stdout, "{}", render_text(&rows))?,
    }
    Ok(())
}
