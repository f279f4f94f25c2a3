//! `fractlang` — process terms as fractal recipes.
//!
//! Exit codes: 0 for success (or "equivalent"/"accepted"), 1 for a
//! semantic negative (inequivalent terms, rejected derivation), 2 for
//! usage or input errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fractlang::fractal::{
    origin, parse_interpretation, solve_with_snap, Interpretation, Point,
};
use fractlang::measure::{sample_measure, trace_measure, tzeng_equiv};
use fractlang::proof::{check, parse_derivation_classic, parse_derivation_prob, Verdict};
use fractlang::render::{render_measure, render_set, RenderConfig};
use fractlang::semantics::{unfold, unfold_prob, Lts};
use fractlang::syntax::{is_valid_ident, parse_pterm, parse_term, ActionLabel};
use fractlang::trace::{trace_equiv, traces, Equivalence, Word};

#[derive(Parser)]
#[command(
    name = "fractlang",
    version,
    about = "Process terms as fractal recipes: parse, unfold, decide equivalence, check proofs, render"
)]
struct Cli {
    /// RNG seed for sampling commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 uses the library default). Output bytes do not
    /// depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProofSystem {
    Classic,
    Prob,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a term file and print the canonical form.
    Parse {
        file: PathBuf,
        /// Treat the input as a probabilistic term.
        #[arg(long)]
        prob: bool,
    },
    /// Unfold a term into its transition system and dump it.
    DumpLts {
        file: PathBuf,
        #[arg(long)]
        prob: bool,
    },
    /// Enumerate the traces of a term up to a depth.
    Traces {
        file: PathBuf,
        #[arg(long)]
        depth: usize,
    },
    /// Decide trace equivalence of two terms (exit 0 = equivalent,
    /// 1 = inequivalent with the witness on stdout).
    Equiv { file1: PathBuf, file2: PathBuf },
    /// Check a derivation file against an axiom system.
    CheckProof {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = ProofSystem::Classic)]
        system: ProofSystem,
    },
    /// Solve the fractal system of a term and rasterize a component.
    Render {
        file: PathBuf,
        /// Interpretation file assigning a contraction to each action.
        #[arg(long)]
        interp: PathBuf,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Which state's component to draw (defaults to the root).
        #[arg(long)]
        state: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        /// Bounding box `xmin,ymin,xmax,ymax` (defaults to a tight fit).
        #[arg(long)]
        bbox: Option<String>,
        /// Optional key=value config file (flags take precedence).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the exact cylinder measure of a word.
    Measure {
        file: PathBuf,
        /// Comma-separated actions; empty for the full space.
        #[arg(long, default_value = "")]
        word: String,
    },
    /// Decide trace-measure equivalence of two probabilistic terms.
    MeasureEquiv { file1: PathBuf, file2: PathBuf },
    /// Sample the subfractal measure of a term and rasterize a density.
    MeasureRender {
        file: PathBuf,
        #[arg(long)]
        interp: PathBuf,
        /// Walk length per sample.
        #[arg(long, default_value_t = 30)]
        truncation: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        bbox: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Ignore failure: the pool may already be initialized.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_lts(path: &Path) -> Result<Lts, String> {
    let text = read(path)?;
    let term = parse_term(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    unfold(&term).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_interp(path: &Path) -> Result<Interpretation, String> {
    let text = read(path)?;
    parse_interpretation(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_bbox(text: &str) -> Result<[f64; 4], String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad bbox `{text}`: {e}"))?;
    if parts.len() != 4 {
        return Err(format!("bbox needs 4 numbers, found {}", parts.len()));
    }
    Ok([parts[0], parts[1], parts[2], parts[3]])
}

fn parse_word(text: &str) -> Result<Word, String> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Word::new());
    }
    trimmed
        .split(',')
        .map(|piece| {
            let name = piece.trim();
            if is_valid_ident(name) {
                Ok(ActionLabel::new(name))
            } else {
                Err(format!("invalid action name `{name}` in word"))
            }
        })
        .collect()
}

/// Assembles a render config with precedence flags > config file >
/// defaults.
fn build_config(
    width: Option<usize>,
    height: Option<usize>,
    bbox: Option<String>,
    config: Option<PathBuf>,
) -> Result<RenderConfig, String> {
    let mut cfg = RenderConfig::default();
    if let Some(path) = config {
        let text = read(&path)?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
            let value = value.trim();
            match key.trim() {
                "width" => {
                    cfg.width = value
                        .parse()
                        .map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?
                }
                "height" => {
                    cfg.height = value
                        .parse()
                        .map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?
                }
                "bbox" => cfg.bbox = Some(parse_bbox(value)?),
                other => {
                    return Err(format!(
                        "{}:{}: unknown config key `{other}`",
                        path.display(),
                        i + 1
                    ))
                }
            }
        }
    }
    if let Some(w) = width {
        cfg.width = w;
    }
    if let Some(h) = height {
        cfg.height = h;
    }
    if let Some(b) = bbox {
        cfg.bbox = Some(parse_bbox(&b)?);
    }
    if cfg.width == 0 || cfg.height == 0 {
        return Err("image dimensions must be at least 1x1".into());
    }
    Ok(cfg)
}

/// Point-count estimate for the exact solver; beyond a million points a
/// snap grid derived from the a-priori radius caps growth.
fn pick_snap(
    lts: &Lts,
    interp: &Interpretation,
    depth: usize,
    seed_point: Point,
    cfg: &RenderConfig,
) -> Result<Option<f64>, String> {
    const CAP: u128 = 1_000_000;
    let n = lts.num_states();
    let mut counts: Vec<u128> = vec![1; n];
    let mut exceeded = false;
    'outer: for _ in 0..depth {
        let mut next = vec![0u128; n];
        for x in 0..n {
            for (_, y) in lts.successors(x) {
                next[x] = next[x].saturating_add(counts[*y]);
                if next[x] > CAP {
                    exceeded = true;
                    break 'outer;
                }
            }
        }
        counts = next;
    }
    if !exceeded && counts.iter().all(|&c| c <= CAP) {
        return Ok(None);
    }
    let spread = fractlang::fractal::seed_spread(lts, interp, seed_point)
        .map_err(|e| e.to_string())?;
    let radius = spread / (1.0 - interp.max_coeff());
    let pitch = 2.0 * radius.max(1e-9) / cfg.width.max(cfg.height) as f64;
    Ok(Some(pitch))
}

fn format_word(word: &Word) -> String {
    if word.is_empty() {
        "<eps>".to_string()
    } else {
        word.iter()
            .map(|a| a.name().to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Parse { file, prob } => {
            let text = read(&file)?;
            if prob {
                let term = parse_pterm(&text).map_err(|e| format!("{}: {e}", file.display()))?;
                println!("{term}");
            } else {
                let term = parse_term(&text).map_err(|e| format!("{}: {e}", file.display()))?;
                println!("{term}");
            }
            Ok(0)
        }
        Command::DumpLts { file, prob } => {
            let text = read(&file)?;
            if prob {
                let term = parse_pterm(&text).map_err(|e| format!("{}: {e}", file.display()))?;
                let lmc = unfold_prob(&term).map_err(|e| e.to_string())?;
                print!("{}", lmc.dump());
            } else {
                let term = parse_term(&text).map_err(|e| format!("{}: {e}", file.display()))?;
                let lts = unfold(&term).map_err(|e| e.to_string())?;
                print!("{}", lts.dump());
            }
            Ok(0)
        }
        Command::Traces { file, depth } => {
            let lts = load_lts(&file)?;
            let t = traces(&lts, lts.root(), depth);
            let mut out = String::new();
            for word in t.words() {
                writeln!(out, "{}", format_word(word)).unwrap();
            }
            print!("{out}");
            Ok(0)
        }
        Command::Equiv { file1, file2 } => {
            let l1 = load_lts(&file1)?;
            let l2 = load_lts(&file2)?;
            match trace_equiv(&l1, l1.root(), &l2, l2.root()) {
                Equivalence::Equivalent => {
                    println!("equivalent");
                    Ok(0)
                }
                Equivalence::Inequivalent { witness } => {
                    println!("{}", format_word(&witness));
                    Ok(1)
                }
            }
        }
        Command::CheckProof { file, system } => {
            let text = read(&file)?;
            let verdict = match system {
                ProofSystem::Classic => {
                    let d = parse_derivation_classic(&text)
                        .map_err(|e| format!("{}: {e}", file.display()))?;
                    check(&d).map_err(|e| e.to_string())?
                }
                ProofSystem::Prob => {
                    let d = parse_derivation_prob(&text)
                        .map_err(|e| format!("{}: {e}", file.display()))?;
                    check(&d).map_err(|e| e.to_string())?
                }
            };
            match verdict {
                Verdict::Accept => {
                    println!("accepted");
                    Ok(0)
                }
                Verdict::Reject { step, reason } => {
                    println!("rejected at step {step}: {reason}");
                    Ok(1)
                }
            }
        }
        Command::Render {
            file,
            interp,
            depth,
            state,
            out,
            width,
            height,
            bbox,
            config,
        } => {
            let lts = load_lts(&file)?;
            let interp = load_interp(&interp)?;
            let cfg = build_config(width, height, bbox, config)?;
            let seed_point = origin();
            let snap = pick_snap(&lts, &interp, depth, seed_point, &cfg)?;
            let sv = solve_with_snap(&lts, &interp, depth, seed_point, snap)
                .map_err(|e| e.to_string())?;
            let state = state.unwrap_or(lts.root());
            if state >= lts.num_states() {
                return Err(format!(
                    "state {state} out of range (system has {} states)",
                    lts.num_states()
                ));
            }
            let image = render_set(sv.component(state), &cfg);
            std::fs::write(&out, image).map_err(|e| format!("{}: {e}", out.display()))?;
            eprintln!(
                "wrote {} ({} points, guarantee {:.3e})",
                out.display(),
                sv.component(state).len(),
                sv.component(state).guarantee()
            );
            Ok(0)
        }
        Command::Measure { file, word } => {
            let text = read(&file)?;
            let term = parse_pterm(&text).map_err(|e| format!("{}: {e}", file.display()))?;
            let lmc = unfold_prob(&term).map_err(|e| e.to_string())?;
            let word = parse_word(&word)?;
            let value =
                trace_measure(&lmc, lmc.root(), &word).map_err(|e| e.to_string())?;
            println!("{value}");
            Ok(0)
        }
        Command::MeasureEquiv { file1, file2 } => {
            let parse = |path: &Path| -> Result<_, String> {
                let text = read(path)?;
                let term = parse_pterm(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                unfold_prob(&term).map_err(|e| e.to_string())
            };
            let l1 = parse(&file1)?;
            let l2 = parse(&file2)?;
            match tzeng_equiv(&l1, l1.root(), &l2, l2.root()) {
                Equivalence::Equivalent => {
                    println!("equivalent");
                    Ok(0)
                }
                Equivalence::Inequivalent { witness } => {
                    println!("{}", format_word(&witness));
                    Ok(1)
                }
            }
        }
        Command::MeasureRender {
            file,
            interp,
            truncation,
            samples,
            out,
            width,
            height,
            bbox,
            config,
        } => {
            let text = read(&file)?;
            let term = parse_pterm(&text).map_err(|e| format!("{}: {e}", file.display()))?;
            let lmc = unfold_prob(&term).map_err(|e| e.to_string())?;
            let interp = load_interp(&interp)?;
            let cfg = build_config(width, height, bbox, config)?;
            let points = sample_measure(&lmc, lmc.root(), &interp, truncation, samples, cli.seed)
                .map_err(|e| e.to_string())?;
            let image = render_measure(&points, interp.dim(), &cfg);
            std::fs::write(&out, image).map_err(|e| format!("{}: {e}", out.display()))?;
            eprintln!("wrote {} ({} samples)", out.display(), samples);
            Ok(0)
        }
    }
}
