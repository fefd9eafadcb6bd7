//! Command-line front-end: files and exit codes around the hymu library.
//!
//! Exit codes: 0 proved/true/accepted, 1 refuted/false/rejected, 2 input
//! error (syntax, guardedness, unknown world, malformed proof), 3 I/O error,
//! 4 budget exhausted.  The first stdout line is always a single verdict
//! token so scripts can dispatch on it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hymu::calculus::OriginalityContext;
use hymu::proof::{check_proof, deserialize, serialize, unfold_proof, Verdict};
use hymu::prover::{prove, Budget, SearchOutcome};
use hymu::semantics::{build_eval_game, model_check, solve, Model, Player};
use hymu::syntax::{check_guarded, dependency_order, parse, Formula};

#[derive(Parser)]
#[command(name = "hymu", about = "Decision procedures for the hybrid mu-calculus", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a formula file and print its canonical form.
    Parse {
        /// File containing one formula.
        file: PathBuf,
    },
    /// Model-check a formula at a world of a model.
    Mc {
        /// Model file in the line-oriented format.
        model: PathBuf,
        /// The formula, given inline.
        formula: String,
        /// World, by name (or numeric id as a fallback).
        world: String,
        /// Dump the solved evaluation game: winning regions and strategy.
        #[arg(long)]
        certificate: bool,
    },
    /// Search for a proof or a countermodel of a formula.
    Prove {
        /// File containing one formula.
        file: PathBuf,
        /// Maximum number of nested search nodes on one branch.
        #[arg(long, default_value_t = 500)]
        budget_depth: usize,
        /// Maximum total number of search nodes.
        #[arg(long, default_value_t = 200_000)]
        budget_steps: u64,
        /// Maximum number of memoized sequents.
        #[arg(long, default_value_t = 100_000)]
        memo_cap: usize,
        /// Worker threads; the search is deterministic, so the outcome is
        /// independent of this setting.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Write the proof or countermodel here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a proof file with the independent checker.
    Check {
        /// Proof file as written by `prove`.
        file: PathBuf,
    },
    /// Print the depth-bounded unfolding of a proof with back edges.
    Unfold {
        /// Proof file as written by `prove`.
        file: PathBuf,
        /// Unfolding depth.
        depth: usize,
    },
}

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}

fn run(cli: Cli) -> u8 {
    match cli.cmd {
        Cmd::Parse { file } => cmd_parse(&file),
        Cmd::Mc {
            model,
            formula,
            world,
            certificate,
        } => cmd_mc(&model, &formula, &world, certificate),
        Cmd::Prove {
            file,
            budget_depth,
            budget_steps,
            memo_cap,
            threads,
            out,
        } => {
            let budget = Budget {
                max_depth: budget_depth,
                max_steps: budget_steps,
                memo_cap,
            };
            cmd_prove(&file, &budget, threads, out.as_deref())
        }
        Cmd::Check { file } => cmd_check(&file),
        Cmd::Unfold { file, depth } => cmd_unfold(&file, depth),
    }
}

/// Read a file, reporting I/O failures on stderr (exit 3).
fn read_file(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        3
    })
}

/// Parse a formula and reject unguarded or open ones (exit 2).
fn admissible_formula(text: &str) -> Result<Formula, u8> {
    let f = parse(text.trim()).map_err(|e| {
        eprintln!("error: {e}");
        2u8
    })?;
    check_guarded(&f).map_err(|e| {
        eprintln!("error: {e}");
        2u8
    })?;
    if !f.free_vars().is_disjoint(&f.bound_vars()) {
        eprintln!("error: formula has a free occurrence of a bound variable");
        return Err(2);
    }
    Ok(f)
}

fn cmd_parse(file: &Path) -> u8 {
    let text = match read_file(file) {
        Ok(t) => t,
        Err(c) => return c,
    };
    match admissible_formula(&text) {
        Ok(f) => {
            println!("ok");
            println!("{f}");
            0
        }
        Err(c) => c,
    }
}

fn cmd_mc(model_path: &Path, formula: &str, world: &str, certificate: bool) -> u8 {
    let model_text = match read_file(model_path) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let model = match Model::parse(&model_text) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let f = match admissible_formula(formula) {
        Ok(f) => f,
        Err(c) => return c,
    };
    let w = match model
        .world_id(world)
        .or_else(|| world.parse::<usize>().ok().filter(|&k| k < model.worlds.len()))
    {
        Some(w) => w,
        None => {
            eprintln!("error: unknown world {world}");
            return 2;
        }
    };
    let holds = match model_check(&model, w, &f) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    println!("{}", if holds { "true" } else { "false" });
    if certificate {
        // The variable order exists for every admissible formula.
        let order = dependency_order(&f).expect("admissible formula has an order");
        let eg = build_eval_game(&model, &f, &order).expect("game built after model_check");
        let cert = solve(&eg.game);
        for (w, row) in eg.pos.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let winner = match cert.winner[v] {
                    Player::Even => "even",
                    Player::Odd => "odd",
                };
                let strat = match cert.strategy[v] {
                    Some(t) => t.to_string(),
                    None => "-".to_string(),
                };
                println!(
                    "pos {v} world {} winner {winner} strategy {strat} formula {}",
                    model.worlds[w],
                    eg.closure.get(c)
                );
            }
        }
    }
    if holds {
        0
    } else {
        1
    }
}

fn cmd_prove(file: &Path, budget: &Budget, _threads: usize, out: Option<&Path>) -> u8 {
    let text = match read_file(file) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let f = match admissible_formula(&text) {
        Ok(f) => f,
        Err(c) => return c,
    };
    match prove(&f, budget) {
        SearchOutcome::Proved(p) => {
            println!("proved");
            emit("proof", &serialize(&p), out)
        }
        SearchOutcome::Refuted(m, w) => {
            println!("refuted");
            println!("{}", m.worlds[w]);
            let code = emit("model", &m.to_text(), out);
            if code == 0 {
                1
            } else {
                code
            }
        }
        SearchOutcome::Exhausted(report) => {
            println!("exhausted");
            eprintln!(
                "budget exhausted after {} steps ({} memoized sequents): {}",
                report.steps, report.memo_size, report.note
            );
            4
        }
    }
}

/// Write an artifact to `out` or print it to stdout.  Returns 0, or 3 when
/// the output file cannot be written.
fn emit(kind: &str, artifact: &str, out: Option<&Path>) -> u8 {
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, artifact) {
                eprintln!("error: cannot write {kind} to {}: {e}", path.display());
                return 3;
            }
            0
        }
        None => {
            print!("{artifact}");
            0
        }
    }
}

fn cmd_check(file: &Path) -> u8 {
    let text = match read_file(file) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let proof = match deserialize(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let ctx = match OriginalityContext::new(proof.root_member.clone()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match check_proof(&proof, &ctx) {
        Verdict::Accepted => {
            println!("accepted");
            0
        }
        Verdict::Rejected { node, reason } => {
            println!("rejected");
            println!("node {node}: {reason}");
            1
        }
    }
}

fn cmd_unfold(file: &Path, depth: usize) -> u8 {
    let text = match read_file(file) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let proof = match deserialize(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    println!("ok");
    print!("{}", unfold_proof(&proof, depth).render());
    0
}
