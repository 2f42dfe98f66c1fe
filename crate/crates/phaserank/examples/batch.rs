//! Batch mode over a directory, as printed by `phaserank batch`.
//!
//! cargo run --example batch -- [dir] [jobs]

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/corpus").to_string());
    let jobs = args.next().unwrap_or_else(|| "2".into());
    let (out, err, code) = phaserank::cli::run(["phaserank", "batch", &dir, "--jobs", &jobs]);
    print!("{out}");
    eprint!("{err}");
    std::process::exit(code);
}
