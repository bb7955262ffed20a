//! Runs the command-line front end in-process on the bundled bound-chain
//! configuration, writing into a temporary directory.

fn main() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/bound_chain.toml");
    let out = std::env::temp_dir().join("leakyguide-cli-run");
    let code = leakyguide::cli::main_with_args([
        "leakyguide",
        "run",
        config,
        "--out",
        out.to_str().unwrap(),
        "--tasks",
        "modes,bounds",
    ]);
    println!("exit status {code}; results in {}", out.display());
    std::process::exit(code);
}
