use clap::Parser;

use hpid::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let out = run(&cli);
    for line in &out.stdout {
        println!("{line}");
    }
    for line in &out.stderr {
        eprintln!("{line}");
    }
    std::process::exit(out.code);
}
