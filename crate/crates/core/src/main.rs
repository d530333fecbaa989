use std::io::Write;

use clap::Parser;

use rbsos::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let (report, code) = run(&cli);
    let text = if cli.json {
        report.to_json() + "\n"
    } else {
        report.render_text()
    };
    // A closed pipe is not an error worth reporting.
    let _ = std::io::stdout().write_all(text.as_bytes());
    std::process::exit(code);
}
