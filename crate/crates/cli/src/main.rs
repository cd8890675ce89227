use std::process::ExitCode;

use pjipm_cli::experiments::{self, resolve_output_dir};
use pjipm_cli::{effective_config, parse_args, usage};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        print!("{}", usage());
        return ExitCode::from(if args.is_empty() { 2 } else { 0 });
    }
    let parsed = match parse_args(&args) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let cfg = match effective_config(&parsed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = resolve_output_dir(&cfg, parsed.output_dir.clone());

    let result = if parsed.subcommand == "characteristics" {
        experiments::run_characteristics(&cfg, &out_dir)
    } else {
        experiments::run(&cfg, &out_dir)
    };
    match result {
        Ok(report) => {
            for v in &report.verdicts {
                println!(
                    "[{}] {}: {}",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.criterion,
                    v.detail
                );
            }
            println!(
                "status: {}; outputs in {}",
                report.status,
                out_dir.display()
            );
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
