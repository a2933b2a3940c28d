use std::process::ExitCode;

use afshape::cli::{exit_code, parse_config, run_and_export, Args, ExportOptions};
use clap::Parser;

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match parse_config(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };

    if args.dry_run {
        println!(
            "config ok: N = {}, {} region cells, gamma1 = {}, gamma2 = {}, seed = {}",
            config.n(),
            config.region.size(),
            config.gamma1,
            config.gamma2,
            config.seed
        );
        return ExitCode::SUCCESS;
    }

    let opts = ExportOptions {
        verbose: args.verbose,
        timings: args.timings,
    };
    match run_and_export(&config, &args.out, opts) {
        Ok(m) => {
            println!(
                "C {:.6e} -> {:.6e} after {} outer iterations ({:?}); region average down {:.2} dB",
                m.initial_c, m.final_c, m.outer_iterations, m.stop, m.suppression_db
            );
            println!("wrote {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
