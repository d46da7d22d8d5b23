use clap::Parser;

use fairfee::cli::{exit_code, run_command, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let spec = match cli.resolve() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("fairfee: {e}");
            std::process::exit(1);
        }
    };
    match run_command(&spec) {
        Ok(summary) => {
            print!("{}", summary.render());
            println!("results written to {}", spec.output_dir.display());
        }
        Err(e) => {
            eprintln!("fairfee: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
