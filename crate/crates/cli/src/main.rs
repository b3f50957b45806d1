use clap::Parser;
use qdc_cli::error::{EXIT_CONFIG, EXIT_OK};
use qdc_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let quiet = cli.quiet;
    match run(cli) {
        Ok(dir) => {
            if !quiet {
                println!("{}", dir.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
