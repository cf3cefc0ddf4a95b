use clap::Parser;
use winovis::cli::{run, Cli, EXIT_FAILURE, EXIT_OK};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors are hard failures; exit code 2 is reserved for partial results.
    let code = match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    };
    std::process::exit(code);
}
