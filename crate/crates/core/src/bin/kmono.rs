use clap::error::ErrorKind;
use clap::Parser;
use kmono::cli::{run, Cli, EXIT_INPUT, EXIT_OK};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KMONO_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}
