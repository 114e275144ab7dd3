use fairrank::pipeline::cli;

fn main() {
    cli::init_logging();
    std::process::exit(cli::run(std::env::args_os()));
}
