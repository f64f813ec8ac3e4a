fn main() { std::process::exit(qdslab_cli::run_command(&std::env::args().collect::<Vec<_>>())) }
