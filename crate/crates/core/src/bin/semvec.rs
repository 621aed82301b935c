//! `semvec` command-line entry point.

fn main() {
    std::process::exit(semvec::cli::main_with(std::env::args_os()));
}
