use std::process::ExitCode;

fn main() -> ExitCode {
    cocp::cli::main()
}
