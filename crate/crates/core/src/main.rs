use std::process::ExitCode;

fn main() -> ExitCode {
    wavedensity::cli::main()
}
