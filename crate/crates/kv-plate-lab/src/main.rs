use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    ExitCode::from(kv_plate_lab::cli::run(&args) as u8)
}
