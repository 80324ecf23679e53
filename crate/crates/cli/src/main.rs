use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr();
    match latcorr_cli::run(std::env::args_os(), &mut stdout, &mut stderr) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("latcorr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
