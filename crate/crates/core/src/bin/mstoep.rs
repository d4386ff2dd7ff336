use clap::Parser;
use mstoep::cli::{main_with_args, Args};

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            // Usage errors share exit code 1 with other input errors; 2 means a failed verdict.
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    std::process::exit(main_with_args(args));
}
