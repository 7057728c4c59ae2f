fn main() {
    if let Err(e) = gsat_cli::run() {
        eprintln!("error: {}", e.msg);
        std::process::exit(e.code);
    }
}
