fn main() {
    std::process::exit(ddm_lag::cli::main());
}
