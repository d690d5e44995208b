fn main() {
    std::process::exit(har_attn::cli::run());
}
