use clap::Parser;

fn main() {
    let args = mscbf::cli::Args::parse();
    std::process::exit(mscbf::cli::main_with(&args));
}
