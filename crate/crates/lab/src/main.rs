use clap::Parser;

fn main() -> anyhow::Result<()> {
    emstable_lab::run(&emstable_lab::Cli::parse())
}
