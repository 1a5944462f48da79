//! Runs the seeded synthetic benchmark. Pass `online` to score transactions on arrival.
use kda::simgen::{run_benchmark, BenchmarkDescriptor, Mode};

fn main() -> kda::Result<()> {
    let mode = match std::env::args().nth(1).as_deref() {
        Some(m) => m.parse()?,
        None => Mode::Offline,
    };
    let descriptor = BenchmarkDescriptor { mode, ..Default::default() };
    println!("{}", run_benchmark(&descriptor)?.render());
    Ok(())
}
