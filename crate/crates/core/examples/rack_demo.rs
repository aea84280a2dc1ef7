//! Walk an articulated rack through a full extend and retract cycle.
//!
//! `cargo run --example rack_demo -- 4` uses a 4-link chain.

fn main() -> urchin_sim::Result<()> {
    let links = std::env::args().nth(1).map(|s| s.parse().expect("link count")).unwrap_or(8);
    print!("{}", urchin_sim::actuator::rack_sequence_table(links)?);
    println!(
        "envelope: {} mm retracted, {} mm extended, ratio {:.2}",
        urchin_sim::actuator::BASE_HEIGHT_MM,
        urchin_sim::actuator::EXTENDED_LEN_MM,
        urchin_sim::actuator::extension_ratio()
    );
    Ok(())
}
