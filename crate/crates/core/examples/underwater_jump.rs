//! Sink to the floor of a water tank, then jump off it.

use urchin_sim::command::Command;
use urchin_sim::harness::{builtin, simulation};

fn main() -> urchin_sim::Result<()> {
    let mut sim = simulation(&builtin("underwater-jump")?)?;
    let mut jumped = false;
    let mut airborne_from = None;
    while sim.time() < 4.0 {
        if !jumped && sim.time() >= 1.5 {
            sim.enqueue(Command::Jump);
            jumped = true;
        }
        sim.step()?;
        let s = sim.snapshot()?;
        if jumped && s.contact_count == 0 && airborne_from.is_none() {
            airborne_from = Some(s.time_s);
        }
        if ((s.time_s * 1000.0).round() as u64).is_multiple_of(250) {
            println!("t={:4.2}  z={:.4}  vz={:+.4}  contacts={}  {}", s.time_s, s.position.z, s.velocity.z, s.contact_count, s.phase.as_str());
        }
    }
    if let Some(t) = airborne_from {
        println!("left the floor at {t:.3} s");
    }
    Ok(())
}
