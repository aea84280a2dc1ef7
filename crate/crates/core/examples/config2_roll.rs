//! Neighbor-push locomotion from the fully retracted sphere.

use nalgebra::Vector2;
use urchin_sim::command::{Command, GaitMode};
use urchin_sim::dynamics::{BodyParams, Environment, RobotState};
use urchin_sim::gait::{config2_pair, GaitConfig};
use urchin_sim::sim::Simulation;

fn main() -> urchin_sim::Result<()> {
    let heading = Vector2::new(1.0, 0.0);
    let body = BodyParams::default();
    let mut sim = Simulation::new(RobotState::on_ground(&body), body, Environment::flat(0.5), GaitConfig::default(), 1e-3)?;
    println!("pushing pair: {:?}", config2_pair(&sim.state().pose, &heading));
    sim.enqueue(Command::move_toward(heading, GaitMode::NeighborPush)?);
    for _ in 0..16 {
        sim.run_for(0.5)?;
        let s = sim.snapshot()?;
        let extended: Vec<usize> = (0..14).filter(|&i| s.extensions_mm[i] > 1.0).collect();
        println!("t={:5.2}  x={:+.3}  v={:.3}  {:8}  extended {extended:?}", s.time_s, s.position.x, s.velocity.norm(), s.phase.as_str());
    }
    Ok(())
}
