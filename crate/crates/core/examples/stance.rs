//! Level into the four-spine stance on flat ground and report its geometry.

use urchin_sim::command::Command;
use urchin_sim::dynamics::{BodyParams, Environment, RobotState};
use urchin_sim::gait::{GaitConfig, GaitEvent};
use urchin_sim::sim::Simulation;

fn main() -> urchin_sim::Result<()> {
    let body = BodyParams::default();
    let mut sim = Simulation::new(RobotState::on_ground(&body), body, Environment::flat(0.5), GaitConfig::default(), 1e-3)?;
    sim.enqueue(Command::Level);
    sim.run_for(5.0)?;
    for event in sim.drain_events() {
        if let GaitEvent::Leveled { time_s, extensions_mm } = event {
            println!("leveled at {time_s:.2} s: {extensions_mm:?}");
        }
    }
    let snap = sim.snapshot()?;
    let clearance = sim.state().tip(sim.body(), 5).z;
    println!("center height     {:.2} mm", snap.position.z * 1e3);
    println!("down-spine gap    {:.2} mm", clearance * 1e3);
    println!("stability margin  {:.2} mm", snap.stability_margin_m * 1e3);
    println!("contacts          {:?}", (0..14).filter(|&i| snap.spine_contact[i]).collect::<Vec<_>>());
    Ok(())
}
