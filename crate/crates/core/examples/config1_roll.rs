//! Propel-compress locomotion toward a diagonal heading.

use nalgebra::Vector2;
use urchin_sim::command::{Command, GaitMode};
use urchin_sim::dynamics::{BodyParams, Environment, RobotState};
use urchin_sim::gait::{GaitConfig, GaitEvent};
use urchin_sim::sim::Simulation;

fn main() -> urchin_sim::Result<()> {
    let heading = Vector2::new(1.0, 1.0);
    let body = BodyParams::default();
    let mut sim = Simulation::new(RobotState::on_ground(&body), body, Environment::flat(0.5), GaitConfig::default(), 1e-3)?;
    sim.enqueue(Command::Level);
    sim.run_for(2.0)?;
    sim.enqueue(Command::move_toward(heading, GaitMode::PropelCompress)?);
    for _ in 0..16 {
        sim.run_for(0.5)?;
        let s = sim.snapshot()?;
        println!("t={:5.2}  x={:+.3}  y={:+.3}  {}", s.time_s, s.position.x, s.position.y, s.phase.as_str());
    }
    for event in sim.drain_events() {
        if let GaitEvent::CycleCompleted { time_s, start, end } = event {
            let d = (end - start).xy();
            println!("cycle done at {time_s:.2} s: {:.1} mm, {:.1} deg off heading", d.norm() * 1e3, d.angle(&heading).to_degrees());
        }
    }
    Ok(())
}
