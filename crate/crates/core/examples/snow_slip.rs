//! A driven retracted sphere slips on low friction and rolls on high friction.

use nalgebra::Vector3;
use urchin_sim::dynamics::{BodyParams, Environment, RobotState, TERRAIN_PRESETS};
use urchin_sim::gait::GaitConfig;
use urchin_sim::sim::Simulation;

fn main() -> urchin_sim::Result<()> {
    println!("{:>10}  {:>5}  {:>10}", "preset", "mu", "travel m");
    for (name, _) in TERRAIN_PRESETS {
        let env = Environment::preset(name)?;
        let mu = env.friction_mu;
        let body = BodyParams::default();
        let mut sim = Simulation::new(RobotState::on_ground(&body), body, env, GaitConfig::default(), 1e-3)?;
        sim.state_mut().shell_spin = Some(Vector3::new(0.0, 50.0, 0.0));
        sim.run_for(2.0)?;
        println!("{name:>10}  {mu:5.2}  {:10.3}", sim.state().pose.position.xy().norm());
    }
    Ok(())
}
