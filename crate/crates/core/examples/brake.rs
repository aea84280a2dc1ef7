//! Compare braking with the leading spines against coasting.

use nalgebra::Vector3;
use urchin_sim::command::Command;
use urchin_sim::dynamics::{BodyParams, Environment, RobotState};
use urchin_sim::gait::GaitConfig;
use urchin_sim::sim::Simulation;

fn rolling() -> urchin_sim::Result<Simulation> {
    let body = BodyParams::default();
    let radius = body.shell.radius_m();
    let mut sim = Simulation::new(RobotState::on_ground(&body), body, Environment::flat(0.5), GaitConfig::default(), 1e-3)?;
    let state = sim.state_mut();
    state.linear_velocity = Vector3::new(0.3, 0.0, 0.0);
    state.angular_velocity = state.pose.orientation.inverse() * Vector3::new(0.0, 0.3 / radius, 0.0);
    Ok(sim)
}

fn main() -> urchin_sim::Result<()> {
    let mut braked = rolling()?;
    let mut coasting = rolling()?;
    braked.enqueue(Command::Stop);
    println!("   t   brake m/s  coast m/s");
    for _ in 0..12 {
        braked.run_for(0.25)?;
        coasting.run_for(0.25)?;
        println!(
            "{:5.2}   {:8.4}  {:8.4}",
            braked.time(),
            braked.state().horizontal_speed(),
            coasting.state().horizontal_speed()
        );
    }
    Ok(())
}
