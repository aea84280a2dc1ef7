//! Scenario execution.

use crate::command::Directive;
use crate::dynamics::{Environment, ImuModel};
use crate::error::{Error, Result};
use crate::harness::log::{Failure, TrajectoryLog, TrajectoryRow};
use crate::harness::scenario::Scenario;
use crate::sim::Simulation;

/// A simulation set up at the scenario's initial state.
pub fn simulation(scenario: &Scenario) -> Result<Simulation> {
    let sim = Simulation::new(
        scenario.initial.clone(),
        scenario.body.clone(),
        scenario.environment.clone(),
        scenario.spec.gait.clone(),
        scenario.spec.dt_s,
    )?;
    Ok(sim.with_imu(ImuModel { noise_std_rad: scenario.spec.imu_noise_rad }, scenario.spec.seed))
}

/// Swap friction and medium for a named preset, keeping the terrain shape.
pub fn apply_preset(sim: &mut Simulation, preset: &str) -> Result<()> {
    let mut env = Environment::preset(preset)?;
    env.terrain = sim.environment().terrain.clone();
    env.contact = sim.environment().contact;
    env.gravity = sim.environment().gravity;
    sim.set_environment(env)
}

/// Run a scenario to its duration, sampling at `log_hz`.
///
/// A divergence ends the run early; the log then holds the rows up to that
/// point and a failure record. Setup errors are returned as `Err`.
pub fn run(scenario: &Scenario) -> Result<TrajectoryLog> {
    let mut sim = simulation(scenario)?;
    let dt = scenario.spec.dt_s;
    let steps = (scenario.spec.duration_s / dt).round() as u64;
    let log_period = 1.0 / scenario.spec.log_hz;
    // Sample times are compared with a tolerance well below one step.
    let eps = dt * 1e-6;
    let mut log = TrajectoryLog::default();
    let mut next_sample = 0u64;
    let mut script = scenario.script.iter().peekable();

    for n in 0..=steps {
        let t = sim.time();
        while let Some((_, directive)) = script.next_if(|(at, _)| *at <= t + eps) {
            match directive {
                Directive::Gait(cmd) => sim.enqueue(cmd.clone()),
                Directive::SetTerrain(preset) => apply_preset(&mut sim, preset)?,
                Directive::Reset(_) => return Err(Error::Precondition("reset inside a scenario script".into())),
            }
        }
        if t + eps >= next_sample as f64 * log_period {
            match sim.snapshot() {
                Ok(snap) => log.rows.push(TrajectoryRow::from_snapshot(&snap)),
                Err(e) => {
                    log.failure = Some(Failure::new(t, &e.to_string()));
                    return Ok(log);
                }
            }
            next_sample += 1;
            while t + eps >= next_sample as f64 * log_period {
                next_sample += 1;
            }
        }
        if n == steps {
            break;
        }
        if let Err(e) = sim.step() {
            let at = match &e {
                Error::Diverged { time_s, .. } => *time_s,
                _ => sim.time(),
            };
            log.failure = Some(Failure::new(at, &e.to_string()));
            return Ok(log);
        }
    }
    Ok(log)
}

/// Run several scenarios on separate threads; results keep the input order.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<TrajectoryLog>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios.iter().map(|s| scope.spawn(move || run(s))).collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    })
}
