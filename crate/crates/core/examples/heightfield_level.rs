//! Level on uneven ground: a small step is absorbed, a tall one saturates.

use urchin_sim::command::Command;
use urchin_sim::gait::GaitEvent;
use urchin_sim::harness::{simulation, Scenario};

fn main() -> urchin_sim::Result<()> {
    for step_m in [0.01, 0.03, 0.08] {
        let scenario = Scenario::from_json(&format!(
            r#"{{"name": "step", "duration_s": 10.0,
                "environment": {{"preset": "rock",
                  "terrain": {{"type": "plateau", "height_m": {step_m}, "min": [0.03, 0.03], "max": [0.3, 0.3]}}}}}}"#
        ))?;
        let mut sim = simulation(&scenario)?;
        sim.enqueue(Command::Level);
        sim.run_until(10.0, |s| {
            s.events().iter().any(|e| matches!(e, GaitEvent::Leveled { .. } | GaitEvent::LevelingFailed { .. }))
        })?;
        for event in sim.drain_events() {
            match event {
                GaitEvent::Leveled { time_s, extensions_mm } => {
                    let ext: Vec<String> = extensions_mm.iter().map(|(id, mm)| format!("{id}:{mm:.1}")).collect();
                    println!("{:2.0} mm step: leveled at {time_s:.2} s [{}]", step_m * 1e3, ext.join(" "));
                }
                GaitEvent::LevelingFailed { error, .. } => println!("{:2.0} mm step: {error}", step_m * 1e3),
                _ => {}
            }
        }
    }
    Ok(())
}
