//! Foldable telescopic actuator.
//!
//! Each spine is driven by a pinion meshing with an articulated rack. Links
//! leaving the housing (pinion clockwise) pass the holder guides, which swing
//! `ARM_L` into the link slot and lock the link rigid. Links drawn back in
//! (pinion counterclockwise) have `ARM_U` rotated by the guides, which lifts
//! `ARM_L` out of the slot and leaves the link free to fold.
//!
//! The continuous extension is the state of record. The discrete chain is
//! stepped after every update so that `rigid_count == floor(extension / pitch)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stroke of the three moving levels above the base, mm.
pub const STROKE_MM: f64 = 64.0;
/// Actuator length when fully extended, mm.
pub const EXTENDED_LEN_MM: f64 = 89.0;
/// Actuator length when contracted (the base level), mm.
pub const BASE_HEIGHT_MM: f64 = 25.0;
/// Base level plus three moving levels.
pub const LEVEL_COUNT: usize = 4;
/// Linear speed of the articulated rack drive, mm/s.
pub const MAX_RATE_MM_S: f64 = 100.0;
/// Axes in which a rigid rack resists load.
pub const LOCKED_AXES: usize = 3;

pub const DEFAULT_LINK_COUNT: usize = 8;
pub const DEFAULT_PITCH_MM: f64 = 8.0;
/// Gear teeth per rack link. Metadata only; teeth are not simulated.
pub const TEETH_PER_LINK: usize = 2;

const EPS_MM: f64 = 1e-9;

/// Envelope extension ratio, extended over contracted length.
pub fn extension_ratio() -> f64 {
    EXTENDED_LEN_MM / BASE_HEIGHT_MM
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkState {
    /// Unlocked: `ARM_L` out of the slot, hinge free.
    Folded,
    /// Locked in all axes: `ARM_L` seated in the slot.
    Rigid,
}

/// Articulated rack. Rigid links always form a prefix of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RackChain {
    links: Vec<LinkState>,
    pitch_mm: f64,
    rigid_count: usize,
}

impl RackChain {
    /// A fully folded chain. `link_count × pitch_mm` must not exceed the stroke.
    pub fn new(link_count: usize, pitch_mm: f64) -> Result<Self> {
        if link_count == 0 || !(pitch_mm > 0.0) {
            return Err(Error::Domain("rack chain needs at least one link of positive pitch".into()));
        }
        if link_count as f64 * pitch_mm > STROKE_MM + EPS_MM {
            return Err(Error::Domain(format!(
                "{link_count} links × {pitch_mm} mm exceeds the {STROKE_MM} mm stroke"
            )));
        }
        Ok(Self { links: vec![LinkState::Folded; link_count], pitch_mm, rigid_count: 0 })
    }

    pub fn links(&self) -> &[LinkState] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn pitch_mm(&self) -> f64 {
        self.pitch_mm
    }

    pub fn rigid_count(&self) -> usize {
        self.rigid_count
    }

    /// One link passes the lock guide.
    pub fn advance(&mut self) -> Result<()> {
        if self.rigid_count == self.links.len() {
            return Err(Error::Saturation(format!(
                "rack fully rigid at {} mm",
                self.extension_mm()
            )));
        }
        self.links[self.rigid_count] = LinkState::Rigid;
        self.rigid_count += 1;
        Ok(())
    }

    /// One link passes the unlock guide.
    pub fn retract(&mut self) -> Result<()> {
        if self.rigid_count == 0 {
            return Err(Error::Saturation("rack fully folded".into()));
        }
        self.rigid_count -= 1;
        self.links[self.rigid_count] = LinkState::Folded;
        Ok(())
    }

    pub fn extension_mm(&self) -> f64 {
        self.rigid_count as f64 * self.pitch_mm
    }

    /// Folded-link stack height, checked against the base as a length budget.
    pub fn folded_stack_fits_base(&self) -> bool {
        // Folded links stack side by side; each is one pitch long when stood on end.
        self.pitch_mm <= BASE_HEIGHT_MM
    }

    /// Step the chain until its rigid count matches `floor(extension / pitch)`.
    fn sync_to(&mut self, extension_mm: f64) {
        let want = ((extension_mm + EPS_MM) / self.pitch_mm).floor() as usize;
        let want = want.min(self.links.len());
        while self.rigid_count < want {
            self.advance().expect("bounded by link count");
        }
        while self.rigid_count > want {
            self.retract().expect("bounded below by zero");
        }
    }
}

impl Default for RackChain {
    fn default() -> Self {
        Self::new(DEFAULT_LINK_COUNT, DEFAULT_PITCH_MM).expect("default chain fits the stroke")
    }
}

/// The full lock-then-unlock cycle of a chain of `links` links spanning the
/// stroke, one row per link passing a guide.
pub fn rack_sequence_table(links: usize) -> Result<String> {
    if links == 0 {
        return Err(Error::Domain("rack demo needs at least one link".into()));
    }
    let mut chain = RackChain::new(links, STROKE_MM / links as f64)?;
    let mut out = String::from("step  action   guide  rigid  extension_mm  links\n");
    let mut row = |step: usize, action: &str, guide: &str, chain: &RackChain| {
        let pattern: String = chain.links().iter().map(|l| if *l == LinkState::Rigid { 'R' } else { 'f' }).collect();
        out.push_str(&format!(
            "{step:>4}  {action:<7}  {guide:<5}  {:>5}  {:>12.3}  {pattern}\n",
            chain.rigid_count(),
            chain.extension_mm()
        ));
    };
    row(0, "start", "-", &chain);
    let mut step = 1;
    while chain.advance().is_ok() {
        row(step, "extend", "ARM_L", &chain);
        step += 1;
    }
    while chain.retract().is_ok() {
        row(step, "retract", "ARM_U", &chain);
        step += 1;
    }
    Ok(out)
}

/// Three moving levels share the extension equally.
pub fn level_lengths(extension_mm: f64) -> [f64; LEVEL_COUNT - 1] {
    let each = extension_mm / (LEVEL_COUNT - 1) as f64;
    [each; LEVEL_COUNT - 1]
}

/// One spine: rate-limited continuous extension plus its rack chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TelescopicActuator {
    chain: RackChain,
    extension_mm: f64,
    target_mm: f64,
    max_rate_mm_s: f64,
}

impl TelescopicActuator {
    pub fn new(chain: RackChain, max_rate_mm_s: f64) -> Result<Self> {
        if !(max_rate_mm_s > 0.0) {
            return Err(Error::Domain("actuator rate must be positive".into()));
        }
        Ok(Self { chain, extension_mm: 0.0, target_mm: 0.0, max_rate_mm_s })
    }

    /// An actuator already at `extension_mm`, holding it.
    pub fn at(extension_mm: f64) -> Result<Self> {
        check_range(extension_mm)?;
        let mut act = Self { extension_mm, target_mm: extension_mm, ..Self::default() };
        act.chain.sync_to(extension_mm);
        Ok(act)
    }

    pub fn chain(&self) -> &RackChain {
        &self.chain
    }

    pub fn extension_mm(&self) -> f64 {
        self.extension_mm
    }

    pub fn target_mm(&self) -> f64 {
        self.target_mm
    }

    pub fn max_rate_mm_s(&self) -> f64 {
        self.max_rate_mm_s
    }

    pub fn set_target(&mut self, target_mm: f64) -> Result<()> {
        check_range(target_mm)?;
        self.target_mm = target_mm;
        Ok(())
    }

    /// Advance toward the target by at most `max_rate × dt`, landing exactly on it.
    pub fn update(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        check_range(self.target_mm)?;
        let max_step = self.max_rate_mm_s * dt;
        let delta = self.target_mm - self.extension_mm;
        self.extension_mm = if delta.abs() <= max_step {
            self.target_mm
        } else {
            self.extension_mm + max_step.copysign(delta)
        };
        self.chain.sync_to(self.extension_mm);
        Ok(())
    }

    pub fn at_target(&self) -> bool {
        self.extension_mm == self.target_mm
    }
}

impl Default for TelescopicActuator {
    fn default() -> Self {
        Self::new(RackChain::default(), MAX_RATE_MM_S).expect("default rate is positive")
    }
}

fn check_range(mm: f64) -> Result<()> {
    if !(0.0..=STROKE_MM).contains(&mm) {
        return Err(Error::Domain(format!("extension {mm} mm outside [0, {STROKE_MM}]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn chain_with(rigid: usize) -> RackChain {
        let mut c = RackChain::default();
        for _ in 0..rigid {
            c.advance().unwrap();
        }
        c
    }

    #[test]
    fn envelope_constants() {
        assert_abs_diff_eq!(extension_ratio(), 3.56, epsilon = 1e-12);
        assert_eq!(EXTENDED_LEN_MM - BASE_HEIGHT_MM, STROKE_MM);
        assert_eq!(DEFAULT_LINK_COUNT as f64 * DEFAULT_PITCH_MM, STROKE_MM);
        assert!(RackChain::default().folded_stack_fits_base());
    }

    #[test]
    fn advance_cases() {
        let mut c = chain_with(0);
        c.advance().unwrap();
        assert_eq!(c.rigid_count(), 1);

        let mut c = chain_with(7);
        c.advance().unwrap();
        assert_eq!(c.rigid_count(), 8);
        assert_eq!(c.extension_mm(), 64.0);

        let mut c = chain_with(8);
        assert!(matches!(c.advance(), Err(Error::Saturation(_))));
        assert_eq!(c, chain_with(8));
    }

    #[test]
    fn retract_cases() {
        let mut c = chain_with(1);
        c.retract().unwrap();
        assert_eq!(c, RackChain::default());
        assert!(c.links().iter().all(|&l| l == LinkState::Folded));

        let mut c = chain_with(8);
        c.retract().unwrap();
        assert_eq!(c.rigid_count(), 7);
        assert_eq!(c.extension_mm(), 56.0);

        let mut c = chain_with(0);
        assert!(matches!(c.retract(), Err(Error::Saturation(_))));
    }

    #[test]
    fn extension_of_chain() {
        assert_eq!(chain_with(0).extension_mm(), 0.0);
        assert_eq!(chain_with(8).extension_mm(), 64.0);
        assert_eq!(chain_with(3).extension_mm(), 24.0);
    }

    #[test]
    fn chain_rejects_overlong() {
        assert!(RackChain::new(9, 8.0).is_err());
        assert!(RackChain::new(0, 8.0).is_err());
    }

    #[test]
    fn rate_limited_update() {
        let mut a = TelescopicActuator::default();
        a.set_target(64.0).unwrap();
        a.update(0.3).unwrap();
        assert_abs_diff_eq!(a.extension_mm(), 30.0, epsilon = 1e-12);
        assert_eq!(a.chain().rigid_count(), 3);

        let mut a = TelescopicActuator::default();
        a.set_target(64.0).unwrap();
        a.update(0.64).unwrap();
        assert_eq!(a.extension_mm(), 64.0);
        assert_eq!(a.chain().rigid_count(), 8);

        let mut a = TelescopicActuator::at(50.0).unwrap();
        for dt in [1e-4, 0.01, 1.0] {
            a.update(dt).unwrap();
            assert_eq!(a.extension_mm(), 50.0);
        }
    }

    #[test]
    fn full_stroke_in_fixed_steps() {
        let mut a = TelescopicActuator::default();
        a.set_target(64.0).unwrap();
        let mut steps = 0;
        while !a.at_target() {
            a.update(1e-3).unwrap();
            steps += 1;
        }
        assert!((640..=641).contains(&steps), "took {steps} steps");
    }

    #[test]
    fn update_rejects_bad_input() {
        let mut a = TelescopicActuator::default();
        assert!(a.update(0.0).is_err());
        assert!(a.set_target(64.5).is_err());
        assert!(a.set_target(-1.0).is_err());
        assert!(TelescopicActuator::at(70.0).is_err());
    }

    #[test]
    fn level_split() {
        assert_eq!(level_lengths(0.0), [0.0; 3]);
        let l = level_lengths(64.0);
        for x in l {
            assert_abs_diff_eq!(x, 21.333_333, epsilon = 1e-5);
            assert!(x <= 64.0 / 3.0 + 1e-12);
        }
        assert_abs_diff_eq!(l.iter().sum::<f64>(), 64.0, epsilon = 1e-12);
        for x in level_lengths(30.0) {
            assert_abs_diff_eq!(x, 10.0, epsilon = 1e-12);
        }
    }

    fn is_prefix(c: &RackChain) -> bool {
        let n = c.rigid_count();
        c.links()[..n].iter().all(|&l| l == LinkState::Rigid)
            && c.links()[n..].iter().all(|&l| l == LinkState::Folded)
    }

    proptest! {
        #[test]
        fn chain_stays_prefix(ops in proptest::collection::vec(any::<bool>(), 0..100)) {
            let mut c = RackChain::default();
            for advance in ops {
                let _ = if advance { c.advance() } else { c.retract() };
                prop_assert!(is_prefix(&c));
                prop_assert_eq!(c.extension_mm(), c.rigid_count() as f64 * 8.0);
            }
        }

        #[test]
        fn actuator_tracks_chain(targets in proptest::collection::vec((0.0..=64.0f64, 1e-4..0.05f64), 1..60)) {
            let mut a = TelescopicActuator::default();
            for (target, dt) in targets {
                a.set_target(target).unwrap();
                let before = a.extension_mm();
                a.update(dt).unwrap();
                let moved = a.extension_mm() - before;
                prop_assert!(moved.abs() <= MAX_RATE_MM_S * dt + 1e-9);
                // Monotone toward the target, no overshoot.
                prop_assert!((target - a.extension_mm()).abs() <= (target - before).abs() + 1e-12);
                prop_assert!(moved == 0.0 || moved.signum() == (target - before).signum());
                let rigid = a.chain().rigid_count() as f64 * a.chain().pitch_mm();
                prop_assert!((a.extension_mm() - rigid).abs() < a.chain().pitch_mm());
                prop_assert!(is_prefix(a.chain()));
            }
        }
    }
}
