//! Fixed-step marching that lands exactly on requested record times.

use crate::error::{Error, Result};

pub trait Stepper {
    type State;

    /// Advance `state`, currently at time `t`, by `dt`.
    fn step(&mut self, state: &Self::State, dt: f64, t: f64) -> Result<Self::State>;
}

/// Counters from a [`march`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MarchStats {
    pub steps: usize,
    pub t_final: f64,
}

/// Steps of at most `dt`, shortened where needed to hit every time in
/// `record_times` (sorted, nonnegative). `observe` sees the state at each one.
pub fn march<S: Stepper>(
    stepper: &mut S,
    initial: S::State,
    dt: f64,
    record_times: &[f64],
    mut observe: impl FnMut(f64, &S::State) -> Result<()>,
) -> Result<MarchStats> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
    }
    if record_times.iter().any(|t| !(*t >= 0.0)) || record_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("record times must be sorted and nonnegative".into()));
    }
    let mut state = initial;
    let mut t = 0.0;
    let mut steps = 0;
    for &target in record_times {
        // Count whole steps from the last record so rounding does not accumulate.
        let span = target - t;
        let full = (span / dt * (1.0 - 1e-12)).floor().max(0.0) as usize;
        let start = t;
        for i in 0..full {
            state = stepper.step(&state, dt, start + i as f64 * dt)?;
            steps += 1;
        }
        let done = start + full as f64 * dt;
        let rest = target - done;
        if rest > 1e-14 * target.max(1.0) {
            state = stepper.step(&state, rest, done)?;
            steps += 1;
        }
        t = target;
        observe(t, &state)?;
    }
    Ok(MarchStats { steps, t_final: t })
}
