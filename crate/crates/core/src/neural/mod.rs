//! Dense networks with reverse-mode gradients, Adam, and target networks.

mod adam;
mod checkpoint;
mod matrix;
mod mlp;

pub use adam::{AdamState, LrSchedule, BETA1, BETA2, EPSILON};
pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use matrix::Matrix;
pub use mlp::{Activation, MlpSpec, Mode, ParamSet, Tape};

use crate::{Error, Result};

/// Polyak averaging: `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut ParamSet, online: &ParamSet, tau: f64) -> Result<()> {
    if !target.same_shape(online) {
        return Err(Error::InvalidArgument("soft update shape mismatch".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1], got {tau}")));
    }
    if tau == 1.0 {
        target.as_mut_slice().copy_from_slice(online.as_slice());
        return Ok(());
    }
    for (t, &o) in target.as_mut_slice().iter_mut().zip(online.as_slice()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}
