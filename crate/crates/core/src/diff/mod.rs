//! Dense reverse-mode differentiation, gradient reversal and Adam.

mod adam;
mod gradcheck;
mod tape;

pub use adam::AdamState;
pub use gradcheck::{
    check_gradients, relative_error, GradCheckEntry, GradCheckReport, REL_ERROR_FLOOR,
};
pub use tape::{Gradients, Matrix, SegmentIndex, Tape, Var, LOG_CLAMP};
