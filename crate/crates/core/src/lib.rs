//! Classification, skeletons, extended normal forms and numerical
//! conjugacies for elementary bifurcations of one-dimensional maps.

pub mod expr;
pub mod jet;
pub mod classify;
pub mod skeleton;
pub mod normalform;
pub mod roots;
pub mod conjugacy;
pub mod oracle;
pub mod kinds;
pub mod pipeline;
