pub mod archs;
pub mod autodiff;
pub mod channel;
pub mod dataset;
pub mod harness;
pub mod modem;
