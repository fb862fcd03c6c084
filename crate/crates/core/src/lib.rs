pub mod error;
pub mod fock;
pub mod numerics;
pub mod amplifier;
pub mod weak;
pub mod kerr;
pub mod cloning;
