pub mod aharonov_bohm;
pub mod boundary;
pub mod chern_pairing;
pub mod cli;
pub mod point_models;
pub mod schrodinger;
pub mod specialfn;
pub mod winding;
