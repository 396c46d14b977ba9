pub mod encoding;
pub mod indicators;
pub mod lut;
pub mod moea;
pub mod problems;
pub mod surrogate;
