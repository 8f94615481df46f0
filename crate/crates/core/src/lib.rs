pub mod bench;
pub mod engine;
pub mod interval;
pub mod loops;
pub mod network;
pub mod netgen;
pub mod oracle;
