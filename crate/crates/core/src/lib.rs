pub mod channel;
pub mod error;
pub mod fp;
pub mod linalg;
pub mod mm;
pub mod objective;
pub mod testkit;
pub mod solver;
pub mod scenario;
pub mod dbp;
pub mod verify;
pub mod experiment;
