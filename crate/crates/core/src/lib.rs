pub mod gf;
pub mod linalg;
pub mod shapes;
pub mod perm;
pub mod construct;
pub mod tables;
pub mod verify;
pub mod cli;
