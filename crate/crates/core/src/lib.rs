pub mod codegen;
pub mod frontend;
pub mod refinterp;
pub mod region;
pub mod sema;
pub mod sim;
pub mod swdemo;
