#![no_std]
extern crate alloc;

pub mod bundlealg;
pub mod dyncore;
pub mod hyperbolic;
pub mod kummer;
pub mod metric;
pub mod skewprod;
pub mod util;
