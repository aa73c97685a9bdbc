#![no_std]
extern crate alloc;
#[cfg(feature = "parallel")]
extern crate std;

pub mod counting;
pub mod cover;
pub mod fuchsian;
pub mod hyperbolic;
pub mod mixing;
pub mod numeric;
pub mod symbolic;
