#![allow(dead_code)]

pub mod polar;
pub mod projection;
pub mod sampler;
