#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bergman;
pub mod boundary;
pub mod harness;
pub mod kernels;
pub mod quadrature;
pub mod regularity;
pub mod spectral;
pub mod volterra;
