//! Shared test support: finite-difference gradient checking.

#![allow(dead_code)]

pub mod gradcheck;
