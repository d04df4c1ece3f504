//! Reductions of rational points on split tori and elliptic curves modulo
//! primes: ℓ-adic valuations of orders, a decision procedure for when those
//! valuations can stay bounded, empirical densities over prime scans, and
//! exact Kummer densities.

pub mod arith;
pub mod groups;
pub mod kummer;
pub mod lab;
pub mod structure;
