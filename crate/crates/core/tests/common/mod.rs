#![allow(dead_code)]

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wormscan::addrspace::{materialize_hosts, synth_zipf};
use wormscan::{Address, HostSet, PrefixLevel};

/// Host-set generator families.
#[derive(Debug, Clone, Copy)]
pub enum Family {
    Scattered,
    Clustered,
    Zipf,
    Contiguous,
}

pub const FAMILIES: [Family; 4] = [
    Family::Scattered,
    Family::Clustered,
    Family::Zipf,
    Family::Contiguous,
];

pub fn host_set(family: Family, n: usize, seed: u64) -> HostSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match family {
        Family::Scattered => (0..n).map(|_| Address(rng.random())).collect(),
        Family::Clustered => {
            let k = rng.random_range(1..=64u32);
            let width = rng.random_range(8..=24u32);
            let prefixes: Vec<u32> = (0..k)
                .map(|_| rng.random::<u32>() >> width << width)
                .collect();
            (0..n)
                .map(|_| {
                    let p = prefixes[rng.random_range(0..prefixes.len())];
                    Address(p | (rng.random::<u32>() & ((1u32 << width) - 1)))
                })
                .collect()
        }
        Family::Zipf => {
            let exponent = rng.random_range(0.3..1.6);
            let d = synth_zipf(PrefixLevel::of(12), exponent, n as u64, rng.random()).unwrap();
            materialize_hosts(&d, rng.random()).unwrap()
        }
        Family::Contiguous => {
            let start = rng.random::<u32>().saturating_sub(n as u32);
            (0..n as u32).map(|i| Address(start + i)).collect()
        }
    }
}

/// Closed under flipping the bit that separates the two `/l` children of
/// every `/(l-1)` group, so every split is even.
pub fn even_split(hosts: &HostSet, l: u8) -> HostSet {
    let bit = 1u32 << (32 - l);
    hosts
        .addresses()
        .iter()
        .flat_map(|a| [*a, Address(a.0 ^ bit)])
        .collect()
}

/// Every `/(l-1)` group keeps only its lower `/l` child.
pub fn one_child(hosts: &HostSet, l: u8) -> HostSet {
    let bit = 1u32 << (32 - l);
    hosts
        .addresses()
        .iter()
        .map(|a| Address(a.0 & !bit))
        .collect()
}

/// Distinct addresses drawn without replacement from one `/l` block.
pub fn block_sample(base: u32, l: u8, n: usize, rng: &mut ChaCha8Rng) -> Vec<Address> {
    index::sample(rng, 1usize << (32 - l), n)
        .iter()
        .map(|off| Address(base + off as u32))
        .collect()
}
