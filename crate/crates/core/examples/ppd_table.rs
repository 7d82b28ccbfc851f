//! Primitive prime divisors of `a^k - 1` for small primes `a`.
//!
//! `ppd(2, 6)` is `{7}` by convention: `3` divides `2^6 - 1` but also `2^2 - 1`,
//! and the convention drops nothing else.
use factorlab::shapes::ppd;

fn main() {
    for a in [2u64, 3, 5, 7] {
        for k in 2..=12u32 {
            let ps: Vec<String> = ppd(a, k).iter().map(|p| p.to_string()).collect();
            println!("ppd({a},{k:>2}) = {{{}}}", ps.join(","));
        }
    }
}
