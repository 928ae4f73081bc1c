//! Relay from the shim to the legacy interface.
//!
//! In a live system this is speech synthesis played into the interface's
//! microphone. Here it is a function from the canonical command to the
//! tokens the interface ends up hearing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub trait Transport: Send {
    fn deliver(&mut self, canonical: &str) -> Vec<String>;
}

/// Delivers every command verbatim.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTransport;

impl Transport for IdentityTransport {
    fn deliver(&mut self, canonical: &str) -> Vec<String> {
        canonical.split_whitespace().map(str::to_string).collect()
    }
}

/// Common re-recognition slips of synthesized speech.
const HOMOPHONES: [(&str, &str); 10] = [
    ("to", "two"),
    ("for", "four"),
    ("right", "write"),
    ("new", "knew"),
    ("their", "there"),
    ("one", "won"),
    ("by", "buy"),
    ("hear", "here"),
    ("week", "weak"),
    ("WITH", "width"),
];

/// Seeded transport that perturbs each token with probability `rate`:
/// a known homophone is swapped in, anything else is dropped.
#[derive(Debug, Clone)]
pub struct FaultTransport {
    rng: ChaCha8Rng,
    rate: f64,
}

impl FaultTransport {
    pub fn new(seed: u64, rate: f64) -> Self {
        FaultTransport {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rate: rate.clamp(0.0, 1.0),
        }
    }
}

impl Transport for FaultTransport {
    fn deliver(&mut self, canonical: &str) -> Vec<String> {
        let mut out = Vec::new();
        for token in canonical.split_whitespace() {
            if !self.rng.random_bool(self.rate) {
                out.push(token.to_string());
                continue;
            }
            if let Some((_, sub)) = HOMOPHONES.iter().find(|(w, _)| *w == token) {
                out.push(sub.to_string());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_verbatim() {
        assert_eq!(
            IdentityTransport.deliver("SELECT apple pie"),
            ["SELECT", "apple", "pie"]
        );
    }

    #[test]
    fn fault_rates_at_the_extremes() {
        assert_eq!(
            FaultTransport::new(1, 0.0).deliver("DELETE apple"),
            ["DELETE", "apple"]
        );
        assert_eq!(
            FaultTransport::new(1, 1.0).deliver("REPLACE to WITH for"),
            ["two", "width", "four"]
        );
    }

    #[test]
    fn fault_is_seeded() {
        let text = "INSERT a b c d e f g BEFORE h";
        let a: Vec<_> = (0..20)
            .map(|_| FaultTransport::new(7, 0.3).deliver(text))
            .collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }
}
