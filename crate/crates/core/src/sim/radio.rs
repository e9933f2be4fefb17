//! Unit-disk radio medium.

use rand::Rng;

use super::scenario::Position;

/// In range iff the distance is at most `tx_range`; in-range deliveries then
/// succeed with probability `1 - link_loss`. No draw is made out of range or
/// when `link_loss` is zero.
pub fn deliver<R: Rng + ?Sized>(
    from: &Position,
    to: &Position,
    tx_range: f64,
    link_loss: f64,
    rng: &mut R,
) -> bool {
    if from.distance(to) > tx_range {
        return false;
    }
    link_loss <= 0.0 || rng.gen::<f64>() >= link_loss
}

pub fn in_range(a: &Position, b: &Position, tx_range: f64) -> bool {
    a.distance(b) <= tx_range
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64) -> Position {
        Position { x, y: 0.0 }
    }

    #[test]
    fn range_cutoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(deliver(&p(0.0), &p(49.0), 50.0, 0.0, &mut rng));
        assert!(deliver(&p(0.0), &p(50.0), 50.0, 0.0, &mut rng));
        assert!(!deliver(&p(0.0), &p(51.0), 50.0, 0.0, &mut rng));
    }

    #[test]
    fn loss_rate_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let ok = (0..10_000)
            .filter(|_| deliver(&p(0.0), &p(30.0), 50.0, 0.5, &mut rng))
            .count();
        assert!((4_500..=5_500).contains(&ok), "{ok}");
    }
}
