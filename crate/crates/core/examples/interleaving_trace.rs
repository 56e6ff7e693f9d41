//! Replays the three-node interleaving in which push-pull gossip loses mass.
//!
//! A pushes to B, C pushes to A, and C's push reaches A before B's reply.
//! The original protocol answers C with a value A is about to overwrite; the
//! two fixed variants keep the total.

use aggsim::protocols::Variant;
use aggsim::scenarios::interleaving_trace;

fn main() -> aggsim::Result<()> {
    let (a, b, c) = (4.0, 0.0, 8.0);
    println!("initial A={a} B={b} C={c}, total {}", a + b + c);
    for variant in [Variant::Original, Variant::BackCancel, Variant::OrderedWait] {
        let o = interleaving_trace(variant, a, b, c)?;
        println!(
            "{:<5} A={} B={} C={}  total {}  deviation {:+}",
            variant.name(),
            o.a,
            o.b,
            o.c,
            o.audit.node.s,
            o.audit.deviation.s
        );
    }
    Ok(())
}
