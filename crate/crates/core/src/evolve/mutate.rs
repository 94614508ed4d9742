use rand::seq::index;
use rand::Rng;

use crate::cgp::Genome;

/// Point mutation: `m ~ U{1..h}` distinct gene positions, each redrawn
/// uniformly from its legal interval. Returns the offspring and the touched
/// positions.
pub(crate) fn mutate_tracked<R: Rng + ?Sized>(parent: &Genome, h: usize, rng: &mut R) -> (Genome, Vec<usize>) {
    let mut child = parent.clone();
    let size = child.genes().len();
    let m = rng.gen_range(1..=h.clamp(1, size));
    let positions = index::sample(rng, size, m).into_vec();
    let params = child.shared_params().clone();
    let genes = child.genes_mut();
    for &g in &positions {
        let limit = params.gene_limit(g) as u32;
        if limit > 1 {
            let v = rng.gen_range(0..limit - 1);
            genes[g] = if v >= genes[g] { v + 1 } else { v };
        }
    }
    (child, positions)
}

/// Offspring of `parent` with up to `h` genes redrawn. The result is always
/// a valid genome when the parent is.
pub fn mutate<R: Rng + ?Sized>(parent: &Genome, h: usize, rng: &mut R) -> Genome {
    mutate_tracked(parent, h, rng).0
}
