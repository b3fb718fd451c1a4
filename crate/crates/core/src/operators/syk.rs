use super::{sample_random_tensor, HamiltonianSpec, TensorSource};
use crate::error::{domain, Result};

/// Extended complex SYK model with random one-, two- and three-body terms.
///
/// `seeds[s - 1]` drives the order-`s` tensor. Orders that do not fit in
/// `D` orbitals are dropped when their weight is zero.
pub fn build_syk(d: usize, lambda1: f64, lambda2: f64, lambda3: f64, seeds: [u64; 3]) -> Result<HamiltonianSpec> {
    let weights = [lambda1, lambda2, lambda3];
    let mut spec = HamiltonianSpec::new(d).with_model("syk");
    for (k, (&w, &seed)) in weights.iter().zip(&seeds).enumerate() {
        let s = k + 1;
        if s > d {
            if w != 0.0 {
                return domain(format!("order-{s} coupling needs D >= {s}, got D = {d}"));
            }
            continue;
        }
        spec.push_term(w, sample_random_tensor(d, s, seed)?, TensorSource::Seeded(seed))?;
    }
    spec.metadata.seeds = seeds.to_vec();
    Ok(spec)
}
