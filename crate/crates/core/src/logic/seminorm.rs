use crate::dyadic::Dyadic;
use crate::oracle::SearchBounds;
use crate::structures::{all_structures, tuples};

use super::eval::{eval, Assignment};
use super::formula::Formula;
use super::signature::Signature;

/// Cap on structures visited per universe size.
const STRUCTURE_LIMIT: usize = 20_000;

/// Lower bound on `sup |phi(a)|` over all searched structures of size `1..=N` on the bounds' grid.
///
/// Witness constants are not interpreted; `phi` should mention free variables only.
pub fn seminorm_lower_bound(phi: &Formula, sig: &Signature, bounds: &SearchBounds) -> Dyadic {
    let vars: Vec<u32> = phi.free_vars().into_iter().collect();
    let mut best = Dyadic::ZERO;
    for n in 1..=bounds.max_universe {
        let (structures, _) = all_structures(sig, n, bounds.grid_exp, STRUCTURE_LIMIT);
        for s in &structures {
            for t in tuples(n, vars.len()) {
                let asg: Assignment = vars.iter().copied().zip(t).collect();
                if let Ok(v) = eval(phi, s, &asg) {
                    best = best.max(v);
                    if best == Dyadic::ONE {
                        return best;
                    }
                }
            }
        }
    }
    best
}
