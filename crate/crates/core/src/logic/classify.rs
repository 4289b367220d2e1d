use serde::Serialize;

use super::formula::Formula;

/// Syntactic classes used throughout the engine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Classification {
    /// Built from the finitary restricted connectives only (no `join`/`meet`).
    pub restricted: bool,
    pub quantifier_free: bool,
    /// Prenex `inf` block over a quantifier-free matrix.
    pub existential: bool,
    /// Prenex `sup` block over a quantifier-free matrix.
    pub universal: bool,
    /// `sup` block over a `join` of existential members.
    pub sup_join_inf: bool,
}

pub fn is_quantifier_free(f: &Formula) -> bool {
    match f {
        Formula::Atomic(..) | Formula::Dist(..) => true,
        Formula::Neg(g) | Formula::Half(g) => is_quantifier_free(g),
        Formula::DotPlus(a, b) => is_quantifier_free(a) && is_quantifier_free(b),
        Formula::Sup(..) | Formula::Inf(..) => false,
        Formula::Join(gs) | Formula::Meet(gs) => gs.iter().all(is_quantifier_free),
    }
}

pub fn is_restricted(f: &Formula) -> bool {
    match f {
        Formula::Atomic(..) | Formula::Dist(..) => true,
        Formula::Neg(g) | Formula::Half(g) | Formula::Sup(_, g) | Formula::Inf(_, g) => is_restricted(g),
        Formula::DotPlus(a, b) => is_restricted(a) && is_restricted(b),
        Formula::Join(_) | Formula::Meet(_) => false,
    }
}

/// Strips a prenex block of `inf` (or `sup`) quantifiers, returning the bound variables and matrix.
pub fn strip_block(f: &Formula, inf: bool) -> (Vec<u32>, &Formula) {
    let mut vars = Vec::new();
    let mut cur = f;
    loop {
        match cur {
            Formula::Inf(v, g) if inf => {
                vars.push(*v);
                cur = g;
            }
            Formula::Sup(v, g) if !inf => {
                vars.push(*v);
                cur = g;
            }
            _ => return (vars, cur),
        }
    }
}

pub fn is_existential(f: &Formula) -> bool {
    is_quantifier_free(strip_block(f, true).1)
}

pub fn is_universal(f: &Formula) -> bool {
    is_quantifier_free(strip_block(f, false).1)
}

pub fn classify(f: &Formula) -> Classification {
    let (sup_vars, body) = strip_block(f, false);
    let sup_join_inf = !sup_vars.is_empty()
        && matches!(body, Formula::Join(ms) if !ms.is_empty() && ms.iter().all(is_existential));
    Classification {
        restricted: is_restricted(f),
        quantifier_free: is_quantifier_free(f),
        existential: is_existential(f),
        universal: is_universal(f),
        sup_join_inf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::formula::Term;

    #[test]
    fn classification_examples() {
        let atom = Formula::dist(Term::c(0), Term::c(1));
        let c = classify(&atom);
        assert!(c.restricted && c.quantifier_free && c.existential && c.universal && !c.sup_join_inf);

        let qf = Formula::atom("E", vec![Term::var(0), Term::var(1)]);
        let sji = Formula::sup(0, Formula::Join(vec![Formula::inf(1, qf.clone())]));
        assert!(classify(&sji).sup_join_inf);
        assert!(!classify(&sji).restricted);

        let alt = Formula::sup(0, Formula::inf(1, Formula::sup(2, qf)));
        let c = classify(&alt);
        assert!(!c.existential && !c.universal);
    }
}
