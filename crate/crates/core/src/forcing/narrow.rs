use std::collections::BTreeSet;

use super::{check_sentence, ForcingError, Interval};
use crate::dyadic::Dyadic;
use crate::logic::eval::eval_sentence;
use crate::logic::formula::{Formula, Term};
use crate::oracle::pool::fresh_constants;
use crate::oracle::{Bound, Condition, Oracle, Verdict};
use crate::structures::FiniteStructure;

/// Extends `p` to some `q` pinning `phi` inside an interval of width `< eps`.
///
/// Quantifiers are instantiated over the constants of `p` and `phi` (one fresh constant when
/// there are none).
pub fn narrow(oracle: &Oracle, p: &Condition, phi: &Formula, eps: Dyadic) -> Result<(Condition, Interval), ForcingError> {
    let mut window: BTreeSet<u32> = p.constants();
    window.extend(phi.witnesses());
    if window.is_empty() {
        window.extend(fresh_constants(&window, 1));
    }
    narrow_in(oracle, p, phi, eps, &window.into_iter().collect::<Vec<_>>())
}

/// As [`narrow`], instantiating quantifiers over `window`.
pub fn narrow_in(
    oracle: &Oracle,
    p: &Condition,
    phi: &Formula,
    eps: Dyadic,
    window: &[u32],
) -> Result<(Condition, Interval), ForcingError> {
    check_sentence(phi)?;
    if eps.is_zero() {
        return Err(ForcingError::Narrowing("tolerance must be positive".into()));
    }
    step(oracle, p.clone(), phi, eps, window)
}

fn step(oracle: &Oracle, q: Condition, phi: &Formula, eps: Dyadic, window: &[u32]) -> Result<(Condition, Interval), ForcingError> {
    if eps > Dyadic::ONE {
        return Ok((q, Interval::UNIT));
    }
    Ok(match phi {
        Formula::Atomic(..) | Formula::Dist(..) => atomic(oracle, q, phi, eps)?,
        Formula::Neg(g) => {
            let (q, i) = step(oracle, q, g, eps, window)?;
            (q, i.neg())
        }
        Formula::Half(g) => {
            let (q, i) = step(oracle, q, g, eps.mul_int(2), window)?;
            (q, i.half())
        }
        Formula::DotPlus(a, b) => {
            let (q, i) = step(oracle, q, a, eps.half(), window)?;
            let (q, j) = step(oracle, q, b, eps.half(), window)?;
            (q, i.dot_plus(&j))
        }
        Formula::Join(gs) => fold(oracle, q, gs.iter().cloned(), eps, window, Interval::min)?,
        Formula::Meet(gs) => fold(oracle, q, gs.iter().cloned(), eps, window, Interval::max)?,
        Formula::Inf(x, g) => fold(oracle, q, instances(*x, g, window), eps, window, Interval::min)?,
        Formula::Sup(x, g) => fold(oracle, q, instances(*x, g, window), eps, window, Interval::max)?,
    })
}

fn instances<'a>(x: u32, g: &'a Formula, window: &'a [u32]) -> impl Iterator<Item = Formula> + 'a {
    window.iter().map(move |&c| g.substitute(x, &Term::c(c)))
}

/// Members are narrowed in sequence; min and max are 1-Lipschitz in the sup norm.
fn fold(
    oracle: &Oracle,
    mut q: Condition,
    members: impl Iterator<Item = Formula>,
    eps: Dyadic,
    window: &[u32],
    combine: fn(&Interval, &Interval) -> Interval,
) -> Result<(Condition, Interval), ForcingError> {
    let mut acc: Option<Interval> = None;
    for m in members {
        let (next, i) = step(oracle, q, &m, eps, window)?;
        q = next;
        acc = Some(match acc {
            None => i,
            Some(a) => combine(&a, &i),
        });
    }
    Ok((q, acc.unwrap_or(Interval::UNIT)))
}

/// Interval forced by the bounds on `a` and `~a` already in `q`.
pub fn bound_interval(q: &Condition, a: &Formula) -> Interval {
    let hi = q.f(a);
    let lo = q.f(&a.clone().neg()).one_minus();
    if lo <= hi {
        Interval::new(lo, hi)
    } else {
        Interval::UNIT
    }
}

/// A witness of `q` interpreting every constant of `a`.
fn witness_for(oracle: &Oracle, q: &Condition, a: &Formula) -> Result<FiniteStructure, ForcingError> {
    if let Some(w) = q.witness() {
        if a.witnesses().iter().all(|c| w.constants.contains_key(c)) {
            return Ok(w.clone());
        }
    }
    // One of `a < 1`, `~a < 1` holds in every structure interpreting `a`.
    for probe in [a.clone(), a.clone().neg()] {
        if let Verdict::Sat(w) = oracle.extend(q, &[Bound::new(probe, Dyadic::ONE)])? {
            return Ok(w);
        }
    }
    Err(ForcingError::Narrowing(format!("no witness interprets `{a}`")))
}

/// Pins `a` around its witness value `v` with bounds `a < v + delta` and `~a < 1 - v + delta`.
fn atomic(oracle: &Oracle, q: Condition, a: &Formula, eps: Dyadic) -> Result<(Condition, Interval), ForcingError> {
    let current = bound_interval(&q, a);
    if current.width() < eps {
        return Ok((q, current));
    }
    let w = witness_for(oracle, &q, a)?;
    let v = eval_sentence(a, &w).map_err(|e| ForcingError::Narrowing(e.to_string()))?;
    let s = oracle.search.slack();
    // Largest multiple of the slack giving width < eps; the witness keeps one grid step.
    let steps = eps.grid_index_ceil(s.exponent());
    let mut chosen = None;
    for m in (1..=steps.max(1)).rev() {
        let delta = s.mul_int(m);
        let lo = v.sub_sat(delta);
        let hi = v.add(delta).min(Dyadic::ONE);
        if hi.sub_sat(lo) < eps {
            chosen = Some((delta, Interval::new(lo, hi)));
            break;
        }
    }
    let Some((delta, interval)) = chosen else {
        return Err(ForcingError::Narrowing(format!(
            "grid slack {s} too coarse for tolerance {eps} on `{a}`"
        )));
    };
    let mut additions = Vec::new();
    let upper = v.add(delta);
    if upper <= Dyadic::ONE {
        additions.push(Bound::new(a.clone(), upper));
    }
    if delta <= v {
        additions.push(Bound::new(a.clone().neg(), v.one_minus().add(delta)));
    }
    additions.retain(|b| !q.contains(b));
    if additions.is_empty() {
        return Ok((q, interval));
    }
    match oracle.certify(&q, &additions)? {
        Some(next) => Ok((next, interval)),
        None => Err(ForcingError::Narrowing(format!("extension pinning `{a}` near {v} is not certified"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;
    use crate::oracle::Theory;

    #[test]
    fn atomic_metric_pin() {
        let o = Oracle::with_defaults(Theory::metric());
        let d = parse_formula("d(c0,c1)", &o.theory.signature).unwrap();
        let p = o.certify_bounds(&[Bound::new(d.clone(), "5/16".parse().unwrap())]).unwrap().unwrap();
        let eps: Dyadic = "1/4".parse().unwrap();
        let (q, i) = narrow(&o, &p, &d, eps).unwrap();
        assert!(i.width() < eps);
        assert!(q.extends(&p));
        let v = eval_sentence(&d, q.witness().unwrap()).unwrap();
        assert!(i.contains(v));
    }

    #[test]
    fn negation_flips() {
        let o = Oracle::with_defaults(Theory::graphs());
        let e = parse_formula("E(c0,c1)", &o.theory.signature).unwrap();
        let eps: Dyadic = "1/8".parse().unwrap();
        let (_, i) = narrow(&o, &o.root(), &e, eps).unwrap();
        let (_, j) = narrow(&o, &o.root(), &e.clone().neg(), eps).unwrap();
        assert_eq!(j, i.neg());
    }

    #[test]
    fn inf_distance_contains_zero() {
        let o = Oracle::with_defaults(Theory::metric());
        let phi = parse_formula("inf x0 . d(x0,c0)", &o.theory.signature).unwrap();
        let eps: Dyadic = "1/8".parse().unwrap();
        let (_, i) = narrow(&o, &o.root(), &phi, eps).unwrap();
        assert!(i.contains(Dyadic::ZERO));
        assert!(i.width() < eps);
    }
}
