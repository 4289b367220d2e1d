use std::collections::BTreeMap;

use thiserror::Error;

use super::formula::{Formula, Term};
use crate::dyadic::Dyadic;
use crate::structures::FiniteStructure;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("witness constant c{0} is not interpreted")]
    UninterpretedConstant(u32),
    #[error("symbol `{0}` is not interpreted")]
    UninterpretedSymbol(String),
    #[error("variable x{0} is unassigned")]
    UnassignedVariable(u32),
}

/// Assignment of variables to universe elements.
pub type Assignment = BTreeMap<u32, usize>;

pub fn eval_term(t: &Term, a: &FiniteStructure, asg: &Assignment) -> Result<usize, EvalError> {
    match t {
        Term::Var(v) => asg.get(v).copied().ok_or(EvalError::UnassignedVariable(*v)),
        Term::Witness(c) => a.constants.get(c).copied().ok_or(EvalError::UninterpretedConstant(*c)),
        Term::App(f, args) => {
            let table = a.functions.get(f).ok_or_else(|| EvalError::UninterpretedSymbol(f.clone()))?;
            let mut idx = 0;
            for arg in args {
                idx = idx * a.universe + eval_term(arg, a, asg)?;
            }
            Ok(table[idx])
        }
    }
}

/// Exact value of `f` in `a` under `asg`; quantifiers range over the finite universe.
pub fn eval(f: &Formula, a: &FiniteStructure, asg: &Assignment) -> Result<Dyadic, EvalError> {
    match f {
        Formula::Atomic(p, args) => {
            let table = a.predicates.get(p).ok_or_else(|| EvalError::UninterpretedSymbol(p.clone()))?;
            let mut idx = 0;
            for arg in args {
                idx = idx * a.universe + eval_term(arg, a, asg)?;
            }
            Ok(table[idx])
        }
        Formula::Dist(s, t) => {
            let (i, j) = (eval_term(s, a, asg)?, eval_term(t, a, asg)?);
            Ok(a.dist(i, j))
        }
        Formula::Neg(g) => Ok(eval(g, a, asg)?.one_minus()),
        Formula::Half(g) => Ok(eval(g, a, asg)?.half()),
        Formula::DotPlus(g, h) => Ok(eval(g, a, asg)?.dot_plus(eval(h, a, asg)?)),
        Formula::Sup(v, g) | Formula::Inf(v, g) => {
            let is_sup = matches!(f, Formula::Sup(..));
            let mut inner = asg.clone();
            let mut best: Option<Dyadic> = None;
            for e in 0..a.universe {
                inner.insert(*v, e);
                let val = eval(g, a, &inner)?;
                best = Some(match best {
                    None => val,
                    Some(b) if is_sup => b.max(val),
                    Some(b) => b.min(val),
                });
            }
            // Empty universes do not occur for validated structures.
            Ok(best.unwrap_or(if is_sup { Dyadic::ZERO } else { Dyadic::ONE }))
        }
        Formula::Join(gs) => {
            let mut best = Dyadic::ONE;
            for g in gs {
                best = best.min(eval(g, a, asg)?);
            }
            Ok(best)
        }
        Formula::Meet(gs) => {
            let mut best = Dyadic::ZERO;
            for g in gs {
                best = best.max(eval(g, a, asg)?);
            }
            Ok(best)
        }
    }
}

/// Evaluates a sentence.
pub fn eval_sentence(f: &Formula, a: &FiniteStructure) -> Result<Dyadic, EvalError> {
    eval(f, a, &Assignment::new())
}
