use super::formula::Formula;

/// Connectives definable from `~`, `half` and `(+)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derived {
    /// `max(0, a - b)`
    DotMinus,
    Min,
    Max,
}

/// `a -. b = ~(~a (+) b)`
pub fn dot_minus(a: Formula, b: Formula) -> Formula {
    a.neg().dot_plus(b).neg()
}

/// `min(a, b) = a -. (a -. b)`
pub fn min(a: Formula, b: Formula) -> Formula {
    dot_minus(a.clone(), dot_minus(a, b))
}

/// `max(a, b) = ~min(~a, ~b)`
pub fn max(a: Formula, b: Formula) -> Formula {
    min(a.neg(), b.neg()).neg()
}

pub fn derived(kind: Derived, a: Formula, b: Formula) -> Formula {
    match kind {
        Derived::DotMinus => dot_minus(a, b),
        Derived::Min => min(a, b),
        Derived::Max => max(a, b),
    }
}

/// Restricted maximum of a nonempty list (right-nested).
pub fn max_all(mut fs: Vec<Formula>) -> Formula {
    let mut acc = fs.pop().expect("max of an empty family");
    while let Some(f) = fs.pop() {
        acc = max(f, acc);
    }
    acc
}

/// Restricted minimum of a nonempty list (right-nested).
pub fn min_all(mut fs: Vec<Formula>) -> Formula {
    let mut acc = fs.pop().expect("min of an empty family");
    while let Some(f) = fs.pop() {
        acc = min(f, acc);
    }
    acc
}

/// `|a - b| = max(a -. b, b -. a)`
pub fn abs_diff(a: Formula, b: Formula) -> Formula {
    max(dot_minus(a.clone(), b.clone()), dot_minus(b, a))
}
