//! Index labels and the coordinate symbols of the jet-multimomentum chart.

use smallvec::SmallVec;
use std::fmt;
use std::sync::OnceLock;

/// Spacetime dimension.
pub const DIM: usize = 4;
/// Highest jet order carried by any symbol.
pub const MAX_ORDER: usize = 4;

/// An index slot value: a concrete component `0..4` or an abstract label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Val(u8),
    Name(u16),
}

impl Label {
    pub fn value(self) -> Option<u8> {
        match self {
            Label::Val(v) => Some(v),
            Label::Name(_) => None,
        }
    }

    pub fn is_abstract(self) -> bool {
        matches!(self, Label::Name(_))
    }
}

const GREEK: [&str; 16] = [
    "mu", "nu", "alpha", "beta", "gamma", "delta", "lambda", "rho", "sigma", "tau", "kappa",
    "epsilon", "zeta", "eta", "theta", "iota",
];

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Val(v) => write!(f, "{v}"),
            Label::Name(n) if (*n as usize) < GREEK.len() => write!(f, "\\{}", GREEK[*n as usize]),
            Label::Name(n) => write!(f, "i{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Up,
    Lo,
}

/// An index occurrence. The range is fixed to `{0,1,2,3}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Index {
    pub label: Label,
    pub pos: Pos,
}

pub type Labels = SmallVec<[Label; 4]>;

/// One coordinate (or derived symbol) of the jet-multimomentum chart.
///
/// Symmetric pairs are stored ordered and derivative multisets sorted, so two
/// symbols naming the same coordinate compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JetSymbol {
    Coord(Label),
    Metric { pair: [Label; 2], d: Labels },
    InvMetric([Label; 2]),
    MetricDetSqrt,
    ScalarPartial(Labels),
    /// Covariant scalar jets of order 2 and 3; lower orders coincide with
    /// [`JetSymbol::ScalarPartial`] and are normalized to it.
    ScalarCovariant(Labels),
    P,
    PgFirst { pair: [Label; 2], mu: Label },
    PgSecond { pair: [Label; 2], mn: [Label; 2] },
    PphiFirst(Label),
    PphiSecond([Label; 2]),
    /// Kronecker delta `δ^up_lo`.
    Delta { up: Label, lo: Label },
    /// Component `dir` of a multivector field along the coordinate `coord`.
    Mv { coord: Box<JetSymbol>, dir: Label },
}

fn ordered(a: Label, b: Label) -> [Label; 2] {
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted(d: &[Label]) -> Labels {
    let mut v: Labels = d.iter().copied().collect();
    v.sort();
    v
}

pub fn lv(v: usize) -> Label {
    Label::Val(v as u8)
}

impl JetSymbol {
    pub fn coord(mu: Label) -> Self {
        JetSymbol::Coord(mu)
    }

    pub fn metric(a: Label, b: Label, d: &[Label]) -> Self {
        JetSymbol::Metric { pair: ordered(a, b), d: sorted(d) }
    }

    pub fn inv_metric(a: Label, b: Label) -> Self {
        JetSymbol::InvMetric(ordered(a, b))
    }

    pub fn phi(d: &[Label]) -> Self {
        JetSymbol::ScalarPartial(sorted(d))
    }

    pub fn phi_cov(d: &[Label]) -> Self {
        if d.len() <= 1 {
            JetSymbol::ScalarPartial(sorted(d))
        } else {
            JetSymbol::ScalarCovariant(sorted(d))
        }
    }

    pub fn pg_first(a: Label, b: Label, mu: Label) -> Self {
        JetSymbol::PgFirst { pair: ordered(a, b), mu }
    }

    pub fn pg_second(a: Label, b: Label, m: Label, n: Label) -> Self {
        JetSymbol::PgSecond { pair: ordered(a, b), mn: ordered(m, n) }
    }

    pub fn pphi_first(mu: Label) -> Self {
        JetSymbol::PphiFirst(mu)
    }

    pub fn pphi_second(m: Label, n: Label) -> Self {
        JetSymbol::PphiSecond(ordered(m, n))
    }

    pub fn delta(up: Label, lo: Label) -> Self {
        JetSymbol::Delta { up, lo }
    }

    pub fn mv(coord: JetSymbol, dir: Label) -> Self {
        JetSymbol::Mv { coord: Box::new(coord), dir }
    }

    /// Jet order of the symbol (number of derivative indices); 0 for momenta.
    pub fn order(&self) -> usize {
        match self {
            JetSymbol::Metric { d, .. } => d.len(),
            JetSymbol::ScalarPartial(d) | JetSymbol::ScalarCovariant(d) => d.len(),
            JetSymbol::Mv { coord, .. } => coord.order(),
            _ => 0,
        }
    }

    pub fn is_momentum(&self) -> bool {
        matches!(
            self,
            JetSymbol::P
                | JetSymbol::PgFirst { .. }
                | JetSymbol::PgSecond { .. }
                | JetSymbol::PphiFirst(_)
                | JetSymbol::PphiSecond(_)
        )
    }

    pub fn is_scalar_jet(&self) -> bool {
        matches!(self, JetSymbol::ScalarPartial(_) | JetSymbol::ScalarCovariant(_))
    }

    pub fn is_metric_jet(&self) -> bool {
        matches!(self, JetSymbol::Metric { .. })
    }

    /// Index occurrences with their positions.
    pub fn indices(&self) -> Vec<Index> {
        let up = |l: Label| Index { label: l, pos: Pos::Up };
        let lo = |l: Label| Index { label: l, pos: Pos::Lo };
        match self {
            JetSymbol::Coord(m) => vec![up(*m)],
            JetSymbol::Metric { pair, d } => {
                let mut v = vec![lo(pair[0]), lo(pair[1])];
                v.extend(d.iter().map(|l| lo(*l)));
                v
            }
            JetSymbol::InvMetric(p) => vec![up(p[0]), up(p[1])],
            JetSymbol::MetricDetSqrt | JetSymbol::P => vec![],
            JetSymbol::ScalarPartial(d) | JetSymbol::ScalarCovariant(d) => d.iter().map(|l| lo(*l)).collect(),
            JetSymbol::PgFirst { pair, mu } => vec![up(pair[0]), up(pair[1]), up(*mu)],
            JetSymbol::PgSecond { pair, mn } => vec![up(pair[0]), up(pair[1]), up(mn[0]), up(mn[1])],
            JetSymbol::PphiFirst(m) => vec![up(*m)],
            JetSymbol::PphiSecond(p) => vec![up(p[0]), up(p[1])],
            JetSymbol::Delta { up: u, lo: l } => vec![up(*u), lo(*l)],
            JetSymbol::Mv { coord, dir } => {
                let mut v = coord.indices();
                v.push(lo(*dir));
                v
            }
        }
    }

    /// Rebuild the symbol with every label passed through `f`, re-normalizing
    /// ordered storage.
    pub fn map_labels(&self, f: &mut impl FnMut(Label) -> Label) -> JetSymbol {
        match self {
            JetSymbol::Coord(m) => JetSymbol::Coord(f(*m)),
            JetSymbol::Metric { pair, d } => {
                let a = f(pair[0]);
                let b = f(pair[1]);
                let d: Labels = d.iter().map(|l| f(*l)).collect();
                JetSymbol::metric(a, b, &d)
            }
            JetSymbol::InvMetric(p) => {
                let a = f(p[0]);
                JetSymbol::inv_metric(a, f(p[1]))
            }
            JetSymbol::MetricDetSqrt => JetSymbol::MetricDetSqrt,
            JetSymbol::ScalarPartial(d) => {
                let d: Labels = d.iter().map(|l| f(*l)).collect();
                JetSymbol::phi(&d)
            }
            JetSymbol::ScalarCovariant(d) => {
                let d: Labels = d.iter().map(|l| f(*l)).collect();
                JetSymbol::phi_cov(&d)
            }
            JetSymbol::P => JetSymbol::P,
            JetSymbol::PgFirst { pair, mu } => {
                let a = f(pair[0]);
                let b = f(pair[1]);
                JetSymbol::pg_first(a, b, f(*mu))
            }
            JetSymbol::PgSecond { pair, mn } => {
                let a = f(pair[0]);
                let b = f(pair[1]);
                let m = f(mn[0]);
                JetSymbol::pg_second(a, b, m, f(mn[1]))
            }
            JetSymbol::PphiFirst(m) => JetSymbol::PphiFirst(f(*m)),
            JetSymbol::PphiSecond(p) => {
                let a = f(p[0]);
                JetSymbol::pphi_second(a, f(p[1]))
            }
            JetSymbol::Delta { up, lo } => {
                let u = f(*up);
                JetSymbol::Delta { up: u, lo: f(*lo) }
            }
            JetSymbol::Mv { coord, dir } => {
                let c = coord.map_labels(f);
                JetSymbol::mv(c, f(*dir))
            }
        }
    }

    pub fn has_abstract(&self) -> bool {
        self.indices().iter().any(|i| i.label.is_abstract())
    }

    fn concrete(ls: &[Label]) -> Option<Vec<usize>> {
        ls.iter().map(|l| l.value().map(|v| v as usize)).collect()
    }

    /// Dense id of a concrete chart coordinate. Derived symbols, deltas and
    /// multivector components have none.
    pub fn coord_id(&self) -> Option<usize> {
        let t = tables();
        match self {
            JetSymbol::Coord(m) => m.value().map(|v| v as usize),
            JetSymbol::Metric { pair, d } => {
                let p = Self::concrete(pair)?;
                let d = Self::concrete(d)?;
                if d.len() > MAX_ORDER {
                    return None;
                }
                Some(METRIC_BASE + pair_rank(p[0], p[1]) * METRIC_STRIDE + t.offset[d.len()] + t.rank(&d))
            }
            JetSymbol::ScalarPartial(d) => {
                let d = Self::concrete(d)?;
                if d.len() > MAX_ORDER {
                    return None;
                }
                Some(PHI_BASE + t.offset[d.len()] + t.rank(&d))
            }
            JetSymbol::ScalarCovariant(d) => {
                let d = Self::concrete(d)?;
                match d.len() {
                    2 => Some(PHICOV_BASE + t.rank(&d)),
                    3 => Some(PHICOV_BASE + 10 + t.rank(&d)),
                    _ => None,
                }
            }
            JetSymbol::P => Some(P_BASE),
            JetSymbol::PgFirst { pair, mu } => {
                let p = Self::concrete(pair)?;
                Some(PG1_BASE + pair_rank(p[0], p[1]) * 4 + mu.value()? as usize)
            }
            JetSymbol::PgSecond { pair, mn } => {
                let p = Self::concrete(pair)?;
                let m = Self::concrete(mn)?;
                Some(PG2_BASE + pair_rank(p[0], p[1]) * 10 + pair_rank(m[0], m[1]))
            }
            JetSymbol::PphiFirst(m) => Some(PPHI1_BASE + m.value()? as usize),
            JetSymbol::PphiSecond(p) => {
                let p = Self::concrete(p)?;
                Some(PPHI2_BASE + pair_rank(p[0], p[1]))
            }
            _ => None,
        }
    }

    /// Inverse of [`JetSymbol::coord_id`].
    pub fn from_coord_id(id: usize) -> Option<JetSymbol> {
        let t = tables();
        let split = |r: usize| -> (usize, usize) {
            let mut k = 0;
            while k < MAX_ORDER && r >= t.offset[k + 1] {
                k += 1;
            }
            (k, r - t.offset[k])
        };
        let lab = |v: &[usize]| -> Labels { v.iter().map(|x| lv(*x)).collect() };
        if id < METRIC_BASE {
            return Some(JetSymbol::Coord(lv(id)));
        }
        if id < PHI_BASE {
            let r = id - METRIC_BASE;
            let (a, b) = PAIRS[r / METRIC_STRIDE];
            let (k, i) = split(r % METRIC_STRIDE);
            return Some(JetSymbol::metric(lv(a), lv(b), &lab(&t.multisets[k][i])));
        }
        if id < PHICOV_BASE {
            let (k, i) = split(id - PHI_BASE);
            return Some(JetSymbol::phi(&lab(&t.multisets[k][i])));
        }
        if id < P_BASE {
            let r = id - PHICOV_BASE;
            return Some(if r < 10 {
                JetSymbol::phi_cov(&lab(&t.multisets[2][r]))
            } else {
                JetSymbol::phi_cov(&lab(&t.multisets[3][r - 10]))
            });
        }
        if id == P_BASE {
            return Some(JetSymbol::P);
        }
        if id < PG2_BASE {
            let r = id - PG1_BASE;
            let (a, b) = PAIRS[r / 4];
            return Some(JetSymbol::pg_first(lv(a), lv(b), lv(r % 4)));
        }
        if id < PPHI1_BASE {
            let r = id - PG2_BASE;
            let (a, b) = PAIRS[r / 10];
            let (m, n) = PAIRS[r % 10];
            return Some(JetSymbol::pg_second(lv(a), lv(b), lv(m), lv(n)));
        }
        if id < PPHI2_BASE {
            return Some(JetSymbol::pphi_first(lv(id - PPHI1_BASE)));
        }
        if id < NCOORD {
            let (m, n) = PAIRS[id - PPHI2_BASE];
            return Some(JetSymbol::pphi_second(lv(m), lv(n)));
        }
        None
    }
}

/// Ordered pairs `α ≤ β` in storage order.
pub const PAIRS: [(usize, usize); 10] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

pub fn pair_rank(a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    PAIRS.iter().position(|p| *p == (a, b)).expect("indices in range")
}

const METRIC_STRIDE: usize = 70;
pub const METRIC_BASE: usize = 4;
pub const PHI_BASE: usize = METRIC_BASE + 10 * METRIC_STRIDE;
pub const PHICOV_BASE: usize = PHI_BASE + 70;
pub const P_BASE: usize = PHICOV_BASE + 30;
pub const PG1_BASE: usize = P_BASE + 1;
pub const PG2_BASE: usize = PG1_BASE + 40;
pub const PPHI1_BASE: usize = PG2_BASE + 100;
pub const PPHI2_BASE: usize = PPHI1_BASE + 4;
/// Number of dense coordinate ids.
pub const NCOORD: usize = PPHI2_BASE + 10;

pub struct MultisetTables {
    /// `multisets[k]` lists sorted k-tuples over `0..4` in lexicographic order.
    pub multisets: Vec<Vec<Vec<usize>>>,
    pub offset: [usize; MAX_ORDER + 2],
}

impl MultisetTables {
    pub fn rank(&self, d: &[usize]) -> usize {
        self.multisets[d.len()].binary_search_by(|m| m.as_slice().cmp(d)).expect("sorted multiset")
    }
}

pub fn tables() -> &'static MultisetTables {
    static T: OnceLock<MultisetTables> = OnceLock::new();
    T.get_or_init(|| {
        let mut multisets = vec![vec![vec![]]];
        for k in 1..=MAX_ORDER {
            let mut next = Vec::new();
            for m in &multisets[k - 1] {
                let start = m.last().copied().unwrap_or(0);
                for v in start..DIM {
                    let mut n = m.clone();
                    n.push(v);
                    next.push(n);
                }
            }
            multisets.push(next);
        }
        let mut offset = [0; MAX_ORDER + 2];
        for k in 0..=MAX_ORDER {
            offset[k + 1] = offset[k] + multisets[k].len();
        }
        MultisetTables { multisets, offset }
    })
}

/// Sorted multisets of size `k` over `0..4`.
pub fn multisets(k: usize) -> &'static [Vec<usize>] {
    &tables().multisets[k]
}

/// Combinatorial factor `n(μν)`: 1 on the diagonal, 2 otherwise.
pub fn n_factor(mu: usize, nu: usize) -> i64 {
    if mu == nu {
        1
    } else {
        2
    }
}

/// Number of distinct orderings of a derivative multiset.
pub fn multiplicity(d: &[usize]) -> i64 {
    let mut counts = [0usize; DIM];
    for &x in d {
        counts[x] += 1;
    }
    let fact = |n: usize| (1..=n as i64).product::<i64>().max(1);
    fact(d.len()) / counts.iter().map(|c| fact(*c)).product::<i64>()
}

impl fmt::Display for JetSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |ls: &[Label]| ls.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("");
        match self {
            JetSymbol::Coord(m) => write!(f, "x^{{{m}}}"),
            JetSymbol::Metric { pair, d } if d.is_empty() => write!(f, "g_{{{}}}", join(pair)),
            JetSymbol::Metric { pair, d } => write!(f, "g_{{{},{}}}", join(pair), join(d)),
            JetSymbol::InvMetric(p) => write!(f, "g^{{{}}}", join(p)),
            JetSymbol::MetricDetSqrt => write!(f, "sqrtg"),
            JetSymbol::ScalarPartial(d) if d.is_empty() => write!(f, "phi"),
            JetSymbol::ScalarPartial(d) if d.len() == 1 => write!(f, "phi_{{;{}}}", join(d)),
            JetSymbol::ScalarPartial(d) => write!(f, "phi_{{,{}}}", join(d)),
            JetSymbol::ScalarCovariant(d) => write!(f, "phi_{{;{}}}", join(d)),
            JetSymbol::P => write!(f, "p"),
            JetSymbol::PgFirst { pair, mu } => write!(f, "pg^{{{},{}}}", join(pair), mu),
            JetSymbol::PgSecond { pair, mn } => write!(f, "pg^{{{},{}}}", join(pair), join(mn)),
            JetSymbol::PphiFirst(m) => write!(f, "pphi^{{,{m}}}"),
            JetSymbol::PphiSecond(p) => write!(f, "pphi^{{,{}}}", join(p)),
            JetSymbol::Delta { up, lo } => write!(f, "delta^{{{up}}}_{{{lo}}}"),
            JetSymbol::Mv { coord, dir } => write!(f, "F[{coord}]_{{{dir}}}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coord_ids_round_trip() {
        for id in 0..NCOORD {
            let s = JetSymbol::from_coord_id(id).unwrap();
            assert_eq!(s.coord_id(), Some(id), "{s}");
        }
    }

    #[test]
    fn metric_symmetry_is_normalized() {
        assert_eq!(JetSymbol::metric(lv(1), lv(0), &[]), JetSymbol::metric(lv(0), lv(1), &[]));
        assert_eq!(
            JetSymbol::metric(lv(0), lv(1), &[lv(3), lv(2)]),
            JetSymbol::metric(lv(1), lv(0), &[lv(2), lv(3)])
        );
    }

    #[test]
    fn n_factor_values() {
        assert_eq!(n_factor(0, 0), 1);
        assert_eq!(n_factor(0, 1), 2);
        assert_eq!(n_factor(3, 3), 1);
    }

    #[test]
    fn multiset_counts() {
        assert_eq!(multisets(2).len(), 10);
        assert_eq!(multisets(3).len(), 20);
        assert_eq!(multisets(4).len(), 35);
        assert_eq!(multiplicity(&[0, 1, 1]), 3);
    }
}
