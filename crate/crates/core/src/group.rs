//! Word arithmetic for finite cyclic groups, Z, Z^2 and free groups.

use std::fmt;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default element cap for ball enumeration.
pub const DEFAULT_CAPACITY: usize = 2_000_000;

/// Environment variable that overrides [`DEFAULT_CAPACITY`].
pub const CAPACITY_ENV: &str = "SOFICDIM_CAPACITY";

/// Element cap, honouring `SOFICDIM_CAPACITY` when it parses as a positive integer.
pub fn default_capacity() -> usize {
    std::env::var(CAPACITY_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&c| c > 0)
        .unwrap_or(DEFAULT_CAPACITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GroupDescriptor {
    Cyclic { order: u64 },
    Integers,
    Integers2,
    Free { rank: usize },
}

impl GroupDescriptor {
    pub fn cyclic(order: u64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("cyclic order must be >= 1".into()));
        }
        Ok(GroupDescriptor::Cyclic { order })
    }

    pub fn free(rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidArgument("free rank must be >= 1".into()));
        }
        Ok(GroupDescriptor::Free { rank })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GroupDescriptor::Cyclic { order: 0 } => {
                Err(Error::InvalidArgument("cyclic order must be >= 1".into()))
            }
            GroupDescriptor::Free { rank: 0 } => {
                Err(Error::InvalidArgument("free rank must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Number of generators in the standard presentation.
    pub fn num_generators(&self) -> usize {
        match *self {
            GroupDescriptor::Cyclic { .. } | GroupDescriptor::Integers => 1,
            GroupDescriptor::Integers2 => 2,
            GroupDescriptor::Free { rank } => rank,
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, GroupDescriptor::Free { .. })
    }

    /// Group order, `None` when infinite.
    pub fn order(&self) -> Option<u64> {
        match *self {
            GroupDescriptor::Cyclic { order } => Some(order),
            _ => None,
        }
    }

    pub fn identity(&self) -> GroupWord {
        let repr = match *self {
            GroupDescriptor::Free { .. } => Repr::Free(Vec::new()),
            _ => Repr::Abelian(vec![0; self.num_generators()]),
        };
        GroupWord { group: *self, repr }
    }

    /// The generator `a_i` as a word.
    pub fn generator(&self, i: usize) -> Result<GroupWord> {
        reduce(&[Letter::new(i, false)], *self)
    }

    /// Positive generators `a_0, ..., a_{n-1}`.
    pub fn generators(&self) -> Vec<GroupWord> {
        (0..self.num_generators())
            .map(|i| self.generator(i).expect("generator index in range"))
            .collect()
    }

    /// `{e} ∪ S ∪ S^{-1}`, deduplicated, in the order e, a, a^-1, b, b^-1, ...
    pub fn standard_generating_set(&self) -> Vec<GroupWord> {
        let mut set = IndexSet::new();
        set.insert(self.identity());
        for g in self.generators() {
            let inv = g.inverse();
            set.insert(g);
            set.insert(inv);
        }
        set.into_iter().collect()
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupDescriptor::Cyclic { order } => write!(f, "Z/{order}"),
            GroupDescriptor::Integers => write!(f, "Z"),
            GroupDescriptor::Integers2 => write!(f, "Z^2"),
            GroupDescriptor::Free { rank } => write!(f, "F{rank}"),
        }
    }
}

/// A signed generator `a_i` or `a_i^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

impl Letter {
    pub const fn new(generator: usize, inverse: bool) -> Self {
        Letter { generator, inverse }
    }

    pub fn inv(self) -> Self {
        Letter {
            generator: self.generator,
            inverse: !self.inverse,
        }
    }

    fn cancels(self, other: Letter) -> bool {
        self.generator == other.generator && self.inverse != other.inverse
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Repr {
    Free(Vec<Letter>),
    Abelian(Vec<i64>),
}

/// An element of a supported group, always held in normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupWord {
    group: GroupDescriptor,
    repr: Repr,
}

/// Bring a raw letter sequence into normal form.
pub fn reduce(letters: &[Letter], group: GroupDescriptor) -> Result<GroupWord> {
    group.validate()?;
    let n = group.num_generators();
    if let Some(bad) = letters.iter().find(|l| l.generator >= n) {
        return Err(Error::MalformedWord(format!(
            "generator index {} out of range for {group}",
            bad.generator
        )));
    }
    match group {
        GroupDescriptor::Free { .. } => {
            let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
            for &l in letters {
                match out.last() {
                    Some(&top) if top.cancels(l) => {
                        out.pop();
                    }
                    _ => out.push(l),
                }
            }
            Ok(GroupWord {
                group,
                repr: Repr::Free(out),
            })
        }
        _ => {
            let mut coords = vec![0i64; n];
            for l in letters {
                coords[l.generator] += if l.inverse { -1 } else { 1 };
            }
            GroupWord::abelian(group, coords)
        }
    }
}

impl GroupWord {
    /// Abelian element from its coordinate tuple; cyclic entries are reduced mod k.
    pub fn abelian(group: GroupDescriptor, mut coords: Vec<i64>) -> Result<Self> {
        group.validate()?;
        if group.is_free() {
            return Err(Error::MalformedWord(format!(
                "{group} elements are letter sequences, not tuples"
            )));
        }
        if coords.len() != group.num_generators() {
            return Err(Error::MalformedWord(format!(
                "{group} expects {} coordinates, got {}",
                group.num_generators(),
                coords.len()
            )));
        }
        if let GroupDescriptor::Cyclic { order } = group {
            let k = order as i64;
            coords[0] = coords[0].rem_euclid(k);
        }
        Ok(GroupWord {
            group,
            repr: Repr::Abelian(coords),
        })
    }

    pub fn group(&self) -> GroupDescriptor {
        self.group
    }

    pub fn is_identity(&self) -> bool {
        match &self.repr {
            Repr::Free(l) => l.is_empty(),
            Repr::Abelian(c) => c.iter().all(|&x| x == 0),
        }
    }

    /// Reduced letters of a free-group word.
    pub fn free_letters(&self) -> Option<&[Letter]> {
        match &self.repr {
            Repr::Free(l) => Some(l),
            Repr::Abelian(_) => None,
        }
    }

    /// Coordinate tuple of an abelian word.
    pub fn coords(&self) -> Option<&[i64]> {
        match &self.repr {
            Repr::Abelian(c) => Some(c),
            Repr::Free(_) => None,
        }
    }

    /// Canonical letter sequence. Abelian words expand as `a^x b^y`,
    /// with cyclic exponents taken in `[0, k)`.
    pub fn letters(&self) -> Vec<Letter> {
        match &self.repr {
            Repr::Free(l) => l.clone(),
            Repr::Abelian(c) => {
                let mut out = Vec::new();
                for (g, &x) in c.iter().enumerate() {
                    let l = Letter::new(g, x < 0);
                    out.extend(std::iter::repeat(l).take(x.unsigned_abs() as usize));
                }
                out
            }
        }
    }

    /// Word length: reduced length for free groups, l^1 length for Z and Z^2,
    /// and `min(x, k - x)` for Z/k.
    pub fn length(&self) -> u64 {
        match &self.repr {
            Repr::Free(l) => l.len() as u64,
            Repr::Abelian(c) => match self.group {
                GroupDescriptor::Cyclic { order } => {
                    let x = c[0] as u64;
                    x.min(order - x)
                }
                _ => c.iter().map(|x| x.unsigned_abs()).sum(),
            },
        }
    }

    fn check_same(&self, other: &GroupWord) -> Result<()> {
        if self.group != other.group {
            return Err(Error::GroupMismatch {
                left: self.group.to_string(),
                right: other.group.to_string(),
            });
        }
        Ok(())
    }

    pub fn multiply(&self, other: &GroupWord) -> Result<GroupWord> {
        self.check_same(other)?;
        let repr = match (&self.repr, &other.repr) {
            (Repr::Free(x), Repr::Free(y)) => {
                let mut i = 0;
                while i < x.len().min(y.len()) && x[x.len() - 1 - i].cancels(y[i]) {
                    i += 1;
                }
                let mut out = Vec::with_capacity(x.len() + y.len() - 2 * i);
                out.extend_from_slice(&x[..x.len() - i]);
                out.extend_from_slice(&y[i..]);
                Repr::Free(out)
            }
            (Repr::Abelian(x), Repr::Abelian(y)) => {
                let sum: Vec<i64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
                return GroupWord::abelian(self.group, sum);
            }
            _ => unreachable!("representation follows the descriptor"),
        };
        Ok(GroupWord {
            group: self.group,
            repr,
        })
    }

    pub fn inverse(&self) -> GroupWord {
        match &self.repr {
            Repr::Free(l) => GroupWord {
                group: self.group,
                repr: Repr::Free(l.iter().rev().map(|x| x.inv()).collect()),
            },
            Repr::Abelian(c) => GroupWord::abelian(self.group, c.iter().map(|x| -x).collect())
                .expect("negation keeps the shape"),
        }
    }

    /// Parse the [`Display`](fmt::Display) form: `e`, `a*b^-1*a^3`, `(3)`, `(1,-2)`.
    pub fn parse(group: GroupDescriptor, s: &str) -> Result<GroupWord> {
        let s = s.trim();
        let bad = |msg: &str| Error::MalformedWord(format!("{msg}: {s:?}"));
        if s == "e" {
            return Ok(group.identity());
        }
        if s.starts_with('(') {
            let inner = s
                .strip_prefix('(')
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(|| bad("unbalanced parentheses"))?;
            let coords = inner
                .split(',')
                .map(|t| t.trim().parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("bad coordinate"))?;
            return GroupWord::abelian(group, coords);
        }
        let mut letters = Vec::new();
        for factor in s.split('*') {
            let factor = factor.trim();
            let (name, exp) = match factor.split_once('^') {
                Some((n, e)) => (n, e.trim().parse::<i64>().map_err(|_| bad("bad exponent"))?),
                None => (factor, 1),
            };
            let g = generator_index(name.trim()).ok_or_else(|| bad("unknown generator"))?;
            let l = Letter::new(g, exp < 0);
            letters.extend(std::iter::repeat(l).take(exp.unsigned_abs() as usize));
        }
        reduce(&letters, group)
    }
}

/// Generator names: `a`..`z`, then `g26`, `g27`, ...
pub fn generator_name(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("g{i}")
    }
}

fn generator_index(name: &str) -> Option<usize> {
    let b = name.as_bytes();
    if b.len() == 1 && b[0].is_ascii_lowercase() {
        return Some((b[0] - b'a') as usize);
    }
    name.strip_prefix('g')?.parse().ok()
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Abelian(c) => {
                let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
            Repr::Free(l) if l.is_empty() => write!(f, "e"),
            Repr::Free(l) => {
                let mut first = true;
                let mut i = 0;
                while i < l.len() {
                    let mut j = i;
                    while j < l.len() && l[j] == l[i] {
                        j += 1;
                    }
                    if !first {
                        write!(f, "*")?;
                    }
                    first = false;
                    let run = (j - i) as i64;
                    let exp = if l[i].inverse { -run } else { run };
                    write!(f, "{}", generator_name(l[i].generator))?;
                    if exp != 1 {
                        write!(f, "^{exp}")?;
                    }
                    i = j;
                }
                Ok(())
            }
        }
    }
}

impl Serialize for GroupWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// All distinct products of at most `radius` factors from `generating_set`,
/// in breadth-first discovery order. The identity is always included.
pub fn ball(
    group: GroupDescriptor,
    generating_set: &[GroupWord],
    radius: usize,
) -> Result<Vec<GroupWord>> {
    ball_with_capacity(group, generating_set, radius, default_capacity())
}

pub fn ball_with_capacity(
    group: GroupDescriptor,
    generating_set: &[GroupWord],
    radius: usize,
    cap: usize,
) -> Result<Vec<GroupWord>> {
    group.validate()?;
    for g in generating_set {
        if g.group != group {
            return Err(Error::GroupMismatch {
                left: group.to_string(),
                right: g.group.to_string(),
            });
        }
    }
    let mut seen: IndexSet<GroupWord> = IndexSet::new();
    seen.insert(group.identity());
    let mut frontier_start = 0;
    for _ in 0..radius {
        let frontier_end = seen.len();
        if frontier_start == frontier_end {
            break;
        }
        for i in frontier_start..frontier_end {
            for g in generating_set {
                let w = seen[i].multiply(g)?;
                seen.insert(w);
                if seen.len() > cap {
                    return Err(Error::Capacity {
                        requested: seen.len(),
                        cap,
                    });
                }
            }
        }
        frontier_start = frontier_end;
    }
    Ok(seen.into_iter().collect())
}

/// Closed-form size of the radius-`r` ball of `F_n` in the standard generators.
pub fn free_ball_size(rank: usize, radius: usize) -> u128 {
    let n = rank as u128;
    if rank == 1 {
        return 1 + 2 * radius as u128;
    }
    let q = 2 * n - 1;
    1 + 2 * n * (q.pow(radius as u32) - 1) / (q - 1)
}
