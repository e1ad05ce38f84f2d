use alloc::boxed::Box;
use alloc::format;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// How the iterations of a parallel loop are handed out as chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChunkPolicy {
    /// Worker `w` gets the `w`-th contiguous block; sizes differ by at most one.
    StaticBlock,
    /// Iteration `i` goes to worker `i mod p`.
    StaticCyclic,
    FixedChunk(u64),
    /// Guided self-scheduling: `ceil(R / p)` for `R` remaining iterations.
    Gss,
    /// Trapezoid self-scheduling: chunk sizes fall linearly from `first` to
    /// `last`. `None` means `first = ceil(N / 2p)`, `last = 1`.
    Trapezoid(Option<(u64, u64)>),
    /// Chunks from `outer` go to groups of `group` consecutive workers and are
    /// split statically among the group's live members.
    Hybrid { outer: Box<ChunkPolicy>, group: usize },
}

impl ChunkPolicy {
    pub fn is_static(&self) -> bool {
        matches!(self, ChunkPolicy::StaticBlock | ChunkPolicy::StaticCyclic)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ChunkPolicy::FixedChunk(0) => Err(Error::Argument("fixed chunk size must be at least 1".into())),
            ChunkPolicy::Trapezoid(Some((f, l))) if !(*f >= *l && *l >= 1) => Err(Error::Argument(format!(
                "trapezoid needs first >= last >= 1, got {f},{l}"
            ))),
            ChunkPolicy::Hybrid { group: 0, .. } => Err(Error::Argument("hybrid group size must be at least 1".into())),
            ChunkPolicy::Hybrid { outer, .. } => {
                if outer.is_static() || matches!(**outer, ChunkPolicy::Hybrid { .. }) {
                    Err(Error::Argument("hybrid scheduling needs a dynamic outer policy".into()))
                } else {
                    outer.validate()
                }
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ChunkPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChunkPolicy::StaticBlock => f.write_str("static"),
            ChunkPolicy::StaticCyclic => f.write_str("cyclic"),
            ChunkPolicy::FixedChunk(c) => write!(f, "fixed:{c}"),
            ChunkPolicy::Gss => f.write_str("gss"),
            ChunkPolicy::Trapezoid(None) => f.write_str("tss"),
            ChunkPolicy::Trapezoid(Some((a, b))) => write!(f, "tss:{a},{b}"),
            ChunkPolicy::Hybrid { outer, group } => match **outer {
                ChunkPolicy::Gss => write!(f, "hybrid:{group}"),
                ref o => write!(f, "hybrid:{group}:{o}"),
            },
        }
    }
}

/// Accepts `static`, `cyclic`, `fixed:C`, `gss`, `tss`, `tss:F,L`,
/// `hybrid:G` (GSS between groups) and `hybrid:G:<policy>`.
impl FromStr for ChunkPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<ChunkPolicy> {
        let bad = || Error::Argument(format!("unknown scheduling policy `{s}`"));
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        let p = match s.split_once(':') {
            None => match s {
                "static" | "block" => ChunkPolicy::StaticBlock,
                "cyclic" => ChunkPolicy::StaticCyclic,
                "gss" => ChunkPolicy::Gss,
                "tss" | "trapezoid" => ChunkPolicy::Trapezoid(None),
                _ => return Err(bad()),
            },
            Some(("fixed", c)) => ChunkPolicy::FixedChunk(num(c)?),
            Some(("tss" | "trapezoid", fl)) => {
                let (f, l) = fl.split_once(',').ok_or_else(bad)?;
                ChunkPolicy::Trapezoid(Some((num(f)?, num(l)?)))
            }
            Some(("hybrid", rest)) => {
                let (g, outer) = match rest.split_once(':') {
                    Some((g, o)) => (g, o.parse()?),
                    None => (rest, ChunkPolicy::Gss),
                };
                ChunkPolicy::Hybrid {
                    outer: Box::new(outer),
                    group: num(g)? as usize,
                }
            }
            _ => return Err(bad()),
        };
        p.validate()?;
        Ok(p)
    }
}

fn div_ceil(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Produces successive chunk sizes for one parallel loop.
#[derive(Debug, Clone)]
pub struct ChunkSizer {
    policy: ChunkPolicy,
    issued: u64,
    /// Trapezoid parameters: first, last, planned chunk count.
    tss: (u64, u64, u64),
}

impl ChunkSizer {
    /// A sizer for a loop of `n` iterations over `p` workers (or groups).
    pub fn new(policy: &ChunkPolicy, n: u64, p: usize) -> ChunkSizer {
        let inner = match policy {
            ChunkPolicy::Hybrid { outer, .. } => (**outer).clone(),
            other => other.clone(),
        };
        let p = p.max(1) as u64;
        let tss = match inner {
            ChunkPolicy::Trapezoid(spec) => {
                let (f, l) = spec.unwrap_or((div_ceil(n, 2 * p).max(1), 1));
                let c = div_ceil(2 * n, f + l).max(1);
                (f, l, c)
            }
            _ => (1, 1, 1),
        };
        ChunkSizer {
            policy: inner,
            issued: 0,
            tss,
        }
    }

    /// Size of the next chunk, or `None` when nothing remains or nobody is alive.
    pub fn next_chunk(&mut self, remaining: u64, p_live: usize) -> Option<u64> {
        if remaining == 0 || p_live == 0 {
            return None;
        }
        let p = p_live as u64;
        let size = match &self.policy {
            ChunkPolicy::StaticBlock | ChunkPolicy::Gss => div_ceil(remaining, p),
            ChunkPolicy::StaticCyclic => 1,
            ChunkPolicy::FixedChunk(c) => *c,
            ChunkPolicy::Trapezoid(_) => {
                let (f, l, c) = self.tss;
                let i = self.issued;
                if c <= 1 {
                    f
                } else if i < c {
                    (f - (i * (f - l)) / (c - 1)).max(l)
                } else {
                    l
                }
            }
            ChunkPolicy::Hybrid { .. } => unreachable!("unwrapped in new"),
        };
        self.issued += 1;
        Some(size.clamp(1, remaining))
    }
}

/// First chunk a fresh loop of `remaining` iterations would grant under `policy`.
pub fn next_chunk(policy: &ChunkPolicy, remaining: u64, p: usize) -> Option<u64> {
    ChunkSizer::new(policy, remaining, p).next_chunk(remaining, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec::Vec;

    fn drain(policy: &ChunkPolicy, n: u64, p: usize) -> Vec<u64> {
        let mut s = ChunkSizer::new(policy, n, p);
        let mut r = n;
        let mut out = Vec::new();
        while let Some(c) = s.next_chunk(r, p) {
            out.push(c);
            r -= c;
        }
        out
    }

    #[test]
    fn gss_recurrence() {
        // Independent oracle: size <- ceil(R/p) with integer arithmetic written out.
        let mut r = 100u64;
        let mut want = Vec::new();
        while r > 0 {
            let s = (r + 3) / 4;
            want.push(s);
            r -= s;
        }
        assert_eq!(drain(&ChunkPolicy::Gss, 100, 4), want);
        assert_eq!(want, [25, 19, 14, 11, 8, 6, 5, 3, 3, 2, 1, 1, 1, 1]);
    }

    #[test]
    fn clamps_and_edges() {
        assert_eq!(next_chunk(&ChunkPolicy::FixedChunk(10), 7, 4), Some(7));
        assert_eq!(next_chunk(&ChunkPolicy::Gss, 1, 9), Some(1));
        assert_eq!(next_chunk(&ChunkPolicy::Gss, 0, 4), None);
        assert_eq!(next_chunk(&ChunkPolicy::Gss, 10, 0), None);
    }

    #[test]
    fn trapezoid_matches_float_formula() {
        for (n, p) in [(100u64, 4usize), (1000, 8), (37, 3), (5, 4), (1, 1)] {
            let got = drain(&ChunkPolicy::Trapezoid(None), n, p);
            // Oracle: real-valued linear interpolation from f down to l, rounded
            // down after subtracting, tail-clamped.
            let f = ((n as f64) / (2.0 * p as f64)).ceil().max(1.0);
            let l = 1.0;
            let c = ((2.0 * n as f64) / (f + l)).ceil().max(1.0);
            let delta = if c > 1.0 { (f - l) / (c - 1.0) } else { 0.0 };
            let mut want = Vec::new();
            let mut r = n as f64;
            let mut i = 0.0;
            while r > 0.0 {
                let raw = if i < c { f - (i * delta + 1e-9).floor() } else { l };
                let s = raw.max(l).min(r);
                want.push(s as u64);
                r -= s;
                i += 1.0;
            }
            assert_eq!(got, want, "n={n} p={p}");
            assert!(got.windows(2).all(|w| w[0] >= w[1]));
            assert_eq!(got.iter().sum::<u64>(), n);
        }
    }

    #[test]
    fn parse_round_trip() {
        for s in ["static", "cyclic", "fixed:3", "gss", "tss", "tss:10,2", "hybrid:5", "hybrid:2:tss"] {
            let p: ChunkPolicy = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        for s in ["fixed:0", "tss:1,2", "hybrid:0", "hybrid:2:static", "nope"] {
            assert!(s.parse::<ChunkPolicy>().is_err(), "{s}");
        }
    }
}
