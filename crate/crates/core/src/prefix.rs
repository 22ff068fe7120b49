//! IPv4 prefixes and a binary trie for longest-prefix match.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrefixError {
    #[error("prefix length {0} out of range 0..=32")]
    BadLength(u8),
    #[error("cannot parse prefix {0:?}")]
    Parse(String),
}

/// An IPv4 prefix. The address is stored with host bits cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ipv4Prefix {
    addr: u32,
    len: u8,
}

pub const fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len as u32)
    }
}

impl Ipv4Prefix {
    pub const DEFAULT: Ipv4Prefix = Ipv4Prefix { addr: 0, len: 0 };

    pub fn new(addr: Ipv4Addr, len: u8) -> Result<Self, PrefixError> {
        Self::from_bits(u32::from(addr), len)
    }

    /// Const constructor; panics if `len` exceeds 32.
    pub const fn masked(addr: u32, len: u8) -> Self {
        assert!(len <= 32, "prefix length over 32");
        Ipv4Prefix { addr: addr & mask(len), len }
    }

    pub fn from_bits(addr: u32, len: u8) -> Result<Self, PrefixError> {
        if len > 32 {
            return Err(PrefixError::BadLength(len));
        }
        Ok(Ipv4Prefix { addr: addr & mask(len), len })
    }

    pub fn addr(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.addr)
    }

    pub fn bits(&self) -> u32 {
        self.addr
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn contains_addr(&self, ip: Ipv4Addr) -> bool {
        u32::from(ip) & mask(self.len) == self.addr
    }

    /// True when every address in `other` is also in `self`.
    pub fn covers(&self, other: &Ipv4Prefix) -> bool {
        self.len <= other.len && other.addr & mask(self.len) == self.addr
    }

    /// Last address in the prefix.
    pub fn last(&self) -> u32 {
        self.addr | !mask(self.len)
    }
}

impl fmt::Display for Ipv4Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr(), self.len)
    }
}

impl FromStr for Ipv4Prefix {
    type Err = PrefixError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, l) = s.split_once('/').ok_or_else(|| PrefixError::Parse(s.to_string()))?;
        let addr: Ipv4Addr = a.parse().map_err(|_| PrefixError::Parse(s.to_string()))?;
        let len: u8 = l.parse().map_err(|_| PrefixError::Parse(s.to_string()))?;
        Ipv4Prefix::new(addr, len)
    }
}

impl TryFrom<String> for Ipv4Prefix {
    type Error = PrefixError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Ipv4Prefix> for String {
    fn from(p: Ipv4Prefix) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone)]
struct Node {
    children: [u32; 2],
    value: Option<u32>,
}

const NIL: u32 = u32::MAX;

/// Binary trie keyed by IPv4 prefix. Values live in a side vector; nodes
/// hold indices into it.
#[derive(Debug, Clone)]
pub struct PrefixTrie<T> {
    nodes: Vec<Node>,
    values: Vec<(Ipv4Prefix, T)>,
}

impl<T> Default for PrefixTrie<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> PrefixTrie<T> {
    pub fn new() -> Self {
        PrefixTrie { nodes: vec![Node { children: [NIL, NIL], value: None }], values: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn bit(addr: u32, depth: u8) -> usize {
        ((addr >> (31 - u32::from(depth))) & 1) as usize
    }

    /// Inserts or replaces; returns the previous value.
    pub fn insert(&mut self, prefix: Ipv4Prefix, value: T) -> Option<T> {
        let mut node = 0usize;
        for depth in 0..prefix.len() {
            let b = Self::bit(prefix.bits(), depth);
            let next = self.nodes[node].children[b];
            node = if next == NIL {
                self.nodes.push(Node { children: [NIL, NIL], value: None });
                let id = (self.nodes.len() - 1) as u32;
                self.nodes[node].children[b] = id;
                id as usize
            } else {
                next as usize
            };
        }
        match self.nodes[node].value {
            Some(slot) => Some(std::mem::replace(&mut self.values[slot as usize].1, value)),
            None => {
                self.values.push((prefix, value));
                self.nodes[node].value = Some((self.values.len() - 1) as u32);
                None
            }
        }
    }

    pub fn get_exact(&self, prefix: &Ipv4Prefix) -> Option<&T> {
        let mut node = 0usize;
        for depth in 0..prefix.len() {
            let next = self.nodes[node].children[Self::bit(prefix.bits(), depth)];
            if next == NIL {
                return None;
            }
            node = next as usize;
        }
        self.nodes[node].value.map(|s| &self.values[s as usize].1)
    }

    /// Longest-prefix match.
    pub fn lookup(&self, ip: Ipv4Addr) -> Option<(&Ipv4Prefix, &T)> {
        let addr = u32::from(ip);
        let mut node = 0usize;
        let mut best = self.nodes[0].value;
        for depth in 0..32u8 {
            let next = self.nodes[node].children[Self::bit(addr, depth)];
            if next == NIL {
                break;
            }
            node = next as usize;
            if let Some(v) = self.nodes[node].value {
                best = Some(v);
            }
        }
        best.map(|s| {
            let (p, v) = &self.values[s as usize];
            (p, v)
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ipv4Prefix, &T)> {
        self.values.iter().map(|(p, v)| (p, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Ipv4Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(p("10.1.2.3/16").to_string(), "10.1.0.0/16");
        assert_eq!(p("0.0.0.0/0"), Ipv4Prefix::DEFAULT);
        assert!("10.0.0.0/33".parse::<Ipv4Prefix>().is_err());
        assert!("10.0.0.0".parse::<Ipv4Prefix>().is_err());
    }

    #[test]
    fn covers() {
        assert!(p("10.0.0.0/8").covers(&p("10.1.0.0/16")));
        assert!(!p("10.1.0.0/16").covers(&p("10.0.0.0/8")));
        assert!(p("0.0.0.0/0").covers(&p("1.2.3.4/32")));
        assert!(!p("10.0.0.0/16").covers(&p("11.0.0.0/16")));
        assert_eq!(p("10.0.0.0/8").last(), u32::from(Ipv4Addr::new(10, 255, 255, 255)));
    }

    #[test]
    fn trie_longest_match() {
        let mut t = PrefixTrie::new();
        t.insert(p("10.0.0.0/8"), 1);
        t.insert(p("10.1.0.0/16"), 2);
        assert_eq!(t.lookup(Ipv4Addr::new(10, 1, 2, 3)).map(|x| *x.1), Some(2));
        assert_eq!(t.lookup(Ipv4Addr::new(10, 2, 0, 1)).map(|x| *x.1), Some(1));
        assert_eq!(t.lookup(Ipv4Addr::new(11, 0, 0, 1)), None);
        t.insert(Ipv4Prefix::DEFAULT, 0);
        assert_eq!(t.lookup(Ipv4Addr::new(11, 0, 0, 1)).map(|x| *x.1), Some(0));
        assert_eq!(t.insert(p("10.1.0.0/16"), 5), Some(2));
        assert_eq!(t.get_exact(&p("10.1.0.0/16")), Some(&5));
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn host_routes() {
        let mut t = PrefixTrie::new();
        t.insert(p("1.2.3.4/32"), 'a');
        assert_eq!(t.lookup(Ipv4Addr::new(1, 2, 3, 4)).map(|x| *x.1), Some('a'));
        assert_eq!(t.lookup(Ipv4Addr::new(1, 2, 3, 5)), None);
    }
}
